"""Simulation engine: configurations, trajectories, and empirical estimation.

One simulation step of a configuration <P, d, E> samples a support triple of
``pstep(P, d)`` with u in (0, 1] and the cumulative rule
``sum_{j<i} p_j < u <= sum_{j<=i} p_j``, applies the selected write effect to
d, then samples the environment on the result.  ``estimate`` runs N
independent trajectories on child random streams and collects, per time step,
the N sampled data states (the empirical evolution sequence).

Two execution paths produce bit-identical results:

* the reference interpreter (``sim_step``/``simulate``), optionally fanned
  out over a process pool, and
* an optional per-model vectorized lockstep simulator attached to the
  configuration, which advances all runs in numpy arrays.

Per-run randomness depends only on (master seed, run index), so results do
not depend on worker count or execution path.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .dataspace import DataSpace, DataState, PenaltyFunction
from .environment import EnvironmentEvolution, FiniteKernel
from .errors import PreconditionError, SimulationError, StructuralError
from .process import Process, pstep, validate
from .rng import RandomStream

__all__ = [
    "Configuration",
    "Trajectory",
    "EmpiricalEvolutionSequence",
    "sim_step",
    "simulate",
    "estimate",
    "estimate_penalties",
    "enumerate_multi_step",
    "enumerate_data_marginal",
]

# Issue kinds tolerated when a configuration is built with permissive
# validation (attack processes intentionally override controller writes).
_OVERLAP = ("write-overlap",)


@dataclass(frozen=True)
class Configuration:
    """A process, a data state, and an environment evolution.

    ``defs`` is the recursion table for process variables.  ``lockstep`` is
    an optional vectorized simulator provided by built-in models; it must be
    observationally identical to the reference interpreter.
    """

    process: Process
    data: DataState
    env: EnvironmentEvolution
    defs: dict = field(default_factory=dict)
    lockstep: object | None = field(default=None, compare=False)

    def validated(self, tolerate_write_overlap: bool = False) -> "Configuration":
        report = validate(self.process, self.defs, self.data.space)
        report.raise_if_invalid(tolerate=_OVERLAP if tolerate_write_overlap else ())
        return self

    def with_data(self, d: DataState) -> "Configuration":
        if d.space != self.data.space:
            raise StructuralError("replacement data state uses a different data space")
        return replace(self, data=d)

    @property
    def space(self) -> DataSpace:
        return self.data.space


@dataclass(frozen=True)
class Trajectory:
    """k+1 configurations of one sampled run; position 0 is the start."""

    configurations: tuple

    def __len__(self) -> int:
        return len(self.configurations)

    def __getitem__(self, i: int):
        return self.configurations[i]

    def __iter__(self):
        return iter(self.configurations)

    def data_states(self) -> list[DataState]:
        return [c.data for c in self.configurations]


def sim_step(c: Configuration, rng: RandomStream) -> Configuration:
    """One sampled step of a configuration.

    The selection draw is skipped when the step distribution is a Dirac: the
    chosen triple does not depend on u, and skipping keeps the stream usage
    of the interpreter and the lockstep simulators identical.
    """
    dist = pstep(c.process, c.data, c.defs)
    triples = dist.triples
    if len(triples) == 1:
        _, effect, cont = triples[0]
    else:
        u = rng.uniform01()
        acc = 0.0
        chosen = triples[-1]
        for triple in triples:
            acc += triple[0]
            if u <= acc:
                chosen = triple
                break
        _, effect, cont = chosen
    after_effect = c.data.update(effect)
    next_data = c.env.sample(after_effect, rng)
    return Configuration(cont, next_data, c.env, c.defs, c.lockstep)


def simulate(c: Configuration, k: int, rng: RandomStream) -> Trajectory:
    """Sample a k-step run; the trajectory has k+1 entries starting at ``c``."""
    if k < 0:
        raise PreconditionError(f"step count must be >= 0, got {k}")
    out = [c]
    cur = c
    for i in range(k):
        try:
            cur = sim_step(cur, rng)
        except Exception as exc:
            raise SimulationError(f"step {i}: {exc}", step=i) from exc
        out.append(cur)
    return Trajectory(tuple(out))


@dataclass
class EmpiricalEvolutionSequence:
    """N sampled data states per time step 0..k, as an (N, k+1, nvars) array."""

    space: DataSpace
    states: np.ndarray
    seed_key: tuple
    processes: list | None = None
    clamp_events: int = 0

    @property
    def runs(self) -> int:
        return self.states.shape[0]

    @property
    def horizon(self) -> int:
        return self.states.shape[1] - 1

    def values_at(self, step: int) -> np.ndarray:
        """(N, nvars) array of the sampled values at one time step."""
        return self.states[:, step, :]

    def states_at(self, step: int) -> list[DataState]:
        return [
            DataState(self.space, tuple(row)) for row in self.states[:, step, :]
        ]

    def penalties_at(self, rho: PenaltyFunction, step: int) -> np.ndarray:
        return rho.eval_batch(step, self.states[:, step, :], self.space)

    def mean_std(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-step mean and (N-1)-normalised std per variable, (k+1, nvars)."""
        mean = self.states.mean(axis=0)
        std = self.states.std(axis=0, ddof=1) if self.runs > 1 else np.zeros_like(mean)
        return mean, std

    def to_csv(self, path, meta: dict | None = None) -> None:
        """One row per (run, step): run, step, then variables in space order."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            _write_meta(fh, meta)
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["run", "step"] + list(self.space.names))
            for run in range(self.runs):
                for step in range(self.horizon + 1):
                    w.writerow(
                        [run, step] + [_fmt(v) for v in self.states[run, step, :]]
                    )

    def summary_to_csv(self, path, meta: dict | None = None) -> None:
        """One row per (step, variable): mean and std over runs."""
        mean, std = self.mean_std()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            _write_meta(fh, meta)
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "variable", "mean", "std"])
            for step in range(self.horizon + 1):
                for j, name in enumerate(self.space.names):
                    w.writerow([step, name, _fmt(mean[step, j]), _fmt(std[step, j])])


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_meta(fh, meta: dict | None) -> None:
    if meta:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Estimation
# ---------------------------------------------------------------------------


def _run_trajectory_values(c: Configuration, k: int, rng: RandomStream, retain: bool):
    """Raw (k+1, nvars) values of one run, plus optional process terms."""
    space = c.space
    values = np.empty((k + 1, len(space)), dtype=np.float64)
    values[0, :] = c.data.values
    procs = [c.process] if retain else None
    clamps0 = space.clamp_events
    cur = c
    for i in range(k):
        try:
            cur = sim_step(cur, rng)
        except Exception as exc:
            raise SimulationError(f"step {i}: {exc}", step=i) from exc
        values[i + 1, :] = cur.data.values
        if retain:
            procs.append(cur.process)
    return values, procs, space.clamp_events - clamps0


def _run_block(args):
    c, k, base_key, run_indices, retain = args
    base = RandomStream(base_key)
    out = []
    for run in run_indices:
        rng = base.child(run)
        try:
            out.append(_run_trajectory_values(c, k, rng, retain))
        except Exception as exc:
            step = getattr(exc, "step", None)
            raise SimulationError(f"run {run}: {exc}", run=run, step=step) from exc
    return out


def _resolve_stream(seed) -> RandomStream:
    if isinstance(seed, RandomStream):
        return seed
    return RandomStream.from_seed(int(seed))


def estimate(
    c: Configuration,
    k: int,
    N: int,
    seed,
    threads: int = 1,
    retain_processes: bool = False,
    use_fast_path: bool = True,
) -> EmpiricalEvolutionSequence:
    """N independent k-step runs; run i uses the child stream (seed, i).

    A failing run aborts the whole estimate (silently dropping runs would
    bias the empirical measure).  Results are bit-identical for any
    ``threads`` value and for either execution path.  The clamp-event tally
    is informational and only collected on the interpreter path.
    """
    if N < 1:
        raise PreconditionError(f"sample count must be >= 1, got {N}")
    if k < 0:
        raise PreconditionError(f"step count must be >= 0, got {k}")
    base = _resolve_stream(seed)
    space = c.space

    if use_fast_path and c.lockstep is not None and not retain_processes:
        states = _lockstep_states(c, k, N, base.key)
        if states is not None:
            return EmpiricalEvolutionSequence(space, states, base.key)

    states = np.empty((N, k + 1, len(space)), dtype=np.float64)
    processes: list | None = [] if retain_processes else None
    clamps = 0

    if threads <= 1 or N == 1:
        results = _run_block((c, k, base.key, range(N), retain_processes))
        for run, (vals, procs, nclamp) in enumerate(results):
            states[run] = vals
            clamps += nclamp
            if retain_processes:
                processes.append(procs)
    else:
        blocks = _partition(N, threads)
        with ProcessPoolExecutor(max_workers=threads) as pool:
            tasks = [
                (c, k, base.key, block, retain_processes) for block in blocks
            ]
            # pool.map preserves task order, so gathering is in run order
            for block, results in zip(blocks, pool.map(_run_block, tasks)):
                for run, (vals, procs, nclamp) in zip(block, results):
                    states[run] = vals
                    clamps += nclamp
                    if retain_processes:
                        processes.append(procs)

    return EmpiricalEvolutionSequence(space, states, base.key, processes, clamps)


def _partition(N: int, parts: int) -> list[range]:
    parts = max(1, min(parts, N))
    size = math.ceil(N / parts)
    return [range(lo, min(lo + size, N)) for lo in range(0, N, size)]


def _lockstep_states(c: Configuration, k: int, N: int, base_key: tuple):
    """Vectorized estimate, or None when the simulator does not bind to this
    configuration (e.g. a manually advanced process term)."""
    nvars = len(c.space)
    need = N * (k + 1) * nvars * 8
    if need > 2e9:
        raise PreconditionError(
            f"full-state estimate would need {need/1e9:.1f} GB; "
            "use estimate_penalties for long horizons"
        )
    try:
        sim = c.lockstep.start(c, N, base_key, 0)
    except PreconditionError:
        return None
    states = np.empty((N, k + 1, nvars), dtype=np.float64)
    states[:, 0, :] = sim.current()
    for i in range(k):
        states[:, i + 1, :] = sim.step()
    return states


def estimate_penalties(
    c: Configuration,
    k: int,
    N: int,
    seed,
    penalties: Sequence[PenaltyFunction],
    obs_times: Sequence[int],
    threads: int = 1,
    use_fast_path: bool = True,
    run_offset: int = 0,
) -> np.ndarray:
    """Streaming estimate: per-run penalty values at the observation times.

    Returns an array of shape (len(penalties), N, len(obs_times)).  States
    are never materialised across the horizon, so this scales to long runs.
    ``run_offset`` shifts the child-stream indices (run i uses seed child
    run_offset + i), letting callers draw disjoint sample sets from one seed.
    """
    if N < 1:
        raise PreconditionError(f"sample count must be >= 1, got {N}")
    obs = list(obs_times)
    if any(t < 0 or t > k for t in obs):
        raise PreconditionError("observation times must lie in [0, k]")
    base = _resolve_stream(seed)
    space = c.space
    out = np.empty((len(penalties), N, len(obs)), dtype=np.float64)

    if use_fast_path and c.lockstep is not None:
        try:
            obs_set = {t: j for j, t in enumerate(obs)}
            # block the runs so transient per-block state stays small
            block_size = min(N, max(64, int(2e8 / ((k + 1) * 16))))
            for lo in range(0, N, block_size):
                n = min(block_size, N - lo)
                sim = c.lockstep.start(c, n, base.key, run_offset + lo)
                vals = sim.current()
                if 0 in obs_set:
                    _eval_penalties(penalties, 0, vals, space, out, lo, obs_set[0])
                for i in range(1, k + 1):
                    vals = sim.step()
                    if i in obs_set:
                        _eval_penalties(penalties, i, vals, space, out, lo, obs_set[i])
            return out
        except PreconditionError:
            pass  # simulator does not bind to this configuration

    tasks = [(c, k, base.key, block, penalties, obs, run_offset)
             for block in _partition(N, threads if threads > 1 else 1)]
    if threads <= 1 or N == 1:
        results = [_penalty_block(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_penalty_block, tasks))
    for (block, res) in zip([t[3] for t in tasks], results):
        out[:, block.start:block.stop, :] = res
    return out


def _eval_penalties(penalties, step, vals, space, out, lo, col):
    for pi, rho in enumerate(penalties):
        out[pi, lo:lo + vals.shape[0], col] = rho.eval_batch(step, vals, space)


def _penalty_block(args):
    c, k, base_key, run_indices, penalties, obs, run_offset = args
    base = RandomStream(base_key)
    space = c.space
    obs_index = {t: j for j, t in enumerate(obs)}
    res = np.empty((len(penalties), len(run_indices), len(obs)), dtype=np.float64)
    for row, run in enumerate(run_indices):
        rng = base.child(run_offset + run)
        cur = c
        if 0 in obs_index:
            for pi, rho in enumerate(penalties):
                res[pi, row, obs_index[0]] = rho.eval_values(0, cur.data.values, space)
        try:
            for i in range(1, k + 1):
                cur = sim_step(cur, rng)
                if i in obs_index:
                    for pi, rho in enumerate(penalties):
                        res[pi, row, obs_index[i]] = rho.eval_values(i, cur.data.values, space)
        except Exception as exc:
            raise SimulationError(f"run {run_offset + run}: {exc}", run=run_offset + run) from exc
    return res


# ---------------------------------------------------------------------------
# Exact enumeration oracle for finite toy kernels (testing aid)
# ---------------------------------------------------------------------------


def enumerate_multi_step(c: Configuration, steps: int) -> list[dict]:
    """Exact per-step distributions over (process, value tuple) pairs.

    Only valid for configurations whose environment is a FiniteKernel; the
    expansion follows the one-step kernel exactly: process step probabilities
    times environment transition probabilities, with domain clamping applied
    the same way the sampler applies it.
    """
    if not isinstance(c.env, FiniteKernel):
        raise PreconditionError("enumeration needs a finite-support environment kernel")
    space = c.space
    current: dict = {(c.process, c.data.values): 1.0}
    out = [dict(current)]
    for _ in range(steps):
        nxt: dict = {}
        for (proc, values), q in current.items():
            d = DataState(space, values)
            for p, effect, cont in pstep(proc, d, c.defs):
                after = d.update(effect)
                for pe, succ in c.env.support(after.values):
                    clamped, _ = space.clamp_values(succ)
                    key = (cont, tuple(clamped))
                    nxt[key] = nxt.get(key, 0.0) + q * p * pe
        current = nxt
        out.append(dict(current))
    return out


def enumerate_data_marginal(c: Configuration, steps: int) -> list[dict]:
    """Exact per-step distributions over value tuples (processes marginalised)."""
    out = []
    for dist in enumerate_multi_step(c, steps):
        marg: dict = {}
        for (_, values), q in dist.items():
            marg[values] = marg.get(values, 0.0) + q
        out.append(marg)
    return out
