"""Three connected water tanks fed by a controlled pump, an uncontrolled
inflow pipe, and drained by a controlled outlet pump.

The controller nudges the two pump rates q1, q3 by a fixed increment whenever
the corresponding level leaves the dead band around the goal level.  The
environment resolves the inter-tank flows with Torricelli's law and draws the
uncontrolled inflow q2 stochastically:

* scenario 1: q2 is redrawn each step from a normal with mean ``q_med`` and
  variance ``delta_q`` (clamped into [0, q_max]);
* scenario 2: q2 performs a clamped Gaussian random walk with unit variance.

Variable order: q1, q2, q3, l1, l2, l3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dataspace import (
    ConvexPenalty,
    DataSpace,
    GoalPenalty,
    MaxPenalty,
    PenaltyFunction,
    VarSpec,
)
from ..engine import Configuration
from ..environment import EnvironmentEvolution, register_environment
from ..errors import DataValidationError, PreconditionError, StructuralError
from ..process import Call, Const, If, Op, Prefix, Process, SyncPar, Var, tick
from ..rng import UniformTape

__all__ = [
    "ThreeTanksParams",
    "ThreeTanksEnv",
    "tanks_space",
    "tanks_program",
    "tanks_configuration",
    "tanks_penalties",
    "tanks_manifest",
]


@dataclass(frozen=True)
class ThreeTanksParams:
    l_min: float = 0.0
    l_max: float = 20.0
    l_goal: float = 10.0
    delta_l: float = 0.5
    q_max: float = 6.0
    q_step: float = 1.2
    q_med: float = 3.0
    delta_q: float = 0.5
    dt: float = 0.1
    scenario: int = 1
    # tank geometry: pipe cross-section, loss coefficients, gravity
    a: float = 0.5
    a12: float = 0.75
    a23: float = 0.75
    g: float = 9.81

    def __post_init__(self):
        if not (self.l_min < self.l_goal < self.l_max):
            raise DataValidationError("need l_min < l_goal < l_max")
        if not (0.0 <= self.q_step < self.q_max):
            raise DataValidationError("need 0 <= q_step < q_max")
        if self.delta_l <= 0 or self.delta_q <= 0:
            raise DataValidationError("delta_l and delta_q must be positive")
        if self.scenario not in (1, 2):
            raise DataValidationError(f"unknown scenario {self.scenario}")
        if self.dt <= 0:
            raise DataValidationError("dt must be positive")

    @property
    def sigma_q(self) -> float:
        """Scenario-1 standard deviation (delta_q is a variance)."""
        return float(np.sqrt(self.delta_q))

    @property
    def pipe12(self) -> float:
        return self.a12 * self.a * math.sqrt(2.0 * self.g)

    @property
    def pipe23(self) -> float:
        return self.a23 * self.a * math.sqrt(2.0 * self.g)


_VARS = ("q1", "q2", "q3", "l1", "l2", "l3")


def tanks_space(params: ThreeTanksParams) -> DataSpace:
    q = lambda n: VarSpec(n, 0.0, params.q_max)
    l = lambda n: VarSpec(n, params.l_min, params.l_max)
    return DataSpace([q("q1"), q("q2"), q("q3"), l("l1"), l("l2"), l("l3")])


@dataclass(frozen=True)
class ThreeTanksEnv(EnvironmentEvolution):
    """One environment step of the tanks: inflow draw, Torricelli flows,
    level integration.  q1 and q3 are left to the program."""

    params: ThreeTanksParams
    id: str = "three-tanks"

    def flows(self, l1: float, l2: float, l3: float) -> tuple[float, float]:
        """Signed inter-tank flow rates (q12, q23) by Torricelli's law."""
        p = self.params
        d12 = l1 - l2
        q12 = p.pipe12 * math.sqrt(d12) if d12 >= 0 else -p.pipe12 * math.sqrt(-d12)
        d23 = l2 - l3
        q23 = p.pipe23 * math.sqrt(d23) if d23 >= 0 else -p.pipe23 * math.sqrt(-d23)
        return q12, q23

    def deterministic_step(self, values, inflow: float) -> list[float]:
        """Successor values given the inflow sample (the only random input)."""
        p = self.params
        q1, _, q3, l1, l2, l3 = values
        q12, q23 = self.flows(l1, l2, l3)
        dt = p.dt
        return [
            q1,
            inflow,
            q3,
            l1 + dt * (q1 - q12),
            l2 + dt * (q12 - q23),
            l3 + dt * (inflow + q23 - q3),
        ]

    def sample_values(self, values, rng):
        p = self.params
        z = rng.normal_std()
        if p.scenario == 1:
            x = p.q_med + p.sigma_q * z
        else:
            x = values[1] + z
        x = min(max(x, 0.0), p.q_max)
        return self.deterministic_step(values, x)


def _goal_band(params: ThreeTanksParams) -> tuple[float, float]:
    return params.l_goal - params.delta_l, params.l_goal + params.delta_l


def tanks_program(params: ThreeTanksParams) -> tuple[Process, dict]:
    """The pump controller: inlet and outlet loops in synchronous parallel."""
    lo, hi = _goal_band(params)
    qmax = Const(params.q_max)
    qstep = Const(params.q_step)

    def pump(level: str, rate: str, name: str, high_branch: str) -> Process:
        dec = Prefix((Op("max", (Const(0.0), Op("-", (Var(rate), qstep)))),), (rate,), Call(name))
        inc = Prefix((Op("min", (qmax, Op("+", (Var(rate), qstep)))),), (rate,), Call(name))
        above, below = (dec, inc) if high_branch == "dec" else (inc, dec)
        return If(
            Op(">", (Var(level), Const(hi))),
            above,
            If(Op("<", (Var(level), Const(lo))), below, tick(Call(name))),
        )

    defs = {
        "Tanks_in": pump("l1", "q1", "Tanks_in", "dec"),
        "Tanks_out": pump("l3", "q3", "Tanks_out", "inc"),
    }
    defs["Tanks"] = SyncPar(Call("Tanks_in"), Call("Tanks_out"))
    return Call("Tanks"), defs


def tanks_penalties(params: ThreeTanksParams) -> dict[str, PenaltyFunction]:
    """The goal-tracking penalties used throughout the tank experiments."""
    mk = lambda v: GoalPenalty(v, params.l_goal, params.l_min, params.l_max, id=v)
    l1, l2, l3 = mk("l1"), mk("l2"), mk("l3")
    return {
        "l1": l1,
        "l2": l2,
        "l3": l3,
        "max3": MaxPenalty((l1, l2, l3), id="max3"),
        "mean_l1_l2": ConvexPenalty(((0.5, l1), (0.5, l2)), id="mean_l1_l2"),
    }


def tanks_configuration(
    params: ThreeTanksParams | None = None,
    init: dict | None = None,
    **overrides,
) -> Configuration:
    """Ready-to-run configuration; ``init`` overrides initial variable values.

    The default initial state fills nothing: levels at ``l_min`` and all
    flow rates at zero.
    """
    if params is None:
        params = ThreeTanksParams(**overrides)
    elif overrides:
        raise PreconditionError("pass either a params object or keyword overrides")
    space = tanks_space(params)
    base = {"q1": 0.0, "q2": 0.0, "q3": 0.0,
            "l1": params.l_min, "l2": params.l_min, "l3": params.l_min}
    if init:
        unknown = [n for n in init if n not in base]
        if unknown:
            raise StructuralError(f"unknown initial-state variables {unknown}")
        base.update(init)
    data = space.state(base)
    process, defs = tanks_program(params)
    lockstep = TanksLockstep(params)
    return Configuration(process, data, ThreeTanksEnv(params), defs, lockstep).validated()


def tanks_manifest(params: ThreeTanksParams) -> dict:
    return {
        "model": "three-tanks",
        "variables": [
            {"name": n, "lower": v.lower, "upper": v.upper, "kind": "continuous"}
            for n, v in zip(_VARS, tanks_space(params).vars)
        ],
        "encodings": {},
        "initial_state": {"q1": 0.0, "q2": 0.0, "q3": 0.0,
                          "l1": params.l_min, "l2": params.l_min, "l3": params.l_min},
        "penalties": sorted(tanks_penalties(params)),
        "params": {
            "scenario": params.scenario, "l_min": params.l_min, "l_max": params.l_max,
            "l_goal": params.l_goal, "delta_l": params.delta_l, "q_max": params.q_max,
            "q_step": params.q_step, "q_med": params.q_med, "delta_q": params.delta_q,
            "dt": params.dt,
        },
    }


# ---------------------------------------------------------------------------
# Vectorized lockstep simulator (bit-identical to the interpreter)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TanksLockstep:
    """Advances all runs of the tank model in numpy arrays.

    Stream usage per run and step: two uniforms (one Box-Muller normal) --
    exactly what the reference interpreter consumes, so both paths visit
    identical states.
    """

    params: ThreeTanksParams

    def start(self, c: Configuration, n_runs: int, base_key, run_offset: int):
        expected, defs = tanks_program(self.params)
        stepped = SyncPar(Call("Tanks_in"), Call("Tanks_out"))
        if (c.process not in (expected, stepped)) or dict(c.defs) != defs:
            raise PreconditionError(
                "lockstep simulator is bound to the built-in tank controller"
            )
        return _TanksRun(self.params, np.asarray(c.data.values, dtype=np.float64),
                         n_runs, base_key, run_offset)


class _TanksRun:
    def __init__(self, params: ThreeTanksParams, init: np.ndarray, n: int,
                 base_key, run_offset: int):
        self.p = params
        self.tape = UniformTape(base_key, n, run_offset, draws_per_step=2)
        self.vals = np.tile(init, (n, 1))

    def current(self) -> np.ndarray:
        return self.vals

    def step(self) -> np.ndarray:
        p = self.p
        v = self.vals
        q1, q2, q3 = v[:, 0], v[:, 1], v[:, 2]
        l1, l2, l3 = v[:, 3], v[:, 4], v[:, 5]
        lo, hi = _goal_band(p)

        # controller effects (one synchronous step of both pump loops)
        q1 = np.where(
            l1 > hi, np.maximum(0.0, q1 - p.q_step),
            np.where(l1 < lo, np.minimum(p.q_max, q1 + p.q_step), q1),
        )
        q3 = np.where(
            l3 > hi, np.minimum(p.q_max, q3 + p.q_step),
            np.where(l3 < lo, np.maximum(0.0, q3 - p.q_step), q3),
        )

        # environment: inflow draw, Torricelli flows, level integration
        u = self.tape.next_step()
        z = np.sqrt(-2.0 * np.log(u[:, 0])) * np.cos(2.0 * math.pi * u[:, 1])
        if p.scenario == 1:
            x = p.q_med + p.sigma_q * z
        else:
            x = q2 + z
        x = np.minimum(np.maximum(x, 0.0), p.q_max)

        d12 = l1 - l2
        q12 = np.where(d12 >= 0, 1.0, -1.0) * (p.pipe12 * np.sqrt(np.abs(d12)))
        d23 = l2 - l3
        q23 = np.where(d23 >= 0, 1.0, -1.0) * (p.pipe23 * np.sqrt(np.abs(d23)))

        dt = p.dt
        l1n = l1 + dt * (q1 - q12)
        l2n = l2 + dt * (q12 - q23)
        l3n = l3 + dt * (x + q23 - q3)
        clip = lambda a: np.minimum(np.maximum(a, p.l_min), p.l_max)

        self.vals = np.column_stack((q1, x, q3, clip(l1n), clip(l2n), clip(l3n)))
        return self.vals


register_environment(
    "three-tanks",
    lambda **kw: ThreeTanksEnv(ThreeTanksParams(**kw)),
)
