"""Sampling-based estimation of robustness, adaptability, and reliability.

All three properties ask the same question: if the initial data state is
perturbed within a bound eta1 (measured with a perturbation penalty rho),
does the system's observable behaviour stay within a tolerance eta2
(measured with a target penalty rho')?  The estimator samples M admissible
perturbations, runs each perturbed configuration against the base one, and
reports, for every threshold tau in the observation times, the maximal
suffix distance

    xi_tau = max_i  m^lambda_{rho', {t in OT | t >= tau}}(base, variation_i).

Each xi_tau is a lower-bound certificate for eta2 at M samples, never a
proof.  Robustness filters candidates by the evolution metric over OT
intersected with an interval I; adaptability filters by the data-state
hemimetric at step 0; reliability is adaptability read at the first
observation time.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

from .dataspace import DataState, PenaltyFunction
from .engine import Configuration, estimate_penalties
from .errors import PreconditionError, ShortfallError
from .metric import (
    ConstantDiscount,
    DiscountFunction,
    ObservationTimes,
    compute_w_sorted,
    suffix_maxima,
)
from .rng import RandomStream

__all__ = [
    "PerturbationSampler",
    "UniformResampler",
    "IdentitySampler",
    "RobustnessSpec",
    "RobustnessReport",
    "sample_perturbations",
    "estimate_robustness",
    "estimate_adaptability",
    "estimate_reliability",
]


class PerturbationSampler:
    """Draws candidate variations of a base data state; candidates are
    clamped into the data space by construction."""

    id = "sampler"

    def sample(self, base: DataState, rng: RandomStream) -> DataState:
        raise NotImplementedError


@dataclass(frozen=True)
class UniformResampler(PerturbationSampler):
    """Resample a subset of variables uniformly within their domains.

    ``variables`` is None for "all variables"; finite-set variables draw
    uniformly among their admissible values.  This is the default variation
    mechanism; the acceptance rate in reports makes its interplay with the
    penalty filter auditable.
    """

    variables: tuple | None = None
    id: str = ""

    def __post_init__(self):
        if not self.id:
            subset = ",".join(self.variables) if self.variables is not None else "*"
            object.__setattr__(self, "id", f"uniform[{subset}]")

    def sample(self, base, rng):
        names = self.variables if self.variables is not None else base.space.names
        writes = []
        for name in names:
            spec = base.space.vars[base.space.index(name)]
            if spec.is_finite:
                writes.append((name, spec.values[rng.uniform_int(0, len(spec.values) - 1)]))
            else:
                writes.append((name, rng.uniform(spec.lower, spec.upper)))
        return base.update(writes)


@dataclass(frozen=True)
class IdentitySampler(PerturbationSampler):
    """Always returns the base state (noise-floor measurements)."""

    id: str = "identity"

    def sample(self, base, rng):
        return base


@dataclass(frozen=True)
class RobustnessSpec:
    """Parameters of one robustness question.

    ``rho`` filters perturbations, ``rho_target`` measures the long-run
    divergence, ``interval`` is the (inclusive) filter window for the
    evolution-metric filter, ``tau_tilde`` the observation threshold for the
    verdict, ``eta1`` the perturbation bound, ``eta2`` the tolerance, and
    ``M`` the number of accepted variations.
    """

    rho: PenaltyFunction
    rho_target: PenaltyFunction
    interval: tuple  # (lo, hi) inclusive
    tau_tilde: int
    eta1: float
    eta2: float
    M: int
    filter_mode: str = "evolution"  # "evolution" | "initial"

    def __post_init__(self):
        if not (0.0 <= self.eta1 < 1.0) or not (0.0 <= self.eta2 < 1.0):
            raise PreconditionError("eta1 and eta2 must lie in [0, 1)")
        if self.M < 1:
            raise PreconditionError("M must be >= 1")
        if self.filter_mode not in ("evolution", "initial"):
            raise PreconditionError(f"unknown filter mode {self.filter_mode!r}")

    def check_against(self, obs: ObservationTimes) -> None:
        if self.tau_tilde not in obs.steps:
            raise PreconditionError(
                f"tau_tilde {self.tau_tilde} is not an observation time"
            )
        lo, hi = self.interval
        if self.filter_mode == "evolution":
            if lo > hi or lo < 0 or hi > obs.horizon:
                raise PreconditionError(
                    f"filter interval {self.interval} outside [0, {obs.horizon}]"
                )
            if not [t for t in obs if lo <= t <= hi]:
                raise PreconditionError(
                    f"filter interval {self.interval} contains no observation time"
                )


@dataclass
class RobustnessReport:
    """Acceptance statistics, the xi curve, and per-variation suffix curves."""

    spec_echo: dict
    obs_times: tuple
    accepted: int
    rejected: int
    attempts: int
    xi: tuple  # per tau in obs_times: max suffix distance over variations
    variation_curves: list = field(default_factory=list)  # per accepted variation
    accepted_attempts: list = field(default_factory=list)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts if self.attempts else 0.0

    def xi_at(self, tau_tilde: int) -> float:
        try:
            return self.xi[self.obs_times.index(tau_tilde)]
        except ValueError:
            raise PreconditionError(f"{tau_tilde} is not an observation time") from None

    def verdict(self, tau_tilde: int, eta2: float) -> dict:
        """Sampling-based evidence, not a proof: xi is a lower bound for eta2."""
        xi = self.xi_at(tau_tilde)
        return {
            "tau_tilde": tau_tilde,
            "eta2": eta2,
            "xi": xi,
            "satisfied": bool(xi <= eta2),
            "label": f"evidence at {self.accepted} samples",
        }

    def to_json_dict(self) -> dict:
        return {
            "spec": self.spec_echo,
            "obs_times": list(self.obs_times),
            "accepted": self.accepted,
            "rejected": self.rejected,
            "attempts": self.attempts,
            "acceptance_rate": self.acceptance_rate,
            "xi": list(self.xi),
            "variation_curves": [list(c) for c in self.variation_curves],
            "accepted_attempts": list(self.accepted_attempts),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    def to_csv(self, path, meta: dict | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            header = dict(self.spec_echo)
            header.update(meta or {})
            fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau_tilde", "xi"])
            for t, x in zip(self.obs_times, self.xi):
                w.writerow([t, repr(float(x))])


def _initial_distance(rho: PenaltyFunction, base: DataState, cand: DataState) -> float:
    return max(rho(0, cand) - rho(0, base), 0.0)


def sample_perturbations(
    base: Configuration,
    sampler: PerturbationSampler,
    eta1: float,
    M: int,
    budget: int,
    seed,
    rho: PenaltyFunction,
    filter_mode: str = "initial",
    obs: ObservationTimes | None = None,
    interval: tuple | None = None,
    discount: DiscountFunction | None = None,
    N: int = 100,
    ell: int = 1,
    threads: int = 1,
) -> tuple[list[DataState], dict]:
    """Rejection-sample M admissible variations of the base data state.

    The cheap initial-state filter compares penalties at step 0; the
    evolution filter simulates each candidate and compares evolution
    sequences over the observation times inside ``interval``.  Raises
    ShortfallError if the budget runs out first.  Candidate draws are seeded
    by attempt index, so enlarging eta1 only ever grows the accepted set.
    """
    if M < 1 or budget < M:
        raise PreconditionError("need M >= 1 and budget >= M")
    stream = _resolve(seed)
    sample_stream = stream.child(1)
    cand_stream = stream.child(2)
    discount = discount or ConstantDiscount()

    base_pen = None
    filter_cols = None
    if filter_mode == "evolution":
        if obs is None or interval is None:
            raise PreconditionError("evolution filtering needs observation times and an interval")
        lo, hi = interval
        filter_cols = [j for j, t in enumerate(obs) if lo <= t <= hi]
        base_pen = estimate_penalties(
            base, obs.horizon, N, stream.child(0), [rho], list(obs), threads
        )[0]

    accepted: list[DataState] = []
    stats = {"attempts": 0, "rejected": 0}
    for attempt in range(budget):
        stats["attempts"] = attempt + 1
        cand = sampler.sample(base.data, sample_stream.child(attempt))
        if filter_mode == "initial":
            ok = _initial_distance(rho, base.data, cand) <= eta1
        else:
            cand_pen = estimate_penalties(
                base.with_data(cand), obs.horizon, N * ell,
                cand_stream.child(attempt), [rho], list(obs), threads,
            )[0]
            value = max(
                discount(obs.steps[j]) * compute_w_sorted(base_pen[:, j], cand_pen[:, j])
                for j in filter_cols
            )
            ok = value <= eta1
        if ok:
            accepted.append(cand)
            if len(accepted) == M:
                break
        else:
            stats["rejected"] += 1
    if len(accepted) < M:
        raise ShortfallError(
            f"accepted only {len(accepted)} of {M} variations in {budget} attempts",
            accepted=len(accepted), requested=M, attempts=stats["attempts"],
        )
    return accepted, stats


def _resolve(seed) -> RandomStream:
    if isinstance(seed, RandomStream):
        return seed
    return RandomStream.from_seed(int(seed))


def estimate_robustness(
    spec: RobustnessSpec,
    base: Configuration,
    sampler: PerturbationSampler,
    obs: ObservationTimes,
    N: int,
    ell: int,
    seed,
    discount: DiscountFunction | None = None,
    budget: int | None = None,
    threads: int = 1,
    collect_curves: bool = True,
    progress=None,
) -> RobustnessReport:
    """Estimate the xi curve for a robustness specification.

    One base estimate (N runs) is shared by all candidates; each candidate
    costs one fresh estimate (l*N runs) that serves both the evolution
    filter and the target-penalty measurement.  Candidates whose filter
    window is {0} are pre-filtered without simulation, since step-0
    distributions are Dirac on the initial states.  ``progress``, when
    given, is called as progress(accepted, attempts, M) after every attempt.
    """
    spec.check_against(obs)
    discount = discount or ConstantDiscount()
    budget = budget if budget is not None else 20 * spec.M
    if budget < spec.M:
        raise PreconditionError("budget must be at least M")
    stream = _resolve(seed)
    k = obs.horizon
    penalties = [spec.rho, spec.rho_target]

    base_pen = estimate_penalties(
        base, k, N, stream.child(0), penalties, list(obs), threads
    )
    base_rho, base_target = base_pen[0], base_pen[1]

    if spec.filter_mode == "evolution":
        lo, hi = spec.interval
        filter_cols = [j for j, t in enumerate(obs) if lo <= t <= hi]
        trivial_window = [obs.steps[j] for j in filter_cols] == [0]
    else:
        filter_cols = []
        trivial_window = False

    sampler_stream = stream.child(1)
    cand_stream = stream.child(2)

    xi = None
    curves: list = []
    accepted_attempts: list = []
    accepted = rejected = attempts = 0

    for attempt in range(budget):
        attempts = attempt + 1
        cand = sampler.sample(base.data, sampler_stream.child(attempt))

        if progress is not None:
            progress(accepted, attempts, spec.M)

        if spec.filter_mode == "initial" or trivial_window:
            # step-0 distributions are Dirac: the evolution filter over {0}
            # equals the data-state hemimetric, no simulation needed
            d0 = _initial_distance(spec.rho, base.data, cand)
            if spec.filter_mode == "evolution":
                d0 *= discount(0)
            if d0 > spec.eta1:
                rejected += 1
                continue

        cand_pen = estimate_penalties(
            base.with_data(cand), k, N * ell,
            cand_stream.child(attempt), penalties, list(obs), threads,
        )

        if spec.filter_mode == "evolution" and not trivial_window:
            value = max(
                discount(obs.steps[j]) * compute_w_sorted(base_rho[:, j], cand_pen[0][:, j])
                for j in filter_cols
            )
            if value > spec.eta1:
                rejected += 1
                continue

        pointwise = [
            discount(t) * compute_w_sorted(base_target[:, j], cand_pen[1][:, j])
            for j, t in enumerate(obs)
        ]
        suffix = suffix_maxima(pointwise)
        if xi is None:
            xi = list(suffix)
        else:
            xi = [max(a, b) for a, b in zip(xi, suffix)]
        if collect_curves:
            curves.append(tuple(suffix))
        accepted_attempts.append(attempt)
        accepted += 1
        if accepted == spec.M:
            break

    if accepted < spec.M:
        raise ShortfallError(
            f"accepted only {accepted} of {spec.M} variations in {budget} attempts",
            accepted=accepted, requested=spec.M, attempts=attempts,
        )

    echo = {
        "rho": spec.rho.id,
        "rho_target": spec.rho_target.id,
        "interval": list(spec.interval),
        "tau_tilde": spec.tau_tilde,
        "eta1": spec.eta1,
        "eta2": spec.eta2,
        "M": spec.M,
        "filter_mode": spec.filter_mode,
        "sampler": sampler.id,
        "N": N,
        "l": ell,
        "discount": discount.id,
        "seed_key": list(stream.key),
    }
    return RobustnessReport(
        spec_echo=echo,
        obs_times=tuple(obs),
        accepted=accepted,
        rejected=rejected,
        attempts=attempts,
        xi=tuple(xi),
        variation_curves=curves,
        accepted_attempts=accepted_attempts,
    )


def estimate_adaptability(
    rho: PenaltyFunction,
    tau_tilde: int,
    eta1: float,
    base: Configuration,
    sampler: PerturbationSampler,
    obs: ObservationTimes,
    N: int,
    ell: int,
    seed,
    eta2: float = 0.0,
    M: int = 100,
    discount: DiscountFunction | None = None,
    budget: int | None = None,
    threads: int = 1,
    collect_curves: bool = True,
    progress=None,
) -> RobustnessReport:
    """Adaptability: initial-state filter and a single penalty for both the
    filter and the measured divergence; the verdict reads xi at tau_tilde."""
    spec = RobustnessSpec(
        rho=rho, rho_target=rho, interval=(0, 0), tau_tilde=tau_tilde,
        eta1=eta1, eta2=eta2, M=M, filter_mode="initial",
    )
    return estimate_robustness(
        spec, base, sampler, obs, N, ell, seed,
        discount=discount, budget=budget, threads=threads,
        collect_curves=collect_curves, progress=progress,
    )


def estimate_reliability(
    rho: PenaltyFunction,
    eta1: float,
    base: Configuration,
    sampler: PerturbationSampler,
    obs: ObservationTimes,
    N: int,
    ell: int,
    seed,
    eta2: float = 0.0,
    M: int = 100,
    discount: DiscountFunction | None = None,
    budget: int | None = None,
    threads: int = 1,
    collect_curves: bool = True,
    progress=None,
) -> RobustnessReport:
    """Reliability: adaptability read at the first observation time."""
    return estimate_adaptability(
        rho, obs.steps[0], eta1, base, sampler, obs, N, ell, seed,
        eta2=eta2, M=M, discount=discount, budget=budget, threads=threads,
        collect_curves=collect_curves, progress=progress,
    )
