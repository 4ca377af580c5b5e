"""The evolution metric: hemimetric on data states, its Wasserstein lifting
between sampled distributions, and the discounted supremum over observation
times.

The pointwise estimator sorts the penalty samples of both sides and averages
``max(nu_h - omega_ceil(h/l), 0)``; with N and l*N samples this converges to
the Wasserstein lifting of the ground hemimetric ``max(rho(d2)-rho(d1), 0)``,
and runs in O(lN log lN).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataspace import DataState, PenaltyFunction
from .engine import Configuration, estimate_penalties
from .errors import PreconditionError, StructuralError
from .rng import RandomStream

__all__ = [
    "ObservationTimes",
    "DiscountFunction",
    "constant_discount",
    "exponential_discount",
    "MetricReport",
    "data_state_metric",
    "compute_w",
    "compute_w_sorted",
    "distance",
    "suffix_maxima",
]


@dataclass(frozen=True)
class ObservationTimes:
    """Finite ascending set of time steps at which distributions are compared."""

    steps: tuple

    def __post_init__(self):
        if not self.steps:
            raise PreconditionError("observation times must be non-empty")
        if any(int(t) != t or t < 0 for t in self.steps):
            raise PreconditionError("observation times must be non-negative integers")
        if any(b <= a for a, b in zip(self.steps, self.steps[1:])):
            raise PreconditionError("observation times must be strictly ascending")
        object.__setattr__(self, "steps", tuple(int(t) for t in self.steps))

    @classmethod
    def range(cls, last: int, first: int = 0, stride: int = 1) -> "ObservationTimes":
        return cls(tuple(range(first, last + 1, stride)))

    @classmethod
    def parse(cls, text: str) -> "ObservationTimes":
        """Parse '0..150', '0..150..5' (start..last..stride) or '0,10,20'."""
        text = text.strip()
        if ".." in text:
            parts = text.split("..")
            if len(parts) == 2:
                return cls.range(int(parts[1]), int(parts[0]))
            if len(parts) == 3:
                return cls.range(int(parts[1]), int(parts[0]), int(parts[2]))
            raise PreconditionError(f"cannot parse observation times {text!r}")
        return cls(tuple(int(t) for t in text.split(",")))

    @property
    def horizon(self) -> int:
        return self.steps[-1]

    def __iter__(self):
        return iter(self.steps)

    def __len__(self):
        return len(self.steps)


class DiscountFunction:
    """Non-increasing weight in (0, 1] attenuating late observation times."""

    id = "discount"

    def __call__(self, step: int) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantDiscount(DiscountFunction):
    value: float = 1.0
    id: str = "1"

    def __post_init__(self):
        if not (0.0 < self.value <= 1.0):
            raise PreconditionError("discount value must be in (0, 1]")

    def __call__(self, step: int) -> float:
        return self.value


@dataclass(frozen=True)
class ExponentialDiscount(DiscountFunction):
    """lambda(tau) = gamma^tau for gamma in (0, 1]."""

    gamma: float
    id: str = ""

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise PreconditionError("discount base must be in (0, 1]")
        if not self.id:
            object.__setattr__(self, "id", f"exp:{self.gamma:g}")

    def __call__(self, step: int) -> float:
        return self.gamma**step


def constant_discount(value: float = 1.0) -> DiscountFunction:
    return ConstantDiscount(value)


def exponential_discount(gamma: float) -> DiscountFunction:
    return ExponentialDiscount(gamma)


def data_state_metric(
    rho: PenaltyFunction, step: int, d1: DataState, d2: DataState
) -> float:
    """How much worse d2 scores than d1: max(rho(d2) - rho(d1), 0).

    A 1-bounded hemimetric (asymmetric by design) on any shared data space.
    """
    if d1.space != d2.space:
        raise StructuralError("data states live in different data spaces")
    return max(rho(step, d2) - rho(step, d1), 0.0)


# ---------------------------------------------------------------------------
# Pointwise Wasserstein estimator
# ---------------------------------------------------------------------------


def compute_w_sorted(omega: np.ndarray, nu: np.ndarray) -> float:
    """Estimator on raw penalty samples; sizes must satisfy |nu| = l * |omega|."""
    n = omega.shape[0]
    ln = nu.shape[0]
    if n == 0 or ln % n != 0:
        raise StructuralError(
            f"second sample count {ln} must be a positive multiple of the first {n}"
        )
    ell = ln // n
    om = np.sort(omega)
    nv = np.sort(nu)
    if ell > 1:
        om = np.repeat(om, ell)
    return float(np.maximum(nv - om, 0.0).mean())


def compute_w(
    E1: Sequence[DataState] | np.ndarray,
    E2: Sequence[DataState] | np.ndarray,
    rho: PenaltyFunction,
    step: int,
) -> float:
    """Pointwise Wasserstein estimate between two sample sets at one step.

    ``E1`` holds N sampled data states of the first configuration, ``E2``
    holds l*N of the second (integer l >= 1).  Both may also be given as
    (count, nvars) value arrays over the same space.
    """
    omega = _penalty_vector(E1, rho, step)
    nu = _penalty_vector(E2, rho, step)
    return compute_w_sorted(omega, nu)


def _penalty_vector(E, rho: PenaltyFunction, step: int) -> np.ndarray:
    if isinstance(E, np.ndarray):
        raise StructuralError(
            "raw arrays need a data space; pass DataStates or use compute_w_sorted"
        )
    states = list(E)
    if not states:
        raise StructuralError("empty sample set")
    space = states[0].space
    vals = np.array([s.values for s in states], dtype=np.float64)
    return rho.eval_batch(step, vals, space)


# ---------------------------------------------------------------------------
# The evolution metric
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricReport:
    """Pointwise Wasserstein curve over the observation times plus its
    discounted supremum."""

    obs_times: tuple
    pointwise: tuple  # W_tau per observation time
    discounted: tuple  # lambda(tau) * W_tau
    value: float  # max of discounted
    argmax: int  # observation time attaining the max
    params: dict

    def suffix_value(self, tau_tilde: int) -> float:
        """Metric restricted to observation times >= tau_tilde, no re-run."""
        vals = [d for t, d in zip(self.obs_times, self.discounted) if t >= tau_tilde]
        if not vals:
            raise PreconditionError(f"no observation times at or after {tau_tilde}")
        return max(vals)

    def to_json_dict(self) -> dict:
        return {
            "obs_times": list(self.obs_times),
            "pointwise": list(self.pointwise),
            "discounted": list(self.discounted),
            "value": self.value,
            "argmax": self.argmax,
            "params": self.params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    def to_csv(self, path, meta: dict | None = None) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if meta or self.params:
                merged = dict(self.params)
                merged.update(meta or {})
                fh.write("# " + json.dumps(merged, sort_keys=True) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau", "w", "discounted_w"])
            for t, wv, dv in zip(self.obs_times, self.pointwise, self.discounted):
                w.writerow([t, repr(float(wv)), repr(float(dv))])


def report_from_pointwise(
    obs: ObservationTimes,
    pointwise: Sequence[float],
    discount: DiscountFunction,
    params: dict,
) -> MetricReport:
    discounted = [discount(t) * w for t, w in zip(obs, pointwise)]
    best = max(range(len(discounted)), key=lambda i: (discounted[i], -i))
    return MetricReport(
        obs_times=tuple(obs),
        pointwise=tuple(float(w) for w in pointwise),
        discounted=tuple(float(d) for d in discounted),
        value=float(discounted[best]),
        argmax=obs.steps[best],
        params=params,
    )


def distance(
    c1: Configuration,
    c2: Configuration,
    rho: PenaltyFunction,
    discount: DiscountFunction,
    obs: ObservationTimes,
    N: int,
    ell: int,
    seed,
    threads: int = 1,
    use_fast_path: bool = True,
) -> MetricReport:
    """Estimated evolution metric from c1 to c2.

    Simulates N runs of c1 and l*N runs of c2, computes the pointwise
    Wasserstein estimate at every observation time, and folds the discounted
    maximum.  ``seed`` is either one master seed, from which two independent
    lineages are derived, or an explicit (seed1, seed2) pair; passing the
    same seed twice makes both sides sample identical runs (so the distance
    of a configuration to itself is exactly zero when l = 1).
    """
    if ell < 1 or int(ell) != ell:
        raise PreconditionError(f"scale factor must be a positive integer, got {ell}")
    if c1.space != c2.space:
        raise StructuralError("configurations use different data spaces")
    if isinstance(seed, tuple):
        s1, s2 = seed
        stream1 = s1 if isinstance(s1, RandomStream) else RandomStream.from_seed(int(s1))
        stream2 = s2 if isinstance(s2, RandomStream) else RandomStream.from_seed(int(s2))
        seed_keys = [list(stream1.key), list(stream2.key)]
    else:
        base = seed if isinstance(seed, RandomStream) else RandomStream.from_seed(int(seed))
        stream1, stream2 = base.child(0), base.child(1)
        seed_keys = [list(base.key)]
    k = obs.horizon
    pen1 = estimate_penalties(
        c1, k, N, stream1, [rho], list(obs), threads, use_fast_path
    )[0]
    pen2 = estimate_penalties(
        c2, k, N * ell, stream2, [rho], list(obs), threads, use_fast_path
    )[0]
    pointwise = [
        compute_w_sorted(pen1[:, j], pen2[:, j]) for j in range(len(obs))
    ]
    params = {
        "penalty": rho.id,
        "discount": discount.id,
        "N": N,
        "l": ell,
        "seed_key": seed_keys,
        "obs": f"{obs.steps[0]}..{obs.steps[-1]}" if len(obs) > 1 else str(obs.steps[0]),
    }
    return report_from_pointwise(obs, pointwise, discount, params)


def suffix_maxima(discounted: Sequence[float]) -> list[float]:
    """Running maxima from the right: out[j] = max(discounted[j:])."""
    out = list(discounted)
    for i in range(len(out) - 2, -1, -1):
        out[i] = max(out[i], out[i + 1])
    return out
