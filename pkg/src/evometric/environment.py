"""Environment evolutions: Markov kernels over data states.

An environment evolution maps a data state to a sampler for the successor
state.  Kernels are registered natively as code (the case studies need
arbitrary arithmetic); the registry exposes them by id with flat JSON
parameter overrides for the CLI.

Kernels must be pure: the output may depend only on the input state and the
random numbers consumed.  Measurability of ``d -> E(d)(B)`` is a modelling
obligation and is not checked at run time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .dataspace import DataState
from .errors import DataValidationError, StructuralError
from .rng import RandomStream

__all__ = [
    "EnvironmentEvolution",
    "IdentityKernel",
    "FiniteKernel",
    "FunctionKernel",
    "env_sample",
    "register_environment",
    "environment_ids",
    "make_environment",
]


class EnvironmentEvolution:
    """Base class for environment kernels.

    Subclasses implement :meth:`sample_values` on raw value vectors; the
    engine applies domain clamping to the result.  ``id`` identifies the
    kernel in reports and the registry.
    """

    id: str = "environment"

    def sample_values(self, values: Sequence[float], rng: RandomStream) -> list[float]:
        raise NotImplementedError

    def sample(self, d: DataState, rng: RandomStream) -> DataState:
        return env_sample(self, d, rng)


def env_sample(env: EnvironmentEvolution, d: DataState, rng: RandomStream) -> DataState:
    """Draw one successor of ``d`` from the kernel; clamping policy applies."""
    raw = env.sample_values(d.values, rng)
    if len(raw) != len(d.space):
        raise StructuralError(
            f"kernel {env.id!r} returned {len(raw)} values for {len(d.space)} variables"
        )
    clamped, _ = d.space.clamp_values(raw)
    return DataState(d.space, tuple(clamped))


@dataclass(frozen=True)
class IdentityKernel(EnvironmentEvolution):
    """Dirac kernel: the environment never changes anything."""

    id: str = "identity"

    def sample_values(self, values, rng):
        return list(values)


@dataclass(frozen=True)
class FiniteKernel(EnvironmentEvolution):
    """Finite-support kernel defined by a transition function.

    ``transition`` maps a value tuple to a list of (probability, successor
    value tuple) pairs.  Sampling uses the same cumulative selection rule as
    the simulation engine (u in (0,1], first index whose cumulative weight
    reaches u), so toy models stay enumerable and exactly reproducible.
    """

    transition: Callable[[tuple], list]
    id: str = "finite"

    def support(self, values: Sequence[float]) -> list:
        out = self.transition(tuple(values))
        total = sum(p for p, _ in out)
        if abs(total - 1.0) > 1e-9:
            raise DataValidationError(
                f"kernel {self.id!r}: transition probabilities sum to {total!r}"
            )
        return out

    def sample_values(self, values, rng):
        support = self.support(values)
        if len(support) == 1:
            return list(support[0][1])
        u = rng.uniform01()
        acc = 0.0
        for p, succ in support:
            acc += p
            if u <= acc:
                return list(succ)
        return list(support[-1][1])


@dataclass(frozen=True)
class FunctionKernel(EnvironmentEvolution):
    """Kernel wrapping an arbitrary (values, rng) -> values function."""

    fn: Callable[[Sequence[float], RandomStream], list]
    id: str = "function"

    def sample_values(self, values, rng):
        return self.fn(values, rng)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

_REGISTRY: dict[str, Callable[..., EnvironmentEvolution]] = {}


def register_environment(env_id: str, factory: Callable[..., EnvironmentEvolution]) -> None:
    if env_id in _REGISTRY:
        raise DataValidationError(f"environment id {env_id!r} already registered")
    _REGISTRY[env_id] = factory


def environment_ids() -> list[str]:
    return sorted(_REGISTRY)


def make_environment(env_id: str, params: dict | None = None) -> EnvironmentEvolution:
    """Instantiate a registered kernel; ``params`` is a flat name->number map."""
    try:
        factory = _REGISTRY[env_id]
    except KeyError:
        raise StructuralError(
            f"unknown environment {env_id!r}; known: {environment_ids()}"
        ) from None
    return factory(**(params or {}))


register_environment("identity", lambda: IdentityKernel())
