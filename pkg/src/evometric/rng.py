"""Deterministic, splittable random streams for reproducible simulation.

Every stream is a counter-based Philox generator identified by a 128-bit key.
Child streams are derived by hashing an index into the parent key
(splitmix64 chain), so the stream used by run ``i`` of an experiment depends
only on the experiment seed and ``i`` -- never on scheduling or worker count.

Normal variates use the Box-Muller transform on top of raw uniform doubles;
the numpy bit generator is only used as a source of raw bits, which keeps the
full draw sequence stable across platforms and numpy releases.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_BLOCK = 256
_TWO_PI = 2.0 * math.pi


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def _fold_in(key: tuple[int, int], index: int) -> tuple[int, int]:
    """Derive a child key by hashing ``index`` into ``key``; order-sensitive."""
    if index < 0:
        raise ValueError(f"stream index must be non-negative, got {index}")
    h = _splitmix64(key[0] ^ _splitmix64((index + 1) & _MASK64))
    k0 = _splitmix64(h ^ key[1])
    k1 = _splitmix64((key[1] + h + index) & _MASK64)
    return k0, k1


class RandomStream:
    """One private pseudo-random stream; not shared between concurrent runs."""

    __slots__ = ("key", "_gen", "_buf", "_pos")

    def __init__(self, key: tuple[int, int]):
        self.key = (key[0] & _MASK64, key[1] & _MASK64)
        self._gen = np.random.Generator(
            np.random.Philox(key=np.array(self.key, dtype=np.uint64))
        )
        self._buf: np.ndarray | None = None
        self._pos = 0

    @classmethod
    def from_seed(cls, seed: int) -> "RandomStream":
        """Root stream for an experiment; seed entropy is spread via SeedSequence."""
        k0, k1 = np.random.SeedSequence(seed).generate_state(2, np.uint64)
        return cls((int(k0), int(k1)))

    def child(self, index: int) -> "RandomStream":
        """Statistically independent stream derived from (this stream, index)."""
        return RandomStream(_fold_in(self.key, index))

    # -- scalar draws ------------------------------------------------------

    def uniform01(self) -> float:
        """Uniform double in (0, 1]."""
        if self._buf is None or self._pos >= _BLOCK:
            self._buf = self._gen.random(_BLOCK)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return float(1.0 - u)

    def uniform(self, low: float, high: float) -> float:
        """Uniform double in [low, high)."""
        return low + (high - low) * (1.0 - self.uniform01())

    def normal_std(self) -> float:
        """Standard normal via Box-Muller; consumes exactly two uniforms.

        Computed with numpy scalar ufuncs so that the value is bit-identical
        to the vectorized form sqrt(-2 log u1) * cos(2 pi u2) used by the
        lockstep simulators (libm's log can differ from numpy's by one ulp).
        """
        u1 = self.uniform01()
        u2 = self.uniform01()
        return float(np.sqrt(-2.0 * np.log(np.float64(u1))) * np.cos(np.float64(_TWO_PI * u2)))

    def normal(self, mu: float, sigma: float) -> float:
        return mu + sigma * self.normal_std()

    def uniform_int(self, low: int, high: int) -> int:
        """Uniform integer in the inclusive range [low, high]."""
        if high < low:
            raise ValueError(f"empty integer range [{low}, {high}]")
        span = high - low + 1
        return low + min(span - 1, int((1.0 - self.uniform01()) * span))

    # -- block draws (vectorized fast paths) --------------------------------

    def uniform01_block(self, n: int) -> np.ndarray:
        """The next ``n`` uniforms in (0, 1], identical to ``n`` scalar draws.

        Must not be interleaved with scalar draws on the same stream unless
        the caller accounts for the cached block position.
        """
        if self._buf is not None:
            raise RuntimeError("block draws must precede any scalar draw on a stream")
        return 1.0 - self._gen.random(n)


class UniformTape:
    """Chunked per-run uniform draws for lockstep simulation.

    Run ``run_offset + i`` reads the same (0, 1] sequence its scalar
    RandomStream would produce, ``draws_per_step`` values per step, laid out
    as one (n_runs, draws_per_step) array per call to :meth:`next_step`.
    """

    def __init__(self, base_key, n_runs: int, run_offset: int, draws_per_step: int,
                 chunk_steps: int = 256):
        self._gens = [
            RandomStream(_fold_in(base_key, run_offset + i))._gen
            for i in range(n_runs)
        ]
        self._draws = draws_per_step
        self._chunk = chunk_steps
        self._buf: np.ndarray | None = None
        self._pos = 0

    def next_step(self) -> np.ndarray:
        """(n_runs, draws_per_step) uniforms in (0, 1] for the next step."""
        if self._buf is None or self._pos >= self._chunk:
            n = len(self._gens)
            buf = np.empty((n, self._chunk, self._draws), dtype=np.float64)
            for i, g in enumerate(self._gens):
                buf[i] = g.random((self._chunk, self._draws))
            self._buf = buf
            self._pos = 0
        u = self._buf[:, self._pos, :]
        self._pos += 1
        return 1.0 - u
