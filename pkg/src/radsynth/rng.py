"""Counter-based SplitMix64 random streams.

Every random draw in the package (texture synthesis, weight init, fold
splits, minibatch shuffles, dropout masks) comes from this generator so
that results depend only on the integer seed, never on the numpy version
or platform default generator.

The ``i``-th output (``i = 0, 1, ...``) of a stream seeded with ``s`` is::

    z = s + (i + 1) * 0x9E3779B97F4A7C15          (mod 2**64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    out = z ^ (z >> 31)

which is exactly the sequence of the reference SplitMix64 generator.
Uniform floats take the top 53 bits: ``(out >> 11) * 2**-53``.
"""

from __future__ import annotations

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, start: int, n: int) -> np.ndarray:
    """Outputs ``start .. start+n-1`` of the stream seeded with ``seed``."""
    counters = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + counters * GAMMA
        return _mix(z)


def derive_seed(seed: int, index: int) -> int:
    """Child seed for item ``index``: output ``index`` of the parent stream."""
    return int(splitmix64(seed, index, 1)[0])


class Stream:
    """Sequential view over a SplitMix64 stream."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def bits(self, n: int) -> np.ndarray:
        out = splitmix64(self.seed, self.counter, n)
        self.counter += n
        return out

    def uniform(self, size) -> np.ndarray:
        """Float64 uniforms in [0, 1)."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        u = (self.bits(n) >> np.uint64(11)).astype(np.float64) * (2.0**-53)
        return u.reshape(shape)

    def normal(self, size) -> np.ndarray:
        """Standard normals by Box-Muller, two uniforms per draw."""
        shape = (size,) if np.isscalar(size) else tuple(size)
        n = int(np.prod(shape, dtype=np.int64))
        u = self.uniform(2 * n)
        u1 = 1.0 - u[:n]  # (0, 1], keeps log finite
        u2 = u[n:]
        z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
        return z.reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind="stable")

    def spawn(self) -> "Stream":
        return Stream(int(self.bits(1)[0]))
