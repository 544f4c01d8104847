"""Deterministic seeded randomness.

The generator is splitmix64: 64 bits of state, one 64-bit output per step.
It is tiny, fast, portable, and fully specified in ``docs/rng.md`` together
with test vectors, so any implementation (both kernel backends here, the
test oracles, or a port in another language) reproduces identical streams.

Derivation rules:

- uniform double in [0, 1): ``(next_u64() >> 11) * 2**-53``
- child stream for ``(seed, label)``: ``mix64(seed XOR fnv1a64(label))``
- gaussians: Box-Muller on consecutive pairs of uniforms (see kernels)
"""

from __future__ import annotations

from array import array

from .backend import kernels
from .errors import FaultlabError
from .tensor import Tensor

__all__ = ["SeededRng", "fnv1a64"]

_MASK64 = (1 << 64) - 1
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(label: str) -> int:
    """FNV-1a 64-bit hash of the UTF-8 bytes of `label`."""
    h = _FNV_OFFSET
    for b in label.encode("utf-8"):
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


class SeededRng:
    """splitmix64 stream owned by a single task.

    Identical seeds give identical sequences on every platform.  Child
    streams are keyed by (seed, label) — independent of how much of the
    parent stream has been consumed.
    """

    __slots__ = ("seed", "_state")

    def __init__(self, seed: int):
        if seed < 0:
            raise FaultlabError(f"seed must be a non-negative integer, got {seed}")
        self.seed = seed & _MASK64
        self._state = self.seed

    def next_u64(self) -> int:
        z, self._state = kernels.splitmix64_next(self._state)
        return z

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randint_below(self, n: int) -> int:
        """Uniform integer in [0, n) via unbiased rejection sampling."""
        if n <= 0:
            raise FaultlabError(f"randint_below needs n >= 1, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            z = self.next_u64()
            if z < limit:
                return z % n

    def child(self, label: str) -> "SeededRng":
        """Independent stream derived from (seed, label)."""
        return SeededRng(kernels.mix64(self.seed ^ fnv1a64(label)))

    def gaussian(self, n: int, mu: float = 0.0, sigma: float = 1.0) -> Tensor:
        """n i.i.d. N(mu, sigma^2) draws as a 1-D tensor."""
        if sigma < 0:
            raise FaultlabError(f"sigma must be >= 0, got {sigma}")
        if n < 0:
            raise FaultlabError(f"n must be >= 0, got {n}")
        buf = array("f", bytes(4 * n))
        self._state = kernels.fill_gaussian(self._state, buf, mu, sigma)
        return Tensor((n,), buf)

    def fill_gaussian_array(self, buf: array, mu: float = 0.0, sigma: float = 1.0) -> None:
        """Fill an existing array('f') with gaussian draws in place."""
        if sigma < 0:
            raise FaultlabError(f"sigma must be >= 0, got {sigma}")
        self._state = kernels.fill_gaussian(self._state, buf, mu, sigma)

    def corrupt_gaussian_array(self, buf: array, rate: float, sigma: float) -> int:
        """Add N(0, sigma^2) noise to each element with probability `rate`,
        in place; returns the number of elements modified."""
        count, self._state = kernels.corrupt_gaussian(buf, self._state, rate, sigma)
        return count

    def bitflip_mantissa_array(self, buf: array, severity: float) -> int:
        """Flip one uniformly chosen mantissa bit of each element with
        probability `severity`, in place; returns the number modified."""
        count, self._state = kernels.bitflip_mantissa(buf, self._state, severity)
        return count

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed})"
