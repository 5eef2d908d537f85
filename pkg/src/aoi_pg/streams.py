"""Seed derivation and buffered random streams.

Every stochastic quantity in a run is drawn from a :class:`RandomStream`.
Streams hand out draws from a pre-filled numpy buffer so that the compiled
kernel and the pure-Python loop consume exactly the same numbers in the same
order.

Seed mixing
-----------
``derive_run_seed(master_seed, run_index)`` applies the SplitMix64 finalizer
to ``master_seed + (run_index + 1) * 0x9E3779B97F4A7C15`` (all arithmetic mod
2**64).  The result is a platform independent 64-bit integer that seeds a
``numpy.random.SeedSequence``; the per-run streams (forward channel, backward
channel, policy) are spawned children of that sequence.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

BUFFER_SIZE = 4096


def splitmix64(x: int) -> int:
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_run_seed(master_seed: int, run_index: int) -> int:
    """Stable 64-bit seed for replication ``run_index`` of ``master_seed``."""
    if run_index < 0:
        raise ValueError("run_index must be non-negative")
    return splitmix64((int(master_seed) + (run_index + 1) * _GOLDEN) & _MASK64)


class RandomStream:
    """Buffered source of standard normal or uniform(0, 1) draws.

    ``buf`` and ``pos`` are read directly by the compiled kernel, which calls
    :meth:`refill` when the buffer is exhausted.
    """

    def __init__(self, seed, kind: str = "normal", size: int = BUFFER_SIZE):
        if kind not in ("normal", "uniform"):
            raise ValueError(f"unknown stream kind {kind!r}")
        if isinstance(seed, np.random.SeedSequence):
            self._gen = np.random.Generator(np.random.PCG64(seed))
        else:
            self._gen = np.random.default_rng(seed)
        self.kind = kind
        self.size = int(size)
        self.buf = np.empty(self.size)
        self.pos = self.size

    def refill(self) -> None:
        if self.kind == "normal":
            self._gen.standard_normal(out=self.buf)
        else:
            self._gen.random(out=self.buf)
        self.pos = 0

    def draw(self) -> float:
        if self.pos >= self.size:
            self.refill()
        v = self.buf[self.pos]
        self.pos += 1
        return float(v)

    def draws(self, n: int) -> np.ndarray:
        """Next ``n`` draws as an array (same sequence as repeated ``draw``)."""
        out = np.empty(n)
        i = 0
        while i < n:
            if self.pos >= self.size:
                self.refill()
            take = min(n - i, self.size - self.pos)
            out[i:i + take] = self.buf[self.pos:self.pos + take]
            self.pos += take
            i += take
        return out


def spawn_streams(run_seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(run_seed).spawn(n)
