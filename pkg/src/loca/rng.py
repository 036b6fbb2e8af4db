"""Seeded, splittable random streams.

Every stream is a PCG64 generator whose seed material is a
``numpy.random.SeedSequence`` built from an integer seed plus a path of
purpose labels. PCG64 and the ``random()`` double conversion are fully
specified by numpy, so draws are identical across platforms.

Draws are taken from a pre-filled block of uniforms; scalar draws in the
inner loops then cost a list index instead of a generator call.
"""

from __future__ import annotations

import zlib

import numpy as np

_BLOCK = 4096


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


class RngStream:
    """A deterministic stream of uniforms in ``[0, 1)``.

    ``RngStream(seed).substream("eval")`` always yields the same stream,
    independent of how many values the parent has already produced.
    """

    __slots__ = ("seed", "path", "_gen", "_arr", "_buf", "_pos")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self.path = tuple(path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self._gen = np.random.Generator(np.random.PCG64(ss))
        # _arr and _buf hold the same block; compiled loops read _arr and
        # write back _pos, Python callers read the (faster to index) list.
        self._arr = None
        self._buf: list[float] = []
        self._pos = 0

    def substream(self, label: str) -> "RngStream":
        return RngStream(self.seed, self.path + (_label_key(label),))

    def _refill(self) -> None:
        self._arr = self._gen.random(_BLOCK)
        self._buf = self._arr.tolist()
        self._pos = 0

    def random(self) -> float:
        if self._pos >= len(self._buf):
            self._refill()
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def integers(self, n: int) -> int:
        """Uniform integer in ``range(n)``."""
        k = int(self.random() * n)
        return k if k < n else n - 1

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"
