"""Splittable random streams for reproducible, order-independent simulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StreamKey:
    """Key for a counter-based random substream.

    A stream is identified by a 64-bit master seed plus a path of
    nonnegative integers (replicate index, stage index, ...).  Distinct
    paths yield statistically independent streams, and the stream obtained
    from a given key is bit-identical across runs and independent of the
    order in which sibling streams are consumed.
    """

    master: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.master) < 2**64:
            raise ValueError("master seed must fit in 64 unsigned bits")
        path = tuple(int(p) for p in self.path)
        if any(p < 0 for p in path):
            raise ValueError("stream path indices must be nonnegative")
        object.__setattr__(self, "master", int(self.master))
        object.__setattr__(self, "path", path)

    def child(self, *indices: int) -> "StreamKey":
        """Derive the substream at ``path + indices``."""
        return StreamKey(self.master, self.path + tuple(int(i) for i in indices))

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream.

        Calling this twice on the same key replays the identical stream;
        callers that need several independent draws should derive children.
        """
        seq = np.random.SeedSequence(entropy=self.master, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))
