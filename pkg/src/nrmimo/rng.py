"""Named random streams derived from a single run index.

A stream is identified by a tuple of names such as
``("channel", "gnb0|ue0", "params")``; its generator depends only on the run
index and those names, so creating a new stream never shifts the draws of
an existing one.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(names) -> tuple[int, ...]:
    return tuple(zlib.crc32(str(n).encode("utf-8")) for n in names)


class RngStreams:
    def __init__(self, run: int):
        if run < 0:
            raise ValueError("rng run index must be non-negative")
        self.run = int(run)
        self._streams: dict[tuple, np.random.Generator] = {}

    def get(self, *names) -> np.random.Generator:
        key = tuple(str(n) for n in names)
        gen = self._streams.get(key)
        if gen is None:
            seq = np.random.SeedSequence(entropy=self.run, spawn_key=_key(key))
            gen = np.random.Generator(np.random.PCG64(seq))
            self._streams[key] = gen
        return gen
