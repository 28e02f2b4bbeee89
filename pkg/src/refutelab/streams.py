"""Counter-based randomness streams.

A stream is an immutable ``(seed, path)`` pair.  The generator for a
stream is rebuilt from scratch on every call to :meth:`generator`, so the
same stream always yields the same draws; independent uses must derive
children with distinct path labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class RandomnessStream:
    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) <= _SEED_MASK:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "path", tuple(int(p) for p in self.path))
        if any(p < 0 for p in self.path):
            raise ValueError("path labels must be non-negative integers")

    def child(self, *labels: int) -> "RandomnessStream":
        return RandomnessStream(self.seed, self.path + tuple(labels))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))

    def path_string(self) -> str:
        return "/".join([str(self.seed), *map(str, self.path)])


def as_stream(seed_or_stream) -> RandomnessStream:
    if isinstance(seed_or_stream, RandomnessStream):
        return seed_or_stream
    return RandomnessStream(int(seed_or_stream))
