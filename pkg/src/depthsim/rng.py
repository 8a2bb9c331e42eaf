"""Counter-based random streams keyed by (seed, frame, environment, stage).

Each stream is a Philox generator seeded through ``SeedSequence`` with the
stream id as its spawn key. Draws are produced as one 64-bit word per pixel in
row-major order, so the value a pixel receives depends only on its index and
the stream id, never on evaluation order or on other frames.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

STAGES = {"axial": 0, "lateral": 1, "dropout": 2}


@dataclass(frozen=True)
class RngStream:
    seed: int
    frame: int = 0
    env: int = 0

    def generator(self, stage: str) -> np.random.Generator:
        key = (int(self.frame), int(self.env), STAGES[stage])
        ss = np.random.SeedSequence(int(self.seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
        return np.random.Generator(np.random.Philox(ss))

    def uniform(self, stage: str, shape) -> np.ndarray:
        """Uniform draws on [0, 1), one per element."""
        return self.generator(stage).random(shape)

    def normal(self, stage: str, shape) -> np.ndarray:
        """Standard normal draws by inverse CDF, one uniform per element."""
        u = self.uniform(stage, shape)
        # u < 1 always; only u == 0 would map to -inf
        return ndtri(np.maximum(u, 2.0**-54))
