from typing import List

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; every stochastic operation takes one of these."""
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def spawn_seeds(seed: int, count: int) -> List[int]:
    """Derive `count` independent child seeds in a fixed order."""
    children = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]
