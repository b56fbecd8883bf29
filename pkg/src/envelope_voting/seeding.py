"""Counter-based seed derivation: trial ``k`` of root seed ``s`` always sees the same stream."""
from __future__ import annotations

import numpy as np


def trial_rng(root_seed: int, trial: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(root_seed), int(trial), *stream]))
