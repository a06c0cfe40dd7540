from __future__ import annotations

import os
from typing import List, Optional, Sequence, Tuple

import numpy as np

SEED_ENV = "DCBOOST_SEED"


def env_seed(default: int = 0) -> int:
    raw = os.environ.get(SEED_ENV, "").strip()
    if not raw:
        return default
    try:
        return int(raw, 0)
    except ValueError:
        raise ValueError(f"Config error: {SEED_ENV}={raw!r} is not an integer") from None


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """PCG64 stream for one trial; depends only on (seed, trial)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(trial,))))


def trial_start(seed: int, trial: int, dim: int, box: Tuple[float, float]) -> np.ndarray:
    lo, hi = box
    return trial_rng(seed, trial).uniform(lo, hi, size=dim)


def trial_starts(seed: int, trials: int, dim: int, box: Tuple[float, float]) -> List[np.ndarray]:
    return [trial_start(seed, t, dim, box) for t in range(trials)]


def parse_floats(text: Optional[str]) -> Optional[List[float]]:
    """'1, 5,10' -> [1.0, 5.0, 10.0]; ranges like '1:20' expand to integers."""
    if text is None:
        return None
    out: List[float] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            a, b = part.split(":", 1)
            out.extend(float(v) for v in range(int(a), int(b) + 1))
        else:
            out.append(float(part))
    return out


def median(values: Sequence[float]) -> float:
    return float(np.median(np.asarray(values, dtype=float))) if len(values) else float("nan")
