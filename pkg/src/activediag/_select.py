from __future__ import annotations

import numpy as np

ARGMIN_TOL = 1e-12


def as_candidates(candidates) -> np.ndarray:
    cand = np.array(sorted(int(c) for c in candidates), dtype=np.int64)
    if cand.size == 0:
        raise ValueError("candidate set is empty")
    return cand


def argmin_with_ties(cand: np.ndarray, scores: np.ndarray, rng=None, tol: float = ARGMIN_TOL) -> int:
    """Pick a minimizer; near-ties (within ``tol``) resolved by ``rng``, else lowest id."""
    best = np.flatnonzero(scores <= scores.min() + tol)
    if rng is None or best.size == 1:
        return int(cand[best[0]])
    return int(cand[best[rng.integers(best.size)]])
