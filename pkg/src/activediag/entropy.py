"""Single-fault entropy baseline for query selection."""

from __future__ import annotations

import numpy as np

from ._select import argmin_with_ties, as_candidates
from .model import BipartiteDiagnosisGraph, QmrDtNoiseModel
from .single_fault import SingleFaultBelief

__all__ = ["binary_entropy", "entropy_sf_scores", "entropy_sf_score", "select_query_entropy_sf"]


def _h2(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    inner = (p > 0) & (p < 1)
    q = p[inner]
    out[inner] = -q * np.log2(q) - (1.0 - q) * np.log2(1.0 - q)
    return out


def binary_entropy(p):
    """Binary entropy in bits, with 0 log 0 = 0.

    Accepts a scalar or an array; raises ``ValueError`` outside [0, 1].
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr >= 0) & (arr <= 1))):
        raise ValueError(f"binary entropy is defined on [0, 1], got {p}")
    h = _h2(arr)
    return float(h) if h.ndim == 0 else h


def entropy_sf_scores(
    belief: SingleFaultBelief, model: QmrDtNoiseModel, graph: BipartiteDiagnosisGraph, candidates
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized score for many queries: ``sum_i p_i H(q_ji) - H(sum_i p_i q_ji)``.

    This is minus the mutual information between the object state and the
    query response under the single-fault belief, so it is never positive.
    """
    cand = as_candidates(candidates)
    p = belief.posterior
    q0 = model.zero_prob_matrix(graph)[cand]
    mix = np.clip(q0 @ p, 0.0, 1.0)
    return cand, _h2(q0) @ p - _h2(mix)


def entropy_sf_score(
    belief: SingleFaultBelief, model: QmrDtNoiseModel, graph: BipartiteDiagnosisGraph, j: int
) -> float:
    graph.check_query(j)
    return float(entropy_sf_scores(belief, model, graph, [j])[1][0])


def select_query_entropy_sf(
    belief: SingleFaultBelief,
    model: QmrDtNoiseModel,
    graph: BipartiteDiagnosisGraph,
    candidates,
    tiebreak_rng: np.random.Generator | None = None,
) -> int:
    cand, scores = entropy_sf_scores(belief, model, graph, candidates)
    return argmin_with_ties(cand, scores, tiebreak_rng)
