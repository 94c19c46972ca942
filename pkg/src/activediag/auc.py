"""Rank-based ROC estimates from fault marginals and greedy AUC query selection.

Given fault marginals ``p`` sorted in descending order, the estimated miss and
false-alarm rates of "declare the top t objects faulty" are

    MR_t  = sum_{i > t} p_(i) / sum_i p_i
    FAR_t = sum_{i <= t} (1 - p_(i)) / sum_i (1 - p_i)

The selector picks the query whose expected post-response area above this
ROC curve is smallest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._select import argmin_with_ties, as_candidates
from .model import BipartiteDiagnosisGraph, ObservationLog, QmrDtNoiseModel
from .single_fault import SingleFaultBelief

__all__ = [
    "DegenerateMarginalsError",
    "RankedEstimate",
    "RocCurve",
    "AucEstimate",
    "METHODS",
    "rank_objects",
    "roc_curve",
    "area_above_double_sum",
    "area_above_closed_form",
    "auc_estimate",
    "expected_area_above",
    "select_query_auc",
    "select_query_auc_exact",
]

METHODS = ("upper_rect", "lower_rect", "linear")

# rows per block in the vectorized lookahead; bounds peak memory
_BLOCK_ELEMENTS = 1 << 20


class DegenerateMarginalsError(ValueError):
    """All marginals are 0 (no expected fault) or all are 1 (no expected non-fault)."""


@dataclass(frozen=True, eq=False)
class RankedEstimate:
    marginals: np.ndarray
    order: np.ndarray

    @property
    def sorted_marginals(self) -> np.ndarray:
        return self.marginals[self.order]


@dataclass(frozen=True, eq=False)
class RocCurve:
    miss: np.ndarray
    false_alarm: np.ndarray


@dataclass(frozen=True)
class AucEstimate:
    area_under: float
    area_above: float
    method: str


def rank_objects(marginals, tiebreak_rng: np.random.Generator | None = None) -> RankedEstimate:
    """Sort objects by descending fault marginal.

    Ties are broken by a shuffle drawn from ``tiebreak_rng``; without a
    generator they keep index order.
    """
    p = np.asarray(marginals, dtype=float)
    if p.ndim != 1:
        raise ValueError("marginals must be one-dimensional")
    if np.any((p < 0) | (p > 1)):
        raise ValueError("marginals must lie in [0, 1]")
    if tiebreak_rng is None:
        order = np.argsort(-p, kind="stable")
    else:
        perm = tiebreak_rng.permutation(p.size)
        order = perm[np.argsort(-p[perm], kind="stable")]
    return RankedEstimate(p.copy(), order)


def _denominators(p: np.ndarray) -> tuple[float, float]:
    pos = float(p.sum())
    neg = float((1.0 - p).sum())
    if pos <= 0.0 or neg <= 0.0:
        raise DegenerateMarginalsError(
            "need at least some expected faults and some expected non-faults"
        )
    return pos, neg


def roc_curve(ranked: RankedEstimate) -> RocCurve:
    p = ranked.sorted_marginals
    pos, neg = _denominators(p)
    tail = np.concatenate(([0.0], np.cumsum(p)))
    miss = (pos - tail) / pos
    false_alarm = np.concatenate(([0.0], np.cumsum(1.0 - p))) / neg
    # pin the endpoints; cumulative sums drift by an ulp
    miss[0], miss[-1] = 1.0, 0.0
    false_alarm[0], false_alarm[-1] = 0.0, 1.0
    return RocCurve(miss, false_alarm)


def area_above_double_sum(ranked: RankedEstimate) -> float:
    """Direct O(M^2) pairwise form: sum_{i<j} (1 - p_(i)) p_(j) / (sum p * sum(1-p))."""
    p = ranked.sorted_marginals
    pos, neg = _denominators(p)
    total = 0.0
    for i in range(p.size - 1):
        total += (1.0 - p[i]) * p[i + 1 :].sum()
    return total / (pos * neg)


def _closed_form_rows(p_sorted: np.ndarray) -> np.ndarray:
    M = p_sorted.shape[-1]
    weights = 2.0 * np.arange(1, M + 1) - M - 2.0
    pos = p_sorted.sum(axis=-1)
    neg = M - pos
    num = p_sorted @ weights + np.einsum("...i,...i->...", p_sorted, p_sorted)
    return 0.5 + num / (2.0 * pos * neg)


def area_above_closed_form(ranked: RankedEstimate) -> float:
    """O(M) evaluation of the pairwise area above the curve, given the ranking."""
    p = ranked.sorted_marginals
    _denominators(p)
    return float(_closed_form_rows(p))


def auc_estimate(ranked: RankedEstimate, method: str = "upper_rect") -> AucEstimate:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    roc = roc_curve(ranked)
    step = np.diff(roc.false_alarm)
    upper = float(np.dot(1.0 - roc.miss[1:], step))
    lower = float(np.dot(1.0 - roc.miss[:-1], step))
    under = {"upper_rect": upper, "lower_rect": lower, "linear": 0.5 * (upper + lower)}[method]
    if method == "upper_rect":
        above = float(np.dot(roc.miss[1:], step))
        under = 1.0 - above
    else:
        above = 1.0 - under
    return AucEstimate(under, above, method)


def _lookahead_area(p: np.ndarray, lik0: np.ndarray) -> np.ndarray:
    """Expected area above after observing each row's query.

    ``p`` are current fault marginals under the single-fault belief (sum 1);
    ``lik0[c]`` holds Pr(Z = 0 | hypothesis i) for candidate c.
    """
    out = np.empty(lik0.shape[0])
    M = p.size
    block = max(1, _BLOCK_ELEMENTS // max(M, 1))
    for start in range(0, lik0.shape[0], block):
        q0 = lik0[start : start + block]
        total = np.zeros(q0.shape[0])
        for w in (p * q0, p * (1.0 - q0)):
            pz = w.sum(axis=1)
            live = pz > 0
            post = w[live] / pz[live, None]
            post.sort(axis=1)
            area = _closed_form_rows(post[:, ::-1])
            total[live] += pz[live] * area
        out[start : start + block] = total
    return out


def expected_area_above(
    belief: SingleFaultBelief, model: QmrDtNoiseModel, graph: BipartiteDiagnosisGraph, candidates
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(candidate ids, expected area above after each)``."""
    cand = as_candidates(candidates)
    if belief.num_objects < 2:
        raise DegenerateMarginalsError("ranking needs at least two objects")
    q0 = model.zero_prob_matrix(graph)[cand]
    return cand, _lookahead_area(belief.posterior, q0)


def select_query_auc(
    belief: SingleFaultBelief,
    model: QmrDtNoiseModel,
    graph: BipartiteDiagnosisGraph,
    candidates,
    tiebreak_rng: np.random.Generator | None = None,
) -> int:
    """Greedy single-fault AUC rule: minimize the expected upper-rectangle area above.

    The area above does not depend on how ties in the ranking are broken, so
    the hypothetical rankings are plain sorts; ``tiebreak_rng`` only resolves
    near-equal scores between candidates.
    """
    cand = as_candidates(candidates)
    if cand.size == 1:
        return int(cand[0])
    cand, scores = expected_area_above(belief, model, graph, cand)
    return argmin_with_ties(cand, scores, tiebreak_rng)


def select_query_auc_exact(
    model: QmrDtNoiseModel,
    graph: BipartiteDiagnosisGraph,
    observations: ObservationLog,
    candidates,
    size_limit: int | None = None,
    tiebreak_rng: np.random.Generator | None = None,
    single_fault: bool = False,
) -> int:
    """Same greedy rule driven by exact multi-fault marginals (small M only).

    Lookahead outcomes whose marginals are degenerate (certainty that nothing
    or everything is faulty) contribute zero area above.
    """
    from . import oracle

    cand = as_candidates(candidates)
    post = oracle.exact_posterior(
        model, graph, observations, size_limit=size_limit, single_fault=single_fault
    )
    if cand.size == 1:
        return int(cand[0])
    states = post.states.astype(float)
    M = graph.num_objects
    scores = np.zeros(cand.size)
    for c, j in enumerate(cand):
        q0 = np.exp(oracle.log_zero_prob_states(model, graph, int(j), post.states))
        for lik in (q0, 1.0 - q0):
            w = post.probs * lik
            pz = w.sum()
            if pz <= 0:
                continue
            marg = np.clip((w @ states) / pz, 0.0, 1.0)
            pos = marg.sum()
            if pos <= 0.0 or pos >= M:
                continue
            scores[c] += pz * float(_closed_form_rows(np.sort(marg)[::-1]))
    return argmin_with_ties(cand, scores, tiebreak_rng)
