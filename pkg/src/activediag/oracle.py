"""Exact inference by enumerating all 2^M object states.

Only usable for small networks; every entry point enforces ``size_limit``.
``single_fault=True`` zeroes the prior outside the M single-fault states
before normalizing, which is the reference the single-fault code is checked
against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._select import argmin_with_ties, as_candidates
from .model import BipartiteDiagnosisGraph, ObservationLog, QmrDtNoiseModel
from .single_fault import ContradictoryEvidenceError

__all__ = [
    "DEFAULT_SIZE_LIMIT",
    "CapacityError",
    "ExactPosterior",
    "enumerate_states",
    "log_zero_prob_states",
    "exact_posterior",
    "exact_marginals",
    "exact_conditional_entropy",
    "exact_entropy_scores",
    "select_query_exact_entropy",
    "map_estimate",
]

DEFAULT_SIZE_LIMIT = 15


class CapacityError(ValueError):
    """The network is too large for exhaustive enumeration."""


@dataclass(frozen=True, eq=False)
class ExactPosterior:
    """Posterior over all states; row ``s`` of ``states`` has bit i = (s >> i) & 1."""

    states: np.ndarray
    log_probs: np.ndarray
    probs: np.ndarray

    def entropy(self) -> float:
        return _entropy_bits(self.probs)


def _entropy_bits(probs: np.ndarray) -> float:
    p = probs[probs > 0]
    return float(max(-(p * np.log2(p)).sum(), 0.0))


def enumerate_states(M: int) -> np.ndarray:
    idx = np.arange(1 << M, dtype=np.int64)
    return ((idx[:, None] >> np.arange(M)) & 1).astype(np.int8)


def _check_size(graph: BipartiteDiagnosisGraph, size_limit: int | None) -> None:
    limit = DEFAULT_SIZE_LIMIT if size_limit is None else size_limit
    if graph.num_objects > limit:
        raise CapacityError(
            f"{graph.num_objects} objects exceeds the enumeration limit of {limit}"
        )


def _masked_log(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(values)


def _log_prior(alpha: np.ndarray, states: np.ndarray, single_fault: bool) -> np.ndarray:
    on = states.astype(bool)
    log_a = _masked_log(alpha)
    log_na = _masked_log(1.0 - alpha)
    lp = np.where(on, log_a, log_na).sum(axis=1)
    if single_fault:
        lp = np.where(on.sum(axis=1) == 1, lp, -np.inf)
    return lp


def log_zero_prob_states(
    model: QmrDtNoiseModel, graph: BipartiteDiagnosisGraph, j: int, states: np.ndarray
) -> np.ndarray:
    """log Pr(Z_j = 0 | x) for every row x of ``states``."""
    graph.check_query(j)
    pa = list(graph.parents[j])
    out = np.full(states.shape[0], float(_masked_log(model.leak_complement[j])))
    if pa:
        log_rho = _masked_log(np.array([model.inhibition[(k, j)] for k in pa]))
        out = out + np.where(states[:, pa].astype(bool), log_rho, 0.0).sum(axis=1)
    return out


def _log_lik(model, graph, j, z, states) -> np.ndarray:
    lz0 = log_zero_prob_states(model, graph, j, states)
    if z == 0:
        return lz0
    with np.errstate(divide="ignore"):
        return np.log1p(-np.exp(lz0))


def _normalized(log_w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    top = log_w.max()
    if not np.isfinite(top):
        raise ContradictoryEvidenceError("observations have zero probability under the model")
    w = np.exp(log_w - top)
    total = w.sum()
    return log_w - top - np.log(total), w / total


def exact_posterior(
    model: QmrDtNoiseModel,
    graph: BipartiteDiagnosisGraph,
    observations: ObservationLog = ObservationLog(),
    size_limit: int | None = None,
    single_fault: bool = False,
) -> ExactPosterior:
    _check_size(graph, size_limit)
    states = enumerate_states(graph.num_objects)
    log_w = _log_prior(model.prior, states, single_fault)
    for j, z in observations:
        log_w = log_w + _log_lik(model, graph, j, z, states)
    log_p, p = _normalized(log_w)
    return ExactPosterior(states, log_p, p)


def exact_marginals(
    model: QmrDtNoiseModel,
    graph: BipartiteDiagnosisGraph,
    observations: ObservationLog = ObservationLog(),
    size_limit: int | None = None,
    single_fault: bool = False,
) -> np.ndarray:
    post = exact_posterior(model, graph, observations, size_limit, single_fault)
    return np.clip(post.probs @ post.states, 0.0, 1.0)


def exact_conditional_entropy(
    model: QmrDtNoiseModel,
    graph: BipartiteDiagnosisGraph,
    observations: ObservationLog = ObservationLog(),
    size_limit: int | None = None,
    single_fault: bool = False,
) -> float:
    """H(X | observed responses) in bits."""
    return exact_posterior(model, graph, observations, size_limit, single_fault).entropy()


def exact_entropy_scores(
    model: QmrDtNoiseModel,
    graph: BipartiteDiagnosisGraph,
    observations: ObservationLog,
    candidates,
    size_limit: int | None = None,
    single_fault: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Expected posterior entropy sum_z Pr(z | evidence) H(X | evidence, z) per candidate."""
    cand = as_candidates(candidates)
    post = exact_posterior(model, graph, observations, size_limit, single_fault)
    scores = np.zeros(cand.size)
    for c, j in enumerate(cand):
        q0 = np.exp(log_zero_prob_states(model, graph, int(j), post.states))
        for lik in (q0, 1.0 - q0):
            w = post.probs * lik
            pz = w.sum()
            if pz > 0:
                scores[c] += pz * _entropy_bits(w / pz)
    return cand, scores


def select_query_exact_entropy(
    model: QmrDtNoiseModel,
    graph: BipartiteDiagnosisGraph,
    observations: ObservationLog,
    candidates,
    size_limit: int | None = None,
    tiebreak_rng: np.random.Generator | None = None,
    single_fault: bool = False,
) -> int:
    cand, scores = exact_entropy_scores(
        model, graph, observations, candidates, size_limit, single_fault
    )
    return argmin_with_ties(cand, scores, tiebreak_rng)


def map_estimate(
    model: QmrDtNoiseModel,
    graph: BipartiteDiagnosisGraph,
    observations: ObservationLog = ObservationLog(),
    size_limit: int | None = None,
    single_fault: bool = False,
) -> np.ndarray:
    """Most probable joint state; ties go to the lexicographically smallest vector."""
    post = exact_posterior(model, graph, observations, size_limit, single_fault)
    top = post.log_probs.max()
    tied = np.flatnonzero(np.isclose(post.log_probs, top, rtol=0.0, atol=1e-12))
    best = min(tied, key=lambda s: tuple(post.states[s]))
    return post.states[best].copy()
