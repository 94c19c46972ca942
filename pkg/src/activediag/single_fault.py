"""Posterior over the M single-fault hypotheses, kept in the log domain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BipartiteDiagnosisGraph, ObservationLog, QmrDtNoiseModel

__all__ = [
    "DegeneratePriorError",
    "ContradictoryEvidenceError",
    "SingleFaultBelief",
    "init_belief",
    "single_fault_likelihood",
    "update_belief",
    "replay",
    "predictive_response_prob",
]

LIKELIHOOD_FLOOR = 1e-300


class DegeneratePriorError(ValueError):
    """No single-fault hypothesis carries prior mass."""


class ContradictoryEvidenceError(ValueError):
    """Every hypothesis has likelihood exactly zero."""


def _normalize(log_weights: np.ndarray) -> np.ndarray:
    top = log_weights.max()
    w = np.exp(log_weights - top)
    return w / w.sum()


@dataclass(frozen=True, eq=False)
class SingleFaultBelief:
    """Immutable single-fault posterior.

    ``log_weights[i]`` is the unnormalized log posterior of "only object i is
    faulty"; ``posterior`` is its normalized exponential, which under this
    hypothesis space is also the vector of fault marginals.
    """

    log_weights: np.ndarray
    observed: frozenset = frozenset()

    def __post_init__(self):
        lw = np.array(self.log_weights, dtype=float)
        lw.setflags(write=False)
        object.__setattr__(self, "log_weights", lw)
        post = _normalize(lw)
        post.setflags(write=False)
        object.__setattr__(self, "_posterior", post)

    @property
    def posterior(self) -> np.ndarray:
        return self._posterior

    @property
    def num_objects(self) -> int:
        return self.log_weights.shape[0]


def init_belief(model: QmrDtNoiseModel, graph: BipartiteDiagnosisGraph) -> SingleFaultBelief:
    """Prior restricted to single-fault states: weight_i = a_i * prod_{k != i} (1 - a_k)."""
    alpha = model.prior
    if alpha.shape != (graph.num_objects,):
        raise ValueError("prior length does not match the graph")
    with np.errstate(divide="ignore"):
        log_a = np.log(alpha)
        log_not = np.log1p(-alpha)
    finite = np.isfinite(log_not)
    n_certain = int((~finite).sum())
    rest = log_not[finite].sum()
    if n_certain == 0:
        lw = log_a + rest - log_not
    elif n_certain == 1:
        # only the certainly-faulty object survives
        lw = np.where(finite, -np.inf, log_a + rest)
    else:
        lw = np.full_like(alpha, -np.inf)
    if not np.isfinite(lw).any():
        raise DegeneratePriorError("no single-fault hypothesis has positive prior mass")
    return SingleFaultBelief(lw)


def single_fault_likelihood(
    model: QmrDtNoiseModel, graph: BipartiteDiagnosisGraph, j: int, z: int, i: int
) -> float:
    """Pr(Z_j = z | only object i faulty)."""
    graph.check_query(j)
    q0 = float(model.leak_complement[j])
    if i in graph.parents[j]:
        q0 *= model.inhibition[(i, j)]
    return q0 if z == 0 else 1.0 - q0


def _likelihood_row(model, graph, j, z) -> np.ndarray:
    q0 = model.zero_prob_matrix(graph)[j]
    return q0 if z == 0 else 1.0 - q0


def update_belief(
    belief: SingleFaultBelief,
    model: QmrDtNoiseModel,
    graph: BipartiteDiagnosisGraph,
    j: int,
    z: int,
    floor: float | None = None,
) -> SingleFaultBelief:
    """Bayes update by one observed response; returns a new belief.

    With ``floor`` set, likelihoods are clipped from below before the log,
    which keeps the belief defined under contradictory evidence.
    """
    graph.check_query(j)
    if j in belief.observed:
        raise ValueError(f"query {j} already observed")
    if z not in (0, 1):
        raise ValueError(f"response must be 0 or 1, got {z}")
    lik = _likelihood_row(model, graph, j, z)
    if floor is not None:
        lik = np.maximum(lik, floor)
    with np.errstate(divide="ignore"):
        lw = belief.log_weights + np.log(lik)
    if not np.isfinite(lw).any():
        raise ContradictoryEvidenceError(
            f"response {z} to query {j} has zero likelihood under every hypothesis"
        )
    return SingleFaultBelief(lw, belief.observed | {j})


def replay(
    model: QmrDtNoiseModel,
    graph: BipartiteDiagnosisGraph,
    observations: ObservationLog,
    floor: float | None = None,
) -> SingleFaultBelief:
    belief = init_belief(model, graph)
    for j, z in observations:
        belief = update_belief(belief, model, graph, j, z, floor=floor)
    return belief


def predictive_response_prob(
    belief: SingleFaultBelief, model: QmrDtNoiseModel, graph: BipartiteDiagnosisGraph, j: int
) -> tuple[float, float]:
    """(Pr(Z_j = 0 | evidence), Pr(Z_j = 1 | evidence)) as a hypothesis mixture."""
    graph.check_query(j)
    p0 = float(np.dot(belief.posterior, model.zero_prob_matrix(graph)[j]))
    p0 = min(max(p0, 0.0), 1.0)
    return p0, 1.0 - p0
