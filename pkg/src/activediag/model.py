"""Bipartite diagnosis graphs and the QMR-DT noisy-OR response model.

Objects (possible faults) and queries (probes) are indexed from 0. A query
``j`` is sensitive to the objects in ``graph.parents[j]``; its response is 1
(alarm) or 0 (clean) according to

    Pr(Z_j = 0 | x) = rho_0j * prod_{k in pa_j} rho_kj ** x_k

where ``1 - rho_0j`` is the leak probability and ``rho_kj`` the inhibition
probability of edge ``(k, j)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "BipartiteDiagnosisGraph",
    "QmrDtNoiseModel",
    "ObservationLog",
    "conditional_zero_prob",
    "sample_state",
    "sample_response",
    "validate",
]


@dataclass(frozen=True)
class BipartiteDiagnosisGraph:
    """Two-layer graph linking ``num_objects`` objects to queries.

    Parameters
    ----------
    num_objects : int
        Number of objects M.
    parents : sequence of iterables of int
        ``parents[j]`` lists the objects query ``j`` passes through. Order
        inside one parent set is kept (it fixes the file layout) but carries
        no meaning otherwise.
    """

    num_objects: int
    parents: tuple[tuple[int, ...], ...]

    def __init__(self, num_objects: int, parents: Iterable[Iterable[int]]):
        object.__setattr__(self, "num_objects", int(num_objects))
        object.__setattr__(
            self, "parents", tuple(tuple(int(k) for k in pa) for pa in parents)
        )

    @property
    def num_queries(self) -> int:
        return len(self.parents)

    @property
    def max_parent_degree(self) -> int:
        return max((len(pa) for pa in self.parents), default=0)

    @property
    def edges(self) -> list[tuple[int, int]]:
        """All ``(object, query)`` pairs, grouped by query."""
        return [(k, j) for j, pa in enumerate(self.parents) for k in pa]

    def object_degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_objects, dtype=np.int64)
        for pa in self.parents:
            for k in pa:
                deg[k] += 1
        return deg

    def check_query(self, j: int) -> None:
        if not 0 <= j < self.num_queries:
            raise IndexError(f"query id {j} out of range [0, {self.num_queries})")


@dataclass(frozen=True, eq=False)
class QmrDtNoiseModel:
    """Priors, leak complements and per-edge inhibitions.

    ``inhibition`` maps ``(object, query)`` edges to ``rho_kj``. Use
    :meth:`uniform` to broadcast scalars over a graph.
    """

    prior: np.ndarray
    leak_complement: np.ndarray
    inhibition: Mapping[tuple[int, int], float]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        prior = np.array(self.prior, dtype=float)
        leak = np.array(self.leak_complement, dtype=float)
        prior.setflags(write=False)
        leak.setflags(write=False)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "leak_complement", leak)
        object.__setattr__(
            self,
            "inhibition",
            {(int(k), int(j)): float(v) for (k, j), v in dict(self.inhibition).items()},
        )

    @classmethod
    def uniform(
        cls,
        graph: BipartiteDiagnosisGraph,
        prior: float | Sequence[float] = 0.03,
        leak: float = 0.05,
        inhibition: float = 0.05,
    ) -> "QmrDtNoiseModel":
        """Broadcast scalar parameters over ``graph``.

        ``leak`` is the leak probability, so the stored leak complement is
        ``1 - leak``.
        """
        prior_arr = np.broadcast_to(np.asarray(prior, dtype=float), (graph.num_objects,))
        return cls(
            prior=prior_arr.copy(),
            leak_complement=np.full(graph.num_queries, 1.0 - leak),
            inhibition={edge: float(inhibition) for edge in graph.edges},
        )

    def __eq__(self, other):
        if not isinstance(other, QmrDtNoiseModel):
            return NotImplemented
        return (
            np.array_equal(self.prior, other.prior)
            and np.array_equal(self.leak_complement, other.leak_complement)
            and self.inhibition == other.inhibition
        )

    __hash__ = object.__hash__

    def zero_prob_matrix(self, graph: BipartiteDiagnosisGraph) -> np.ndarray:
        """``Q[j, i] = Pr(Z_j = 0 | only object i faulty)``, shape (N, M).

        Cached per graph; the returned array is read-only.
        """
        key = ("q0", id(graph))
        hit = self._cache.get(key)
        if hit is not None and hit[0] is graph:
            return hit[1]
        q = np.repeat(self.leak_complement[:, None], graph.num_objects, axis=1)
        for j, pa in enumerate(graph.parents):
            for k in pa:
                q[j, k] *= self.inhibition[(k, j)]
        q.setflags(write=False)
        self._cache[key] = (graph, q)
        return q


@dataclass(frozen=True)
class ObservationLog:
    """Ordered ``(query, response)`` pairs; a query appears at most once."""

    entries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        entries = tuple((int(j), int(z)) for j, z in self.entries)
        seen = set()
        for j, z in entries:
            if j in seen:
                raise ValueError(f"query {j} observed twice")
            if z not in (0, 1):
                raise ValueError(f"response for query {j} must be 0 or 1, got {z}")
            seen.add(j)
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def queries(self) -> frozenset[int]:
        return frozenset(j for j, _ in self.entries)

    def append(self, j: int, z: int) -> "ObservationLog":
        return ObservationLog(self.entries + ((j, z),))


def conditional_zero_prob(
    model: QmrDtNoiseModel, graph: BipartiteDiagnosisGraph, j: int, x
) -> float:
    """Pr(Z_j = 0 | x) under the noisy-OR model."""
    graph.check_query(j)
    x = np.asarray(x)
    if x.shape != (graph.num_objects,):
        raise ValueError(f"state must have length {graph.num_objects}")
    p = float(model.leak_complement[j])
    for k in graph.parents[j]:
        if x[k]:
            p *= model.inhibition[(k, j)]
    return p


def sample_state(model: QmrDtNoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Draw independent Bernoulli(prior_i) object states."""
    return (rng.random(model.prior.shape[0]) < model.prior).astype(np.int8)


def sample_response(
    model: QmrDtNoiseModel,
    graph: BipartiteDiagnosisGraph,
    j: int,
    x,
    rng: np.random.Generator,
) -> int:
    q0 = conditional_zero_prob(model, graph, j, x)
    return int(rng.random() >= q0)


def _bad_prob(v) -> bool:
    return not (0.0 <= v <= 1.0)


def validate(graph: BipartiteDiagnosisGraph, model: QmrDtNoiseModel | None = None) -> list[str]:
    """Return every invariant violation found; an empty list means well formed."""
    problems = []
    M, N = graph.num_objects, graph.num_queries
    if M < 1:
        problems.append(f"num_objects must be positive, got {M}")
    if N < 1:
        problems.append(f"num_queries must be positive, got {N}")
    for j, pa in enumerate(graph.parents):
        for k in pa:
            if not 0 <= k < M:
                problems.append(f"query {j}: parent index {k} out of range [0, {M})")
        if len(set(pa)) != len(pa):
            problems.append(f"query {j}: duplicate parent indices {sorted(pa)}")
    if model is None:
        return problems

    if model.prior.shape != (M,):
        problems.append(f"prior has shape {model.prior.shape}, expected ({M},)")
    else:
        for i, a in enumerate(model.prior):
            if _bad_prob(a):
                problems.append(f"prior[{i}] = {a} outside [0, 1]")
    if model.leak_complement.shape != (N,):
        problems.append(
            f"leak_complement has shape {model.leak_complement.shape}, expected ({N},)"
        )
    else:
        for j, r in enumerate(model.leak_complement):
            if _bad_prob(r):
                problems.append(f"leak_complement[{j}] = {r} outside [0, 1]")
    edges = set(graph.edges)
    for edge, r in sorted(model.inhibition.items()):
        if edge not in edges:
            problems.append(f"inhibition on non-edge (object {edge[0]}, query {edge[1]})")
        if _bad_prob(r):
            problems.append(f"inhibition{edge} = {r} outside [0, 1]")
    for edge in sorted(edges - set(model.inhibition)):
        problems.append(f"missing inhibition for edge (object {edge[0]}, query {edge[1]})")
    return problems
