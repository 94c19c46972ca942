import numpy as np
import pytest

from activediag.model import BipartiteDiagnosisGraph, ObservationLog, QmrDtNoiseModel

# the toy network drawn next to the Bayesian network example, 0-based
FIGURE1_PARENTS = [[0], [1, 2], [2, 3, 4], [4]]


@pytest.fixture
def figure1():
    graph = BipartiteDiagnosisGraph(5, FIGURE1_PARENTS)
    return graph, QmrDtNoiseModel.uniform(graph, 0.03, 0.05, 0.05)


def random_instance(rng, max_objects=10, max_queries=15, max_obs=8, prior=None, single_fault_truth=False):
    """Random graph, heterogeneous noise model and an observation log."""
    M = int(rng.integers(2, max_objects + 1))
    N = int(rng.integers(1, max_queries + 1))
    parents = []
    for _ in range(N):
        size = int(rng.integers(0, min(M, 4) + 1))
        parents.append(sorted(rng.choice(M, size=size, replace=False).tolist()))
    graph = BipartiteDiagnosisGraph(M, parents)
    model = QmrDtNoiseModel(
        prior=rng.uniform(0.01, 0.4, M) if prior is None else np.full(M, prior),
        leak_complement=rng.uniform(0.6, 0.99, N),
        inhibition={e: float(rng.uniform(0.01, 0.5)) for e in graph.edges},
    )
    n_obs = int(rng.integers(0, min(N, max_obs) + 1))
    queries = rng.choice(N, size=n_obs, replace=False)
    obs = ObservationLog(tuple((int(j), int(rng.integers(2))) for j in queries))
    return graph, model, obs
