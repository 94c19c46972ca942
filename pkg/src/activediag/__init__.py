"""Active fault diagnosis on bipartite noisy-OR networks by greedy AUC maximization."""

from .auc import (
    AucEstimate,
    RankedEstimate,
    RocCurve,
    area_above_closed_form,
    area_above_double_sum,
    auc_estimate,
    rank_objects,
    roc_curve,
    select_query_auc,
    select_query_auc_exact,
)
from .entropy import binary_entropy, entropy_sf_score, select_query_entropy_sf
from .harness import ExperimentConfig, empirical_auc, run_episode, run_experiment, timing_probe
from .model import (
    BipartiteDiagnosisGraph,
    ObservationLog,
    QmrDtNoiseModel,
    conditional_zero_prob,
    sample_response,
    sample_state,
    validate,
)
from .netgen import generate_pa_bdg, load_graph, save_graph
from .single_fault import (
    SingleFaultBelief,
    init_belief,
    predictive_response_prob,
    single_fault_likelihood,
    update_belief,
)

__version__ = "0.1.0"
