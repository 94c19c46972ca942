"""Simulated diagnosis sessions: sample a truth, query greedily, score the ranking."""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import oracle
from .auc import auc_estimate, rank_objects, select_query_auc, select_query_auc_exact
from .entropy import select_query_entropy_sf
from .model import BipartiteDiagnosisGraph, ObservationLog, QmrDtNoiseModel, sample_state
from .netgen import generate_pa_bdg, load_graph
from .single_fault import (
    LIKELIHOOD_FLOOR,
    ContradictoryEvidenceError,
    init_belief,
    update_belief,
)

log = logging.getLogger(__name__)

__all__ = [
    "SELECTORS",
    "EPISODE_COLUMNS",
    "SUMMARY_COLUMNS",
    "DegenerateTruthError",
    "ExperimentConfig",
    "StepRecord",
    "EpisodeRecord",
    "ExperimentResult",
    "empirical_auc",
    "build_network",
    "episode_rng",
    "run_episode",
    "run_experiment",
    "summarize",
    "timing_probe",
]

SELECTORS = ("auc_sf", "entropy_sf", "exact_entropy", "exact_auc", "random")
EPISODE_COLUMNS = (
    "realization",
    "step",
    "selector",
    "query",
    "response",
    "empirical_auc",
    "estimated_auc",
    "exact_entropy",
    "select_time_us",
)
SUMMARY_COLUMNS = ("selector", "step", "mean_auc", "stderr_auc", "episodes")

DEFAULT_PRIOR = 0.03
DEFAULT_LEAK = 0.05
DEFAULT_INHIBITION = 0.05


class DegenerateTruthError(ValueError):
    """AUC is undefined when the true state has no faults or no working objects."""


def empirical_auc(order, truth, scores=None) -> float:
    """Ground-truth AUC of a ranked list.

    The fraction of (fault, non-fault) pairs where the fault is ranked higher.
    When ``scores`` is given, objects with equal scores form one tied group
    and each tied pair counts one half.
    """
    order = np.asarray(order, dtype=np.int64)
    y = np.asarray(truth)[order].astype(bool)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateTruthError("truth needs at least one fault and one non-fault")
    if scores is None:
        group = np.arange(y.size)
    else:
        s = np.asarray(scores, dtype=float)[order]
        if np.any(np.diff(s) > 0):
            raise ValueError("scores must be nonincreasing along order")
        group = np.concatenate(([0], np.cumsum(s[1:] != s[:-1])))
    pos_g = np.bincount(group, weights=y)
    neg_g = np.bincount(group, weights=~y)
    neg_after = neg_g[::-1].cumsum()[::-1] - neg_g
    # integer-valued sums below stay exact in float64
    num = 2.0 * np.dot(pos_g, neg_after) + np.dot(pos_g, neg_g)
    return float(num / (2.0 * n_pos * n_neg))


@dataclass
class ExperimentConfig:
    seed: int
    selectors: tuple[str, ...] = ("auc_sf", "entropy_sf", "random")
    budget: int = 50
    realizations: int = 200
    graph_path: str | None = None
    num_objects: int = 100
    num_queries: int = 100
    edges_per_query: int = 3
    graph_seed: int | None = None
    prior: float | None = None
    leak: float | None = None
    inhibition: float | None = None
    likelihood_floor: bool = False
    oracle_entropy: bool = False
    oracle_size_limit: int = oracle.DEFAULT_SIZE_LIMIT
    record_time: bool = False
    jobs: int = 1

    def __post_init__(self):
        self.selectors = tuple(self.selectors)
        for s in self.selectors:
            if s not in SELECTORS:
                raise ValueError(f"unknown selector {s!r}; choose from {SELECTORS}")
        if not self.selectors:
            raise ValueError("at least one selector is required")
        if self.budget < 0:
            raise ValueError("budget must be nonnegative")
        if self.realizations < 1:
            raise ValueError("need at least one realization")

    @property
    def floor(self) -> float | None:
        return LIKELIHOOD_FLOOR if self.likelihood_floor else None


@dataclass
class StepRecord:
    step: int
    query: int | None
    response: int | None
    empirical_auc: float
    estimated_auc: float
    exact_entropy: float | None = None
    select_time_us: int | None = None


@dataclass
class EpisodeRecord:
    realization: int
    selector: str
    faults: tuple[int, ...]
    steps: list[StepRecord] = field(default_factory=list)
    skipped: bool = False
    aborted: str | None = None

    @property
    def prior_auc(self) -> float | None:
        return self.steps[0].empirical_auc if self.steps else None

    @property
    def queries(self) -> list[int]:
        return [s.query for s in self.steps[1:]]


def build_network(config: ExperimentConfig) -> tuple[BipartiteDiagnosisGraph, QmrDtNoiseModel]:
    """Load or generate the network; scalar overrides are broadcast over it."""
    if config.graph_path is not None:
        graph, model = load_graph(config.graph_path)
        if config.prior is None and config.leak is None and config.inhibition is None:
            return graph, model
        prior = model.prior if config.prior is None else config.prior
        leak = model.leak_complement if config.leak is None else None
        inhib = model.inhibition if config.inhibition is None else None
        model = QmrDtNoiseModel(
            prior=np.broadcast_to(np.asarray(prior, dtype=float), (graph.num_objects,)).copy(),
            leak_complement=leak if leak is not None else np.full(graph.num_queries, 1.0 - config.leak),
            inhibition=inhib if inhib is not None else {e: config.inhibition for e in graph.edges},
        )
        return graph, model
    gseed = config.seed if config.graph_seed is None else config.graph_seed
    rng = np.random.default_rng(np.random.SeedSequence([gseed, 0x6E6574]))
    graph = generate_pa_bdg(config.num_objects, config.num_queries, config.edges_per_query, rng)
    model = QmrDtNoiseModel.uniform(
        graph,
        prior=DEFAULT_PRIOR if config.prior is None else config.prior,
        leak=DEFAULT_LEAK if config.leak is None else config.leak,
        inhibition=DEFAULT_INHIBITION if config.inhibition is None else config.inhibition,
    )
    return graph, model


def episode_rng(seed: int, realization: int) -> np.random.Generator:
    """Per-realization generator; identical for every selector so truths are paired."""
    return np.random.default_rng(np.random.SeedSequence([seed, realization]))


def _make_selector(name: str, config: ExperimentConfig, graph, model) -> Callable:
    limit = config.oracle_size_limit
    if name == "auc_sf":
        return lambda b, obs, cand, rng: select_query_auc(b, model, graph, cand, rng)
    if name == "entropy_sf":
        return lambda b, obs, cand, rng: select_query_entropy_sf(b, model, graph, cand, rng)
    if name == "exact_entropy":
        return lambda b, obs, cand, rng: oracle.select_query_exact_entropy(
            model, graph, obs, cand, size_limit=limit, tiebreak_rng=rng
        )
    if name == "exact_auc":
        return lambda b, obs, cand, rng: select_query_auc_exact(
            model, graph, obs, cand, size_limit=limit, tiebreak_rng=rng
        )
    if name == "random":
        return lambda b, obs, cand, rng: int(rng.choice(sorted(cand)))
    raise ValueError(f"unknown selector {name!r}")


def _score(belief, truth, config, model, graph, obs) -> tuple[float, float, float | None]:
    post = belief.posterior
    ranked = rank_objects(post)
    emp = empirical_auc(ranked.order, truth, post)
    try:
        est = auc_estimate(ranked, "upper_rect").area_under
    except ValueError:
        est = float("nan")
    ent = None
    if config.oracle_entropy:
        ent = oracle.exact_conditional_entropy(
            model, graph, obs, size_limit=config.oracle_size_limit
        )
    return emp, est, ent


def run_episode(
    config: ExperimentConfig,
    graph: BipartiteDiagnosisGraph,
    model: QmrDtNoiseModel,
    selector: str,
    rng: np.random.Generator,
) -> EpisodeRecord:
    """One session of up to ``config.budget`` greedy queries.

    ``rng`` is split into independent streams for the truth, the response
    noise and tie-breaking. Response noise is one uniform per query, fixed
    for the episode, so selectors run from the same generator see the same
    world.
    """
    truth_rng, noise_rng, tie_rng = rng.spawn(3)
    x = sample_state(model, truth_rng)
    u = noise_rng.random(graph.num_queries)
    rec = EpisodeRecord(-1, selector, tuple(int(i) for i in np.flatnonzero(x)))
    if rec.faults == () or len(rec.faults) == graph.num_objects:
        rec.skipped = True
        return rec

    q0_true = model.leak_complement.copy()
    for j, pa in enumerate(graph.parents):
        for k in pa:
            if x[k]:
                q0_true[j] *= model.inhibition[(k, j)]

    choose = _make_selector(selector, config, graph, model)
    belief = init_belief(model, graph)
    obs = ObservationLog()
    emp, est, ent = _score(belief, x, config, model, graph, obs)
    rec.steps.append(StepRecord(0, None, None, emp, est, ent))

    remaining = set(range(graph.num_queries))
    for t in range(1, min(config.budget, graph.num_queries) + 1):
        try:
            t0 = time.perf_counter_ns()
            j = choose(belief, obs, remaining, tie_rng)
            elapsed = (time.perf_counter_ns() - t0) // 1000
            if j not in remaining:
                raise RuntimeError(f"selector {selector} returned used query {j}")
            z = int(u[j] >= q0_true[j])
            belief = update_belief(belief, model, graph, j, z, floor=config.floor)
            remaining.discard(j)
            obs = obs.append(j, z)
            emp, est, ent = _score(belief, x, config, model, graph, obs)
        except ContradictoryEvidenceError as exc:
            rec.aborted = f"step {t}: {exc}"
            log.warning("realization aborted at step %d: %s", t, exc)
            break
        rec.steps.append(
            StepRecord(t, j, z, emp, est, ent, int(elapsed) if config.record_time else None)
        )
    return rec


def _run_realization(args) -> list[EpisodeRecord]:
    config, graph, model, r = args
    out = []
    for name in config.selectors:
        rec = run_episode(config, graph, model, name, episode_rng(config.seed, r))
        rec.realization = r
        out.append(rec)
    return out


def _num(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    episodes: list[EpisodeRecord]
    summary: list[dict]
    network: dict

    def episodes_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EPISODE_COLUMNS)
        for rec in self.episodes:
            for s in rec.steps:
                w.writerow(
                    [
                        rec.realization,
                        s.step,
                        rec.selector,
                        _num(s.query),
                        _num(s.response),
                        _num(s.empirical_auc),
                        _num(s.estimated_auc),
                        _num(s.exact_entropy),
                        _num(s.select_time_us),
                    ]
                )
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in self.summary:
            w.writerow([_num(row[c]) for c in SUMMARY_COLUMNS])
        return buf.getvalue()

    def metadata(self) -> dict:
        skipped = sorted({r.realization for r in self.episodes if r.skipped})
        aborted = [
            {"realization": r.realization, "selector": r.selector, "reason": r.aborted}
            for r in self.episodes
            if r.aborted
        ]
        return {
            "config": asdict(self.config),
            "network": self.network,
            "likelihood_floor": self.config.floor,
            "skipped_realizations": skipped,
            "skipped_count": len(skipped),
            "aborted_episodes": aborted,
        }

    def curve(self, selector: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(mean, stderr, count) arrays indexed by step - 1."""
        rows = [r for r in self.summary if r["selector"] == selector]
        return (
            np.array([r["mean_auc"] for r in rows]),
            np.array([r["stderr_auc"] for r in rows]),
            np.array([r["episodes"] for r in rows]),
        )

    def write(self, episodes_path, summary_path=None, meta_path=None) -> None:
        episodes_path = Path(episodes_path)
        stem = episodes_path.with_suffix("")
        summary_path = Path(summary_path) if summary_path else Path(f"{stem}.summary.csv")
        meta_path = Path(meta_path) if meta_path else Path(f"{stem}.meta.json")
        episodes_path.write_text(self.episodes_csv(), encoding="utf-8", newline="\n")
        summary_path.write_text(self.summary_csv(), encoding="utf-8", newline="\n")
        meta_path.write_text(
            json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def summarize(episodes: Sequence[EpisodeRecord], selectors: Sequence[str], budget: int) -> list[dict]:
    """Mean and standard error of the empirical AUC at steps 1..budget per selector."""
    rows = []
    for name in selectors:
        recs = [r for r in episodes if r.selector == name and not r.skipped]
        for t in range(1, budget + 1):
            vals = np.array([r.steps[t].empirical_auc for r in recs if len(r.steps) > t])
            if vals.size == 0:
                continue
            se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
            rows.append(
                {
                    "selector": name,
                    "step": t,
                    "mean_auc": float(vals.mean()),
                    "stderr_auc": se,
                    "episodes": int(vals.size),
                }
            )
    return rows


def run_experiment(config: ExperimentConfig, graph=None, model=None) -> ExperimentResult:
    """Run every selector on ``config.realizations`` paired realizations.

    Results are merged in realization order, so the output does not depend on
    ``config.jobs``.
    """
    if graph is None or model is None:
        graph, model = build_network(config)
    if config.budget > graph.num_queries:
        raise ValueError(f"budget {config.budget} exceeds {graph.num_queries} queries")
    tasks = [(config, graph, model, r) for r in range(config.realizations)]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            chunks = list(pool.map(_run_realization, tasks))
    else:
        chunks = [_run_realization(t) for t in tasks]
    episodes = [rec for chunk in chunks for rec in chunk]
    skipped = sum(1 for r in episodes if r.skipped) // len(config.selectors)
    if skipped:
        log.info("skipped %d realizations with degenerate truth", skipped)
    network = {
        "num_objects": graph.num_objects,
        "num_queries": graph.num_queries,
        "max_parent_degree": graph.max_parent_degree,
        "num_edges": len(graph.edges),
    }
    summary = summarize(episodes, config.selectors, min(config.budget, graph.num_queries))
    return ExperimentResult(config, episodes, summary, network)


def timing_probe(
    sizes: Sequence[int],
    rng: np.random.Generator,
    repeats: int = 5,
    edges_per_query: int = 3,
    warmup_observations: int = 5,
) -> list[dict]:
    """Median wall time of one ``select_query_auc`` call on square PA networks.

    Each size gets a fresh graph, a few observed responses so the posterior
    is not flat, and then all remaining queries as candidates.
    """
    rows = []
    for M in sizes:
        graph = generate_pa_bdg(M, M, min(edges_per_query, M), rng)
        model = QmrDtNoiseModel.uniform(graph, DEFAULT_PRIOR, DEFAULT_LEAK, DEFAULT_INHIBITION)
        model.zero_prob_matrix(graph)
        belief = init_belief(model, graph)
        warm = rng.choice(M, size=min(warmup_observations, M - 1), replace=False)
        for j in warm:
            belief = update_belief(belief, model, graph, int(j), int(rng.integers(2)))
        cand = sorted(set(range(M)) - set(int(j) for j in warm))
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            select_query_auc(belief, model, graph, cand, rng)
            times.append(time.perf_counter() - t0)
        rows.append(
            {"num_objects": M, "num_queries": M, "median_seconds": float(np.median(times))}
        )
    return rows
