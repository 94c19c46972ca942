import csv
import io
import json
from fractions import Fraction

import numpy as np
import pytest

from activediag.cli import main
from activediag.harness import (
    EPISODE_COLUMNS,
    SUMMARY_COLUMNS,
    DegenerateTruthError,
    ExperimentConfig,
    build_network,
    empirical_auc,
    episode_rng,
    run_episode,
    run_experiment,
    timing_probe,
)
from activediag.model import BipartiteDiagnosisGraph, QmrDtNoiseModel
from activediag.netgen import load_graph, save_graph


def pairwise_auc(scores, truth):
    """All (fault, non-fault) pairs; ties count one half."""
    pos = [s for s, t in zip(scores, truth) if t]
    neg = [s for s, t in zip(scores, truth) if not t]
    wins = sum(Fraction(1) if a > b else Fraction(1, 2) if a == b else 0 for a in pos for b in neg)
    return wins / (len(pos) * len(neg))


class TestEmpiricalAuc:
    def test_perfect(self):
        assert empirical_auc([3, 1, 0, 2], [0, 1, 0, 1]) == 1.0

    def test_inverted(self):
        assert empirical_auc([0, 2, 3, 1], [0, 1, 0, 1]) == 0.0

    def test_degenerate(self):
        with pytest.raises(DegenerateTruthError):
            empirical_auc([0, 1], [0, 0])

    def test_all_tied_is_half(self):
        assert empirical_auc([0, 1, 2], [1, 0, 0], scores=[0.2, 0.2, 0.2]) == 0.5

    def test_random_rankings_average_half(self):
        rng = np.random.default_rng(0)
        truth = np.zeros(100, dtype=int)
        truth[:5] = 1
        vals = [empirical_auc(rng.permutation(100), truth) for _ in range(10000)]
        assert np.mean(vals) == pytest.approx(0.5, abs=0.01)

    def test_matches_pairwise_with_ties(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            M = int(rng.integers(2, 20))
            scores = rng.integers(0, 4, M) / 4
            truth = rng.integers(0, 2, M)
            if truth.all() or not truth.any():
                continue
            order = np.argsort(-scores, kind="stable")
            assert empirical_auc(order, truth, scores) == float(pairwise_auc(scores, truth))

    def test_scores_must_follow_order(self):
        with pytest.raises(ValueError):
            empirical_auc([0, 1], [1, 0], scores=[0.1, 0.9])


def small_config(**kw):
    base = dict(seed=5, selectors=("auc_sf", "entropy_sf", "random"), budget=8,
                realizations=6, num_objects=12, num_queries=15, prior=0.15)
    base.update(kw)
    return ExperimentConfig(**base)


class TestEpisode:
    def test_zero_budget(self):
        cfg = small_config(budget=0)
        g, m = build_network(cfg)
        for r in range(10):
            rec = run_episode(cfg, g, m, "auc_sf", episode_rng(cfg.seed, r))
            if not rec.skipped:
                break
        assert len(rec.steps) == 1 and rec.steps[0].step == 0
        assert rec.prior_auc == 0.5

    def test_noiseless_single_fault_identified(self):
        M = 10
        parents = [[i] for i in range(M)] + [[i, (i + 1) % M] for i in range(M)]
        g = BipartiteDiagnosisGraph(M, parents)
        m = QmrDtNoiseModel.uniform(g, 0.1, 0.0, 0.0)
        cfg = ExperimentConfig(seed=0, selectors=("auc_sf",), budget=g.num_queries)
        done = 0
        for r in range(60):
            rec = run_episode(cfg, g, m, "auc_sf", episode_rng(3, r))
            if rec.skipped or len(rec.faults) != 1:
                continue
            assert rec.aborted is None
            assert rec.steps[-1].empirical_auc == 1.0
            done += 1
        assert done >= 5

    def test_replay_identical(self):
        cfg = small_config()
        g, m = build_network(cfg)
        a = run_episode(cfg, g, m, "auc_sf", episode_rng(1, 2))
        b = run_episode(cfg, g, m, "auc_sf", episode_rng(1, 2))
        assert a == b

    @pytest.mark.parametrize("selector", ["auc_sf", "entropy_sf", "exact_entropy", "exact_auc", "random"])
    def test_no_repeated_queries(self, selector):
        cfg = small_config(budget=15, realizations=3, oracle_entropy=True)
        g, m = build_network(cfg)
        for r in range(3):
            rec = run_episode(cfg, g, m, selector, episode_rng(cfg.seed, r))
            if rec.skipped:
                continue
            assert len(rec.steps) == 16
            assert len(set(rec.queries)) == 15
            assert all(s.exact_entropy is not None for s in rec.steps)

    def test_contradiction_aborts_or_floors(self):
        g = BipartiteDiagnosisGraph(3, [[0], [1], [2]])
        # zero leak and zero inhibition, but the truth is never consistent with single fault
        m = QmrDtNoiseModel.uniform(g, 0.9, 0.0, 0.0)
        for floor in (False, True):
            cfg = ExperimentConfig(seed=0, selectors=("auc_sf",), budget=3, likelihood_floor=floor)
            outcomes = [run_episode(cfg, g, m, "auc_sf", episode_rng(0, r)) for r in range(20)]
            aborted = [rec for rec in outcomes if rec.aborted]
            if floor:
                assert not aborted
            else:
                assert aborted and all("zero likelihood" in rec.aborted for rec in aborted)


class TestExperiment:
    def test_single_realization_summary(self):
        cfg = small_config(realizations=1, selectors=("auc_sf",), seed=2)
        res = run_experiment(cfg)
        rec = res.episodes[0]
        if rec.skipped:
            pytest.skip("seed produced a degenerate truth")
        mean, se, n = res.curve("auc_sf")
        assert mean.tolist() == [s.empirical_auc for s in rec.steps[1:]]
        assert se.tolist() == [0.0] * cfg.budget

    def test_csv_bytes_deterministic(self, tmp_path):
        a = run_experiment(small_config())
        b = run_experiment(small_config())
        assert a.episodes_csv() == b.episodes_csv()
        assert a.summary_csv() == b.summary_csv()

    def test_jobs_do_not_change_output(self):
        a = run_experiment(small_config(realizations=4))
        b = run_experiment(small_config(realizations=4, jobs=2))
        assert a.episodes_csv() == b.episodes_csv()

    def test_headers_and_skips(self, tmp_path):
        res = run_experiment(small_config(prior=0.03, realizations=10))
        res.write(tmp_path / "ep.csv")
        rows = list(csv.reader(open(tmp_path / "ep.csv")))
        assert tuple(rows[0]) == EPISODE_COLUMNS
        assert all(r[7] == "" and r[8] == "" for r in rows[1:])
        summary = list(csv.reader(open(tmp_path / "ep.summary.csv")))
        assert tuple(summary[0]) == SUMMARY_COLUMNS
        meta = json.loads((tmp_path / "ep.meta.json").read_text())
        assert meta["skipped_count"] == len(meta["skipped_realizations"])
        n_ok = 10 - meta["skipped_count"]
        assert all(int(r[4]) == n_ok for r in summary[1:])

    def test_budget_over_queries(self):
        with pytest.raises(ValueError):
            run_experiment(small_config(budget=16))

    def test_unknown_selector(self):
        with pytest.raises(ValueError):
            small_config(selectors=("bpea",))

    def test_file_overrides(self, tmp_path, figure1):
        save_graph(*figure1, tmp_path / "g.bdg")
        cfg = ExperimentConfig(seed=0, graph_path=str(tmp_path / "g.bdg"), leak=0.2)
        g, m = build_network(cfg)
        assert g == figure1[0]
        np.testing.assert_allclose(m.leak_complement, 0.8)
        assert m.inhibition == figure1[1].inhibition


class TestTiming:
    def test_small_is_fast(self):
        row = timing_probe([10], np.random.default_rng(0), repeats=5)[0]
        assert row["median_seconds"] < 1e-3


class TestCli:
    def test_gen_and_run(self, tmp_path, capsys):
        graph = tmp_path / "g.bdg"
        assert main(["gen", "--objects", "12", "--queries", "14", "--seed", "4", "-o", str(graph)]) == 0
        g, m = load_graph(graph)
        assert (g.num_objects, g.num_queries) == (12, 14)
        assert m.leak_complement[0] == 0.95
        out = tmp_path / "ep.csv"
        args = ["run", "--seed", "9", "--graph", str(graph), "--budget", "5",
                "--realizations", "4", "--prior", "0.2", "-o", str(out)]
        assert main(args) == 0
        first = out.read_bytes()
        assert main(args) == 0
        assert out.read_bytes() == first
        assert (tmp_path / "ep.summary.csv").exists()

    def test_oracle_selectors(self, tmp_path):
        out = tmp_path / "ep.csv"
        rc = main(["run", "--seed", "1", "--objects", "8", "--queries", "10", "--budget", "3",
                   "--realizations", "3", "--prior", "0.2", "--oracle-entropy",
                   "--selectors", "exact_entropy", "exact_auc", "-o", str(out)])
        assert rc == 0
        rows = list(csv.DictReader(open(out)))
        assert rows and all(r["exact_entropy"] != "" for r in rows)

    def test_record_time(self, tmp_path):
        out = tmp_path / "ep.csv"
        main(["run", "--seed", "1", "--objects", "10", "--queries", "10", "--budget", "2",
              "--realizations", "2", "--prior", "0.3", "--record-time", "-o", str(out)])
        rows = [r for r in csv.DictReader(open(out)) if r["step"] != "0"]
        assert rows and all(r["select_time_us"].isdigit() for r in rows)

    def test_time(self, capsys):
        assert main(["time", "--sizes", "10", "20", "--repeats", "2"]) == 0
        rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
        assert rows[0] == ["num_objects", "num_queries", "median_seconds"]
        assert [r[0] for r in rows[1:]] == ["10", "20"]

    def test_errors_exit_nonzero(self, tmp_path, capsys):
        bad = tmp_path / "bad.bdg"
        bad.write_text("BDG v1 2 1\nQ 0 0.9\n")
        assert main(["run", "--seed", "1", "--graph", str(bad), "--budget", "1"]) == 1
        assert "line 3" in capsys.readouterr().err
        assert main(["run", "--seed", "1", "--graph", str(tmp_path / "missing.bdg")]) == 1

    def test_seed_required(self):
        with pytest.raises(SystemExit) as exc:
            main(["run"])
        assert exc.value.code != 0
