import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from knockoff_invariance.core import CausalGraph, DataError
from knockoff_invariance.eval import (
    BenchmarkConfig,
    GraphMetrics,
    config_from_dict,
    run_benchmark,
    score,
    strip_timing,
)
from knockoff_invariance.forecaster import ForecastConfig
from knockoff_invariance.inference import DiscoveryConfig

TRUTH = CausalGraph.from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)])
FAST = BenchmarkConfig(DiscoveryConfig(forecaster=ForecastConfig(lag_depth=4, hidden=8, epochs=15)), var_order=2)
TEMPLATE = {"n_nodes": 3, "n_edges": 2, "length": 400}


def test_perfect_prediction():
    m = score(TRUTH, TRUTH)
    assert (m.fpr, m.f_score) == (0.0, 1.0)


def test_complete_prediction():
    m = score(CausalGraph(np.ones((5, 5), dtype=bool)), TRUTH)
    assert (m.tp, m.fp, m.tn, m.fn) == (5, 15, 0, 0)
    assert m.fpr == 1.0 and m.precision == 0.25 and m.recall == 1.0
    assert m.f_score == pytest.approx(0.4)


def test_empty_prediction():
    m = score(CausalGraph.empty(5), TRUTH)
    assert (m.fpr, m.f_score, m.precision) == (0.0, 0.0, 0.0)


def test_zero_division_conventions():
    m = GraphMetrics(0, 0, 0, 0)
    assert (m.fpr, m.precision, m.recall, m.f_score) == (0.0, 0.0, 0.0, 0.0)


def test_size_mismatch():
    with pytest.raises(DataError, match="mismatch"):
        score(CausalGraph.empty(4), TRUTH)


@settings(max_examples=60, deadline=None)
@given(arrays(bool, (5, 5)), arrays(bool, (5, 5)))
def test_metric_identities(pred, truth):
    m = score(CausalGraph(pred), CausalGraph(truth))
    assert m.tp + m.fp + m.tn + m.fn == 20
    for v in (m.fpr, m.precision, m.recall, m.f_score):
        assert 0.0 <= v <= 1.0
    if m.fp + m.tn:
        assert m.fpr + m.tn / (m.fp + m.tn) == pytest.approx(1.0)


def test_one_seed_one_method():
    report = run_benchmark(["knockoff"], TEMPLATE, [0], FAST)
    assert len(report.rows) == 1
    assert "metrics" in report.rows[0]
    assert report.summary()["knockoff"]["n_ok"] == 1


def test_aggregates_recomputable():
    report = run_benchmark(["mean", "var-gc"], TEMPLATE, [0, 1], FAST)
    summary = report.summary()
    for method in ("mean", "var-gc"):
        vals = [r["metrics"]["f_score"] for r in report.rows if r["method"] == method]
        assert summary[method]["f_score_mean"] == pytest.approx(np.mean(vals))
        assert summary[method]["f_score_std"] == pytest.approx(np.std(vals, ddof=1))


def test_failures_recorded_per_cell():
    # VAR(150) on 3 variables needs more than 601 rows
    cfg = BenchmarkConfig(FAST.discovery, var_order=150)
    report = run_benchmark(["uniform", "var-gc"], TEMPLATE, [0], cfg)
    rows = {r["method"]: r for r in report.rows}
    assert "metrics" in rows["uniform"]
    assert "too short" in rows["var-gc"]["error"]
    assert report.summary()["var-gc"]["n_failed"] == 1


def test_deterministic_modulo_timing():
    a = run_benchmark(["knockoff", "ood"], TEMPLATE, [3, 4], FAST)
    b = run_benchmark(["knockoff", "ood"], TEMPLATE, [3, 4], FAST)
    body_a = json.dumps(strip_timing(a.to_dict()), sort_keys=True)
    body_b = json.dumps(strip_timing(b.to_dict()), sort_keys=True)
    assert body_a == body_b
    assert "seconds" not in body_a and "timing" not in body_a


def test_parallel_matches_serial():
    a = run_benchmark(["mean"], TEMPLATE, [0, 1], FAST)
    b = run_benchmark(["mean"], TEMPLATE, [0, 1], FAST, n_jobs=2)
    assert strip_timing(a.to_dict()) == strip_timing(b.to_dict())


def test_input_validation():
    with pytest.raises(DataError, match="unknown method"):
        run_benchmark(["granger"], TEMPLATE, [0], FAST)
    with pytest.raises(DataError, match="seed"):
        run_benchmark(["mean"], TEMPLATE, [], FAST)


def test_config_from_dict():
    methods, template, seeds, cfg = config_from_dict({
        "methods": ["knockoff"],
        "n_seeds": 3,
        "master_seed": 10,
        "template": {"n_nodes": 4, "ranges": {"coupling": [0.8, 0.8]}},
        "forecaster": {"hidden": 16, "seed": 99},
        "window": 30,
        "step": 5,
        "alpha": 0.1,
    })
    assert methods == ["knockoff"] and seeds == [10, 11, 12]
    assert template["ranges"]["coupling"] == (0.8, 0.8)
    assert cfg.discovery.forecaster.hidden == 16
    assert (cfg.discovery.scheme.length, cfg.discovery.scheme.step, cfg.discovery.alpha) == (30, 5, 0.1)
