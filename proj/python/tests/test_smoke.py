import math

import numpy as np
import pytest

import crest


def test_longtail_counts():
    counts = crest.longtail_counts(10, 100.0, 5000)
    assert counts[0] == 5000 and counts[-1] == 50
    assert counts == sorted(counts, reverse=True)
    assert crest.longtail_counts(10, 1.0, 500) == [500] * 10


def test_sampling_rates_and_selection():
    rates = crest.sampling_rates([100, 10], 1.0)
    assert rates == pytest.approx([0.1, 1.0], rel=1e-15)
    labels = [0] * 20 + [1] * 6
    conf = [0.5 + 0.02 * i for i in range(20)] + [0.6] * 6
    chosen = crest.select_pseudo_labeled(labels, conf, rates)
    assert chosen[:2] == [19, 18]
    assert len(chosen) == 8
    mu = crest.sampling_rates(crest.longtail_counts(10, 100.0, 5000), 1 / 3)
    assert mu[0] == pytest.approx(0.01 ** (1 / 3), rel=1e-12)


def test_rebalance():
    assert crest.temperature_schedule(2, 5, 0.5) == pytest.approx(0.8)
    assert crest.scaled_target([0.75, 0.25], 0.5) == pytest.approx([0.6340, 0.3660], abs=1e-4)
    assert crest.align([0.8, 0.2], [0.5, 0.5], [0.6, 0.4]) == pytest.approx([0.7273, 0.2727], abs=1e-4)
    with pytest.raises(ValueError):
        crest.scaled_target([0.5, 0.5], 2.0)


def test_dataset_and_split():
    x, y = crest.synth_dataset([30, 10], dim=3, seed=4)
    assert x.shape == (40, 3)
    assert y.count(0) == 30
    x2, _ = crest.synth_dataset([30, 10], dim=3, seed=4)
    assert np.array_equal(x, x2)
    lab, unl = crest.split_indices(y, 2, 0.1, seed=1)
    assert len(lab) == 4 and len(unl) == 36
    assert sorted(lab + unl) == list(range(40))
    per, mass = crest.resample_weights([100, 10])
    assert mass == pytest.approx([0.5, 0.5])


def test_model_and_metrics():
    params = crest.init_params(3, 4, 3, seed=2)
    assert len(params) == crest.parameter_count(3, 4, 3)
    x = np.random.default_rng(0).normal(size=(5, 3))
    probs = crest.predict_proba(params, 4, 3, x)
    assert probs.shape == (5, 3)
    assert np.allclose(probs.sum(axis=1), 1.0)
    assert crest.grad_check(params, 4, 3, x, [0, 1, 2, 0, 1]) < 1e-4
    truths = [0, 0, 0, 0, 1, 1, 1, 1, 1, 1]
    preds = [0, 0, 0, 1, 0, 0, 1, 1, 1, 1]
    assert crest.confusion(preds, truths, 2).tolist() == [[3, 1], [2, 4]]
    stats = crest.per_class_stats(preds, truths, 2)
    assert stats["precision"] == pytest.approx([0.6, 0.8])
    assert crest.mean_recall(preds, truths, 2) == pytest.approx(0.7083, abs=1e-4)
    assert crest.spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)


def tiny_config(out):
    return {
        "schema_version": 1,
        "seed": 3,
        "output_dir": str(out),
        "mode": "crest_plus",
        "dataset": {"source": "synthetic", "num_classes": 3, "gamma": 4, "n1": 60, "dim": 4,
                    "test_per_class": 20},
        "split": {"beta": 0.2},
        "crest": {"final_generation": 1},
        "ssl": {"steps": 30, "batch_labeled": 8, "unlabeled_ratio": 2, "hidden": 8},
    }


def test_config_validation():
    resolved = crest.resolve_config(tiny_config("x"))
    assert resolved["crest"]["alpha"] == pytest.approx(1 / 3)
    bad = tiny_config("x")
    bad["ssl"]["treshold"] = 0.5
    with pytest.raises(ValueError, match="ssl.treshold"):
        crest.resolve_config(bad)
    with pytest.raises(ValueError):
        crest.resolve_config("{not json")


def test_run_in_memory_and_on_disk(tmp_path):
    cfg = tiny_config(tmp_path / "run")
    reports = crest.run(cfg)
    assert [r["generation"] for r in reports] == [0, 1]
    assert reports[1]["temperature"] == pytest.approx(0.5)
    assert all(0.0 <= r["test_mean_recall"] <= 1.0 for r in reports)
    assert reports == crest.run(cfg)
    out = crest.execute_run(cfg)
    metrics = (out / "metrics.csv").read_text()
    assert metrics.startswith("generation,split,class,")
    svg = crest.render_plot_svg(metrics, "recall_over_generations")
    assert svg.startswith("<svg")
    assert not math.isnan(reports[-1]["unlabeled_mean_recall"])
