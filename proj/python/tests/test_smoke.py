import json

import numpy as np
import pytest

import dcm_vmr as vmr

TINY = {
    "data": {"synthetic": {"num_train": 40, "num_val": 10, "num_test": 12, "num_clips": 6, "feature_dim": 8}},
    "train": {"d": 8, "num_clips": 6, "feature_dim": 8, "embed_dim": 8, "lstm_layers": 1, "epochs": 1,
              "batch_size": 16},
    "ood_rhos": [10],
    "methods": ["baseline", "dcm", "freq_prior"],
    "seeds": [0],
}


def test_iou():
    assert vmr.iou(0, 2, 1, 3) == pytest.approx(1 / 3)
    assert vmr.iou(0, 1, 1, 2) == 0.0
    with pytest.raises(Exception):
        vmr.iou(2, 1, 0, 1)


def test_candidates_and_labels():
    cells, spans = vmr.candidates(4, 0.5)
    assert len(cells) == 10
    assert cells[0] == (0, 0) and cells[-1] == (3, 3)
    assert spans.shape == (10, 2)
    assert np.allclose(spans[cells.index((1, 2))], [0.5, 1.5])
    labels = np.array(vmr.scaled_labels(0.5, 1.5, 4, 0.5))
    assert labels.max() == pytest.approx(1.0)
    assert labels.min() >= 0.0


def test_positional_embedding():
    e = np.array(vmr.positional_embedding(1, 3, 16))
    assert e.shape == (16,)
    assert np.all(np.abs(e) <= 1.0)
    assert not np.allclose(e, vmr.positional_embedding(1, 4, 16))


def test_distance_correlation():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(50, 3))
    assert vmr.distance_correlation(x, x) == pytest.approx(1.0, abs=1e-8)
    assert vmr.distance_correlation(x, 2 * x + 1) == pytest.approx(1.0, abs=1e-8)
    y = rng.normal(size=(50, 2))
    assert 0.0 <= vmr.distance_correlation(x, y) < 0.5


def test_dataset_freq_prior_and_ood():
    data = vmr.generate_dataset({"num_train": 200, "num_val": 5, "num_test": 5, "num_clips": 8}, seed=1)
    train = data["train"]
    assert len(train["videos"]) == 200
    v = train["videos"][0]
    assert v["features"].ndim == 2
    for _, s, e in v["annotations"]:
        assert 0 <= s < e <= v["duration"] + 1e-9
    scores, best = vmr.freq_prior(train, 8)
    assert sum(scores) == pytest.approx(1.0)
    assert best[0] <= best[1]
    heat = vmr.bias_heatmap(train, 8)
    assert heat.sum() == sum(len(v["annotations"]) for v in train["videos"])
    shifted = vmr.ood_transform(data["test"], 10.0, seed=0)
    for a, b in zip(data["test"]["videos"], shifted["videos"]):
        assert b["duration"] == pytest.approx(a["duration"] + 10.0)
        assert b["annotations"][0][1] == pytest.approx(a["annotations"][0][1] + 10.0)


def test_evaluate():
    m = vmr.evaluate([(0, 2), (0, 1)], [[(0, 2)], [(5, 6), (0, 1.5)]])
    assert m["n_queries"] == 2
    assert m["miou"] == pytest.approx((1.0 + 1 / 1.5) / 2)
    assert m["r1_at"][0.5] == pytest.approx(1.0)
    assert m["r1_at"][0.7] == pytest.approx(0.5)


def test_config_defaults_and_errors():
    c = vmr.experiment_config({})
    assert [m["name"] for m in c["methods"]] == ["baseline", "dcm"]
    assert vmr.experiment_config(c) == c
    with pytest.raises(vmr.ConfigError):
        vmr.experiment_config({"seedz": [1]})


def test_run_experiment(tmp_path):
    report = vmr.run_experiment(TINY, workers=1, out_dir=tmp_path)
    assert (tmp_path / "metrics.csv").exists()
    assert len(report["cells"]) == 3
    again = vmr.run_experiment(TINY)
    assert json.dumps(again["cells"], sort_keys=True) == json.dumps(report["cells"], sort_keys=True)
    assert "dcm" in vmr.summary_table(report)
