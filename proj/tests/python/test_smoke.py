import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

import depthbench as db

DATA = Path(os.environ.get("DEPTHBENCH_DATA", Path(__file__).resolve().parents[2] / "data"))


def test_metrics_match_numpy():
    rng = np.random.default_rng(3)
    gt = rng.uniform(0.5, 8.0, size=(12, 9))
    gt[::4, ::3] = 0.0
    pred = gt * rng.uniform(0.8, 1.25, size=gt.shape)
    pred[gt == 0] = 5.0

    valid = gt > 0
    p, g = pred[valid], gt[valid]
    r = np.log(p) - np.log(g)
    report = db.evaluate_image(pred, gt)
    assert report["valid_pixels"] == valid.sum()
    assert report["rmse"] == pytest.approx(np.sqrt(np.mean((p - g) ** 2)), rel=1e-12)
    assert report["si_rmse"] == pytest.approx(np.sqrt(np.mean(r**2) - np.mean(r) ** 2), rel=1e-9)
    assert report["log10"] == pytest.approx(np.mean(np.abs(np.log10(p) - np.log10(g))), rel=1e-12)
    assert report["rel"] == pytest.approx(np.mean(np.abs(p - g) / g), rel=1e-12)
    assert db.si_rmse(pred * 3.0, gt) == pytest.approx(report["si_rmse"], abs=1e-12)


def test_metric_errors_raise():
    with pytest.raises(db.DepthbenchError):
        db.rmse(np.ones((2, 2)), np.zeros((2, 2)))
    with pytest.raises(db.DepthbenchError):
        db.rmse(np.ones((2, 2)), np.ones((3, 2)))


def test_loss_gradient_against_finite_differences():
    rng = np.random.default_rng(5)
    d = rng.uniform(0.5, 4.0, size=(8, 8))
    ds = rng.uniform(0.5, 4.0, size=(8, 8))
    value, grad = db.scale_invariant_loss(d, ds)
    assert grad.shape == d.shape
    h = 1e-6
    for idx in [(0, 0), (3, 5), (7, 7)]:
        up, down = d.copy(), d.copy()
        up[idx] += h
        down[idx] -= h
        numeric = (db.scale_invariant_loss(up, ds)[0] - db.scale_invariant_loss(down, ds)[0]) / (2 * h)
        assert grad[idx] == pytest.approx(numeric, rel=1e-5, abs=1e-9)
    assert db.scale_invariant_loss(ds, ds)[0] == pytest.approx(0.0, abs=1e-15)


def test_combined_loss_components():
    rng = np.random.default_rng(9)
    d = rng.uniform(0.5, 4.0, size=(16, 16))
    ds = rng.uniform(0.5, 4.0, size=(16, 16))
    fs = rng.normal(size=(4, 4, 3))
    ft = rng.normal(size=(4, 4, 6))
    out = db.combined_smart_loss(d, ds, fs, ft)
    expected = 10 * out["scale_invariant"] + 0.1 * out["gradient_matching"] + 1000 * out["pairwise"]
    assert out["value"] == pytest.approx(expected, rel=1e-12)
    assert out["depth_gradient"].shape == d.shape
    assert out["feature_gradient"].shape == fs.shape
    a = db.affinity_map(fs)
    assert a.shape == (16, 16)
    assert np.allclose(np.diag(a), 1.0)


def test_gradient_suite_passes():
    rows = db.check_gradients(seed=1, trials=2)
    assert len(rows) == 10
    assert all(passed for _, _, passed in rows)


def test_scoring():
    rows = db.published_challenge_results()
    winner = rows[0]
    assert winner["team"] == "Tencent GY-Lab"
    c = 2 ** (-20 * winner["si_rmse"]) / (winner["score"] * winner["runtime_s"])
    assert db.FITTED_NORMALIZATION == pytest.approx(c, rel=1e-12)
    assert db.final_score(winner["si_rmse"], winner["runtime_s"]) == pytest.approx(winner["score"], rel=1e-12)
    with pytest.raises(db.DepthbenchError):
        db.final_score(0.3, 0.0)

    fit = db.fit_normalization_constant(rows)
    flagged = [team for team, _, _, outlier in fit["rows"] if outlier]
    assert flagged == ["CFL2"]
    assert fit["max_relative_deviation"] < 0.01

    board = json.loads(db.render_leaderboard((DATA / "challenge_results.json").read_text(), "json"))
    assert board["rows"][0]["team"] == "Tencent GY-Lab"
    assert math.isclose(board["rows"][0]["final_score"], winner["score"], rel_tol=1e-9)


def test_png_round_trip(tmp_path):
    raw = (np.arange(48, dtype=np.uint16).reshape(6, 8) * 1000)
    path = tmp_path / "d.png"
    db.save_depth_png(path, raw)
    back = db.load_depth_png(path)
    assert back.dtype == np.uint16
    assert np.array_equal(back, raw)
    with pytest.raises(db.DepthbenchError):
        db.load_depth_png(tmp_path / "missing.png")


def test_reference_net():
    net = db.ReferenceNet(seed=0)
    assert 500_000 <= net.parameter_count <= 1_500_000
    assert net.fp32_size_bytes == 4 * net.parameter_count
    rgb = np.random.default_rng(0).integers(0, 256, size=(480, 640, 3), dtype=np.uint8)
    depth = net.forward(rgb)
    assert depth.shape == (480, 640)
    assert np.all(depth > 0)
    assert np.array_equal(depth, net.forward(rgb, threads=2))
    with pytest.raises(db.DepthbenchError):
        net.forward(np.zeros((10, 10, 3), dtype=np.uint8))
