import math
import pathlib

import numpy as np
import pytest

import voxport

REPO = pathlib.Path(__file__).resolve().parents[2]


def blob(n, seed):
    rng = np.random.default_rng(seed)
    pos = rng.normal(size=(n, 3))
    col = rng.integers(0, 256, size=(n, 3), dtype=np.uint8)
    return pos, col


def test_sample_returns_distinct_indices_and_is_seeded():
    pos, col = blob(4000, 1)
    for method in ["urs", "fps", "rs", "idis", "gs", "vs"]:
        a = voxport.sample(pos, col, 256, method=method, cubes=32, seed=3)
        b = voxport.sample(pos, col, 256, method=method, cubes=32, seed=3)
        assert len(a) == 256
        assert len(set(a.tolist())) == 256
        assert np.array_equal(a, b)
    with pytest.raises(voxport.InsufficientPointsError):
        voxport.sample(pos[:10], col[:10], 64, cubes=32)
    with pytest.raises(voxport.ShapeError):
        voxport.sample(pos[:, :2], col, 64)


def test_knn_matches_brute_force():
    pos, _ = blob(500, 2)
    queries, _ = blob(20, 3)
    got = voxport.knn(pos, queries, 5)
    d = ((queries[:, None, :] - pos[None, :, :]) ** 2).sum(-1)
    expected = np.argsort(d, axis=1, kind="stable")[:, :5]
    assert np.array_equal(got, expected)


def test_ifmi_of_a_translated_pair():
    pos, col = blob(5000, 4)
    moved = pos + np.array([0.05, 0.02, 0.0])
    urs = voxport.ifmi(moved, col, pos, col, 128, method="urs", cubes=16, seed=1, thresholds=[0.1, 2.0])
    assert urs == [1.0, 1.0]


def test_temporal_intensity():
    assert voxport.temporal_intensity(0.0) == 1.5
    values = [voxport.temporal_intensity(s) for s in np.linspace(-30, 30, 601)]
    assert all(1.0 < v < 2.0 for v in values)
    assert all(a > b for a, b in zip(values, values[1:]))


def test_point_metrics_hand_case():
    m = voxport.point_metrics(np.array([1, 1, 0, 0]), np.array([1, 0, 1, 0]))
    assert m["miou"] == pytest.approx(1 / 3)
    assert m["oa"] == 0.5
    none = voxport.point_metrics(np.zeros(3), np.zeros(3))
    assert none["precision"] is None and none["recall"] is None


def test_ground_truth_threshold():
    point = np.zeros((1, 3))
    # Users two meters away on the z axis: looking at the origin (beta 0)
    # or away from it (beta 180).
    def users(seeing):
        return [[0.0, 0.0, -2.0, 0.0, 0.0 if i < seeing else 180.0, 0.0] for i in range(8)]

    for seeing in range(9):
        label = voxport.ground_truth(point, users(seeing), freq_threshold=5)[0]
        assert label == (1 if seeing >= 5 else 0)


def test_scene_ply_and_config_round_trip(tmp_path):
    manifest = voxport.generate_scene(tmp_path / "scene", seed=7, frames=2, users=8)
    assert manifest.exists()
    pos, col = voxport.load_ply(tmp_path / "scene" / "frame_000.ply")
    assert pos.shape[1] == 3 and col.dtype == np.uint8 and len(pos) > 10000
    voxport.save_ply(tmp_path / "copy.ply", pos, col, binary=False)
    pos2, col2 = voxport.load_ply(tmp_path / "copy.ply")
    assert np.array_equal(col, col2)
    assert np.allclose(pos, pos2, atol=1e-6)
    with pytest.raises(voxport.IoError):
        voxport.load_ply(tmp_path / "missing.ply")
    text = voxport.load_config(REPO / "configs" / "toy.cfg")
    assert "points = 1024" in text
    assert not math.isnan(float(text.split("lr = ")[1].split()[0]))
