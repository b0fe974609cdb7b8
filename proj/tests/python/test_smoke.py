import math

import numpy as np
import pytest

import dyttp


@pytest.fixture(scope="module")
def split():
    return dyttp.generate_synthetic(20, seed=3)


def test_generate_split_sizes_and_shapes(split):
    train, val = split
    assert len(train) == 16 and len(val) == 4
    s = train[0]
    assert s.history.shape == (s.num_agents, s.obs_len, 2)
    assert s.future.shape == (s.num_agents, s.pred_len, 2)
    assert s.history_valid.dtype == np.bool_
    assert 0 <= s.focal < s.num_agents
    assert all(points.shape[1] == 2 and points.shape[0] >= 2 for _, points in s.lanes)


def test_generation_is_deterministic(split):
    again = dyttp.generate_synthetic(20, seed=3)
    assert [s.id for s in again[0]] == [s.id for s in split[0]]
    assert all(a == b for a, b in zip(again[0], split[0]))


def test_scenario_container_round_trip(tmp_path, split):
    train, val = split
    path = tmp_path / "data.bin"
    dyttp.save_scenarios(path, train, val, seed=3)
    t2, v2, seed = dyttp.load_scenarios(path)
    assert seed == 3
    assert all(a == b for a, b in zip(t2, train)) and all(a == b for a, b in zip(v2, val))


def test_damaged_container_errors(tmp_path, split):
    train, val = split
    path = tmp_path / "data.bin"
    dyttp.save_scenarios(path, train, val)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) // 2])
    with pytest.raises(dyttp.TruncationError):
        dyttp.load_scenarios(path)
    flipped = bytearray(raw)
    flipped[len(raw) // 2] ^= 0x10
    path.write_bytes(bytes(flipped))
    with pytest.raises(dyttp.CorruptionError):
        dyttp.load_scenarios(path)
    assert issubclass(dyttp.TruncationError, dyttp.FormatError)


def test_model_predict_shapes(split):
    cfg = dyttp.default_model_config()
    model = dyttp.Model(cfg, seed=1)
    assert model.parameter_count() > 0
    s = split[0][0]
    preds = model.predict(s)
    assert len(preds) == s.num_agents
    k = cfg["modes"]
    p = preds[s.focal]
    assert p["locations"].shape == (k, s.pred_len, 2)
    assert np.all(p["scales"] > 0)
    assert math.isclose(float(p["probs"].sum()), 1.0, abs_tol=1e-9)


def test_invalid_config_rejected():
    cfg = dyttp.default_model_config()
    cfg["heads"] = 5
    with pytest.raises(dyttp.Error):
        dyttp.Model(cfg)


def test_checkpoint_predictor_matches_model(tmp_path, split):
    model = dyttp.Model(seed=2)
    path = tmp_path / "a.ckpt"
    model.save_checkpoint(path, cycle=0, epoch=1)
    info = dyttp.checkpoint_info(path)
    assert info["cycle_index"] == 0 and info["epoch"] == 1
    single = dyttp.Predictor([str(path)], "prediction_average", 1)
    both = dyttp.Predictor([str(path), str(path)], "parameter_average")
    assert single.members == 1 and both.members == 1
    s = split[1][0]
    a = single.predict(s)[s.focal]["locations"]
    b = both.predict(s)[s.focal]["locations"]
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    metrics = single.evaluate(split[1])
    assert metrics["count"] == len(split[1])
    assert metrics["min_ade"] >= 0.0 and 0.0 <= metrics["miss_rate"] <= 1.0


def test_architecture_mismatch(tmp_path):
    cfg = dyttp.default_model_config()
    dyttp.Model(cfg).save_checkpoint(tmp_path / "a.ckpt")
    cfg["width"] = 16
    cfg["heads"] = 2
    dyttp.Model(cfg).save_checkpoint(tmp_path / "b.ckpt")
    with pytest.raises(dyttp.CheckpointMismatch):
        dyttp.Predictor([str(tmp_path / "a.ckpt"), str(tmp_path / "b.ckpt")])


def test_metrics_and_schedule():
    gt = np.stack([np.arange(30.0), np.zeros(30)], axis=1)
    locs = np.stack([gt, gt + [0.0, 3.0]])
    assert dyttp.min_ade(locs, gt) == 0.0
    assert dyttp.min_fde(locs[1:], gt) == pytest.approx(3.0)
    assert dyttp.lr_at(1e-5, 3e-3, 8, 0.0) == pytest.approx(3e-3)
    assert dyttp.lr_at(1e-5, 3e-3, 8, 8.0) == pytest.approx(1e-5)
    assert dyttp.lr_at(1e-5, 3e-3, 8, 4.0) == pytest.approx((3e-3 + 1e-5) / 2)


def test_constant_velocity_baseline(split):
    m = dyttp.evaluate_constant_velocity(split[1])
    assert m["count"] == len(split[1])
    assert 0.0 <= m["miss_rate"] <= 1.0
