import json

import numpy as np
import pytest

from futurelens.envs import abr_component_set
from futurelens.nn import forward
from futurelens.predictor import (PredictorError, TrainConfig, head_mean_mse, load,
                                  predict, save, train)
from futurelens.rollouts import RolloutSample, normalize_returns


def toy_dataset(n=32, seed=0, action_dependent=True):
    """Random features; targets depend on the one-hot action so trained heads
    must differ across actions."""
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        f = rng.uniform(0, 1, 18)
        a = np.zeros(5)
        a[rng.integers(5)] = 1.0
        base = rng.uniform(-1, 1, 3)
        t = base + (np.argmax(a) * 0.3 if action_dependent else 0.0)
        samples.append(RolloutSample(features=f, action_encoding=a, target=t,
                                     flavor="onpolicy", trace_id="t", anchor=i))
    return normalize_returns(samples)


OVERFIT_CONFIG = TrainConfig(stage1_lr=0.05, stage1_epochs=200, stage2_epochs=0,
                             batch_size=8, seed=1)


@pytest.fixture(scope="module")
def overfit_result():
    normed, spec = toy_dataset()
    return train(normed, spec, abr_component_set(), OVERFIT_CONFIG), normed, spec


class TestTrain:
    def test_overfits_toy_dataset(self, overfit_result):
        result, normed, _ = overfit_result
        assert head_mean_mse(result.model, normed) < 0.01

    def test_loss_decreases(self, overfit_result):
        result, _, _ = overfit_result
        assert result.stage1_losses[9] < result.stage1_losses[0]

    def test_deterministic_checkpoints(self, tmp_path):
        normed, spec = toy_dataset(n=16)
        cfg = TrainConfig(stage1_epochs=5, stage2_epochs=2, seed=3)
        for i in (0, 1):
            res = train(normed, spec, abr_component_set(), cfg)
            save(res.model, tmp_path / f"m{i}.cbx")
        assert (tmp_path / "m0.cbx").read_bytes() == (tmp_path / "m1.cbx").read_bytes()

    def test_stage2_freezes_trunk(self):
        normed, spec = toy_dataset(n=16)
        cfg1 = TrainConfig(stage1_epochs=5, stage2_epochs=0, seed=7)
        cfg2 = TrainConfig(stage1_epochs=5, stage2_epochs=5, seed=7)
        m1 = train(normed, spec, abr_component_set(), cfg1).model
        m2 = train(normed, spec, abr_component_set(), cfg2).model
        # stage 2 consumes extra rng draws for shuffling, so rerun stage 1
        # alone with the same seed and compare trunks byte-for-byte
        for l1, l2 in zip(m1.trunk.layers, m2.trunk.layers):
            assert np.array_equal(l1.w, l2.w) and np.array_equal(l1.b, l2.b)

    def test_empty_dataset(self):
        _, spec = toy_dataset(n=2)
        with pytest.raises(PredictorError, match="empty"):
            train([], spec, abr_component_set())


class TestPredict:
    def test_pure_and_repeatable(self, overfit_result):
        result, normed, _ = overfit_result
        s = normed[0]
        e1 = predict(result.model, s.features, s.action_encoding)
        e2 = predict(result.model, s.features, s.action_encoding)
        assert np.array_equal(e1.means, e2.means)
        assert np.array_equal(e1.stds, e2.stds)

    def test_stds_positive(self, overfit_result):
        result, normed, _ = overfit_result
        e = predict(result.model, normed[0].features, normed[0].action_encoding)
        assert np.all(e.stds_norm > 0)

    def test_actions_distinguished(self, overfit_result):
        result, normed, _ = overfit_result
        f = normed[0].features
        means = []
        for a in range(5):
            enc = np.zeros(5)
            enc[a] = 1.0
            means.append(predict(result.model, f, enc).means)
        spread = np.ptp(np.stack(means), axis=0)
        assert spread.max() > 1e-3

    def test_total_is_weighted_sum(self, overfit_result):
        result, normed, _ = overfit_result
        e = predict(result.model, normed[0].features, normed[0].action_encoding)
        cs = result.model.component_set
        assert e.total == pytest.approx(float(np.dot(cs.weights, e.means)), abs=1e-9)

    def test_dim_mismatch(self, overfit_result):
        result, _, _ = overfit_result
        with pytest.raises(PredictorError, match="dims"):
            predict(result.model, np.zeros(4), np.zeros(5))


class TestCheckpoint:
    def test_roundtrip_bit_identical_predictions(self, overfit_result, tmp_path, rng):
        result, _, _ = overfit_result
        p = tmp_path / "m.cbx"
        save(result.model, p)
        back = load(p)
        for _ in range(100):
            f = rng.uniform(0, 1, 18)
            a = np.zeros(5)
            a[rng.integers(5)] = 1.0
            e1 = predict(result.model, f, a)
            e2 = predict(back, f, a)
            assert np.array_equal(e1.means, e2.means)
            assert np.array_equal(e1.stds, e2.stds)

    def test_wrong_magic(self, tmp_path):
        p = tmp_path / "bad.cbx"
        p.write_text(json.dumps({"magic": "nope"}))
        with pytest.raises(PredictorError, match="magic"):
            load(p)

    def test_config_hash_preserved(self, overfit_result, tmp_path):
        result, _, _ = overfit_result
        p = tmp_path / "m.cbx"
        save(result.model, p)
        assert load(p).config_hash == OVERFIT_CONFIG.digest()
