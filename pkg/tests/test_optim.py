"""
Tests for the loss, clipping, Adam and the learning-rate schedule.
"""
import numpy as np
import pytest

from src.core.optim import adam_step, clip_gradient, clip_gradients, grad_norm, l1_loss, lr_schedule
from src.models.configs import TrainConfig
from src.models.state import AdamState
from src.utils.errors import ConfigError, ShapeError


class TestL1Loss:

    def test_identical(self, rng):
        y = rng.uniform(size=(3, 4, 4)).astype(np.float32)
        loss, grad = l1_loss(y, y.copy())
        assert loss == 0.0
        assert not np.any(grad)

    def test_single_pixel(self):
        loss, grad = l1_loss(np.full((1, 1, 1), 0.7, dtype=np.float32), np.full((1, 1, 1), 0.2, dtype=np.float32))
        assert loss == pytest.approx(0.5, abs=1e-6)
        assert grad[0, 0, 0] == 1.0

    def test_channels_summed_not_averaged(self):
        loss, _ = l1_loss(np.full((3, 1, 1), 0.7, dtype=np.float32), np.full((3, 1, 1), 0.2, dtype=np.float32))
        assert loss == pytest.approx(1.5, abs=1e-6)

    def test_loop_oracle(self, rng):
        yhat = rng.uniform(size=(3, 3, 4)).astype(np.float32)
        y = rng.uniform(size=(3, 3, 4)).astype(np.float32)
        expected = 0.0
        expected_grad = np.zeros(y.shape)
        for c in range(3):
            for i in range(3):
                for j in range(4):
                    d = float(yhat[c, i, j]) - float(y[c, i, j])
                    expected += abs(d)
                    expected_grad[c, i, j] = np.sign(d) / 12.0
        loss, grad = l1_loss(yhat, y)
        assert loss == pytest.approx(expected / 12.0, rel=1e-12)
        np.testing.assert_allclose(grad, expected_grad, rtol=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            l1_loss(np.zeros((3, 2, 2), dtype=np.float32), np.zeros((3, 2, 3), dtype=np.float32))


class TestClipGradient:

    def test_below_threshold_unchanged(self):
        g = np.array([2.0, 0.0], dtype=np.float32)
        np.testing.assert_array_equal(clip_gradient(g, 5.0), g)

    def test_scaled_to_threshold(self):
        g = np.array([6.0, 8.0], dtype=np.float32)
        clipped = clip_gradient(g, 5.0)
        np.testing.assert_allclose(clipped, [3.0, 4.0], rtol=1e-6)
        assert grad_norm(clipped) == pytest.approx(5.0, abs=1e-6)

    def test_norm_oracle(self, rng):
        for _ in range(20):
            g = (rng.standard_normal((3, 3, 4, 4)) * rng.uniform(0.01, 3.0)).astype(np.float32)
            assert grad_norm(clip_gradient(g, 5.0)) == pytest.approx(min(grad_norm(g), 5.0), abs=1e-5)

    def test_per_tensor(self):
        grads = {"a": np.full(4, 10.0, dtype=np.float32), "b": np.full(4, 0.1, dtype=np.float32)}
        clipped, norms = clip_gradients(grads, 5.0)
        assert norms["a"] == pytest.approx(20.0)
        assert grad_norm(clipped["a"]) <= 5.0 + 1e-6
        np.testing.assert_array_equal(clipped["b"], grads["b"])

    def test_invalid_theta(self):
        with pytest.raises(ConfigError):
            clip_gradient(np.ones(2, dtype=np.float32), 0.0)


class TestAdam:

    def test_zero_gradients_fresh_state(self, rng):
        params = {"w": rng.standard_normal(5).astype(np.float32)}
        before = params["w"].copy()
        adam_step(params, {"w": np.zeros(5, dtype=np.float32)}, AdamState(), 1e-3)
        np.testing.assert_array_equal(params["w"], before)

    def test_zero_gradients_any_state(self, rng):
        params = {"w": rng.standard_normal(5).astype(np.float32)}
        state = AdamState()
        adam_step(params, {"w": rng.standard_normal(5).astype(np.float32)}, state, 1e-3)
        before = params["w"].copy()
        moments = (state.m["w"].copy(), state.v["w"].copy())
        adam_step(params, {"w": np.zeros(5, dtype=np.float32)}, state, 1e-3)
        adam_step(params, {"w": None}, state, 1e-3)
        np.testing.assert_array_equal(params["w"], before)
        np.testing.assert_array_equal(state.m["w"], moments[0])
        np.testing.assert_array_equal(state.v["w"], moments[1])
        assert state.step == 3

    def test_invalid_learning_rate(self, rng):
        params = {"w": rng.standard_normal(5).astype(np.float32)}
        with pytest.raises(ConfigError):
            adam_step(params, {"w": np.ones(5, dtype=np.float32)}, AdamState(), 0.0)

    def test_first_step_magnitude(self):
        for g in (0.3, -2.0, 50.0):
            params = {"w": np.array([1.0], dtype=np.float32)}
            adam_step(params, {"w": np.array([g], dtype=np.float32)}, AdamState(), 1e-3)
            assert abs(1.0 - params["w"][0]) == pytest.approx(1e-3, rel=1e-3)
            assert np.sign(1.0 - params["w"][0]) == np.sign(g)

    def test_three_step_scalar_oracle(self):
        lr, b1, b2, eps = 1e-2, 0.9, 0.999, 1e-8
        theta, m, v = 0.5, 0.0, 0.0
        grads = [0.4, -0.1, 0.25]
        params = {"w": np.array([theta], dtype=np.float32)}
        state = AdamState()
        for t, g in enumerate(grads, start=1):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            theta -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
            adam_step(params, {"w": np.array([g], dtype=np.float32)}, state, lr)
        assert params["w"][0] == pytest.approx(theta, abs=1e-6)
        assert state.step == 3

    def test_second_moment_non_negative(self, rng):
        params = {"w": rng.standard_normal(10).astype(np.float32)}
        state = AdamState()
        for _ in range(5):
            adam_step(params, {"w": rng.standard_normal(10).astype(np.float32)}, state, 1e-3)
        assert np.all(state.v["w"] >= 0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            adam_step({"w": np.zeros(3, dtype=np.float32)}, {"w": np.ones(4, dtype=np.float32)}, AdamState(), 1e-3)

    def test_unknown_name(self):
        with pytest.raises(ShapeError):
            adam_step({"w": np.zeros(3, dtype=np.float32)}, {"v": np.ones(3, dtype=np.float32)}, AdamState(), 1e-3)


class TestLrSchedule:

    @pytest.mark.parametrize("step, expected", [
        (0, 1e-4), (199_999, 1e-4), (200_000, 5e-5), (999_999, 6.25e-6), (1_000_000, 3.125e-6),
    ])
    def test_published_schedule(self, step, expected):
        assert lr_schedule(step, TrainConfig()) == pytest.approx(expected, rel=1e-12)

    def test_non_increasing(self):
        cfg = TrainConfig(halve_every=7)
        values = [lr_schedule(s, cfg) for s in range(100)]
        assert all(a >= b for a, b in zip(values, values[1:]))
        breaks = [s for s in range(1, 100) if values[s] != values[s - 1]]
        assert all(s % 7 == 0 for s in breaks)

    def test_negative_step(self):
        with pytest.raises(ConfigError):
            lr_schedule(-1, TrainConfig())


class TestTrainConfig:

    def test_defaults(self):
        cfg = TrainConfig()
        assert (cfg.batch, cfg.base_lr, cfg.halve_every, cfg.clip_theta) == (8, 1e-4, 200_000, 5.0)
        assert cfg.patch_size == 32

    @pytest.mark.parametrize("kwargs", [{"batch": 0}, {"clip_theta": 0.0}, {"total_steps": -1}, {"scales": ()}])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            TrainConfig(**kwargs)
