"""
Tests for the gradient verification harness.
"""
import numpy as np
import pytest

from src.models.configs import ModelConfig
from src.core import bsrn_model
from src.models.params import init_params
from src.services.gradcheck_service import (
    GradCheckReport,
    GradCheckService,
    RELU_MARGIN,
    corrupt_backward,
    guarded_numeric_gradient,
    numeric_gradient,
    relative_error,
    relu_margin,
)


class TestHelpers:

    def test_relative_error(self):
        a = np.array([3.0, 4.0])
        assert relative_error(a, a) == 0.0
        assert relative_error(a, np.zeros(2)) == pytest.approx(1.0)
        assert relative_error(np.zeros(2), np.zeros(2)) == 0.0

    def test_numeric_gradient_of_quadratic(self):
        x = np.array([0.5, -2.0, 3.0], dtype=np.float64)
        grad = numeric_gradient(lambda: float(np.sum(x ** 2)), x)
        np.testing.assert_allclose(grad, 2 * x, rtol=1e-9)
        np.testing.assert_array_equal(x, [0.5, -2.0, 3.0])

    def test_guarded_gradient_flags_entries_across_a_kink(self):
        x = np.array([0.005, 0.5, -0.5], dtype=np.float64)
        grad, valid = guarded_numeric_gradient(
            lambda: float(np.sum(np.maximum(x, 0.0))), x, lambda: x > 0
        )
        np.testing.assert_array_equal(valid, [False, True, True])
        assert grad[1] == pytest.approx(1.0)
        assert grad[2] == pytest.approx(0.0)

    def test_unguarded_gradient_keeps_every_entry(self):
        x = np.array([0.005, 0.5], dtype=np.float64)
        _, valid = guarded_numeric_gradient(lambda: float(np.sum(np.maximum(x, 0.0))), x)
        assert valid.all()

    def test_report(self):
        report = GradCheckReport(tolerance=1e-2)
        report.errors["a"] = 1e-4
        assert report.passed
        report.errors["b"] = 0.5
        assert report.failures == ["b"]
        assert not report.passed
        assert any("FAIL" in line for line in report.lines())


class TestGradCheckService:

    def test_primitives(self):
        errors = GradCheckService(seed=0).check_primitives()
        assert set(errors) == {
            "primitive/conv2d/input", "primitive/conv2d/weight", "primitive/conv2d/bias",
            "primitive/relu", "primitive/depth_to_space", "primitive/concat_split", "primitive/add",
        }
        for name, err in errors.items():
            assert err < 1e-2, name

    def test_end_to_end_single_scale(self):
        errors = GradCheckService(seed=0).check_end_to_end(scales=(2,))
        names = list(init_params(ModelConfig(c=4, s=4, R=2, r=1, scales=(2,)), 0))
        assert list(errors) == names
        for name, err in errors.items():
            assert err < 1e-2, name

    def test_relu_inputs_separated_from_kink(self):
        service = GradCheckService(seed=0)
        config = ModelConfig(c=4, s=4, R=2, r=1, scales=(2,))
        params = init_params(config, 0)
        x = np.random.default_rng(1).uniform(0.0, 1.0, size=(3, 8, 8)).astype(np.float32)
        service._separate_relu_inputs(x, params)
        assert relu_margin(bsrn_model.forward_tape(x, params, 2)) >= RELU_MARGIN
        signs = np.sign(params["rrb/0/bias"])
        np.testing.assert_array_equal(signs, [1, -1] * 4)

    @pytest.mark.slow
    def test_end_to_end_all_scales(self):
        errors = GradCheckService(seed=3).check_end_to_end()
        assert any(name.startswith("head/x3/") for name in errors)
        for name, err in errors.items():
            assert err < 1e-2, name

    def test_tied_weights(self):
        assert GradCheckService(seed=0).check_tied_weights() < 1e-3

    def test_corrupted_backward_detected(self):
        service = GradCheckService(seed=0, backward_fn=corrupt_backward())
        errors = service.check_end_to_end(scales=(2,))
        failing = [name for name, err in errors.items() if not err < 1e-2]
        assert failing
        assert all(name.startswith("rrb/") for name in failing)

    def test_corrupted_tied_weights_detected(self):
        service = GradCheckService(seed=0, backward_fn=corrupt_backward())
        assert service.check_tied_weights() > 1e-2

    @pytest.mark.slow
    def test_full_run(self):
        report = GradCheckService(seed=0).run()
        assert report.passed
        assert "tied_weights/rrb" in report.errors
