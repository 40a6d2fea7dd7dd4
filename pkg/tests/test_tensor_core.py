"""
Tests for the primitive forward/backward kernels.
"""
import numpy as np
import pytest

from src.core.tensor_core import (
    ConvKernel,
    add,
    concat_channels,
    conv2d_backward,
    conv2d_forward,
    depth_to_space,
    relu_backward,
    relu_forward,
    space_to_depth,
    split_channels,
)
from src.services.gradcheck_service import numeric_gradient, relative_error
from src.utils.errors import ShapeError


# =============================================================================
# Convolution
# =============================================================================

class TestConv2d:

    def test_identity_kernel(self, rng):
        x = rng.standard_normal((1, 3, 3)).astype(np.float32)
        weights = np.zeros((3, 3, 1, 1), dtype=np.float32)
        weights[1, 1, 0, 0] = 1.0
        out = conv2d_forward(x, ConvKernel(weights, np.zeros(1, dtype=np.float32)))
        np.testing.assert_array_equal(out, x)

    def test_zero_weights_give_bias(self, rng):
        x = rng.standard_normal((2, 4, 5)).astype(np.float32)
        bias = np.array([0.5, -1.0, 3.0], dtype=np.float32)
        out = conv2d_forward(x, ConvKernel(np.zeros((3, 3, 2, 3), dtype=np.float32), bias))
        assert out.shape == (3, 4, 5)
        for o in range(3):
            assert np.all(out[o] == bias[o])

    def test_matches_loop_oracle(self, rng, make_kernel, conv_oracle):
        x = rng.standard_normal((2, 4, 4)).astype(np.float32)
        kernel = make_kernel(2, 3)
        np.testing.assert_allclose(conv2d_forward(x, kernel), conv_oracle(x, kernel), rtol=1e-5, atol=1e-5)

    def test_non_square_matches_oracle(self, rng, make_kernel, conv_oracle):
        x = rng.standard_normal((3, 2, 5)).astype(np.float32)
        kernel = make_kernel(3, 2)
        np.testing.assert_allclose(conv2d_forward(x, kernel), conv_oracle(x, kernel), rtol=1e-5, atol=1e-5)

    def test_linear_in_input_without_bias(self, rng, make_kernel):
        x = rng.standard_normal((2, 5, 5)).astype(np.float32)
        kernel = make_kernel(2, 2)
        kernel = ConvKernel(kernel.weights, np.zeros(2, dtype=np.float32))
        np.testing.assert_allclose(conv2d_forward(2.0 * x, kernel), 2.0 * conv2d_forward(x, kernel), rtol=1e-6)

    def test_channel_mismatch(self, rng, make_kernel):
        with pytest.raises(ShapeError):
            conv2d_forward(rng.standard_normal((3, 4, 4)).astype(np.float32), make_kernel(2, 2))

    def test_zero_spatial(self, make_kernel):
        with pytest.raises(ShapeError):
            conv2d_forward(np.zeros((2, 0, 4), dtype=np.float32), make_kernel(2, 2))

    def test_bad_kernel_shape(self):
        with pytest.raises(ShapeError):
            ConvKernel(np.zeros((5, 5, 1, 1), dtype=np.float32), np.zeros(1, dtype=np.float32))
        with pytest.raises(ShapeError):
            ConvKernel(np.zeros((3, 3, 1, 2), dtype=np.float32), np.zeros(3, dtype=np.float32))


class TestConv2dBackward:

    def test_zero_grad_output(self, rng, make_kernel):
        x = rng.standard_normal((2, 4, 4)).astype(np.float32)
        grad_x, grad_k = conv2d_backward(x, make_kernel(2, 3), np.zeros((3, 4, 4), dtype=np.float32))
        assert not np.any(grad_x)
        assert not np.any(grad_k.weights)
        assert not np.any(grad_k.bias)

    def test_single_pixel(self):
        v = 0.75
        x = np.full((1, 1, 1), v, dtype=np.float32)
        kernel = ConvKernel(np.ones((3, 3, 1, 1), dtype=np.float32), np.zeros(1, dtype=np.float32))
        _, grad_k = conv2d_backward(x, kernel, np.ones((1, 1, 1), dtype=np.float32))
        expected = np.zeros((3, 3, 1, 1), dtype=np.float32)
        expected[1, 1, 0, 0] = v
        np.testing.assert_array_equal(grad_k.weights, expected)
        assert grad_k.bias[0] == 1.0

    def test_bias_gradient_is_spatial_sum(self, rng, make_kernel):
        x = rng.standard_normal((2, 4, 4)).astype(np.float32)
        grad_out = rng.standard_normal((3, 4, 4)).astype(np.float32)
        _, grad_k = conv2d_backward(x, make_kernel(2, 3), grad_out)
        np.testing.assert_allclose(grad_k.bias, grad_out.sum(axis=(1, 2)), rtol=1e-6)

    def test_gradient_shapes(self, rng, make_kernel):
        x = rng.standard_normal((2, 4, 4)).astype(np.float32)
        kernel = make_kernel(2, 3)
        grad_x, grad_k = conv2d_backward(x, kernel, np.ones((3, 4, 4), dtype=np.float32))
        assert grad_x.shape == x.shape
        assert grad_k.weights.shape == kernel.weights.shape
        assert grad_k.bias.shape == kernel.bias.shape

    def test_weight_only_backward(self, rng, make_kernel):
        x = rng.standard_normal((2, 4, 4)).astype(np.float32)
        kernel = make_kernel(2, 3)
        grad_out = rng.standard_normal((3, 4, 4)).astype(np.float32)
        _, full = conv2d_backward(x, kernel, grad_out)
        grad_x, partial = conv2d_backward(x, kernel, grad_out, need_input_grad=False)
        assert grad_x is None
        np.testing.assert_array_equal(partial.weights, full.weights)
        np.testing.assert_array_equal(partial.bias, full.bias)

    def test_finite_differences(self, rng, make_kernel):
        x = rng.standard_normal((3, 5, 4)).astype(np.float32)
        kernel = make_kernel(3, 2)
        upstream = rng.standard_normal((2, 5, 4)).astype(np.float32)

        def loss():
            return float(np.sum(conv2d_forward(x, kernel).astype(np.float64) * upstream))

        grad_x, grad_k = conv2d_backward(x, kernel, upstream)
        assert relative_error(grad_x, numeric_gradient(loss, x)) < 1e-2
        assert relative_error(grad_k.weights, numeric_gradient(loss, kernel.weights)) < 1e-2
        assert relative_error(grad_k.bias, numeric_gradient(loss, kernel.bias)) < 1e-2

    def test_shape_mismatch(self, rng, make_kernel):
        x = rng.standard_normal((2, 4, 4)).astype(np.float32)
        with pytest.raises(ShapeError):
            conv2d_backward(x, make_kernel(2, 3), np.zeros((3, 4, 5), dtype=np.float32))


# =============================================================================
# ReLU, concat/split, depth-to-space, add
# =============================================================================

class TestRelu:

    def test_forward_values(self):
        x = np.array([-1.0, 0.0, 2.0], dtype=np.float32).reshape(1, 1, 3)
        np.testing.assert_array_equal(relu_forward(x).ravel(), [0.0, 0.0, 2.0])

    def test_backward_zero_at_kink(self):
        x = np.array([-1.0, 0.0, 2.0], dtype=np.float32).reshape(1, 1, 3)
        g = np.ones_like(x)
        np.testing.assert_array_equal(relu_backward(x, g).ravel(), [0.0, 0.0, 1.0])

    def test_positive_input_is_identity(self, rng):
        x = rng.uniform(0.1, 2.0, size=(2, 3, 3)).astype(np.float32)
        g = rng.standard_normal(x.shape).astype(np.float32)
        np.testing.assert_array_equal(relu_forward(x), x)
        np.testing.assert_array_equal(relu_backward(x, g), g)


class TestConcatSplit:

    def test_concat_channel_count(self, rng):
        a = rng.standard_normal((64, 2, 2)).astype(np.float32)
        b = rng.standard_normal((64, 2, 2)).astype(np.float32)
        assert concat_channels(a, b).shape == (128, 2, 2)

    def test_round_trip(self, rng):
        a = rng.standard_normal((3, 4, 5)).astype(np.float32)
        b = rng.standard_normal((2, 4, 5)).astype(np.float32)
        a2, b2 = split_channels(concat_channels(a, b), 3)
        np.testing.assert_array_equal(a2, a)
        np.testing.assert_array_equal(b2, b)

    def test_empty_second_operand(self, rng):
        a = rng.standard_normal((3, 4, 4)).astype(np.float32)
        empty = np.zeros((0, 4, 4), dtype=np.float32)
        np.testing.assert_array_equal(concat_channels(a, empty), a)
        head, tail = split_channels(a, 3)
        np.testing.assert_array_equal(head, a)
        assert tail.shape == (0, 4, 4)

    def test_spatial_mismatch(self):
        with pytest.raises(ShapeError):
            concat_channels(np.zeros((1, 2, 2), dtype=np.float32), np.zeros((1, 2, 3), dtype=np.float32))

    def test_split_out_of_range(self):
        with pytest.raises(ShapeError):
            split_channels(np.zeros((2, 2, 2), dtype=np.float32), 3)


class TestDepthToSpace:

    def test_layout(self):
        x = np.array([1.0, 2.0, 3.0, 4.0], dtype=np.float32).reshape(4, 1, 1)
        np.testing.assert_array_equal(depth_to_space(x, 2), [[[1.0, 2.0], [3.0, 4.0]]])

    def test_mapping_formula(self, rng):
        f = 3
        x = rng.standard_normal((2 * f * f, 2, 3)).astype(np.float32)
        out = depth_to_space(x, f)
        for co in range(2):
            for y in range(2 * f):
                for xx in range(3 * f):
                    assert out[co, y, xx] == x[co * f * f + (y % f) * f + (xx % f), y // f, xx // f]

    def test_factor_one_is_identity(self, rng):
        x = rng.standard_normal((3, 4, 4)).astype(np.float32)
        np.testing.assert_array_equal(depth_to_space(x, 1), x)

    @pytest.mark.parametrize("factor", [2, 3])
    def test_inverse(self, rng, factor):
        x = rng.standard_normal((2 * factor * factor, 3, 2)).astype(np.float32)
        np.testing.assert_array_equal(space_to_depth(depth_to_space(x, factor), factor), x)

    def test_preserves_values(self, rng):
        x = rng.standard_normal((8, 3, 3)).astype(np.float32)
        np.testing.assert_array_equal(np.sort(depth_to_space(x, 2).ravel()), np.sort(x.ravel()))

    def test_non_divisible_channels(self):
        with pytest.raises(ShapeError):
            depth_to_space(np.zeros((6, 2, 2), dtype=np.float32), 2)


class TestAdd:

    def test_zero_and_negation(self, rng):
        a = rng.standard_normal((2, 3, 3)).astype(np.float32)
        np.testing.assert_array_equal(add(a, np.zeros_like(a)), a)
        assert not np.any(add(a, -a))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            add(np.zeros((1, 2, 2), dtype=np.float32), np.zeros((1, 2, 3), dtype=np.float32))
