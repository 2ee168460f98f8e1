import numpy as np
import pytest

from histadapter import autodiff as ad
from histadapter.autodiff import Tensor, finite_difference_check
from histadapter.cdc import CdcConv
from histadapter.tokens import TokenGrid

from oracles import cdc_difference_loops, conv2d_loops


def make_layer(theta, cin=2, cout=2, seed=0):
    rng = np.random.default_rng(seed)
    layer = CdcConv(cin, cout, rng, theta=theta)
    layer.bias.data = rng.standard_normal(cout)
    return layer


def blend_oracle(x, layer):
    vanilla = conv2d_loops(x, layer.kernel.data, layer.bias.data, 1, 1)
    diff = cdc_difference_loops(x, layer.kernel.data)
    return (1.0 - layer.theta) * vanilla + layer.theta * diff


class TestIdentities:
    def test_theta_zero_is_plain_convolution_bit_exact(self):
        layer = make_layer(theta=0.0)
        rng = np.random.default_rng(1)
        x = Tensor(rng.standard_normal((2, 5, 5)))
        got = layer(TokenGrid(x)).grid.data
        plain = ad.conv2d(x, layer.kernel, layer.bias, stride=1, padding=1).data
        assert np.array_equal(got, plain)

    @pytest.mark.parametrize("value", [0.0, 0.37, -2.5])
    def test_constant_input_difference_term_exactly_zero(self, value):
        layer = make_layer(theta=1.0)
        layer.bias.data[:] = 0.0
        x = Tensor(np.full((2, 6, 7), value))
        # theta=1 output is purely the difference term
        out = layer(TokenGrid(x)).grid.data
        assert np.all(out == 0.0)

    def test_constant_input_interior_value(self):
        # with all neighbors equal, only the vanilla term survives:
        # interior outputs are (1 - theta) * c * sum(kernel) + (1 - theta) * bias
        layer = make_layer(theta=0.7)
        c = 0.83
        x = Tensor(np.full((2, 5, 5), c))
        out = layer(TokenGrid(x)).grid.data
        ksum = layer.kernel.data.sum(axis=(1, 2, 3))
        expected = (1 - 0.7) * (c * ksum + layer.bias.data)
        assert np.allclose(out[:, 2, 2], expected, atol=1e-12)

    def test_shape_preserved(self):
        layer = make_layer(theta=0.5, cin=3, cout=5)
        x = Tensor(np.random.default_rng(2).standard_normal((3, 4, 6)))
        assert layer(TokenGrid(x)).grid.shape == (5, 4, 6)


class TestOracleEquivalence:
    @pytest.mark.parametrize("theta", [0.0, 0.3, 0.7, 1.0])
    def test_matches_per_pixel_loops(self, theta):
        rng = np.random.default_rng(3)
        layer = make_layer(theta=theta, seed=4)
        for _ in range(5):
            x = rng.standard_normal((2, 5, 5))
            got = layer(TokenGrid(Tensor(x))).grid.data
            assert np.abs(got - blend_oracle(x, layer)).max() < 1e-10

    def test_batched_matches_single(self):
        layer = make_layer(theta=0.7)
        rng = np.random.default_rng(5)
        x = rng.standard_normal((3, 2, 4, 4))
        batched = layer(TokenGrid(Tensor(x))).grid.data
        for i in range(3):
            single = layer(TokenGrid(Tensor(x[i]))).grid.data
            assert np.allclose(batched[i], single, atol=1e-13, rtol=0)


class TestValidation:
    @pytest.mark.parametrize("theta", [-0.1, 1.5])
    def test_theta_range_enforced(self, theta):
        with pytest.raises(ValueError, match="theta"):
            make_layer(theta=theta)

    def test_mutated_theta_caught_at_forward(self):
        layer = make_layer(theta=0.5)
        layer.theta = 1.2
        with pytest.raises(ValueError, match="theta"):
            layer(TokenGrid(Tensor(np.zeros((2, 3, 3)))))


class TestGradients:
    def test_fd_all_parameters(self):
        rng = np.random.default_rng(6)
        layer = make_layer(theta=0.7, seed=7)
        x = Tensor(rng.standard_normal((2, 4, 4)), requires_grad=True)
        w = Tensor(rng.standard_normal((2, 4, 4)))
        head = lambda out: ad.sum_all(ad.mul(out, w))

        rep = finite_difference_check(
            lambda t: head(layer.forward_tensor(t)), x, op_name="cdc/x")
        assert rep.passed
        fixed = Tensor(x.data.copy())
        for name, param in layer.parameters().items():
            rep = finite_difference_check(
                lambda t: head(layer.forward_tensor(fixed)), param,
                op_name=f"cdc/{name}")
            assert rep.passed, rep

    def test_class_token_passes_through(self):
        layer = make_layer(theta=0.7)
        cls = Tensor(np.array([1.0, 2.0]))
        grid = TokenGrid(Tensor(np.zeros((2, 3, 3))), class_token=cls)
        out = layer(grid)
        assert out.class_token is cls
