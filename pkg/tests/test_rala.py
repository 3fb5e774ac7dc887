"""Residual adaptive attention blocks against layer-by-layer numpy oracles."""

import numpy as np
import pytest

from hypca.core.layers import Initializer
from hypca.core.ops import shuffle_permutation
from hypca.core.tensor import Tensor
from hypca.rala import Chia, Mshc, Rala, Scala, Scpfa, Shia, shuffle_groups

import oracles


def zero_weights(module):
    """Zero every learned weight (He-normal draws); biases are already zero
    and 'ones'-initialized tensors (BN gamma, channel weights) are kept."""
    for p in module.parameters():
        if p.init.startswith("he-normal"):
            p.data = np.zeros_like(p.data)


# ----- numpy mirrors of each block, built from the oracle primitives -----

def mshc_oracle(m: Mshc, x):
    branches = (oracles.direct_pointwise(
                    x, m.branch_k1.weight.data, m.branch_k1.bias.data)
                + oracles.direct_depthwise(
                    x, m.branch_k3.weight.data, m.branch_k3.bias.data)
                + oracles.direct_depthwise(
                    x, m.branch_k5.weight.data, m.branch_k5.bias.data, dilation=2))
    shuffled = branches[:, shuffle_permutation(x.shape[1], m.groups)]
    y = oracles.direct_depthwise(shuffled, m.post_dwc.weight.data, m.post_dwc.bias.data)
    y = oracles.direct_pointwise(y, m.post_gpc.weight.data, m.post_gpc.bias.data)
    return oracles.direct_depthwise(y, m.post_sdwc.weight.data, m.post_sdwc.bias.data)


def chia_logits_oracle(m: Chia, x):
    pooled = sum(oracles.flat_reduce(x, k) for k in ("GAP", "GMP", "GMN", "GSP"))
    z = pooled[:, :, 0, 0] @ m.fc.weight.data + m.fc.bias.data
    return z[:, :, None, None]


def shia_logits_oracle(m: Shia, x):
    acc = 0.0
    for red, kind in zip(m.reduce, ("AP", "MP", "MN", "SP")):
        pooled = oracles.sliding_pool(x, kind, 3)
        acc = acc + oracles.direct_pointwise(pooled, red.weight.data, red.bias.data)
    return oracles.direct_depthwise(acc, m.conv.weight.data, m.conv.bias.data)


def scpfa_oracle(m: Scpfa, x):
    if m.wiring == "hybrid":
        logits = shia_logits_oracle(m.shia, x) + chia_logits_oracle(m.chia, x)
        return x * oracles.sigmoid_ref(logits)
    y = x * oracles.sigmoid_ref(chia_logits_oracle(m.chia, x))
    return y * oracles.sigmoid_ref(shia_logits_oracle(m.shia, y))


def scala_oracle(m: Scala, x):
    return x + scpfa_oracle(m.scpfa, mshc_oracle(m.mshc, x))


def bn_eval_oracle(bn, x):
    shape = (1, -1, 1, 1)
    inv = 1.0 / np.sqrt(bn.running_var.reshape(shape) + bn.eps)
    return ((x - bn.running_mean.reshape(shape)) * inv * bn.gamma.data.reshape(shape)
            + bn.beta.data.reshape(shape))


def rala_oracle(m: Rala, x):
    h = np.maximum(bn_eval_oracle(m.bn_mid, scala_oracle(m.scala1, x)), 0.0)
    h = scala_oracle(m.scala2, h)
    h = oracles.direct_pointwise(h, m.pc.weight.data, m.pc.bias.data)
    h = bn_eval_oracle(m.bn_out, h)
    return np.maximum(x + h, 0.0)


class TestShuffleGroups:
    def test_rule(self):
        assert shuffle_groups(16) == 4
        assert shuffle_groups(6) == 2
        assert shuffle_groups(5) == 1


class TestMshc:
    def test_zero_init_outputs_zero(self):
        m = Mshc(Initializer(0), "m", 4)
        zero_weights(m)
        x = Tensor(np.random.default_rng(0).standard_normal((1, 4, 6, 6)))
        assert np.array_equal(m(x).data, np.zeros((1, 4, 6, 6)))

    def test_identity_kernel_construction(self):
        # single channel: k=1 branch at weight 1, other branches zero, and
        # delta/identity kernels downstream reproduce the input exactly
        m = Mshc(Initializer(0), "m", 1)
        zero_weights(m)
        m.branch_k1.weight.data = np.ones((1, 1, 1))
        for conv in (m.post_dwc, m.post_sdwc):
            w = np.zeros((1, 3, 3))
            w[0, 1, 1] = 1.0
            conv.weight.data = w
        m.post_gpc.weight.data = np.ones((1, 1, 1))
        x = np.random.default_rng(1).standard_normal((1, 1, 5, 5))
        got = m(Tensor(x)).data
        assert np.allclose(got, x, atol=1e-12)
        assert np.allclose(got, mshc_oracle(m, x), atol=1e-12)

    def test_random_against_composed_oracle(self):
        m = Mshc(Initializer(3), "m", 4)
        x = np.random.default_rng(2).standard_normal((1, 4, 8, 8))
        assert np.abs(m(Tensor(x)).data - mshc_oracle(m, x)).max() < 1e-10

    def test_shape_preserved(self):
        m = Mshc(Initializer(4), "m", 8)
        x = Tensor(np.random.default_rng(3).standard_normal((2, 8, 5, 7)))
        assert m(x).shape == (2, 8, 5, 7)


class TestChia:
    def test_zero_input_zero_fc(self):
        m = Chia(Initializer(0), "c", 3)
        zero_weights(m)
        out = m(Tensor(np.zeros((2, 3, 4, 4))))
        assert np.allclose(out.data, 0.5, atol=0)

    def test_identity_fc_pooled_sum(self):
        # pools of [[1,2],[3,4]] sum to 2.5+4+1+10 = 17.5 -> sigmoid(17.5)
        m = Chia(Initializer(0), "c", 1)
        m.fc.weight.data = np.eye(1)
        x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2))
        got = m(x).item()
        assert abs((1.0 - got) - 2.5109990926928157e-08) < 1e-15

    def test_spatial_permutation_invariance(self):
        m = Chia(Initializer(5), "c", 4)
        rng = np.random.default_rng(6)
        x = rng.standard_normal((1, 4, 4, 4))
        perm = rng.permutation(16)
        xp = x.reshape(1, 4, 16)[:, :, perm].reshape(1, 4, 4, 4)
        assert np.array_equal(m(Tensor(x)).data, m(Tensor(xp)).data)

    def test_random_against_oracle(self):
        m = Chia(Initializer(7), "c", 4)
        x = np.random.default_rng(8).standard_normal((2, 4, 5, 5))
        ref = oracles.sigmoid_ref(chia_logits_oracle(m, x))
        assert np.abs(m(Tensor(x)).data - ref).max() < 1e-12

    def test_range_open_interval(self):
        m = Chia(Initializer(9), "c", 4)
        x = Tensor(np.random.default_rng(10).standard_normal((2, 4, 6, 6)) * 100)
        out = m(x).data
        assert (out > 0).all() and (out < 1).all()


class TestShia:
    def test_zero_conv_half_everywhere(self):
        m = Shia(Initializer(0), "s", 3)
        zero_weights(m)
        out = m(Tensor(np.random.default_rng(1).standard_normal((2, 3, 5, 5))))
        assert np.allclose(out.data, 0.5, atol=0)

    def test_constant_input_constant_interior(self):
        m = Shia(Initializer(2), "s", 2)
        out = m(Tensor(np.full((1, 2, 8, 8), 1.3))).data[0, 0]
        interior = out[2:-2, 2:-2]
        assert np.abs(interior - interior[0, 0]).max() < 1e-12

    def test_random_against_oracle(self):
        m = Shia(Initializer(3), "s", 4)
        x = np.random.default_rng(4).standard_normal((1, 4, 6, 6))
        ref = oracles.sigmoid_ref(shia_logits_oracle(m, x))
        assert np.abs(m(Tensor(x)).data - ref).max() < 1e-10

    def test_output_is_single_map(self):
        m = Shia(Initializer(5), "s", 4)
        assert m(Tensor(np.zeros((2, 4, 6, 6)))).shape == (2, 1, 6, 6)


class TestScpfa:
    def test_zero_init_halves_input_hybrid(self):
        m = Scpfa(Initializer(0), "p", 4, "hybrid")
        zero_weights(m)
        x = np.random.default_rng(1).standard_normal((1, 4, 6, 6))
        assert np.allclose(m(Tensor(x)).data, 0.5 * x, atol=0)

    def test_param_parity_across_wirings(self):
        hy = Scpfa(Initializer(2), "p", 8, "hybrid")
        ca = Scpfa(Initializer(2), "p", 8, "cascaded")
        count = lambda m: sum(p.size for p in m.parameters())
        assert count(hy) == count(ca)

    @pytest.mark.parametrize("wiring", ["hybrid", "cascaded"])
    def test_random_against_oracle(self, wiring):
        m = Scpfa(Initializer(3), "p", 4, wiring)
        x = np.random.default_rng(4).standard_normal((2, 4, 6, 6))
        assert np.abs(m(Tensor(x)).data - scpfa_oracle(m, x)).max() < 1e-10

    def test_unknown_wiring(self):
        with pytest.raises(ValueError):
            Scpfa(Initializer(0), "p", 4, "diagonal")

    def test_both_disabled_is_identity(self):
        m = Scpfa(Initializer(0), "p", 4, "hybrid", use_chia=False, use_shia=False)
        x = Tensor(np.random.default_rng(5).standard_normal((1, 4, 4, 4)))
        assert m(x) is x
        assert not m.parameters()


class TestScala:
    def test_zero_init_exact_identity(self):
        m = Scala(Initializer(0), "s", 4, "hybrid")
        zero_weights(m.mshc)
        x = np.random.default_rng(1).standard_normal((2, 4, 6, 6))
        assert np.array_equal(m(Tensor(x)).data, x)

    def test_not_linear(self):
        m = Scala(Initializer(2), "s", 4, "hybrid")
        x = np.random.default_rng(3).standard_normal((1, 4, 6, 6))
        one = m(Tensor(x)).data
        two = m(Tensor(2.0 * x)).data
        assert np.abs(two - 2.0 * one).max() > 1e-6

    def test_random_against_oracle(self):
        m = Scala(Initializer(4), "s", 4, "hybrid")
        x = np.random.default_rng(5).standard_normal((1, 4, 8, 8))
        assert np.abs(m(Tensor(x)).data - scala_oracle(m, x)).max() < 1e-10


class TestRala:
    def test_zero_init_equals_relu(self):
        m = Rala(Initializer(0), "r", 4).eval()
        zero_weights(m)
        x = np.random.default_rng(1).standard_normal((2, 4, 6, 6))
        assert np.array_equal(m(Tensor(x)).data, np.maximum(x, 0.0))

    def test_zero_init_identity_on_nonneg(self):
        m = Rala(Initializer(0), "r", 4).eval()
        zero_weights(m)
        x = np.abs(np.random.default_rng(2).standard_normal((1, 4, 5, 5)))
        assert np.array_equal(m(Tensor(x)).data, x)

    def test_output_nonnegative(self):
        m = Rala(Initializer(3), "r", 4).eval()
        x = Tensor(np.random.default_rng(4).standard_normal((2, 4, 6, 6)))
        assert m(x).data.min() >= 0.0

    def test_random_against_composition_oracle(self):
        m = Rala(Initializer(5), "r", 4).eval()
        x = np.abs(np.random.default_rng(6).standard_normal((1, 4, 8, 8)))
        assert np.abs(m(Tensor(x)).data - rala_oracle(m, x)).max() < 1e-10

    def test_shape_preserved(self):
        m = Rala(Initializer(7), "r", 8).eval()
        x = Tensor(np.random.default_rng(8).standard_normal((2, 8, 8, 8)))
        assert m(x).shape == (2, 8, 8, 8)
