"""Pair selection: similarity transpose, pruning pipeline, aggregation."""

import numpy as np
import pytest

from adavsr import nn
from adavsr.errors import ConfigError
from adavsr.selection import Tbsm, connection_strength, prune_normalize
from adavsr.tensor import Tensor, finite_diff_check


def np_sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class TestBiLstm:
    def test_single_step(self):
        rng = np.random.default_rng(0)
        bi = nn.BiLSTM(rng, 3, 3)
        out = bi(Tensor(rng.standard_normal((1, 3))))
        assert out.shape == (1, 6)
        assert np.all(np.isfinite(out.data))

    def test_zero_weights_zero_output(self):
        rng = np.random.default_rng(1)
        bi = nn.BiLSTM(rng, 2, 2)
        for cell in (bi.fwd, bi.bwd):
            cell.w_x.data[:] = 0.0
            cell.w_h.data[:] = 0.0
            cell.bias.data[:] = 0.0
        out = bi(Tensor(np.ones((4, 2))))
        np.testing.assert_array_equal(out.data, 0.0)

    def test_two_step_scalar_oracle(self):
        rng = np.random.default_rng(2)
        cell = nn.LSTM(rng, 1, 1)
        wx = cell.w_x.data[0]  # gates [i, f, g, o]
        wh = cell.w_h.data[0]
        b = cell.bias.data
        x = np.array([[0.4], [-0.9]])
        got = cell(Tensor(x)).data

        h = c = 0.0
        want = []
        for t in range(2):
            z = x[t, 0] * wx + h * wh + b
            i, f, g, o = np_sigmoid(z[0]), np_sigmoid(z[1]), np.tanh(z[2]), np_sigmoid(z[3])
            c = f * c + i * g
            h = o * np.tanh(c)
            want.append(h)
        np.testing.assert_allclose(got[:, 0], want, atol=1e-10)


class TestConnectionStrength:
    def test_orthogonal_rows_zero(self):
        eye = Tensor(np.eye(4))
        v = Tensor(np.array([[1.0, 0.0, 0.0, 0.0]]))
        a = Tensor(np.array([[0.0, 1.0, 0.0, 0.0]]))
        beta_va, _ = connection_strength(v, a, eye, eye)
        np.testing.assert_array_equal(beta_va.data, [[0.0]])

    def test_identical_rows_norm_squared(self):
        row = np.array([[1.0, 2.0, -1.0, 0.5]])
        eye = Tensor(np.eye(4))
        beta_va, _ = connection_strength(Tensor(row), Tensor(row), eye, eye)
        want = float((row @ row.T)[0, 0]) / np.sqrt(4.0)
        np.testing.assert_allclose(beta_va.data, [[want]], atol=1e-12)

    def test_transpose_identity_bitwise(self):
        rng = np.random.default_rng(3)
        w1 = Tensor(rng.standard_normal((6, 6)))
        w2 = Tensor(rng.standard_normal((6, 6)))
        v = Tensor(rng.standard_normal((9, 6)))
        a = Tensor(rng.standard_normal((9, 6)))
        beta_va, beta_av = connection_strength(v, a, w1, w2)
        np.testing.assert_array_equal(beta_av.data, beta_va.data.T)


class TestPruneNormalize:
    def test_tau_zero_keeps_support(self):
        rng = np.random.default_rng(4)
        beta = Tensor(rng.uniform(0.1, 1.0, (5, 5)))
        g = prune_normalize(beta, 0.0).data
        np.testing.assert_allclose(g.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(g > 0)

    def test_tau_above_one_zeroes_everything(self):
        rng = np.random.default_rng(5)
        beta = Tensor(rng.standard_normal((6, 6)))
        g = prune_normalize(beta, 1.01).data
        np.testing.assert_array_equal(g, 0.0)

    def test_worked_row(self):
        beta = Tensor(np.array([[0.3, 0.1, -0.2]]))
        g = prune_normalize(beta, 0.095).data
        np.testing.assert_allclose(g, [[0.75, 0.25, 0.0]], atol=1e-12)

    def test_rows_stochastic_or_zero(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            beta = Tensor(rng.standard_normal((4, 7)))
            g = prune_normalize(beta, 0.095).data
            assert np.all(g >= 0)
            sums = g.sum(axis=1)
            ok = np.isclose(sums, 1.0, atol=1e-10) | (sums == 0.0)
            assert np.all(ok)

    def test_support_shrinks_with_tau(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            beta = Tensor(rng.standard_normal((5, 5)))
            taus = sorted(rng.uniform(0, 0.5, 3))
            supports = [prune_normalize(beta, t).data > 0 for t in taus]
            assert np.all(supports[2] <= supports[1])
            assert np.all(supports[1] <= supports[0])

    def test_negative_tau_rejected(self):
        with pytest.raises(ConfigError):
            prune_normalize(Tensor(np.ones((2, 2))), -0.1)


class TestAggregateFuse:
    def test_zero_gamma_identity_fallback(self):
        rng = np.random.default_rng(8)
        mod = Tbsm(rng, 3)
        a = Tensor(rng.standard_normal((4, 6)))
        v = Tensor(rng.standard_normal((4, 6)))
        zero = Tensor(np.zeros((4, 4)))
        a_psp, v_psp = mod.aggregate(a, v, zero, zero)
        np.testing.assert_array_equal(a_psp.data, a.data)
        np.testing.assert_array_equal(v_psp.data, v.data)

    def test_identity_gamma_identity_w2(self):
        rng = np.random.default_rng(9)
        mod = Tbsm(rng, 2)
        mod.w2_v.data[:] = np.eye(4)
        mod.w2_a.data[:] = np.eye(4)
        a = Tensor(rng.standard_normal((3, 4)))
        v = Tensor(rng.standard_normal((3, 4)))
        eye = Tensor(np.eye(3))
        a_psp, v_psp = mod.aggregate(a, v, eye, eye)
        np.testing.assert_allclose(a_psp.data, v.data + a.data, atol=1e-12)
        np.testing.assert_allclose(v_psp.data, a.data + v.data, atol=1e-12)

    def test_aggregate_matrix_oracle(self):
        rng = np.random.default_rng(10)
        mod = Tbsm(rng, 2)
        a = rng.standard_normal((2, 4))
        v = rng.standard_normal((2, 4))
        gva = rng.uniform(0, 1, (2, 2))
        gav = rng.uniform(0, 1, (2, 2))
        a_psp, v_psp = mod.aggregate(Tensor(a), Tensor(v), Tensor(gva), Tensor(gav))
        np.testing.assert_allclose(a_psp.data, gav @ (v @ mod.w2_v.data) + a, atol=1e-10)
        np.testing.assert_allclose(v_psp.data, gva @ (a @ mod.w2_a.data) + v, atol=1e-10)

    def test_fuse_oracle(self):
        rng = np.random.default_rng(11)
        mod = Tbsm(rng, 2)
        a = rng.standard_normal((3, 4))
        v = rng.standard_normal((3, 4))
        got = (mod.fuse_a(Tensor(a)) + mod.fuse_v(Tensor(v))).data
        want = (
            a @ mod.fuse_a.weight.data
            + mod.fuse_a.bias.data
            + v @ mod.fuse_v.weight.data
            + mod.fuse_v.bias.data
        )
        np.testing.assert_allclose(got, want, atol=1e-10)


class TestEndToEnd:
    def test_huge_tau_reduces_to_passthrough(self):
        rng = np.random.default_rng(12)
        mod = Tbsm(rng, 3, tau=1e9)
        audio = Tensor(rng.standard_normal((4, 3)))
        visual = Tensor(rng.standard_normal((4, 3)))
        with_select = mod(audio, visual, select=True)
        without = mod(audio, visual, select=False)
        np.testing.assert_array_equal(with_select.data, without.data)

    def test_gammas_exported(self):
        rng = np.random.default_rng(13)
        mod = Tbsm(rng, 3)
        audio = Tensor(rng.standard_normal((5, 3)))
        visual = Tensor(rng.standard_normal((5, 3)))
        _, gva, gav = mod(audio, visual, return_gammas=True)
        assert gva.shape == (5, 5) and gav.shape == (5, 5)
        assert np.all(gva.data >= 0) and np.all(gav.data >= 0)

    def test_gradient_bilstm_aggregate(self):
        rng = np.random.default_rng(14)
        mod = Tbsm(rng, 3, tau=0.095)
        visual = Tensor(rng.standard_normal((2, 3)))
        x = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
        err = finite_diff_check(lambda t: mod(t, visual).sum(), x)
        assert err < 1e-4
