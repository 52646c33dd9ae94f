"""Layer library: registration, shapes, gradient flow, attention math."""

import numpy as np
import pytest

from adavsr import nn, tensor as T
from adavsr.errors import ShapeError
from adavsr.tensor import Tensor, finite_diff_check


class TestModuleBookkeeping:
    def test_named_parameters_recurse(self):
        rng = np.random.default_rng(0)

        class Net(nn.Module):
            def __init__(self):
                super().__init__()
                self.a = nn.Linear(rng, 3, 4)
                self.b = nn.LayerNorm(4)

        names = dict(Net().named_parameters())
        assert set(names) == {"a.weight", "a.bias", "b.gamma", "b.beta"}

    def test_train_eval_propagates(self):
        rng = np.random.default_rng(1)

        class Net(nn.Module):
            def __init__(self):
                super().__init__()
                self.bn = nn.BatchNorm1d(2)

        net = Net()
        net.eval()
        assert not net.bn.training
        net.train()
        assert net.bn.training

    def test_buffers_are_not_parameters(self):
        bn = nn.BatchNorm1d(3)
        assert set(dict(bn.named_buffers())) == {"running_mean", "running_var"}
        assert set(dict(bn.named_parameters())) == {"gamma", "beta"}

    def test_init_deterministic_from_seed(self):
        w1 = nn.Linear(np.random.default_rng(42), 5, 5).weight.data
        w2 = nn.Linear(np.random.default_rng(42), 5, 5).weight.data
        np.testing.assert_array_equal(w1, w2)

    def test_init_bound_scales_with_fan_in(self):
        rng = np.random.default_rng(3)
        lin = nn.Linear(rng, 100, 8)
        assert np.max(np.abs(lin.weight.data)) <= 0.1


class TestLayers:
    def test_linear_shape_and_grad(self):
        rng = np.random.default_rng(4)
        lin = nn.Linear(rng, 6, 3)
        x = Tensor(rng.standard_normal((5, 6)), requires_grad=True)
        out = lin(x)
        assert out.shape == (5, 3)
        assert finite_diff_check(lambda t: lin(t).sum(), x) < 1e-4

    def test_conv1d_layer_length(self):
        rng = np.random.default_rng(5)
        conv = nn.Conv1d(rng, 2, 4, width=3, stride=2, padding=1)
        out = conv(Tensor(rng.standard_normal((10, 2))))
        assert out.shape == (5, 4)

    def test_conv2d_layer_bias_broadcast(self):
        rng = np.random.default_rng(6)
        conv = nn.Conv2d(rng, 1, 3, size=3, stride=2, padding=1)
        out = conv(Tensor(rng.standard_normal((2, 1, 8, 8))))
        assert out.shape == (2, 3, 4, 4)
        # bias must shift each channel uniformly
        conv.bias.data[:] = [1.0, 2.0, 3.0]
        conv.kernel.data[:] = 0.0
        out = conv(Tensor(np.zeros((1, 1, 8, 8))))
        np.testing.assert_allclose(out.data[0, 0], 1.0)
        np.testing.assert_allclose(out.data[0, 2], 3.0)

    def test_batch_norm_running_stats_move(self):
        rng = np.random.default_rng(7)
        bn = nn.BatchNorm1d(2)
        x = Tensor(rng.standard_normal((50, 2)) * 2 + 5)
        bn(x)
        assert np.all(bn.running_mean > 0.3)
        bn.eval()
        before = bn.running_mean.copy()
        bn(x)
        np.testing.assert_array_equal(bn.running_mean, before)

    def test_lstm_shapes_and_forget_bias(self):
        rng = np.random.default_rng(8)
        lstm = nn.LSTM(rng, 3, 5)
        hidden = lstm.hidden
        bias = lstm.bias.data
        # forget-gate block starts around +1, others near zero
        assert np.all(bias[hidden : 2 * hidden] > 0.5)
        out = lstm(Tensor(rng.standard_normal((7, 3))))
        assert out.shape == (7, 5)

    def test_lstm_reverse_flips_time(self):
        rng = np.random.default_rng(9)
        lstm = nn.LSTM(rng, 2, 4)
        x = rng.standard_normal((6, 2))
        fwd = lstm(Tensor(x)).data
        rev = lstm(Tensor(x[::-1].copy()), reverse=False).data
        bwd = lstm(Tensor(x), reverse=True).data
        np.testing.assert_allclose(bwd, rev[::-1], atol=1e-12)
        assert not np.allclose(bwd, fwd)

    def test_bilstm_concat(self):
        rng = np.random.default_rng(10)
        bi = nn.BiLSTM(rng, 3, 4)
        out = bi(Tensor(rng.standard_normal((5, 3))))
        assert out.shape == (5, 8)

    def test_lstm_gradients(self):
        rng = np.random.default_rng(11)
        lstm = nn.LSTM(rng, 2, 3)
        x = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
        assert finite_diff_check(lambda t: lstm(t).sum(), x) < 1e-4
        assert finite_diff_check(lambda w: lstm(x).sum(), lstm.w_h) < 1e-4


class TestAttention:
    def test_uniform_attention_when_scores_equal(self):
        rng = np.random.default_rng(12)
        mha = nn.MultiHeadAttention(rng, 8, 2)
        # zero queries give equal scores, so output is the mean value row
        for lin in (mha.w_q, mha.w_k, mha.w_v, mha.w_o):
            lin.bias.data[:] = 0.0
        mha.w_v.weight.data[:] = np.eye(8)
        mha.w_o.weight.data[:] = np.eye(8)
        q = Tensor(np.zeros((2, 8)))
        kv = Tensor(rng.standard_normal((5, 8)))
        out = mha(q, kv, kv)
        want = np.tile(kv.data.mean(axis=0), (2, 1))
        np.testing.assert_allclose(out.data, want, atol=1e-12)

    def test_causal_mask_blocks_future(self):
        rng = np.random.default_rng(13)
        mha = nn.MultiHeadAttention(rng, 8, 2)
        x = rng.standard_normal((6, 8))
        mask = np.where(np.tril(np.ones((6, 6))) > 0, 0.0, -1e9)
        full = mha(Tensor(x), Tensor(x), Tensor(x), mask=mask).data
        # changing the future must not change earlier outputs
        x2 = x.copy()
        x2[4:] += 10.0
        partial = mha(Tensor(x2), Tensor(x2), Tensor(x2), mask=mask).data
        np.testing.assert_allclose(partial[:4], full[:4], atol=1e-12)

    def test_heads_must_divide_dim(self):
        with pytest.raises(ShapeError):
            nn.MultiHeadAttention(np.random.default_rng(0), 10, 3)

    def test_attention_gradients(self):
        rng = np.random.default_rng(14)
        mha = nn.MultiHeadAttention(rng, 4, 2)
        kv = Tensor(rng.standard_normal((3, 4)))
        q = Tensor(rng.standard_normal((2, 4)), requires_grad=True)
        assert finite_diff_check(lambda t: mha(t, kv, kv).sum(), q) < 1e-4


class TestPositions:
    def test_sinusoid_values(self):
        pe = nn.sinusoidal_positions(4, 6)
        assert pe.shape == (4, 6)
        np.testing.assert_allclose(pe[0, 0::2], 0.0)
        np.testing.assert_allclose(pe[0, 1::2], 1.0)
        np.testing.assert_allclose(pe[2, 0], np.sin(2.0), atol=1e-12)
        np.testing.assert_allclose(pe[3, 1], np.cos(3.0), atol=1e-12)

    def test_odd_dim_rejected(self):
        with pytest.raises(ShapeError):
            nn.sinusoidal_positions(4, 5)
