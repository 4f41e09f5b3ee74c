"""LSTM and Transformer encoder semantics, oracles, and gradient checks."""

import math

import numpy as np
import pytest

from dualstream.autodiff import (
    Parameter,
    Tensor,
    backward,
    finite_difference_gradient,
    max_relative_error,
    sum_all,
    tanh,
)
from dualstream.encoders import (
    AttentionParams,
    EncoderLayerParams,
    LstmParams,
    TransformerConfig,
    TransformerParams,
    encoder_layer,
    lstm_encode,
    lstm_step,
    multi_head_attention,
    positional_encoding,
    scaled_dot_attention,
    transformer_encode,
)
from dualstream.errors import ConfigError, ShapeError


def zeros_lstm(input_dim, hidden):
    return LstmParams(
        w_ih=Parameter(np.zeros((4 * hidden, input_dim))),
        w_hh=Parameter(np.zeros((4 * hidden, hidden))),
        b_ih=Parameter(np.zeros(4 * hidden)),
        b_hh=Parameter(np.zeros(4 * hidden)),
    )


def scalar_lstm_oracle(xs, weights):
    """Unrolled 1-dim cell computed with plain floats; the independent oracle."""
    wi, wf, wg, wo, ui, uf, ug, uo, bi, bf, bg, bo = weights
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    h = c = 0.0
    for x in xs:
        i = sig(wi * x + ui * h + bi)
        f = sig(wf * x + uf * h + bf)
        g = math.tanh(wg * x + ug * h + bg)
        o = sig(wo * x + uo * h + bo)
        c = f * c + i * g
        h = o * math.tanh(c)
    return h, c


def one_dim_params(weights):
    wi, wf, wg, wo, ui, uf, ug, uo, bi, bf, bg, bo = weights
    return LstmParams(
        w_ih=Parameter(np.array([[wi], [wf], [wg], [wo]])),
        w_hh=Parameter(np.array([[ui], [uf], [ug], [uo]])),
        b_ih=Parameter(np.array([bi, bf, bg, bo])),
        b_hh=Parameter(np.zeros(4)),
    )


class TestLstmStep:
    def test_all_zero_gives_zero_state(self):
        p = zeros_lstm(3, 2)
        h, c = lstm_step(Tensor(np.zeros(3)), Tensor(np.zeros(2)), Tensor(np.zeros(2)), p)
        assert (h.data == 0.0).all()
        assert (c.data == 0.0).all()

    def test_saturated_forget_gate_preserves_cell(self):
        hidden = 3
        p = zeros_lstm(2, hidden)
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1e6  # forget block saturates to 1
        p.b_ih = Parameter(b)
        v = np.array([0.3, -1.2, 2.0])
        _, c = lstm_step(Tensor(np.zeros(2)), Tensor(np.zeros(hidden)), Tensor(v), p)
        assert np.array_equal(c.data, v)

    def test_one_dim_cell_matches_scalar_oracle(self):
        weights = (0.5, -0.3, 0.8, 0.2, -0.7, 0.4, 0.1, -0.5, 0.05, -0.02, 0.3, 0.1)
        p = one_dim_params(weights)
        x = 0.9
        h, c = lstm_step(Tensor([x]), Tensor([0.0]), Tensor([0.0]), p)
        h_ref, c_ref = scalar_lstm_oracle([x], weights)
        assert abs(h.data[0] - h_ref) < 1e-12
        assert abs(c.data[0] - c_ref) < 1e-12

    def test_shape_mismatch(self):
        p = zeros_lstm(3, 2)
        with pytest.raises(ShapeError):
            lstm_step(Tensor(np.zeros(4)), Tensor(np.zeros(2)), Tensor(np.zeros(2)), p)

    def test_cell_growth_bounded_by_one(self):
        rng = np.random.default_rng(3)
        p = LstmParams.init(4, 5, rng)
        c_prev = rng.standard_normal(5) * 3.0
        h, c = lstm_step(
            Tensor(rng.standard_normal(4)), Tensor(rng.standard_normal(5)), Tensor(c_prev), p
        )
        assert (np.abs(c.data) <= np.abs(c_prev) + 1.0).all()
        assert (np.abs(h.data) < 1.0).all()


class TestLstmEncode:
    def test_single_step_equivalence(self):
        rng = np.random.default_rng(5)
        p = LstmParams.init(3, 4, rng)
        x = rng.standard_normal((1, 3))
        encoded = lstm_encode(Tensor(x), p, training=False)
        h, _ = lstm_step(Tensor(x[0]), Tensor(np.zeros(4)), Tensor(np.zeros(4)), p)
        assert np.array_equal(encoded.data, h.data)

    def test_zero_params_give_zero_vector(self):
        p = zeros_lstm(3, 2)
        out = lstm_encode(Tensor(np.random.default_rng(0).standard_normal((5, 3))), p)
        assert (out.data == 0.0).all()

    def test_three_step_unrolled_oracle(self):
        weights = (0.4, -0.6, 0.9, 0.3, 0.2, -0.1, 0.5, -0.4, 0.0, 1.0, -0.2, 0.1)
        xs = [0.5, -1.0, 0.25]
        p = one_dim_params(weights)
        out = lstm_encode(Tensor(np.array(xs)[:, None]), p)
        h_ref, _ = scalar_lstm_oracle(xs, weights)
        assert abs(out.data[0] - h_ref) < 1e-12

    def test_gradient_check_end_to_end(self):
        rng = np.random.default_rng(8)
        p = LstmParams.init(6, 8, rng)
        seq = Tensor(rng.standard_normal((4, 6)))
        params = [p.w_ih, p.w_hh, p.b_ih, p.b_hh]

        def f():
            return sum_all(tanh(lstm_encode(seq, p)))

        backward(f())
        numeric = finite_difference_gradient(f, params)
        for param, n in zip(params, numeric):
            assert max_relative_error(param.grad, n) < 1e-4


class TestPositionalEncoding:
    def test_position_zero(self):
        table = positional_encoding(3, 6).data
        assert (table[0, 0::2] == 0.0).all()
        assert (table[0, 1::2] == 1.0).all()

    def test_range(self):
        table = positional_encoding(50, 16).data
        assert table.min() >= -1.0 and table.max() <= 1.0

    def test_scalar_oracle(self):
        table = positional_encoding(2, 4).data
        assert abs(table[1, 0] - math.sin(1.0)) < 1e-12
        assert abs(table[1, 0] - 0.84147) < 1e-5
        assert abs(table[1, 1] - math.cos(1.0)) < 1e-12

    def test_odd_width_rejected(self):
        with pytest.raises(ConfigError):
            positional_encoding(4, 5)


def np_softmax_rows(x):
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


class TestScaledDotAttention:
    def test_single_position_returns_value_row(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal((1, 3))
        out, weights = scaled_dot_attention(
            Tensor(rng.standard_normal((1, 2))), Tensor(rng.standard_normal((1, 2))), Tensor(v)
        )
        assert np.array_equal(out.data, v)
        assert weights.data.tolist() == [[1.0]]

    def test_identical_keys_average_values(self):
        rng = np.random.default_rng(1)
        k = np.tile(rng.standard_normal((1, 2)), (4, 1))
        v = rng.standard_normal((4, 3))
        out, _ = scaled_dot_attention(Tensor(rng.standard_normal((4, 2))), Tensor(k), Tensor(v))
        assert np.allclose(out.data, np.tile(v.mean(axis=0), (4, 1)), atol=1e-12)

    def test_uniform_two_position_case(self):
        out, _ = scaled_dot_attention(
            Tensor([[0.0], [0.0]]), Tensor([[0.0], [0.0]]), Tensor([[2.0], [4.0]])
        )
        assert np.allclose(out.data, [[3.0], [3.0]], atol=1e-15)

    def test_random_case_matches_direct_formula(self):
        rng = np.random.default_rng(2)
        q, k = rng.standard_normal((3, 4)), rng.standard_normal((3, 4))
        v = rng.standard_normal((3, 5))
        out, weights = scaled_dot_attention(Tensor(q), Tensor(k), Tensor(v))
        expected_w = np_softmax_rows(q @ k.T / np.sqrt(4))
        assert np.abs(weights.data - expected_w).max() < 1e-12
        assert np.abs(out.data - expected_w @ v).max() < 1e-12

    def test_weight_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        _, weights = scaled_dot_attention(
            Tensor(rng.standard_normal((5, 3))),
            Tensor(rng.standard_normal((5, 3))),
            Tensor(rng.standard_normal((5, 2))),
        )
        assert np.abs(weights.data.sum(axis=1) - 1.0).max() < 1e-9

    def test_key_scaling_preserves_row_argmax(self):
        rng = np.random.default_rng(4)
        q, k = rng.standard_normal((4, 3)), rng.standard_normal((4, 3))
        v = rng.standard_normal((4, 2))
        _, w1 = scaled_dot_attention(Tensor(q), Tensor(k), Tensor(v))
        _, w2 = scaled_dot_attention(Tensor(q), Tensor(3.5 * k), Tensor(v))
        assert np.array_equal(w1.data.argmax(axis=1), w2.data.argmax(axis=1))


def identity_attention(d_model, heads=1):
    return AttentionParams(
        w_q=Parameter(np.zeros((d_model, d_model))),
        w_k=Parameter(np.zeros((d_model, d_model))),
        w_v=Parameter(np.eye(d_model)),
        w_o=Parameter(np.eye(d_model)),
        heads=heads,
    )


class TestMultiHeadAttention:
    def test_single_head_equals_plain_attention(self):
        rng = np.random.default_rng(5)
        p = AttentionParams.init(4, 1, rng)
        x = rng.standard_normal((3, 4))
        out = multi_head_attention(Tensor(x), p)
        plain, _ = scaled_dot_attention(
            Tensor(x) @ p.w_q, Tensor(x) @ p.w_k, Tensor(x) @ p.w_v
        )
        expected = plain.data @ p.w_o.data
        assert np.abs(out.data - expected).max() < 1e-12

    def test_uniform_attention_means_columns(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((5, 4))
        out = multi_head_attention(Tensor(x), identity_attention(4, heads=2))
        assert np.allclose(out.data, np.tile(x.mean(axis=0), (5, 1)), atol=1e-12)

    def test_matches_per_head_loop_oracle(self):
        rng = np.random.default_rng(7)
        d_model, heads = 4, 2
        p = AttentionParams.init(d_model, heads, rng)
        x = rng.standard_normal((2, d_model))
        out = multi_head_attention(Tensor(x), p)

        q, k, v = x @ p.w_q.data, x @ p.w_k.data, x @ p.w_v.data
        d_k = d_model // heads
        pieces = []
        for i in range(heads):
            s = slice(i * d_k, (i + 1) * d_k)
            w = np_softmax_rows(q[:, s] @ k[:, s].T / np.sqrt(d_k))
            pieces.append(w @ v[:, s])
        expected = np.concatenate(pieces, axis=1) @ p.w_o.data
        assert np.abs(out.data - expected).max() < 1e-12

    def test_indivisible_width_rejected(self):
        with pytest.raises(ConfigError):
            AttentionParams.init(6, 4, np.random.default_rng(0))


def np_layer_norm(x, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(x.var(axis=-1, keepdims=True) + eps)


class TestEncoderLayer:
    def test_output_shape(self):
        rng = np.random.default_rng(8)
        p = EncoderLayerParams.init(8, 2, 16, rng)
        out = encoder_layer(Tensor(rng.standard_normal((5, 8))), p)
        assert out.shape == (5, 8)

    def test_zero_weights_give_double_layer_norm(self):
        d_model = 6
        p = EncoderLayerParams.init(d_model, 2, 12, np.random.default_rng(9))
        for w in (p.attn.w_q, p.attn.w_k, p.attn.w_v, p.attn.w_o,
                  p.ffn_w1, p.ffn_b1, p.ffn_w2, p.ffn_b2):
            w.data[...] = 0.0
        x = np.random.default_rng(10).standard_normal((4, d_model))
        out = encoder_layer(Tensor(x), p)
        expected = np_layer_norm(np_layer_norm(x))
        assert np.abs(out.data - expected).max() < 1e-12

    def test_gradient_check_through_full_layer(self):
        rng = np.random.default_rng(11)
        p = EncoderLayerParams.init(8, 2, 16, rng)
        x = Tensor(rng.standard_normal((3, 8)))
        params = [param for _, param in p.named_parameters("layer")]

        def f():
            return sum_all(tanh(encoder_layer(x, p)))

        backward(f())
        numeric = finite_difference_gradient(f, params)
        for param, n in zip(params, numeric):
            assert max_relative_error(param.grad, n) < 1e-4


def toy_transformer(input_dim=6, d_model=8, pooling="mean", pe=True, seed=12,
                    n_layers=2, pe_max_len=16):
    cfg = TransformerConfig(
        n_layers=n_layers, heads=2, d_model=d_model, d_ff=16,
        pooling=pooling, pe_max_len=pe_max_len, positional_encoding=pe,
    )
    return TransformerParams.init(input_dim, cfg, np.random.default_rng(seed))


class TestTransformerEncode:
    def test_single_position_mean_pooling(self):
        params = toy_transformer()
        rng = np.random.default_rng(13)
        seq = Tensor(rng.standard_normal((1, 6)))
        pooled = transformer_encode(seq, params)
        assert pooled.shape == (8,)

    def test_permutation_invariance_without_positions(self):
        params = toy_transformer(pe=False)
        rng = np.random.default_rng(14)
        x = rng.standard_normal((5, 6))
        perm = rng.permutation(5)
        pooled = transformer_encode(Tensor(x), params)
        permuted = transformer_encode(Tensor(x[perm]), params)
        assert np.abs(pooled.data - permuted.data).max() < 1e-12

    def test_positions_break_permutation_invariance(self):
        params = toy_transformer(pe=True)
        rng = np.random.default_rng(15)
        x = rng.standard_normal((5, 6))
        pooled = transformer_encode(Tensor(x), params)
        rolled = transformer_encode(Tensor(np.roll(x, 1, axis=0)), params)
        assert np.abs(pooled.data - rolled.data).max() > 1e-6

    def test_cls_pooling_and_length_guard(self):
        params = toy_transformer(pooling="cls", pe_max_len=4)
        rng = np.random.default_rng(16)
        out = transformer_encode(Tensor(rng.standard_normal((3, 6))), params)
        assert out.shape == (8,)
        with pytest.raises(ConfigError):
            transformer_encode(Tensor(rng.standard_normal((4, 6))), params)

    def test_attention_rows_sum_to_one_every_head_and_layer(self):
        params = toy_transformer()
        rng = np.random.default_rng(17)
        weights = []
        transformer_encode(Tensor(rng.standard_normal((5, 6))), params, weights_out=weights)
        assert len(weights) == 2 * 2  # layers x heads
        for w in weights:
            assert np.abs(w.data.sum(axis=1) - 1.0).max() < 1e-9

    def test_gradient_check_end_to_end(self):
        params = toy_transformer(n_layers=1)
        rng = np.random.default_rng(18)
        seq = Tensor(rng.standard_normal((4, 6)))
        named = params.named_parameters("tf")

        def f():
            return sum_all(tanh(transformer_encode(seq, params)))

        backward(f())
        tensors = [p for _, p in named]
        numeric = finite_difference_gradient(f, tensors)
        for param, n in zip(tensors, numeric):
            assert max_relative_error(param.grad, n) < 1e-4

    def test_default_width_produces_1024(self):
        cfg = TransformerConfig()
        params = TransformerParams.init(1028, cfg, np.random.default_rng(19))
        seq = Tensor(np.random.default_rng(20).standard_normal((60, 1028)))
        out = transformer_encode(seq, params)
        assert out.shape == (1024,)
