"""Temporal encoders: an LSTM stack and a Transformer encoder stack.

Both map a [T, D] feature sequence to a fixed-length summary vector. The LSTM
returns its final hidden state; the Transformer returns either the mean over
time positions or the output at a learnable CLS position prepended to the
sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import (
    Parameter,
    Tensor,
    concat,
    dropout,
    layer_norm,
    matmul,
    mean_rows,
    mul,
    narrow,
    relu,
    reshape,
    sigmoid,
    softmax_rows,
    tanh,
    transpose,
    uniform_init,
)
from .errors import ConfigError, EmptySequenceError, ShapeError

__all__ = [
    "LstmParams",
    "lstm_step",
    "lstm_encode",
    "AttentionParams",
    "EncoderLayerParams",
    "TransformerConfig",
    "TransformerParams",
    "positional_encoding",
    "scaled_dot_attention",
    "multi_head_attention",
    "encoder_layer",
    "transformer_encode",
]


@dataclass
class LstmParams:
    """Single LSTM cell weights. Gate blocks are stacked i, f, g, o."""

    w_ih: Parameter  # [4H, D]
    w_hh: Parameter  # [4H, H]
    b_ih: Parameter  # [4H]
    b_hh: Parameter  # [4H]

    @property
    def hidden(self) -> int:
        return self.w_hh.shape[1]

    @property
    def input_dim(self) -> int:
        return self.w_ih.shape[1]

    @classmethod
    def init(cls, input_dim: int, hidden: int, rng: np.random.Generator) -> "LstmParams":
        """Uniform(-1/sqrt(fan_in)) weights, zero biases, forget-gate bias +1."""
        if input_dim < 1 or hidden < 1:
            raise ConfigError(f"lstm dims must be >= 1, got D={input_dim}, H={hidden}")
        b_ih = np.zeros(4 * hidden)
        b_ih[hidden : 2 * hidden] = 1.0
        return cls(
            w_ih=Parameter(uniform_init((4 * hidden, input_dim), input_dim, rng)),
            w_hh=Parameter(uniform_init((4 * hidden, hidden), hidden, rng)),
            b_ih=Parameter(b_ih, decay=False),
            b_hh=Parameter(np.zeros(4 * hidden), decay=False),
        )

    def named_parameters(self, prefix: str) -> list[tuple[str, Parameter]]:
        return [
            (f"{prefix}.w_ih", self.w_ih),
            (f"{prefix}.w_hh", self.w_hh),
            (f"{prefix}.b_ih", self.b_ih),
            (f"{prefix}.b_hh", self.b_hh),
        ]


def _lstm_step_rows(
    x: Tensor, h: Tensor, c: Tensor, params: LstmParams, w_ih_t: Tensor, w_hh_t: Tensor
) -> tuple[Tensor, Tensor]:
    # row-vector core shared by lstm_step and lstm_encode; weights come in
    # pre-transposed so an encode pass transposes them once, not per step
    hid = params.hidden
    z = matmul(x, w_ih_t) + params.b_ih + matmul(h, w_hh_t) + params.b_hh
    i = sigmoid(narrow(z, 1, 0, hid))
    f = sigmoid(narrow(z, 1, hid, hid))
    g = tanh(narrow(z, 1, 2 * hid, hid))
    o = sigmoid(narrow(z, 1, 3 * hid, hid))
    c_t = mul(f, c) + mul(i, g)
    h_t = mul(o, tanh(c_t))
    return h_t, c_t


def lstm_step(
    x_t: Tensor, h_prev: Tensor, c_prev: Tensor, params: LstmParams
) -> tuple[Tensor, Tensor]:
    """One cell update: gates i,f,o in (0,1), candidate g in (-1,1).

    c_t = f*c_prev + i*g ; h_t = o*tanh(c_t).
    """
    hid = params.hidden
    if x_t.shape != (params.input_dim,):
        raise ShapeError(
            f"lstm_step input must have shape ({params.input_dim},), got {list(x_t.shape)}"
        )
    if h_prev.shape != (hid,) or c_prev.shape != (hid,):
        raise ShapeError(
            f"lstm_step state must have shape ({hid},), got "
            f"{list(h_prev.shape)} and {list(c_prev.shape)}"
        )
    h_t, c_t = _lstm_step_rows(
        reshape(x_t, (1, params.input_dim)),
        reshape(h_prev, (1, hid)),
        reshape(c_prev, (1, hid)),
        params,
        transpose(params.w_ih),
        transpose(params.w_hh),
    )
    return reshape(h_t, (hid,)), reshape(c_t, (hid,))


def lstm_encode(
    seq: Tensor,
    params: LstmParams,
    dropout_rate: float = 0.1,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Run the cell over t = 0..T-1 from zero state; return the last hidden state.

    Dropout applies to that final state in training mode only.
    """
    if seq.ndim != 2:
        raise ShapeError(f"lstm_encode expects a [T, D] sequence, got {list(seq.shape)}")
    steps = seq.shape[0]
    if steps < 1:
        raise EmptySequenceError("lstm_encode needs at least one time step")
    hid = params.hidden
    w_ih_t = transpose(params.w_ih)
    w_hh_t = transpose(params.w_hh)
    h = Tensor(np.zeros((1, hid)))
    c = Tensor(np.zeros((1, hid)))
    for t in range(steps):
        x_t = narrow(seq, 0, t, 1)
        h, c = _lstm_step_rows(x_t, h, c, params, w_ih_t, w_hh_t)
    return dropout(reshape(h, (hid,)), dropout_rate, training, rng)


def positional_encoding(length: int, d_model: int) -> Tensor:
    """Sinusoidal position table: sin at even slots, cos at odd slots."""
    if d_model % 2 != 0:
        raise ConfigError(f"positional encoding needs an even width, got {d_model}")
    if length < 1:
        raise EmptySequenceError("positional encoding needs length >= 1")
    pos = np.arange(length)[:, None]
    idx = np.arange(0, d_model, 2)[None, :]
    angle = pos / np.power(10000.0, idx / d_model)
    table = np.zeros((length, d_model))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    return Tensor(table)


@dataclass
class AttentionParams:
    """Joint Q/K/V/output projections plus the head count."""

    w_q: Parameter  # [d_model, d_model]
    w_k: Parameter
    w_v: Parameter
    w_o: Parameter
    heads: int

    @property
    def d_model(self) -> int:
        return self.w_q.shape[0]

    @property
    def d_k(self) -> int:
        return self.d_model // self.heads

    def __post_init__(self):
        if self.heads < 1:
            raise ConfigError(f"head count must be >= 1, got {self.heads}")
        if self.d_model % self.heads != 0:
            raise ConfigError(
                f"d_model {self.d_model} is not divisible by {self.heads} heads"
            )

    @classmethod
    def init(cls, d_model: int, heads: int, rng: np.random.Generator) -> "AttentionParams":
        def w():
            return Parameter(uniform_init((d_model, d_model), d_model, rng))

        return cls(w_q=w(), w_k=w(), w_v=w(), w_o=w(), heads=heads)

    def named_parameters(self, prefix: str) -> list[tuple[str, Parameter]]:
        return [
            (f"{prefix}.w_q", self.w_q),
            (f"{prefix}.w_k", self.w_k),
            (f"{prefix}.w_v", self.w_v),
            (f"{prefix}.w_o", self.w_o),
        ]


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor) -> tuple[Tensor, Tensor]:
    """softmax(Q Kt / sqrt(d_k)) V. Returns (output, attention weights)."""
    if q.ndim != 2 or k.ndim != 2 or v.ndim != 2:
        raise ShapeError("attention operands must be 2-D")
    if q.shape[1] != k.shape[1]:
        raise ShapeError(
            f"query width {q.shape[1]} does not match key width {k.shape[1]}"
        )
    if k.shape[0] != v.shape[0]:
        raise ShapeError(
            f"key length {k.shape[0]} does not match value length {v.shape[0]}"
        )
    d_k = q.shape[1]
    if d_k == 0:
        raise ShapeError("attention key width must be >= 1")
    scores = mul(matmul(q, transpose(k)), 1.0 / math.sqrt(d_k))
    weights = softmax_rows(scores)
    return matmul(weights, v), weights


def multi_head_attention(
    x: Tensor,
    params: AttentionParams,
    weights_out: list[Tensor] | None = None,
) -> Tensor:
    """Split the joint projections into heads, attend per head, concat, project."""
    if x.ndim != 2 or x.shape[1] != params.d_model:
        raise ShapeError(
            f"multi_head_attention expects [T, {params.d_model}], got {list(x.shape)}"
        )
    q = matmul(x, params.w_q)
    k = matmul(x, params.w_k)
    v = matmul(x, params.w_v)
    d_k = params.d_k
    heads = []
    for i in range(params.heads):
        start = i * d_k
        out, weights = scaled_dot_attention(
            narrow(q, 1, start, d_k), narrow(k, 1, start, d_k), narrow(v, 1, start, d_k)
        )
        if weights_out is not None:
            weights_out.append(weights)
        heads.append(out)
    return matmul(concat(heads, axis=1), params.w_o)


@dataclass
class EncoderLayerParams:
    """One encoder block: attention, position-wise FFN, two layer norms."""

    attn: AttentionParams
    ffn_w1: Parameter  # [d_model, d_ff]
    ffn_b1: Parameter  # [d_ff]
    ffn_w2: Parameter  # [d_ff, d_model]
    ffn_b2: Parameter  # [d_model]
    ln1_gain: Parameter
    ln1_bias: Parameter
    ln2_gain: Parameter
    ln2_bias: Parameter
    eps: float = 1e-5

    @classmethod
    def init(
        cls, d_model: int, heads: int, d_ff: int, rng: np.random.Generator
    ) -> "EncoderLayerParams":
        if d_ff < 1:
            raise ConfigError(f"d_ff must be >= 1, got {d_ff}")
        return cls(
            attn=AttentionParams.init(d_model, heads, rng),
            ffn_w1=Parameter(uniform_init((d_model, d_ff), d_model, rng)),
            ffn_b1=Parameter(np.zeros(d_ff), decay=False),
            ffn_w2=Parameter(uniform_init((d_ff, d_model), d_ff, rng)),
            ffn_b2=Parameter(np.zeros(d_model), decay=False),
            ln1_gain=Parameter(np.ones(d_model), decay=False),
            ln1_bias=Parameter(np.zeros(d_model), decay=False),
            ln2_gain=Parameter(np.ones(d_model), decay=False),
            ln2_bias=Parameter(np.zeros(d_model), decay=False),
        )

    def named_parameters(self, prefix: str) -> list[tuple[str, Parameter]]:
        named = self.attn.named_parameters(f"{prefix}.attn")
        named += [
            (f"{prefix}.ffn_w1", self.ffn_w1),
            (f"{prefix}.ffn_b1", self.ffn_b1),
            (f"{prefix}.ffn_w2", self.ffn_w2),
            (f"{prefix}.ffn_b2", self.ffn_b2),
            (f"{prefix}.ln1_gain", self.ln1_gain),
            (f"{prefix}.ln1_bias", self.ln1_bias),
            (f"{prefix}.ln2_gain", self.ln2_gain),
            (f"{prefix}.ln2_bias", self.ln2_bias),
        ]
        return named


def encoder_layer(
    x: Tensor,
    params: EncoderLayerParams,
    dropout_rate: float = 0.1,
    training: bool = False,
    rng: np.random.Generator | None = None,
    weights_out: list[Tensor] | None = None,
) -> Tensor:
    """Post-norm block: norm(x + drop(attn(x))), then norm(x1 + drop(ffn(x1)))."""
    attended = multi_head_attention(x, params.attn, weights_out)
    x1 = layer_norm(
        x + dropout(attended, dropout_rate, training, rng),
        params.ln1_gain,
        params.ln1_bias,
        params.eps,
    )
    hidden = relu(matmul(x1, params.ffn_w1) + params.ffn_b1)
    ffn = matmul(hidden, params.ffn_w2) + params.ffn_b2
    return layer_norm(
        x1 + dropout(ffn, dropout_rate, training, rng),
        params.ln2_gain,
        params.ln2_bias,
        params.eps,
    )


@dataclass
class TransformerConfig:
    """Architecture hyperparameters for the Transformer encoder stack."""

    n_layers: int = 2
    heads: int = 8
    d_model: int = 1024
    d_ff: int = 2048
    pooling: str = "mean"  # "mean" | "cls"
    pe_max_len: int = 512
    positional_encoding: bool = True

    def __post_init__(self):
        if self.n_layers < 1:
            raise ConfigError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.pooling not in ("mean", "cls"):
            raise ConfigError(f"pooling must be 'mean' or 'cls', got {self.pooling!r}")
        if self.d_model < 1 or self.d_ff < 1:
            raise ConfigError("d_model and d_ff must be >= 1")
        if self.d_model % self.heads != 0:
            raise ConfigError(
                f"d_model {self.d_model} is not divisible by {self.heads} heads"
            )
        if self.positional_encoding and self.d_model % 2 != 0:
            raise ConfigError("sinusoidal positional encoding needs an even d_model")
        if self.pe_max_len < 1:
            raise ConfigError(f"pe_max_len must be >= 1, got {self.pe_max_len}")


@dataclass
class TransformerParams:
    """Trainable state for one stream's Transformer encoder."""

    config: TransformerConfig
    input_proj: Parameter  # [D, d_model]
    layers: list[EncoderLayerParams]
    cls_token: Parameter | None = None
    pe_table: Tensor | None = field(default=None, repr=False)

    @property
    def input_dim(self) -> int:
        return self.input_proj.shape[0]

    @classmethod
    def init(
        cls, input_dim: int, config: TransformerConfig, rng: np.random.Generator
    ) -> "TransformerParams":
        if input_dim < 1:
            raise ConfigError(f"input_dim must be >= 1, got {input_dim}")
        layers = [
            EncoderLayerParams.init(config.d_model, config.heads, config.d_ff, rng)
            for _ in range(config.n_layers)
        ]
        token = None
        if config.pooling == "cls":
            token = Parameter(
                uniform_init((1, config.d_model), config.d_model, rng), decay=False
            )
        table = None
        if config.positional_encoding:
            table = positional_encoding(config.pe_max_len, config.d_model)
        return cls(
            config=config,
            input_proj=Parameter(uniform_init((input_dim, config.d_model), input_dim, rng)),
            layers=layers,
            cls_token=token,
            pe_table=table,
        )

    def named_parameters(self, prefix: str) -> list[tuple[str, Parameter]]:
        named = [(f"{prefix}.input_proj", self.input_proj)]
        if self.cls_token is not None:
            named.append((f"{prefix}.cls_token", self.cls_token))
        for i, layer in enumerate(self.layers):
            named += layer.named_parameters(f"{prefix}.layer{i}")
        return named


def transformer_encode(
    seq: Tensor,
    params: TransformerParams,
    dropout_rate: float = 0.1,
    training: bool = False,
    rng: np.random.Generator | None = None,
    weights_out: list[Tensor] | None = None,
) -> Tensor:
    """Project D -> d_model, (optionally) prepend CLS and add positions, encode, pool."""
    cfg = params.config
    if seq.ndim != 2 or seq.shape[1] != params.input_dim:
        raise ShapeError(
            f"transformer_encode expects [T, {params.input_dim}], got {list(seq.shape)}"
        )
    if seq.shape[0] < 1:
        raise EmptySequenceError("transformer_encode needs at least one time step")
    x = matmul(seq, params.input_proj)
    if cfg.pooling == "cls":
        x = concat([params.cls_token, x], axis=0)
    length = x.shape[0]
    if cfg.positional_encoding:
        if length > cfg.pe_max_len:
            raise ConfigError(
                f"sequence length {length} exceeds positional table size {cfg.pe_max_len}"
            )
        x = x + narrow(params.pe_table, 0, 0, length)
    for layer in params.layers:
        x = encoder_layer(x, layer, dropout_rate, training, rng, weights_out)
    if cfg.pooling == "cls":
        return reshape(narrow(x, 0, 0, 1), (cfg.d_model,))
    return mean_rows(x)
