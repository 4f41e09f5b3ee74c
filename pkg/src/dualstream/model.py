"""Dual-stream classifier: two stream encoders, concatenation, MLP head.

The scene stream and the face stream get independent encoder weights. Their
summary vectors are concatenated and pushed through a two-layer MLP
(hidden width 512, ReLU, dropout 0.3) that emits one logit per engagement
level. Softmax lives in the loss / in predict, never in forward.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import (
    Parameter,
    Tensor,
    concat,
    dropout,
    matmul,
    relu,
    reshape,
    uniform_init,
)
from .encoders import (
    LstmParams,
    TransformerConfig,
    TransformerParams,
    lstm_encode,
    transformer_encode,
)
from .errors import ConfigError, ShapeError

__all__ = ["CLASS_NAMES", "ModelConfig", "DualStreamModel", "class_names_for"]

CLASS_NAMES = ("Very Low", "Low", "High", "Very High")

VARIANTS = ("lstm", "transformer")


def class_names_for(n_classes: int) -> list[str]:
    if n_classes == len(CLASS_NAMES):
        return list(CLASS_NAMES)
    return [f"class_{i}" for i in range(n_classes)]


@dataclass
class ModelConfig:
    """Every architecture hyperparameter, with the production defaults."""

    variant: str = "lstm"
    frames: int = 60  # T
    feature_dim: int = 1028  # D per stream
    hidden: int = 1024  # LSTM hidden size / transformer d_model
    n_classes: int = 4
    mlp_hidden: int = 512
    mlp_dropout: float = 0.3
    encoder_dropout: float = 0.1
    n_layers: int = 2
    heads: int = 8
    d_ff: int = 2048
    pooling: str = "mean"
    pe_max_len: int = 512
    positional_encoding: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")
        for name in ("frames", "feature_dim", "hidden", "mlp_hidden"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("mlp_dropout", "encoder_dropout"):
            if not (0.0 <= getattr(self, name) < 1.0):
                raise ConfigError(f"{name} must be in [0, 1), got {getattr(self, name)}")
        if self.variant == "transformer":
            # constructing the sub-config runs its own validation
            self.transformer_config()

    def transformer_config(self) -> TransformerConfig:
        return TransformerConfig(
            n_layers=self.n_layers,
            heads=self.heads,
            d_model=self.hidden,
            d_ff=self.d_ff,
            pooling=self.pooling,
            pe_max_len=self.pe_max_len,
            positional_encoding=self.positional_encoding,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class DualStreamModel:
    """Two independent stream encoders plus the fusion MLP head."""

    def __init__(self, config: ModelConfig, scene_encoder, face_encoder, head):
        self.config = config
        self.scene_encoder = scene_encoder
        self.face_encoder = face_encoder
        self.mlp_w1, self.mlp_b1, self.mlp_w2, self.mlp_b2 = head

    @classmethod
    def build(cls, config: ModelConfig) -> "DualStreamModel":
        rng = np.random.default_rng(config.seed)
        if config.variant == "lstm":
            scene = LstmParams.init(config.feature_dim, config.hidden, rng)
            face = LstmParams.init(config.feature_dim, config.hidden, rng)
        else:
            tf_cfg = config.transformer_config()
            scene = TransformerParams.init(config.feature_dim, tf_cfg, rng)
            face = TransformerParams.init(config.feature_dim, tf_cfg, rng)
        fused = 2 * config.hidden
        head = (
            Parameter(uniform_init((fused, config.mlp_hidden), fused, rng)),
            Parameter(np.zeros(config.mlp_hidden), decay=False),
            Parameter(uniform_init((config.mlp_hidden, config.n_classes), config.mlp_hidden, rng)),
            Parameter(np.zeros(config.n_classes), decay=False),
        )
        return cls(config, scene, face, head)

    def _encode(self, stream: Tensor, params, training: bool, rng) -> Tensor:
        rate = self.config.encoder_dropout
        if self.config.variant == "lstm":
            return lstm_encode(stream, params, rate, training, rng)
        return transformer_encode(stream, params, rate, training, rng)

    def forward(
        self,
        scene: Tensor,
        face: Tensor,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Logits for one clip; shape [n_classes]."""
        if scene.shape != face.shape:
            raise ShapeError(
                f"stream shapes disagree: scene {list(scene.shape)} vs face {list(face.shape)}"
            )
        if scene.ndim != 2 or scene.shape[1] != self.config.feature_dim:
            raise ShapeError(
                f"streams must be [T, {self.config.feature_dim}], got {list(scene.shape)}"
            )
        enc_scene = self._encode(scene, self.scene_encoder, training, rng)
        enc_face = self._encode(face, self.face_encoder, training, rng)
        fused = reshape(concat([enc_scene, enc_face], axis=0), (1, 2 * self.config.hidden))
        hidden = relu(matmul(fused, self.mlp_w1) + self.mlp_b1)
        hidden = dropout(hidden, self.config.mlp_dropout, training, rng)
        logits = matmul(hidden, self.mlp_w2) + self.mlp_b2
        return reshape(logits, (self.config.n_classes,))

    def predict(self, scene: Tensor, face: Tensor) -> tuple[int, np.ndarray]:
        """Eval-mode class label (argmax, lowest index on ties) and probabilities."""
        logits = self.forward(scene, face, training=False).data
        shifted = logits - logits.max()
        e = np.exp(shifted)
        probs = e / e.sum()
        return int(np.argmax(probs)), probs

    def named_parameters(self) -> list[tuple[str, Parameter]]:
        named = self.scene_encoder.named_parameters("scene")
        named += self.face_encoder.named_parameters("face")
        named += [
            ("head.w1", self.mlp_w1),
            ("head.b1", self.mlp_b1),
            ("head.w2", self.mlp_w2),
            ("head.b2", self.mlp_b2),
        ]
        return named

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()
