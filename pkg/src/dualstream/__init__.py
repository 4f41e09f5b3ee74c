"""Dual-stream engagement classifier over precomputed per-frame features.

A from-scratch float64 autodiff core, LSTM and Transformer temporal encoders,
a fusion MLP head, AdamW training with cross-entropy, macro-averaged
evaluation, and a checksummed binary dataset format.
"""

from .autodiff import (
    ComputeGraph,
    Parameter,
    Tensor,
    backward,
    concat,
    dropout,
    layer_norm,
    matmul,
    mean_rows,
    narrow,
    relu,
    reshape,
    sigmoid,
    softmax_rows,
    sum_all,
    tanh,
    transpose,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (
    Dataset,
    FeatureSequence,
    Sample,
    gen_synthetic,
    load_dataset,
    read_sample,
    validate_dataset,
    write_dataset,
    write_sample,
)
from .encoders import (
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
from .metrics import (
    ClassMetrics,
    ConfusionMatrix,
    EvalReport,
    confusion,
    emit,
    per_class,
    report,
)
from .model import CLASS_NAMES, DualStreamModel, ModelConfig
from .training import (
    AdamW,
    TrainConfig,
    TrainingLog,
    batch_loss,
    cross_entropy,
    evaluate_samples,
    train,
)

__version__ = "0.1.0"
