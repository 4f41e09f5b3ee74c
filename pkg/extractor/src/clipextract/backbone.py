"""Per-frame feature backbones.

`TinyBackbone` is a deterministic seeded projection over downsampled pixels;
it needs no model files and anchors the test suite. `EfficientNetBackbone`
wraps torchvision's efficientnet_v2_s with its classification head removed,
taking penultimate-layer features in inference mode; it needs either local
weights or network access to the public weight distribution. Whatever the
backbone emits, the observed feature width is what lands in the sample
header.
"""

from __future__ import annotations

import cv2
import numpy as np

from .errors import SetupError


class TinyBackbone:
    """Deterministic random-projection features; no pretrained assets needed."""

    name = "tiny"

    def __init__(self, dim: int = 64, input_size: int = 64):
        if dim < 1:
            raise SetupError(f"feature dim must be >= 1, got {dim}")
        self.dim = dim
        self.input_size = (input_size, input_size)
        cells = 16 * 16 * 3
        rng = np.random.default_rng(0xD5_EF)  # fixed: same features every process
        self._projection = rng.standard_normal((cells, dim)) / np.sqrt(cells)

    def features(self, frames: list[np.ndarray]) -> np.ndarray:
        rows = []
        for frame in frames:
            small = cv2.resize(frame, (16, 16), interpolation=cv2.INTER_AREA)
            flat = small.astype(np.float64).reshape(-1) / 255.0
            rows.append(np.tanh(flat @ self._projection))
        return np.asarray(rows)


class EfficientNetBackbone:
    """efficientnet_v2_s trunk, classifier removed, inference mode only."""

    name = "efficientnet"

    def __init__(self, weights_path: str | None = None):
        try:
            import torch
            from torchvision.models import EfficientNet_V2_S_Weights, efficientnet_v2_s
        except ImportError as e:
            raise SetupError(
                f"torch/torchvision are required for the efficientnet backbone: {e}"
            ) from e
        self._torch = torch
        try:
            if weights_path is not None:
                model = efficientnet_v2_s(weights=None)
                state = torch.load(weights_path, map_location="cpu", weights_only=True)
                model.load_state_dict(state)
            else:
                model = efficientnet_v2_s(weights=EfficientNet_V2_S_Weights.DEFAULT)
        except Exception as e:
            raise SetupError(
                "could not load efficientnet_v2_s weights "
                f"({e}); pass --weights with a local state-dict file"
            ) from e
        model.classifier = torch.nn.Identity()
        model.eval()
        self._model = model
        self.input_size = (384, 384)
        self.dim = 1280
        self._mean = np.array([0.485, 0.456, 0.406])
        self._std = np.array([0.229, 0.224, 0.225])

    def features(self, frames: list[np.ndarray]) -> np.ndarray:
        torch = self._torch
        batch = []
        for frame in frames:
            rgb = cv2.cvtColor(frame, cv2.COLOR_BGR2RGB)
            x = rgb.astype(np.float64) / 255.0
            x = (x - self._mean) / self._std
            batch.append(x.transpose(2, 0, 1))
        with torch.no_grad():
            out = self._model(torch.as_tensor(np.asarray(batch), dtype=torch.float32))
        return out.numpy().astype(np.float64)


def build_backbone(name: str, dim: int = 64, weights_path: str | None = None):
    if name == "tiny":
        return TinyBackbone(dim=dim)
    if name == "efficientnet":
        return EfficientNetBackbone(weights_path=weights_path)
    raise SetupError(f"unknown backbone {name!r}")
