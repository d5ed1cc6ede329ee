"""Embedding model backends.

The default "histogram-v1" backend is weight-free and fully deterministic,
for air-gapped deployments and hermetic tests.  "clip:<model>" loads a
CLIP-class image encoder through sentence-transformers; which checkpoint to
serve is a deploy-time decision.
"""

from __future__ import annotations

import numpy as np
from PIL import Image as PILImage


class HistogramBackend:
    """Weight-free descriptor: 8x8x8 RGB histogram, 36-bin gradient
    orientation histogram, and an 8x8 luma thumbnail.

    Each block is L1-normalized before the joint L2 normalization so color,
    structure, and layout contribute on comparable scales.  dim = 512+36+64.
    """

    name = "histogram-v1"
    dim = 612

    def encode(self, img: PILImage.Image) -> np.ndarray:
        rgb = np.asarray(img.convert("RGB"), dtype=np.uint8)
        bins = rgb >> 5  # 256 / 8 levels per channel
        flat = (bins[:, :, 0].astype(np.int64) * 64 + bins[:, :, 1] * 8 + bins[:, :, 2]).ravel()
        color = np.bincount(flat, minlength=512).astype(np.float64)

        gray = np.asarray(img.convert("L"), dtype=np.float64) / 255.0
        if min(gray.shape) >= 2:
            gy, gx = np.gradient(gray)
        else:
            gy = gx = np.zeros_like(gray)
        mag = np.hypot(gx, gy).ravel()
        theta = np.arctan2(gy, gx).ravel()
        obins = np.clip(((theta + np.pi) / (2 * np.pi) * 36).astype(int), 0, 35)
        orient = np.bincount(obins, weights=mag, minlength=36)

        thumb = np.asarray(
            img.convert("L").resize((8, 8), PILImage.BILINEAR), dtype=np.float64
        ).ravel()

        vec = np.concatenate([_l1(color), _l1(orient), _l1(thumb)])
        norm = np.linalg.norm(vec)
        return vec / norm if norm > 0 else vec


def _l1(block: np.ndarray) -> np.ndarray:
    total = block.sum()
    return block / total if total > 0 else block


class ClipBackend:
    """CLIP-class image encoder served via sentence-transformers."""

    def __init__(self, model_name: str, device: str):
        from sentence_transformers import SentenceTransformer

        self.name = model_name
        self._model = SentenceTransformer(model_name, device=device)
        probe = self._model.encode(PILImage.new("RGB", (8, 8)))
        self.dim = int(np.asarray(probe).size)

    def encode(self, img: PILImage.Image) -> np.ndarray:
        vec = np.asarray(self._model.encode(img.convert("RGB")), dtype=np.float64)
        return vec.ravel()


_LOADERS = {}


def register_backend(name: str, loader) -> None:
    """Expose an extra backend under an exact model name (used by tests)."""
    _LOADERS[name] = loader


def load_backend(model_name: str, device: str):
    if model_name in _LOADERS:
        return _LOADERS[model_name](model_name, device)
    if model_name == HistogramBackend.name:
        return HistogramBackend()
    if model_name.startswith("clip:"):
        return ClipBackend(model_name.split(":", 1)[1], device)
    raise ValueError(
        f"unknown model {model_name!r}; use 'histogram-v1' or 'clip:<checkpoint>'"
    )
