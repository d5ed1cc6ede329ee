"""Stylization algorithms.

Three layers live here: an attention-and-statistics style-transfer baseline
over hand-crafted feature pyramids, a palette-transfer cartoonizer that
serves as the deterministic stylization target, and the end-to-end
inversion-based pipeline that drives the diffusion engine toward that
target.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import ndimage

from . import denoise, diffusion
from .imagecore import Image, Rng, _ycbcr_planes, _ycbcr_planes_to_rgb, clamp_to_image, luma

_NORM_EPS = 1e-8
FEATURE_CHANNELS = 5  # intensity, blurred intensity, gradient mag, orientation cos/sin
EMBED_DIM = 512 + 36


# ---------------------------------------------------------------------------
# Feature pyramid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeaturePyramid:
    """Per-level local statistics of the luma plane; level 0 is full resolution."""

    levels: tuple


def _sobel(plane: np.ndarray):
    gx = ndimage.sobel(plane, axis=1, mode="reflect")
    gy = ndimage.sobel(plane, axis=0, mode="reflect")
    return gx, gy


def _stat_channels(plane: np.ndarray) -> np.ndarray:
    blur = ndimage.gaussian_filter(plane, sigma=1.0, mode="reflect")
    gx, gy = _sobel(plane)
    mag = np.hypot(gx, gy)
    denom = mag + 1e-12
    return np.stack([plane, blur, mag, gx / denom, gy / denom], axis=-1)


def _downsample2(plane: np.ndarray) -> np.ndarray:
    h2, w2 = plane.shape[0] // 2, plane.shape[1] // 2
    p = plane[: h2 * 2, : w2 * 2]
    return 0.25 * (p[0::2, 0::2] + p[0::2, 1::2] + p[1::2, 0::2] + p[1::2, 1::2])


def extract_features(img: Image, levels: int) -> FeaturePyramid:
    """Luma statistics at `levels` dyadic scales (2x box downsampling)."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    plane = luma(img)
    feats = []
    for level in range(levels):
        if min(plane.shape) < 2:
            raise ValueError(
                f"image {img.width}x{img.height} too small for {levels} pyramid levels"
            )
        feats.append(_stat_channels(plane))
        if level < levels - 1:
            plane = _downsample2(plane)
    return FeaturePyramid(tuple(feats))


# ---------------------------------------------------------------------------
# Attention-matched statistics
# ---------------------------------------------------------------------------


def _instance_norm(flat: np.ndarray) -> np.ndarray:
    mu = flat.mean(axis=0)
    sd = flat.std(axis=0)
    return (flat - mu) / (sd + _NORM_EPS)


def attention_matched_stats(q: np.ndarray, k: np.ndarray, v: np.ndarray, temperature: float):
    """Per-query attention-weighted mean and standard deviation of v.

    q holds normalized content features (Nq, C), k normalized style features
    (Ns, C), v raw style values (Ns, Cv).  Attention is softmax(q k^T /
    temperature) over style positions; returns (mean, std) of shape (Nq, Cv).
    Queries are processed in chunks so the attention matrix never has to fit
    in memory all at once.
    """
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    nq = q.shape[0]
    mean = np.empty((nq, v.shape[1]))
    std = np.empty_like(mean)
    v2 = v * v
    chunk = max(1, 2_000_000 // max(k.shape[0], 1))
    for i in range(0, nq, chunk):
        logits = (q[i : i + chunk] @ k.T) / temperature
        logits -= logits.max(axis=1, keepdims=True)
        a = np.exp(logits)
        a /= a.sum(axis=1, keepdims=True)
        m = a @ v
        s2 = a @ v2 - m * m
        mean[i : i + chunk] = m
        std[i : i + chunk] = np.sqrt(np.maximum(s2, 0.0))
    return mean, std


def adaattn_transfer(
    content: Image, style: Image, levels: int = 3, temperature: float = 1.0
) -> Image:
    """Per-point adaptive normalization of content toward style statistics.

    At every pyramid level the instance-normalized content features attend
    over the instance-normalized style features, and the raw style values are
    reduced to per-point matched mean/std maps.  Pixels are rebuilt from the
    level-0 match: luma and both chroma planes of the content are normalized
    and rescaled by the matched statistics.
    """
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    if content.channels != 3 or style.channels != 3:
        raise ValueError("adaattn_transfer needs 3-channel images")
    min_dim = 2 ** (levels - 1) * 2
    for img, name in ((content, "content"), (style, "style")):
        if min(img.width, img.height) < min_dim:
            raise ValueError(f"{name} image too small for {levels} levels")

    cp = extract_features(content, levels)
    sp = extract_features(style, levels)
    out = None
    for level in range(levels):
        fc = cp.levels[level].reshape(-1, FEATURE_CHANNELS)
        fs = sp.levels[level].reshape(-1, FEATURE_CHANNELS)
        q = _instance_norm(fc)
        k = _instance_norm(fs)
        if level > 0:
            attention_matched_stats(q, k, fs, temperature)
            continue
        ycc_s = _ycbcr_planes(style).reshape(-1, 3)
        v = np.concatenate([fs, ycc_s[:, 1:]], axis=1)
        mean, std = attention_matched_stats(q, k, v, temperature)
        ycc_c = _ycbcr_planes(content).reshape(-1, 3)
        normed = _instance_norm(ycc_c)
        h, w = content.height, content.width
        matched = np.empty((h * w, 3))
        matched[:, 0] = std[:, 0] * normed[:, 0] + mean[:, 0]
        matched[:, 1] = std[:, 5] * normed[:, 1] + mean[:, 5]
        matched[:, 2] = std[:, 6] * normed[:, 2] + mean[:, 6]
        out = _ycbcr_planes_to_rgb(matched.reshape(h, w, 3))
    return out


# ---------------------------------------------------------------------------
# Cartoonizer (median-cut palette transfer)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Palette:
    """RGB palette colors, row per color, plus the construction method tag."""

    colors: np.ndarray
    method: str = "median-cut"

    def __post_init__(self):
        c = np.asarray(self.colors, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] != 3 or not 1 <= c.shape[0] <= 256:
            raise ValueError("palette must hold 1..256 RGB rows")
        c = np.ascontiguousarray(c)
        c.flags.writeable = False
        object.__setattr__(self, "colors", c)

    @property
    def size(self) -> int:
        return self.colors.shape[0]


def build_palette(img: Image, k: int) -> Palette:
    """Median-cut palette over the image's pixels.

    Boxes split at the median of their widest color axis until k boxes exist
    or every box holds a single distinct color.  A box of identical pixels
    keeps that exact color; mixed boxes use their mean.
    """
    if not 1 <= k <= 256:
        raise ValueError("palette size must be in 1..256")
    if img.channels != 3:
        raise ValueError("palette construction needs a 3-channel image")
    pixels = img.data.reshape(-1, 3)
    boxes = [np.arange(pixels.shape[0])]
    while len(boxes) < k:
        best, best_range, best_axis = -1, 0.0, 0
        for i, idx in enumerate(boxes):
            sub = pixels[idx]
            spans = sub.max(axis=0) - sub.min(axis=0)
            axis = int(np.argmax(spans))
            if spans[axis] > best_range:
                best, best_range, best_axis = i, float(spans[axis]), axis
        if best < 0:  # nothing splittable: every box is a single color
            break
        idx = boxes.pop(best)
        vals = pixels[idx, best_axis]
        med = float(np.median(vals))
        left = vals <= med
        if left.all():
            left = vals < med
        boxes.insert(best, idx[left])
        boxes.insert(best + 1, idx[~left])
    reps = []
    for idx in boxes:
        sub = pixels[idx]
        if (sub == sub[0]).all():
            reps.append(sub[0])
        else:
            reps.append(sub.mean(axis=0))
    # drop duplicate representatives, first occurrence wins
    seen = set()
    unique = []
    for rep in reps:
        key = tuple(rep)
        if key not in seen:
            seen.add(key)
            unique.append(rep)
    return Palette(np.array(unique))


def _edge_map(img: Image) -> np.ndarray:
    gx, gy = _sobel(luma(img))
    mag = np.hypot(gx, gy)
    peak = mag.max()
    return mag / peak if peak > 0 else mag


def apply_palette(img: Image, palette: Palette, edge_strength: float = 0.0) -> Image:
    """Snap pixels to their nearest palette color and darken edges.

    Nearest is Euclidean in RGB with ties broken by lowest palette index; the
    edge term multiplies by (1 - edge_strength * E) with E the normalized
    Sobel magnitude of the input luma.
    """
    if not 0.0 <= edge_strength <= 1.0:
        raise ValueError("edge_strength must be in [0, 1]")
    if img.channels != 3:
        raise ValueError("apply_palette needs a 3-channel image")
    pixels = img.data.reshape(-1, 3)
    d2 = ((pixels[:, None, :] - palette.colors[None, :, :]) ** 2).sum(axis=2)
    mapped = palette.colors[np.argmin(d2, axis=1)].reshape(img.data.shape)
    if edge_strength > 0.0:
        mapped = mapped * (1.0 - edge_strength * _edge_map(img))[:, :, None]
    return clamp_to_image(mapped)


def cartoonize(img: Image, palette_size: int, edge_strength: float = 0.0) -> Image:
    """Median-cut color quantization with optional Sobel edge darkening."""
    return apply_palette(img, build_palette(img, palette_size), edge_strength)


# ---------------------------------------------------------------------------
# Style embedding
# ---------------------------------------------------------------------------


def style_embed(style: Image) -> np.ndarray:
    """Deterministic style descriptor: 8x8x8 joint RGB histogram plus a
    36-bin gradient-orientation histogram, L1-normalized per block and then
    jointly L2-normalized.  Dimension 548, all entries >= 0, unit norm.

    Gradients use circular padding so the histogram is invariant to
    whole-pixel translation with wraparound.
    """
    if style.channels != 3:
        raise ValueError("style_embed needs a 3-channel image")
    bins = np.clip((style.data * 8).astype(int), 0, 7)
    flat = (bins[:, :, 0] * 64 + bins[:, :, 1] * 8 + bins[:, :, 2]).ravel()
    color = np.bincount(flat, minlength=512).astype(np.float64)
    color /= color.sum()

    plane = luma(style)
    gx = ndimage.sobel(plane, axis=1, mode="wrap")
    gy = ndimage.sobel(plane, axis=0, mode="wrap")
    mag = np.hypot(gx, gy).ravel()
    theta = np.arctan2(gy, gx).ravel()
    obins = np.clip(((theta + np.pi) / (2 * np.pi) * 36).astype(int), 0, 35)
    orient = np.bincount(obins, weights=mag, minlength=36)
    total = orient.sum()
    if total > 0:
        orient = orient / total

    vec = np.concatenate([color, orient])
    return vec / np.linalg.norm(vec)


# ---------------------------------------------------------------------------
# End-to-end pipeline
# ---------------------------------------------------------------------------

_POST_DENOISE_CHOICES = ("none", "nlm", "tiled-nlm")


@dataclass(frozen=True)
class StylizeConfig:
    """Every knob of the stylization pipeline; JSON round-trippable."""

    strength: float = 0.6
    steps: int = 25
    palette_size: int = 16
    edge_strength: float = 0.3
    post_denoise: str = "none"
    tile: int = 48
    overlap: int = 16
    window: str = "hann"
    seed: int = 0
    schedule_T: int = diffusion.DEFAULT_T
    beta_start: float = diffusion.DEFAULT_BETA_START
    beta_end: float = diffusion.DEFAULT_BETA_END

    def __post_init__(self):
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError("strength must be in [0, 1]")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 1 <= self.palette_size <= 256:
            raise ValueError("palette_size must be in 1..256")
        if not 0.0 <= self.edge_strength <= 1.0:
            raise ValueError("edge_strength must be in [0, 1]")
        if self.post_denoise not in _POST_DENOISE_CHOICES:
            raise ValueError(f"post_denoise must be one of {_POST_DENOISE_CHOICES}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "StylizeConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, text: str) -> "StylizeConfig":
        return cls.from_dict(json.loads(text))


def inst_stylize(content: Image, style: Image, cfg: StylizeConfig = StylizeConfig()) -> Image:
    """Inversion-based stylization of a content image toward a style image.

    The style image contributes its embedding and its median-cut palette; the
    palette-transferred cartoonization of the content is the synthesis target.
    Stochastic inversion (at t_star = strength * T) supplies the starting
    raster, deterministic reverse sampling walks it to the target, and an
    optional denoise stage post-processes the result.  Deterministic given
    (inputs, cfg, cfg.seed).
    """
    sched = diffusion.make_linear_schedule(cfg.schedule_T, cfg.beta_start, cfg.beta_end)
    style_vec = style_embed(style)
    target = apply_palette(content, build_palette(style, cfg.palette_size), cfg.edge_strength)
    t_star = min(max(int(round(cfg.strength * sched.T)), 1), sched.T)
    predictor = diffusion.TargetPredictor(target.to_raster(), sched)
    rng = Rng(cfg.seed)
    x_init, _ = diffusion.stochastic_inversion(content, t_star, sched, predictor, rng)
    steps = diffusion.sampling_steps(t_star, cfg.steps)
    out = diffusion.synthesize(x_init, style_vec, predictor, sched, steps)
    return denoise.denoise_stage(
        out, cfg.post_denoise, tile=cfg.tile, overlap=cfg.overlap, window=cfg.window
    )
