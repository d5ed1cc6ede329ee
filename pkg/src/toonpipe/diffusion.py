"""Desk-scale diffusion engine.

Variance-preserving forward process over unclamped rasters, deterministic
(eta = 0) reverse sampling, stochastic inversion of a content image, and
conditional synthesis driven by a pluggable noise predictor.  Style
conditioning enters only through the predictor's style argument; predictors
are plain callables ``(x_t, t, style) -> eps_hat``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .imagecore import Image, Rng, clamp_to_image

NoisePredictor = Callable[[np.ndarray, int, Optional[np.ndarray]], np.ndarray]

DEFAULT_T = 50
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-timestep variances and their cumulative products.

    Arrays are indexed by timestep t in 1..T; index 0 holds the conventional
    boundary values beta[0] = 0 and alpha_bar[0] = 1.
    """

    T: int
    beta_start: float
    beta_end: float
    kind: str
    beta: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    alpha_bar: np.ndarray = field(repr=False)

    def to_json(self) -> str:
        return json.dumps(
            {"T": self.T, "beta_start": self.beta_start, "beta_end": self.beta_end, "kind": self.kind}
        )

    @staticmethod
    def from_json(text: str) -> "NoiseSchedule":
        doc = json.loads(text)
        if doc.get("kind") != "linear":
            raise ValueError(f"unknown schedule kind {doc.get('kind')!r}")
        return make_linear_schedule(int(doc["T"]), float(doc["beta_start"]), float(doc["beta_end"]))


def make_linear_schedule(
    T: int = DEFAULT_T,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    """Linear beta ramp from beta_start to beta_end inclusive, double precision."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError("need 0 < beta_start <= beta_end < 1")
    beta = np.zeros(T + 1, dtype=np.float64)
    beta[1:] = np.linspace(beta_start, beta_end, T)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    return NoiseSchedule(
        T=T,
        beta_start=beta_start,
        beta_end=beta_end,
        kind="linear",
        beta=beta,
        alpha=alpha,
        alpha_bar=alpha_bar,
    )


def _check_t(t: int, lo: int, hi: int, name: str = "t") -> None:
    if not lo <= t <= hi:
        raise ValueError(f"{name} must be in [{lo}, {hi}], got {t}")


def q_sample(x0: np.ndarray, t: int, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Forward noising: x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps (unclamped)."""
    _check_t(t, 1, sched.T)
    if x0.shape != eps.shape:
        raise ValueError(f"shape mismatch: {x0.shape} vs {eps.shape}")
    ab = sched.alpha_bar[t]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def ddim_step(
    x_t: np.ndarray, eps_hat: np.ndarray, t: int, t_prev: int, sched: NoiseSchedule
) -> np.ndarray:
    """Deterministic reverse update from timestep t to t_prev < t.

    Estimates the clean raster from (x_t, eps_hat), then re-noises it to
    t_prev with the same predicted noise.
    """
    if not 0 <= t_prev < t <= sched.T:
        raise ValueError(f"need 0 <= t_prev < t <= T, got t_prev={t_prev}, t={t}")
    ab_t = sched.alpha_bar[t]
    ab_p = sched.alpha_bar[t_prev]
    x0_hat = (x_t - np.sqrt(1.0 - ab_t) * eps_hat) / np.sqrt(ab_t)
    return np.sqrt(ab_p) * x0_hat + np.sqrt(1.0 - ab_p) * eps_hat


def stochastic_inversion(
    content: Image,
    t_star: int,
    sched: NoiseSchedule,
    predictor: NoisePredictor,
    rng: Rng,
):
    """Noise the content image and re-express it with the predicted noise.

    Draws eps, forms x_t = q_sample(content, t_star, eps), asks the predictor
    for eps_pred, and rebuilds x_init from the content and eps_pred.  The
    drawn eps is discarded; with a perfect predictor x_init equals x_t and
    synthesis returns the content exactly, which is the content-preservation
    contract of the inversion.

    Returns (x_init, eps_pred).
    """
    _check_t(t_star, 1, sched.T, "t_star")
    x0 = content.to_raster()
    eps = rng.gaussian(x0.shape)
    x_t = q_sample(x0, t_star, eps, sched)
    eps_pred = predictor(x_t, t_star, None)
    ab = sched.alpha_bar[t_star]
    x_init = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps_pred
    return x_init, eps_pred


def synthesize(
    x_init: np.ndarray,
    style: Optional[np.ndarray],
    predictor: NoisePredictor,
    sched: NoiseSchedule,
    steps: Sequence[int],
) -> Image:
    """Iterate ddim_step along a descending timestep ladder down to 0.

    steps must be strictly decreasing, start at or below T, and end at 0;
    the style embedding is handed to the predictor at every step.
    """
    steps = [int(s) for s in steps]
    if not steps:
        raise ValueError("steps must be non-empty")
    if steps[-1] != 0:
        raise ValueError("steps must end at 0")
    if steps[0] > sched.T or steps[0] < 1:
        raise ValueError(f"first step must be in [1, T], got {steps[0]}")
    if any(b >= a for a, b in zip(steps, steps[1:])):
        raise ValueError("steps must be strictly decreasing")
    x = x_init
    for t, t_prev in zip(steps, steps[1:]):
        eps_hat = predictor(x, t, style)
        x = ddim_step(x, eps_hat, t, t_prev, sched)
    return clamp_to_image(x)


def sampling_steps(t_start: int, count: int) -> list[int]:
    """Descending integer ladder from t_start to 0 with at most count updates."""
    if t_start < 1:
        raise ValueError("t_start must be >= 1")
    if count < 1:
        raise ValueError("count must be >= 1")
    ladder = np.unique(np.round(np.linspace(t_start, 0, count + 1)).astype(int))[::-1]
    return [int(v) for v in ladder]


class OraclePredictor:
    """Returns a fixed noise raster; reconstructs exactly when fed the truth."""

    def __init__(self, eps: np.ndarray):
        self.eps = eps

    def __call__(self, x_t: np.ndarray, t: int, style=None) -> np.ndarray:
        return self.eps


class ZeroPredictor:
    """Predicts no noise at all; synthesis just rescales its input."""

    def __call__(self, x_t: np.ndarray, t: int, style=None) -> np.ndarray:
        return np.zeros_like(x_t)


class TargetPredictor:
    """Noise consistent with a fixed clean target raster.

    eps_hat = (x_t - sqrt(ab_t) g) / sqrt(1 - ab_t), which makes the target
    the fixed point of every ddim_step regardless of the step ladder.
    """

    def __init__(self, target: np.ndarray, sched: NoiseSchedule):
        self.target = target
        self.sched = sched

    def __call__(self, x_t: np.ndarray, t: int, style=None) -> np.ndarray:
        _check_t(t, 1, self.sched.T)
        ab = self.sched.alpha_bar[t]
        return (x_t - np.sqrt(ab) * self.target) / np.sqrt(1.0 - ab)
