"""Fixed-input-size tiled processing: split an image into equal square tiles,
run a fixed-size operator on each, and merge with window-weighted overlap
blending to hide tile seams.

The no-overlap rectangular-window configuration reproduces the naive
crop/concatenate baseline and its visible seams; ``seam_energy`` quantifies
them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from .imagecore import Image, clamp_to_image

TileOp = Callable[[Image], Image]

WINDOW_KINDS = ("rect", "linear", "hann")


def make_window(tile: int, kind: str) -> np.ndarray:
    """Per-pixel blend weights of one tile, strictly positive everywhere.

    Weights need no global normalization; merging divides by the per-pixel
    weight sum, which makes the normalized windows a partition of unity.
    """
    if kind == "rect":
        profile = np.ones(tile)
    elif kind == "linear":
        # symmetric ramp, peak at the center, never zero at the edges
        i = np.arange(tile, dtype=np.float64)
        profile = np.minimum(i + 1.0, tile - i)
    elif kind == "hann":
        # offset-sampled raised cosine: sin^2(pi (i + 0.5) / tile) > 0
        i = np.arange(tile, dtype=np.float64)
        profile = np.sin(np.pi * (i + 0.5) / tile) ** 2
    else:
        raise ValueError(f"unknown window kind {kind!r} (use rect, linear, or hann)")
    return np.outer(profile, profile)


@dataclass(frozen=True)
class TileGrid:
    """Geometry of a tile decomposition plus the blend window.

    offsets are (x, y) tile origins in the padded image, row-major.  The
    padded image mirror-extends the original on the right/bottom so that
    (padded - tile) is divisible by stride.
    """

    tile: int
    stride: int
    offsets: Tuple[Tuple[int, int], ...]
    padded_size: Tuple[int, int]  # (width, height)
    original_size: Tuple[int, int]  # (width, height)
    window: np.ndarray

    @property
    def overlap(self) -> int:
        return self.tile - self.stride


def _padded_extent(dim: int, tile: int, stride: int) -> int:
    if dim <= tile:
        return tile
    return tile + stride * int(np.ceil((dim - tile) / stride))


def split_tiles(img: Image, tile: int, stride: int, window: str = "rect"):
    """Decompose an image into tile x tile crops on a stride grid.

    Returns (grid, tiles) with tiles enumerated row-major.  The image is
    mirror-padded so every tile is full-size and every padded pixel is
    covered by at least one tile.
    """
    if tile < 1:
        raise ValueError("tile must be >= 1")
    if not 1 <= stride <= tile:
        raise ValueError(f"stride must satisfy 1 <= stride <= tile, got {stride} > {tile}")
    h, w = img.height, img.width
    pw = _padded_extent(w, tile, stride)
    ph = _padded_extent(h, tile, stride)
    padded = np.pad(img.data, ((0, ph - h), (0, pw - w), (0, 0)), mode="symmetric")

    offsets = []
    tiles = []
    for y in range(0, ph - tile + 1, stride):
        for x in range(0, pw - tile + 1, stride):
            offsets.append((x, y))
            tiles.append(Image(padded[y : y + tile, x : x + tile, :]))
    grid = TileGrid(
        tile=tile,
        stride=stride,
        offsets=tuple(offsets),
        padded_size=(pw, ph),
        original_size=(w, h),
        window=make_window(tile, window),
    )
    return grid, tiles


def merge_tiles(grid: TileGrid, tiles: Sequence[Image]) -> Image:
    """Recombine tiles by window-weighted averaging, cropped to original size.

    Each output pixel is sum(w_i * v_i) / sum(w_i) over the tiles covering
    it.  The average is computed against a reference layer so that pixels
    whose covering tiles all agree come back bit-exact, which makes
    merge(split(img)) the identity.
    """
    if len(tiles) != len(grid.offsets):
        raise ValueError(f"expected {len(grid.offsets)} tiles, got {len(tiles)}")
    t = grid.tile
    for img in tiles:
        if img.height != t or img.width != t:
            raise ValueError(f"tile size mismatch: expected {t}x{t}, got {img.width}x{img.height}")
    channels = tiles[0].channels
    pw, ph = grid.padded_size
    ref = np.zeros((ph, pw, channels))
    acc = np.zeros((ph, pw, channels))
    den = np.zeros((ph, pw, 1))
    w2 = grid.window[:, :, None]
    # first tile in row-major order wins the reference layer
    for (x, y), img in reversed(list(zip(grid.offsets, tiles))):
        ref[y : y + t, x : x + t, :] = img.data
    for (x, y), img in zip(grid.offsets, tiles):
        acc[y : y + t, x : x + t, :] += w2 * (img.data - ref[y : y + t, x : x + t, :])
        den[y : y + t, x : x + t, :] += w2
    out = ref + acc / den
    w, h = grid.original_size
    return clamp_to_image(out[:h, :w, :])


def process_tiled(
    img: Image, op: TileOp, tile: int, overlap: int, window: str = "hann"
) -> Image:
    """split -> apply op to every tile -> merge with the chosen blend window."""
    if not 0 <= overlap < tile:
        raise ValueError(f"overlap must satisfy 0 <= overlap < tile, got {overlap}")
    grid, tiles = split_tiles(img, tile, tile - overlap, window=window)
    processed = []
    for tile_img in tiles:
        out = op(tile_img)
        if out.width != tile or out.height != tile:
            raise ValueError("tile op must preserve tile dimensions")
        processed.append(out)
    return merge_tiles(grid, processed)


def seam_energy(img: Image, pitch: int) -> float:
    """Excess edge response along the pitch grid, floored at zero.

    Mean absolute finite difference across row/column boundaries at multiples
    of pitch, minus the same statistic over all other boundaries.  Zero means
    the pitch grid is no busier than the rest of the image.
    """
    if pitch < 2:
        raise ValueError("pitch must be >= 2")
    data = img.data
    h, w = img.height, img.width
    seam_vals = []
    other_vals = []
    if w > 1:
        dx = np.abs(np.diff(data, axis=1))  # boundary b sits between columns b-1 and b
        cols = np.arange(1, w)
        on_grid = cols % pitch == 0
        seam_vals.append(dx[:, on_grid, :].ravel())
        other_vals.append(dx[:, ~on_grid, :].ravel())
    if h > 1:
        dy = np.abs(np.diff(data, axis=0))
        rows = np.arange(1, h)
        on_grid = rows % pitch == 0
        seam_vals.append(dy[on_grid, :, :].ravel())
        other_vals.append(dy[~on_grid, :, :].ravel())
    seam = np.concatenate(seam_vals) if seam_vals else np.empty(0)
    other = np.concatenate(other_vals) if other_vals else np.empty(0)
    if seam.size == 0:
        return 0.0
    background = float(other.mean()) if other.size else 0.0
    return max(float(seam.mean()) - background, 0.0)
