"""Shared synthetic fixtures for the test suite."""

import numpy as np

from toonpipe.imagecore import Image, Rng


def synth_scene(seed, size=64):
    """Deterministic toy scene: gradient sky, a disk, and a rectangle."""
    rng = Rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    top, bottom = rng.uniform((2, 3))
    img = top[None, None, :] * (1 - yy[:, :, None]) + bottom[None, None, :] * yy[:, :, None]

    cx, cy = 0.25 + 0.5 * rng.uniform((2,))
    radius = 0.12 + 0.15 * rng.uniform(())
    disk_color = rng.uniform((3,))
    mask = (xx - cx) ** 2 + (yy - cy) ** 2 < radius**2
    img[mask] = disk_color

    x0, y0 = (0.1 + 0.5 * rng.uniform((2,)))
    w, h = 0.15 + 0.2 * rng.uniform((2,))
    rect_color = rng.uniform((3,))
    rect = (xx >= x0) & (xx < x0 + w) & (yy >= y0) & (yy < y0 + h)
    img[rect] = rect_color

    return Image(np.clip(img, 0.0, 1.0))


def quantized_scene(seed, size=64, levels=4):
    """Scene snapped to a small fixed color set (at most levels^3 colors)."""
    img = synth_scene(seed, size)
    q = np.round(img.data * (levels - 1)) / (levels - 1)
    return Image(q)


def striped_scene(seed, size=32, n_scenes=10):
    """Scene with a seed-specific dominant stripe orientation plus a disk.

    Each seed gets a clearly different orientation signature, so structure
    preservation is measurable through the orientation-histogram embedding.
    """
    rng = Rng(seed)
    theta = np.pi * ((seed % n_scenes) / n_scenes + 0.05)
    yy, xx = np.mgrid[0:size, 0:size] / max(size - 1, 1)
    phase = xx * np.cos(theta) + yy * np.sin(theta)
    freq = 4 + (seed * 3) % 5
    stripe = 0.5 + 0.5 * np.sign(np.sin(2 * np.pi * freq * phase + 0.7))
    c0, c1 = rng.uniform((2, 3)) * 0.8 + 0.1
    img = c0[None, None, :] * stripe[:, :, None] + c1[None, None, :] * (1 - stripe)[:, :, None]

    cx, cy = 0.3 + 0.4 * rng.uniform((2,))
    radius = 0.15 + 0.1 * rng.uniform(())
    mask = (xx - cx) ** 2 + (yy - cy) ** 2 < radius**2
    img[mask] = rng.uniform((3,))
    return Image(np.clip(img, 0.0, 1.0))


def smooth_blobs(seed, size=24):
    """Asymmetric smooth random field; gradient angles stay off bin edges."""
    from scipy import ndimage

    noise = Rng(seed).uniform((size, size, 3))
    arr = ndimage.gaussian_filter(noise, sigma=(2.5, 2.5, 0), mode="wrap")
    lo, hi = arr.min(), arr.max()
    return Image((arr - lo) / (hi - lo))


def periodic_texture(seed, size=48):
    """Smooth, spatially periodic pattern; rolling it leaves no seam."""
    rng = Rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] * (2 * np.pi / size)
    img = np.zeros((size, size, 3))
    for c in range(3):
        a, b, p, q2 = rng.uniform((4,))
        img[:, :, c] = 0.5 + 0.25 * (
            a * np.sin(xx * (1 + int(3 * p))) + b * np.cos(yy * (1 + int(3 * q2)))
        )
    return Image(np.clip(img, 0.0, 1.0))
