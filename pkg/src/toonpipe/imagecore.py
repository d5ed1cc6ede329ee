"""Core raster type, deterministic PRNG, color conversion, resampling, noise
injection, fidelity metrics, and still-image file I/O.

Sample domain is float [0, 1] everywhere; 8-bit only at file boundaries.
Unclamped intermediate arrays ("rasters") are plain float64 ndarrays, and
:func:`clamp_to_image` is the single point where they re-enter the clamped
Image domain.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass

import numpy as np


class ImageFormatError(ValueError):
    """File is not in a supported image format."""


class CorruptFileError(ValueError):
    """File claims a supported format but its contents are malformed."""


# ---------------------------------------------------------------------------
# Deterministic PRNG
# ---------------------------------------------------------------------------

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix64(x: np.ndarray) -> np.ndarray:
    # SplitMix64 finalizer (Steele et al.), applied elementwise on uint64.
    x = x.copy()
    x ^= x >> np.uint64(30)
    x *= _MIX1
    x ^= x >> np.uint64(27)
    x *= _MIX2
    x ^= x >> np.uint64(31)
    return x


class Rng:
    """Counter-based PRNG with reproducible Gaussian sampling.

    Word i of the stream is ``splitmix64_mix(seed + (i+1) * GOLDEN)`` where
    GOLDEN is the SplitMix64 increment; Gaussians come from the Box-Muller
    transform applied to consecutive uniform pairs.  The stream depends only
    on the 64-bit seed and the draw sequence, never on numpy's global state,
    so identical seeds replay identical samples on every platform.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._counter = 0
        self._spare = None  # odd Box-Muller sample held for the next draw

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _mix64(np.uint64(self.seed) + idx * _GOLDEN)

    def uniform(self, shape) -> np.ndarray:
        """Uniform float64 samples in [0, 1)."""
        n = int(np.prod(shape)) if shape else 1
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return u.reshape(shape)

    def gaussian(self, shape) -> np.ndarray:
        """Standard normal float64 samples via Box-Muller.

        Consecutive raw words form (u1, u2) pairs, so the Gaussian stream is
        independent of how draws are batched.
        """
        n = int(np.prod(shape)) if shape else 1
        out = np.empty(n)
        have = 0
        if self._spare is not None and n > 0:
            out[0] = self._spare
            self._spare = None
            have = 1
        need = n - have
        if need > 0:
            m = (need + 1) // 2
            raw = self._raw(2 * m)
            # u1 in (0, 1] so log() is finite; u2 in [0, 1).
            u1 = ((raw[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
            u2 = (raw[1::2] >> np.uint64(11)).astype(np.float64) * 2.0**-53
            r = np.sqrt(-2.0 * np.log(u1))
            theta = 2.0 * np.pi * u2
            z = np.empty(2 * m)
            z[0::2] = r * np.cos(theta)
            z[1::2] = r * np.sin(theta)
            if 2 * m > need:
                self._spare = z[-1]
            out[have:] = z[:need]
        return out.reshape(shape)


# ---------------------------------------------------------------------------
# Image type
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Image:
    """Immutable raster: float64 samples in [0, 1], shape (height, width, channels).

    channels is 3 (RGB) or 1 (luma).  Instances are safe to share between
    tasks; the backing array is marked read-only.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = self.data
        if not isinstance(arr, np.ndarray) or arr.ndim != 3:
            raise ValueError("image data must be an ndarray of shape (h, w, c)")
        h, w, c = arr.shape
        if h < 1 or w < 1:
            raise ValueError(f"image dimensions must be >= 1, got {w}x{h}")
        if c not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {c}")
        if arr.dtype != np.float64:
            arr = arr.astype(np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("image samples must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image samples must lie in [0, 1]; clamp rasters first")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def to_raster(self) -> np.ndarray:
        """Writable float64 copy for unclamped intermediate math."""
        return np.array(self.data, dtype=np.float64)


def clamp_to_image(raster: np.ndarray) -> Image:
    """Clamp an unclamped raster into the [0, 1] Image domain.

    This is the single conversion point between diffusion-style intermediate
    rasters and public Image values.
    """
    arr = np.asarray(raster, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if not np.all(np.isfinite(arr)):
        raise ValueError("raster contains non-finite samples")
    return Image(np.clip(arr, 0.0, 1.0))


def constant_image(width: int, height: int, value, channels: int = 3) -> Image:
    """Image filled with a constant sample value (or per-channel values)."""
    arr = np.empty((height, width, channels), dtype=np.float64)
    arr[:] = np.asarray(value, dtype=np.float64)
    return Image(arr)


# ---------------------------------------------------------------------------
# Quantization and file I/O
# ---------------------------------------------------------------------------


def _quantize8(arr: np.ndarray) -> np.ndarray:
    # round-half-up so 0.5 * 255 = 127.5 -> 128
    return np.floor(arr * 255.0 + 0.5).astype(np.uint8)


def _dequantize8(b: np.ndarray) -> np.ndarray:
    return b.astype(np.float64) / 255.0


def load_image(path) -> Image:
    """Load a PNG (8-bit gray/RGB, non-interlaced) or binary PPM (P6) file."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:2] == b"P6":
        return _decode_ppm(blob)
    if blob[:8] == b"\x89PNG\r\n\x1a\n":
        return _decode_png(blob)
    raise ImageFormatError(f"{path}: not a P6 PPM or PNG file")


def save_image(img: Image, path) -> None:
    """Write an Image as PPM (P6) or PNG, chosen by file extension.

    Samples are quantized to 8 bits; load(save(img)) reproduces every
    quantized sample exactly.
    """
    p = str(path)
    if p.lower().endswith(".ppm"):
        blob = encode_ppm(img)
    elif p.lower().endswith(".png"):
        blob = encode_png(img)
    else:
        raise ImageFormatError(f"{path}: unsupported extension (use .ppm or .png)")
    with open(path, "wb") as f:
        f.write(blob)


def encode_ppm(img: Image) -> bytes:
    if img.channels != 3:
        raise ImageFormatError("PPM (P6) holds RGB only; save luma images as PNG")
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + _quantize8(img.data).tobytes()


def _decode_ppm(blob: bytes) -> Image:
    pos = 2  # past magic
    fields = []
    while len(fields) < 3:
        # skip whitespace and '#' comments between header tokens
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CorruptFileError("PPM: truncated header")
        try:
            fields.append(int(blob[start:pos]))
        except ValueError:
            raise CorruptFileError("PPM: non-numeric header field") from None
    width, height, maxval = fields
    if maxval != 255:
        raise ImageFormatError(f"PPM: only maxval 255 supported, got {maxval}")
    if width < 1 or height < 1:
        raise CorruptFileError("PPM: non-positive dimensions")
    pos += 1  # single whitespace byte after maxval
    payload = blob[pos : pos + width * height * 3]
    if len(payload) != width * height * 3:
        raise CorruptFileError("PPM: truncated pixel payload")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return Image(_dequantize8(arr))


_PNG_SIG = b"\x89PNG\r\n\x1a\n"


def _png_chunk(tag: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(tag + payload) & 0xFFFFFFFF
    return struct.pack(">I", len(payload)) + tag + payload + struct.pack(">I", crc)


def encode_png(img: Image) -> bytes:
    """Minimal PNG encoder: 8-bit, RGB or grayscale, filter 0, fixed zlib level."""
    color_type = 2 if img.channels == 3 else 0
    ihdr = struct.pack(">IIBBBBB", img.width, img.height, 8, color_type, 0, 0, 0)
    raw = _quantize8(img.data)
    rows = []
    for y in range(img.height):
        rows.append(b"\x00" + raw[y].tobytes())
    idat = zlib.compress(b"".join(rows), 6)
    return (
        _PNG_SIG
        + _png_chunk(b"IHDR", ihdr)
        + _png_chunk(b"IDAT", idat)
        + _png_chunk(b"IEND", b"")
    )


def _png_unfilter(data: np.ndarray, height: int, stride: int, bpp: int) -> np.ndarray:
    """Undo per-row PNG filters in place; data is (height, 1 + stride) uint8."""
    out = np.zeros((height, stride), dtype=np.uint8)
    for y in range(height):
        ftype = int(data[y, 0])
        row = data[y, 1:].astype(np.int32)
        prev = out[y - 1].astype(np.int32) if y > 0 else np.zeros(stride, np.int32)
        if ftype == 0:
            cur = row
        elif ftype == 2:  # up
            cur = (row + prev) & 0xFF
        elif ftype in (1, 3, 4):  # sub / average / paeth need a scan
            cur = np.zeros(stride, np.int32)
            for x in range(stride):
                a = cur[x - bpp] if x >= bpp else 0
                b = prev[x]
                c = prev[x - bpp] if x >= bpp else 0
                if ftype == 1:
                    cur[x] = (row[x] + a) & 0xFF
                elif ftype == 3:
                    cur[x] = (row[x] + (a + b) // 2) & 0xFF
                else:
                    p = a + b - c
                    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
                    pred = a if (pa <= pb and pa <= pc) else (b if pb <= pc else c)
                    cur[x] = (row[x] + pred) & 0xFF
        else:
            raise CorruptFileError(f"PNG: unknown filter type {ftype}")
        out[y] = cur.astype(np.uint8)
    return out


def _decode_png(blob: bytes) -> Image:
    pos = 8
    ihdr = None
    idat = b""
    while pos + 8 <= len(blob):
        (length,) = struct.unpack(">I", blob[pos : pos + 4])
        tag = blob[pos + 4 : pos + 8]
        payload = blob[pos + 8 : pos + 8 + length]
        if len(payload) != length:
            raise CorruptFileError("PNG: truncated chunk")
        crc_stored = blob[pos + 8 + length : pos + 12 + length]
        if len(crc_stored) != 4:
            raise CorruptFileError("PNG: truncated chunk CRC")
        if struct.unpack(">I", crc_stored)[0] != (zlib.crc32(tag + payload) & 0xFFFFFFFF):
            raise CorruptFileError(f"PNG: CRC mismatch in {tag!r} chunk")
        pos += 12 + length
        if tag == b"IHDR":
            ihdr = payload
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            break
    if ihdr is None or not idat:
        raise CorruptFileError("PNG: missing IHDR or IDAT")
    width, height, depth, color_type, comp, filt, interlace = struct.unpack(">IIBBBBB", ihdr)
    if depth != 8 or comp != 0 or filt != 0:
        raise ImageFormatError("PNG: only 8-bit depth, standard compression supported")
    if interlace != 0:
        raise ImageFormatError("PNG: interlaced images not supported")
    if color_type == 2:
        channels = 3
    elif color_type == 0:
        channels = 1
    else:
        raise ImageFormatError(f"PNG: unsupported color type {color_type} (no alpha/palette)")
    try:
        raw = zlib.decompress(idat)
    except zlib.error as e:
        raise CorruptFileError(f"PNG: bad zlib stream ({e})") from None
    stride = width * channels
    if len(raw) != height * (stride + 1):
        raise CorruptFileError("PNG: pixel payload has wrong length")
    data = np.frombuffer(raw, dtype=np.uint8).reshape(height, stride + 1)
    pixels = _png_unfilter(data, height, stride, channels)
    return Image(_dequantize8(pixels.reshape(height, width, channels)))


# ---------------------------------------------------------------------------
# Resampling, noise, metrics, color
# ---------------------------------------------------------------------------


def resize_bilinear(img: Image, new_w: int, new_h: int) -> Image:
    """Bilinear resize with half-pixel-center alignment.

    Every output sample is a convex combination of at most four inputs, so
    constants are preserved exactly and the output never exceeds the input
    range.
    """
    if new_w < 1 or new_h < 1:
        raise ValueError("target dimensions must be >= 1")
    src = img.data
    h, w = img.height, img.width

    def axis_coords(n_out, n_in):
        x = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        x = np.clip(x, 0.0, n_in - 1.0)
        i0 = np.floor(x).astype(np.int64)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, x - i0

    x0, x1, fx = axis_coords(new_w, w)
    y0, y1, fy = axis_coords(new_h, h)

    def lerp(a, b, f):
        out = a + f * (b - a)
        return np.clip(out, np.minimum(a, b), np.maximum(a, b))

    rows0 = lerp(src[:, x0, :], src[:, x1, :], fx[None, :, None])
    out = lerp(rows0[y0, :, :], rows0[y1, :, :], fy[:, None, None])
    return Image(out)


def add_gaussian_noise(img: Image, sigma: float, rng: Rng) -> Image:
    """Add clamped i.i.d. Gaussian noise of standard deviation sigma."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return img
    noisy = img.data + sigma * rng.gaussian(img.data.shape)
    return clamp_to_image(noisy)


def mse(a: Image, b: Image) -> float:
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    d = a.data - b.data
    return float(np.mean(d * d))


def psnr(a: Image, b: Image) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    m = mse(a, b)
    if m == 0.0:
        return math.inf
    return -10.0 * math.log10(m)


# Full-range BT.601 conversion matrices.
_RGB_TO_YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168735892, -0.331264108, 0.5],
        [0.5, -0.418687589, -0.081312411],
    ]
)
_YCBCR_TO_RGB = np.linalg.inv(_RGB_TO_YCBCR)


def rgb_to_ycbcr(img: Image) -> Image:
    """Full-range BT.601: gray maps to (Y, 0.5, 0.5)."""
    if img.channels != 3:
        raise ValueError("rgb_to_ycbcr needs a 3-channel image")
    ycc = img.data @ _RGB_TO_YCBCR.T
    ycc[:, :, 1] += 0.5
    ycc[:, :, 2] += 0.5
    return clamp_to_image(ycc)


def ycbcr_to_rgb(img: Image) -> Image:
    if img.channels != 3:
        raise ValueError("ycbcr_to_rgb needs a 3-channel image")
    ycc = img.to_raster()
    ycc[:, :, 1] -= 0.5
    ycc[:, :, 2] -= 0.5
    return clamp_to_image(ycc @ _YCBCR_TO_RGB.T)


def _ycbcr_planes(img: Image) -> np.ndarray:
    """Unclamped YCbCr planes of an RGB image, shape (h, w, 3)."""
    ycc = img.data @ _RGB_TO_YCBCR.T
    ycc[:, :, 1] += 0.5
    ycc[:, :, 2] += 0.5
    return ycc


def _ycbcr_planes_to_rgb(ycc: np.ndarray) -> Image:
    out = ycc.copy()
    out[:, :, 1] -= 0.5
    out[:, :, 2] -= 0.5
    return clamp_to_image(out @ _YCBCR_TO_RGB.T)


def luma(img: Image) -> np.ndarray:
    """BT.601 luma plane as a 2-D array."""
    if img.channels == 1:
        return img.data[:, :, 0].copy()
    return img.data @ _RGB_TO_YCBCR[0]
