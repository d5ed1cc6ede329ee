"""Frame-wise video pipeline: uncompressed I/O, per-frame stylization with
optional EMA smoothing, and temporal-consistency metrics.

Containers are deliberately simple: YUV4MPEG2 streams (C444 or C420jpeg
chroma) and numbered frame directories.  Compressed codecs are out of scope;
transcode externally.

Round-trip guarantees: C444 write(read(s)) is byte-exact for any stream s
that write_y4m produced.  C420jpeg loses chroma resolution once, after which
write(read(.)) is byte-stable as long as the decoded samples stay inside the
RGB gamut; pairing per-pixel luma with block-averaged chroma can step outside
it at saturated high-contrast edges, and the clamp then perturbs single
quantized bytes.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .imagecore import (
    CorruptFileError,
    Image,
    ImageFormatError,
    _ycbcr_planes,
    _ycbcr_planes_to_rgb,
    load_image,
    save_image,
)


class FrameGapError(ValueError):
    """Frame directory has missing indices."""


@dataclass(frozen=True)
class FrameSequence:
    """Ordered frames of uniform geometry plus the frame rate."""

    frames: tuple
    fps: Fraction = Fraction(25, 1)

    def __post_init__(self):
        if not self.frames:
            raise ValueError("a sequence needs at least one frame")
        first = self.frames[0]
        for i, f in enumerate(self.frames):
            if f.data.shape != first.data.shape:
                raise ValueError(
                    f"frame {i} is {f.width}x{f.height}x{f.channels}, "
                    f"expected {first.width}x{first.height}x{first.channels}"
                )
        if self.fps <= 0:
            raise ValueError("fps must be positive")
        object.__setattr__(self, "frames", tuple(self.frames))

    def __len__(self) -> int:
        return len(self.frames)


# ---------------------------------------------------------------------------
# YUV4MPEG2
# ---------------------------------------------------------------------------

_Y4M_MAGIC = b"YUV4MPEG2"
_SUPPORTED_CHROMA = ("444", "420jpeg")


def _quant(plane: np.ndarray) -> bytes:
    return np.floor(plane * 255.0 + 0.5).astype(np.uint8).tobytes()


def _down2(plane: np.ndarray) -> np.ndarray:
    # pairwise means keep repeated values exact, so up/down cycles settle
    a = 0.5 * (plane[0::2, :] + plane[1::2, :])
    return 0.5 * (a[:, 0::2] + a[:, 1::2])


def _up2(plane: np.ndarray) -> np.ndarray:
    return plane.repeat(2, axis=0).repeat(2, axis=1)


def read_y4m(path) -> FrameSequence:
    """Parse a YUV4MPEG2 stream with C444 or C420jpeg chroma into RGB frames."""
    with open(path, "rb") as f:
        blob = f.read()
    nl = blob.find(b"\n")
    if nl < 0 or not blob.startswith(_Y4M_MAGIC + b" "):
        raise ImageFormatError(f"{path}: not a YUV4MPEG2 stream")
    width = height = None
    fps = Fraction(25, 1)
    chroma = "420jpeg"
    for tag in blob[len(_Y4M_MAGIC) + 1 : nl].decode("ascii", "replace").split(" "):
        if not tag:
            continue
        key, val = tag[0], tag[1:]
        try:
            if key == "W":
                width = int(val)
            elif key == "H":
                height = int(val)
            elif key == "F":
                num, den = val.split(":")
                fps = Fraction(int(num), int(den))
            elif key == "C":
                chroma = val
        except (ValueError, ZeroDivisionError):
            raise CorruptFileError(f"{path}: malformed header tag {tag!r}") from None
    if width is None or height is None or width < 1 or height < 1:
        raise CorruptFileError(f"{path}: header missing W/H")
    if chroma not in _SUPPORTED_CHROMA:
        raise ImageFormatError(f"{path}: unsupported chroma tag C{chroma}")
    if chroma == "420jpeg" and (width % 2 or height % 2):
        raise CorruptFileError(f"{path}: C420jpeg needs even dimensions, got {width}x{height}")

    luma_len = width * height
    chroma_len = luma_len if chroma == "444" else (width // 2) * (height // 2)
    frames = []
    pos = nl + 1
    index = 0
    while pos < len(blob):
        marker_end = blob.find(b"\n", pos)
        if marker_end < 0 or not blob[pos:marker_end].startswith(b"FRAME"):
            raise CorruptFileError(f"{path}: bad FRAME marker at frame {index}")
        pos = marker_end + 1
        need = luma_len + 2 * chroma_len
        payload = blob[pos : pos + need]
        if len(payload) != need:
            raise CorruptFileError(f"{path}: truncated stream at frame {index}")
        pos += need
        y = np.frombuffer(payload[:luma_len], np.uint8).reshape(height, width) / 255.0
        u_raw = np.frombuffer(payload[luma_len : luma_len + chroma_len], np.uint8)
        v_raw = np.frombuffer(payload[luma_len + chroma_len :], np.uint8)
        if chroma == "444":
            u = u_raw.reshape(height, width) / 255.0
            v = v_raw.reshape(height, width) / 255.0
        else:
            u = _up2(u_raw.reshape(height // 2, width // 2) / 255.0)
            v = _up2(v_raw.reshape(height // 2, width // 2) / 255.0)
        frames.append(_ycbcr_planes_to_rgb(np.stack([y, u, v], axis=-1)))
        index += 1
    if not frames:
        raise CorruptFileError(f"{path}: stream holds no frames")
    return FrameSequence(tuple(frames), fps)


def write_y4m(seq: FrameSequence, path, chroma: str = "444") -> None:
    """Write RGB frames as YUV4MPEG2; C444 keeps every sample, C420jpeg
    box-averages chroma."""
    if chroma not in _SUPPORTED_CHROMA:
        raise ImageFormatError(f"unsupported chroma tag C{chroma}")
    first = seq.frames[0]
    if first.channels != 3:
        raise ValueError("y4m needs 3-channel frames")
    if chroma == "420jpeg" and (first.width % 2 or first.height % 2):
        raise ValueError(f"C420jpeg needs even dimensions, got {first.width}x{first.height}")
    header = (
        f"YUV4MPEG2 W{first.width} H{first.height} "
        f"F{seq.fps.numerator}:{seq.fps.denominator} Ip A1:1 C{chroma}\n"
    )
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        for frame in seq.frames:
            ycc = _ycbcr_planes(frame)
            f.write(b"FRAME\n")
            f.write(_quant(ycc[:, :, 0]))
            if chroma == "444":
                f.write(_quant(ycc[:, :, 1]))
                f.write(_quant(ycc[:, :, 2]))
            else:
                f.write(_quant(_down2(ycc[:, :, 1])))
                f.write(_quant(_down2(ycc[:, :, 2])))


# ---------------------------------------------------------------------------
# Frame directories
# ---------------------------------------------------------------------------

_PATTERN_RE = re.compile(r"%0(\d+)d")


def _pattern_regex(pattern: str) -> re.Pattern:
    m = _PATTERN_RE.search(pattern)
    if not m or len(_PATTERN_RE.findall(pattern)) != 1:
        raise ValueError(
            f"pattern needs exactly one zero-padded index placeholder, got {pattern!r}"
        )
    width = int(m.group(1))
    prefix, suffix = pattern[: m.start()], pattern[m.end() :]
    return re.compile(re.escape(prefix) + rf"(\d{{{width},}})" + re.escape(suffix) + r"$")


def read_frame_dir(path, pattern: str = "frame_%04d.png", fps: Fraction = Fraction(25, 1)) -> FrameSequence:
    """Load numbered frames in index order; indices must be contiguous."""
    rx = _pattern_regex(pattern)
    found = {}
    for name in os.listdir(path):
        m = rx.match(name)
        if m:
            found[int(m.group(1))] = name
    if not found:
        raise FileNotFoundError(f"no frames matching {pattern!r} in {path}")
    lo, hi = min(found), max(found)
    missing = sorted(set(range(lo, hi + 1)) - set(found))
    if missing:
        raise FrameGapError(f"missing frame indices {missing} in {path}")
    frames = [load_image(os.path.join(path, found[i])) for i in range(lo, hi + 1)]
    return FrameSequence(tuple(frames), fps)


def write_frame_dir(seq: FrameSequence, path, pattern: str = "frame_%04d.png") -> None:
    """Write frames as individually numbered image files, starting at 0."""
    _pattern_regex(pattern)  # validate
    os.makedirs(path, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        save_image(frame, os.path.join(path, pattern % i))


# ---------------------------------------------------------------------------
# Stylization and temporal metrics
# ---------------------------------------------------------------------------


def stylize_video(
    seq: FrameSequence,
    op: Callable[[Image], Image],
    smoothing: str = "none",
    alpha: float = 0.5,
) -> FrameSequence:
    """Map op over frames; optionally EMA-blend consecutive outputs.

    With smoothing="ema", output[i] = alpha * styled[i] + (1 - alpha) *
    output[i-1]; alpha = 1 reduces to no smoothing.  EMA trades flicker for
    ghosting and is a mitigation knob, not part of the per-frame transfer.
    """
    if smoothing not in ("none", "ema"):
        raise ValueError(f"unknown smoothing {smoothing!r} (use none or ema)")
    styled = [op(frame) for frame in seq.frames]
    if smoothing == "ema":
        if not 0.0 < alpha <= 1.0:
            raise ValueError("ema alpha must be in (0, 1]")
        out = [styled[0]]
        for frame in styled[1:]:
            blended = alpha * frame.data + (1.0 - alpha) * out[-1].data
            out.append(Image(blended))
        styled = out
    return FrameSequence(tuple(styled), seq.fps)


def flicker_index(seq: FrameSequence) -> float:
    """Mean absolute per-sample difference between consecutive frames."""
    if len(seq) < 2:
        raise ValueError("flicker_index needs at least 2 frames")
    diffs = [
        float(np.mean(np.abs(b.data - a.data)))
        for a, b in zip(seq.frames, seq.frames[1:])
    ]
    return float(np.mean(diffs))


def temporal_consistency_ratio(stylized: FrameSequence, source: FrameSequence) -> float:
    """flicker(stylized) / flicker(source); above 1 means stylization added flicker."""
    if len(stylized) != len(source):
        raise ValueError(f"frame counts differ: {len(stylized)} vs {len(source)}")
    src = flicker_index(source)
    if src == 0.0:
        raise ValueError("source sequence has zero flicker; ratio undefined")
    return flicker_index(stylized) / src
