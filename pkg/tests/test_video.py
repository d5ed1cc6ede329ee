import zlib
from fractions import Fraction

import numpy as np
import pytest

from helpers import synth_scene

from toonpipe.imagecore import (
    CorruptFileError,
    Image,
    ImageFormatError,
    Rng,
    add_gaussian_noise,
    constant_image,
)
from toonpipe.video import (
    FrameGapError,
    FrameSequence,
    flicker_index,
    read_frame_dir,
    read_y4m,
    stylize_video,
    temporal_consistency_ratio,
    write_frame_dir,
    write_y4m,
)


def gray_bytes(v, n):
    return bytes([v] * n)


def make_c444_blob(frames, w, h, fps="25:1"):
    out = f"YUV4MPEG2 W{w} H{h} F{fps} C444\n".encode()
    for y, u, v in frames:
        out += b"FRAME\n" + y + u + v
    return out


def random_sequence(seed, n=4, size=8):
    rng = Rng(seed)
    return FrameSequence(tuple(Image(rng.uniform((size, size, 3))) for _ in range(n)))


def gamut_margin_sequence(seed, n=3, size=16):
    """Frames kept away from RGB saturation, where C420 reconstruction of
    per-pixel luma with block-averaged chroma is guaranteed in gamut."""
    frames = tuple(
        Image(synth_scene(seed * 10 + i, size).data * 0.8 + 0.1) for i in range(n)
    )
    return FrameSequence(frames)


def fade_sequence(n=11, size=4):
    return FrameSequence(tuple(constant_image(size, size, i / (n - 1)) for i in range(n)))


class TestY4mRead:
    def test_two_frame_c444(self, tmp_path):
        n = 16
        blob = make_c444_blob(
            [(gray_bytes(128, n), gray_bytes(128, n), gray_bytes(128, n))] * 2, 4, 4
        )
        p = tmp_path / "two.y4m"
        p.write_bytes(blob)
        seq = read_y4m(p)
        assert len(seq) == 2
        assert seq.frames[0].width == 4 and seq.frames[0].height == 4

    def test_fps_parsing(self, tmp_path):
        n = 16
        blob = make_c444_blob([(gray_bytes(0, n),) * 3], 4, 4, fps="25:1")
        p = tmp_path / "fps.y4m"
        p.write_bytes(blob)
        assert read_y4m(p).fps == Fraction(25, 1)

    def test_truncated_second_frame_names_index(self, tmp_path):
        n = 16
        good = (gray_bytes(10, n),) * 3
        blob = make_c444_blob([good], 4, 4) + b"FRAME\n" + gray_bytes(10, 20)
        p = tmp_path / "trunc.y4m"
        p.write_bytes(blob)
        with pytest.raises(CorruptFileError, match="frame 1"):
            read_y4m(p)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.y4m"
        p.write_bytes(b"RIFFxxxx not a y4m\n")
        with pytest.raises(ImageFormatError):
            read_y4m(p)

    def test_unsupported_chroma(self, tmp_path):
        p = tmp_path / "c422.y4m"
        p.write_bytes(b"YUV4MPEG2 W4 H4 F25:1 C422\nFRAME\n" + bytes(32))
        with pytest.raises(ImageFormatError, match="C422"):
            read_y4m(p)

    def test_neutral_gray_decodes_to_gray(self, tmp_path):
        # chroma byte 128 sits half a code above neutral 127.5, so the
        # decoded RGB may deviate by up to ~(0.5/255) * 1.772
        n = 16
        blob = make_c444_blob([(gray_bytes(128, n), gray_bytes(128, n), gray_bytes(128, n))], 4, 4)
        p = tmp_path / "gray.y4m"
        p.write_bytes(blob)
        frame = read_y4m(p).frames[0]
        assert np.abs(frame.data - 128 / 255).max() < 4e-3


class TestY4mRoundTrip:
    @pytest.mark.parametrize("seed", range(3))
    def test_c444_byte_exact(self, tmp_path, seed):
        seq = random_sequence(seed, n=3, size=6)
        p1 = tmp_path / "a.y4m"
        p2 = tmp_path / "b.y4m"
        write_y4m(seq, p1, chroma="444")
        write_y4m(read_y4m(p1), p2, chroma="444")
        assert p1.read_bytes() == p2.read_bytes()

    @pytest.mark.parametrize("seed", range(5))
    def test_c420_idempotent_after_one_cycle(self, tmp_path, seed):
        # first cycle loses chroma resolution; second is the identity for
        # content that decodes inside the RGB gamut
        seq = gamut_margin_sequence(seed)
        p1, p2, p3 = (tmp_path / f"{i}.y4m" for i in range(3))
        write_y4m(seq, p1, chroma="420jpeg")
        write_y4m(read_y4m(p1), p2, chroma="420jpeg")
        write_y4m(read_y4m(p2), p3, chroma="420jpeg")
        assert p2.read_bytes() == p3.read_bytes()

    def test_c420_odd_dims_rejected(self, tmp_path):
        seq = FrameSequence((constant_image(5, 4, 0.5),))
        with pytest.raises(ValueError):
            write_y4m(seq, tmp_path / "odd.y4m", chroma="420jpeg")


class TestFrameDir:
    def test_ordered_read(self, tmp_path):
        seq = random_sequence(1, n=3)
        write_frame_dir(seq, tmp_path)
        back = read_frame_dir(tmp_path)
        assert len(back) == 3
        for a, b in zip(seq.frames, back.frames):
            assert np.abs(a.data - b.data).max() <= 0.5 / 255

    def test_gap_detection(self, tmp_path):
        seq = random_sequence(2, n=3)
        write_frame_dir(seq, tmp_path)
        (tmp_path / "frame_0001.png").unlink()
        with pytest.raises(FrameGapError, match=r"\[1\]"):
            read_frame_dir(tmp_path)

    def test_round_trip_bit_exact_at_8bit(self, tmp_path):
        seq = random_sequence(3, n=5)
        write_frame_dir(seq, tmp_path)
        once = read_frame_dir(tmp_path)
        other = tmp_path / "again"
        write_frame_dir(once, other)
        twice = read_frame_dir(other)
        for a, b in zip(once.frames, twice.frames):
            assert np.array_equal(a.data, b.data)

    def test_mixed_dimensions_rejected(self, tmp_path):
        from toonpipe.imagecore import save_image

        save_image(constant_image(4, 4, 0.1), tmp_path / "frame_0000.png")
        save_image(constant_image(5, 4, 0.1), tmp_path / "frame_0001.png")
        with pytest.raises(ValueError):
            read_frame_dir(tmp_path)

    def test_bad_pattern(self, tmp_path):
        with pytest.raises(ValueError):
            read_frame_dir(tmp_path, pattern="frame.png")

    def test_empty_dir(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_frame_dir(tmp_path)


class TestStylizeVideo:
    def test_identity_no_smoothing(self):
        seq = random_sequence(4)
        out = stylize_video(seq, lambda f: f, smoothing="none")
        for a, b in zip(seq.frames, out.frames):
            assert np.array_equal(a.data, b.data)

    def test_ema_alpha_one_equals_none(self):
        seq = random_sequence(5)
        op = lambda f: Image(1.0 - f.data)
        plain = stylize_video(seq, op, smoothing="none")
        ema1 = stylize_video(seq, op, smoothing="ema", alpha=1.0)
        for a, b in zip(plain.frames, ema1.frames):
            assert np.array_equal(a.data, b.data)

    def test_ema_geometric_recursion(self):
        # alternating all-0/all-1 frames, alpha=0.5: 0, .5, .25, .625, ...
        frames = tuple(constant_image(2, 2, i % 2) for i in range(5))
        out = stylize_video(FrameSequence(frames), lambda f: f, smoothing="ema", alpha=0.5)
        values = [f.data[0, 0, 0] for f in out.frames]
        assert values == [0.0, 0.5, 0.25, 0.625, 0.3125]

    def test_alpha_validation(self):
        seq = random_sequence(6)
        with pytest.raises(ValueError):
            stylize_video(seq, lambda f: f, smoothing="ema", alpha=0.0)
        with pytest.raises(ValueError):
            stylize_video(seq, lambda f: f, smoothing="median")

    def test_deterministic_and_order_preserving(self):
        seq = random_sequence(7, n=6)
        op = lambda f: Image(f.data**2)
        a = stylize_video(seq, op)
        b = stylize_video(seq, op)
        for i, (fa, fb) in enumerate(zip(a.frames, b.frames)):
            assert np.array_equal(fa.data, fb.data)
            assert np.array_equal(fa.data, seq.frames[i].data ** 2)


class TestFlicker:
    def test_static_zero(self):
        seq = FrameSequence(tuple(constant_image(4, 4, 0.5) for _ in range(5)))
        assert flicker_index(seq) == 0.0

    def test_alternating_full_swing(self):
        seq = FrameSequence(tuple(constant_image(4, 4, i % 2) for i in range(6)))
        assert flicker_index(seq) == 1.0

    def test_linear_fade(self):
        assert abs(flicker_index(fade_sequence(11)) - 0.1) < 1e-12

    def test_single_frame_rejected(self):
        with pytest.raises(ValueError):
            flicker_index(FrameSequence((constant_image(2, 2, 0.1),)))


def hash_seeded_noise_op(sigma=0.1, salt=0):
    """Independent per-frame noise with seeds fixed by frame content."""

    def op(frame):
        key = zlib.crc32(frame.data.tobytes()) ^ salt
        return add_gaussian_noise(frame, sigma, Rng(key))

    return op


class TestTemporalConsistency:
    def test_identity_ratio_one(self):
        seq = fade_sequence(8)
        assert temporal_consistency_ratio(seq, seq) == 1.0

    def test_constant_stylization_ratio_zero(self):
        src = fade_sequence(8)
        styled = FrameSequence(tuple(constant_image(4, 4, 0.5) for _ in range(8)))
        assert temporal_consistency_ratio(styled, src) == 0.0

    def test_noise_injection_amplifies_and_ema_mitigates(self):
        src = FrameSequence(
            tuple(constant_image(16, 16, 0.02 + i * 0.05) for i in range(20))
        )
        op = hash_seeded_noise_op(sigma=0.1)
        noisy = stylize_video(src, op, smoothing="none")
        smoothed = stylize_video(src, op, smoothing="ema", alpha=0.5)
        r_noisy = temporal_consistency_ratio(noisy, src)
        r_smooth = temporal_consistency_ratio(smoothed, src)
        assert r_noisy > 1.0
        assert r_smooth < r_noisy

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            temporal_consistency_ratio(fade_sequence(5), fade_sequence(6))

    def test_zero_source_flicker(self):
        static = FrameSequence(tuple(constant_image(2, 2, 0.5) for _ in range(3)))
        with pytest.raises(ValueError):
            temporal_consistency_ratio(static, static)

    @pytest.mark.parametrize("seed", range(100))
    def test_ema_never_increases_flicker(self, seed):
        rng = Rng(seed)
        n = 3 + int(rng.uniform(()) * 6)
        alpha = float(rng.uniform(())) * 0.99 + 0.01
        frames = tuple(Image(rng.uniform((5, 5, 3))) for _ in range(n))
        seq = FrameSequence(frames)
        smoothed = stylize_video(seq, lambda f: f, smoothing="ema", alpha=alpha)
        assert flicker_index(smoothed) <= flicker_index(seq) + 1e-12


class TestSequenceValidation:
    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            FrameSequence(())

    def test_mixed_shapes_rejected(self):
        with pytest.raises(ValueError):
            FrameSequence((constant_image(2, 2, 0.1), constant_image(3, 2, 0.1)))
