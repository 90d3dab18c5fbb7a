import os
import random

import numpy as np
import pytest

from sonoangle.errors import DataIOError, ValidationError
from sonoangle.imaging_io import (
    AngleSeries,
    FrameSequence,
    frame_filename,
    infer_rate,
    load_angles,
    load_frames,
    read_pgm,
    save_angles,
    save_frames,
    write_pgm,
)
from sonoangle.phantom import MotionProtocol, PhantomConfig, generate_target_signal, render_phantom


def _write_frames(d, n, shape=(256, 256), seed=0):
    rng = np.random.default_rng(seed)
    frames = rng.integers(0, 256, size=(n,) + shape, dtype=np.uint8)
    save_frames(FrameSequence(frames), str(d))
    return frames


def test_load_ten_frames(tmp_path):
    frames = _write_frames(tmp_path, 10)
    seq = load_frames(tmp_path)
    assert len(seq) == 10
    assert seq.frames.shape == (10, 256, 256)
    assert np.array_equal(seq.frames, frames)
    np.testing.assert_allclose(seq.timestamps[:3], [0, 1 / 63, 2 / 63])


def test_filenames_are_one_based_zero_padded():
    assert frame_filename(0) == "frame_000001.pgm"
    assert frame_filename(41) == "frame_000042.pgm"


def test_dimension_mismatch_names_both_sizes(tmp_path):
    write_pgm(tmp_path / "frame_000001.pgm", np.zeros((256, 256), np.uint8))
    write_pgm(tmp_path / "frame_000002.pgm", np.zeros((128, 128), np.uint8))
    with pytest.raises(ValidationError, match=r"128x128.*256x256"):
        load_frames(tmp_path)


def test_order_independent_of_listing(tmp_path, monkeypatch):
    frames = _write_frames(tmp_path, 12, shape=(8, 9))
    names = os.listdir(tmp_path)
    random.Random(3).shuffle(names)
    monkeypatch.setattr(os, "listdir", lambda p: list(names))
    assert np.array_equal(load_frames(tmp_path).frames, frames)


def test_gap_in_numbering(tmp_path):
    _write_frames(tmp_path, 4, shape=(8, 8))
    os.remove(tmp_path / "frame_000003.pgm")
    with pytest.raises(ValidationError, match="gaps"):
        load_frames(tmp_path)


def test_too_few_frames(tmp_path):
    _write_frames(tmp_path, 1, shape=(8, 8))
    with pytest.raises(DataIOError):
        load_frames(tmp_path)


def test_corrupt_file_is_named(tmp_path):
    _write_frames(tmp_path, 3, shape=(8, 8))
    with open(tmp_path / "frame_000002.pgm", "wb") as fh:
        fh.write(b"P5\n8 8\n255\n" + b"\x00" * 10)
    with pytest.raises(DataIOError, match="frame_000002.pgm"):
        load_frames(tmp_path)


def test_wrong_magic(tmp_path):
    p = tmp_path / "x.pgm"
    p.write_bytes(b"P2\n2 2\n255\n0 0 0 0\n")
    with pytest.raises(DataIOError, match="magic"):
        read_pgm(p)


def test_pgm_header_comments_and_roundtrip(tmp_path):
    img = np.arange(12, dtype=np.uint8).reshape(3, 4)
    p = tmp_path / "c.pgm"
    p.write_bytes(b"P5\n# made by hand\n4 3\n# another\n255\n" + img.tobytes())
    assert np.array_equal(read_pgm(p), img)
    write_pgm(tmp_path / "d.pgm", img)
    data = (tmp_path / "d.pgm").read_bytes()
    assert data.startswith(b"P5\n4 3\n255\n")
    assert np.array_equal(read_pgm(tmp_path / "d.pgm"), img)


def test_pgm_byte_roundtrip(tmp_path):
    img = np.random.default_rng(1).integers(0, 256, (17, 23), dtype=np.uint8)
    write_pgm(tmp_path / "a.pgm", img)
    first = (tmp_path / "a.pgm").read_bytes()
    write_pgm(tmp_path / "b.pgm", read_pgm(tmp_path / "a.pgm"))
    assert (tmp_path / "b.pgm").read_bytes() == first


def test_phantom_frames_roundtrip(tmp_path):
    p = MotionProtocol(amplitudes_deg=(15,), n_cycles=1, trim_head_cycles=0, trim_tail_cycles=0,
                       period_s=0.5)
    ang = generate_target_signal(p)
    seq = render_phantom(PhantomConfig(width_px=64, height_px=64, n_speckles=150), ang)
    save_frames(seq, tmp_path)
    back = load_frames(tmp_path, seq.frame_rate_hz)
    assert back.frames.tobytes() == seq.frames.tobytes()


def test_angles_three_rows(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("t_s,theta_deg\n0,1.5\n0.001,2.0\n0.002,-3\n")
    s = load_angles(p)
    assert len(s) == 3
    assert s.rate_hz == pytest.approx(1000.0)
    np.testing.assert_array_equal(s.theta_deg, [1.5, 2.0, -3.0])


def test_duplicate_timestamp(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("t_s,theta_deg\n0,1\n0.001,2\n0.001,3\n")
    with pytest.raises(ValidationError, match="strictly increasing"):
        load_angles(p)


def test_non_numeric_reports_row(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("t_s,theta_deg\n0,1\n0.001,abc\n")
    with pytest.raises(ValidationError, match="row 3"):
        load_angles(p)


def test_bad_header(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("time,angle\n0,1\n1,2\n")
    with pytest.raises(DataIOError):
        load_angles(p)


def test_dropped_sample_detected():
    t = np.r_[np.arange(10) * 0.001, 0.0115]
    with pytest.raises(ValidationError, match="irregular"):
        infer_rate(t)


def test_angles_roundtrip(tmp_path):
    sig = generate_target_signal(MotionProtocol(n_cycles=4, trim_head_cycles=1, trim_tail_cycles=0))
    save_angles(sig, tmp_path / "angles.csv")
    back = load_angles(tmp_path / "angles.csv")
    assert np.max(np.abs(back.theta_deg - sig.theta_deg)) <= 1e-9
    assert np.max(np.abs(back.t_s - sig.t_s)) <= 1e-12
    assert back.rate_hz == pytest.approx(63.0)


def test_frame_sequence_validation():
    with pytest.raises(ValidationError):
        FrameSequence(np.zeros((2, 4, 4), dtype=np.float32))
    with pytest.raises(ValidationError):
        FrameSequence(np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(ValidationError):
        AngleSeries(np.array([0.0, 1.0]), np.array([1.0]))
