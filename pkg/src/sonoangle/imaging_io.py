"""Frame sequences and angle series: in-memory containers and disk formats.

Frames are stored as 8-bit binary PGM (P5) files named ``frame_000001.pgm``,
``frame_000002.pgm``, ... (1-based on disk, 0-based in memory). Angle series
are CSV files with the header ``t_s,theta_deg``.
"""

from __future__ import annotations

import csv
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DataIOError, ValidationError

FRAME_PATTERN = re.compile(r"^frame_(\d+)\.pgm$")
ANGLE_HEADER = ["t_s", "theta_deg"]


@dataclass(frozen=True)
class FrameSequence:
    """Ordered grayscale frames sharing one shape and a uniform clock.

    ``frames`` is a ``(n_frames, height, width)`` uint8 array; frame ``k`` is
    taken at ``k / frame_rate_hz`` seconds.
    """

    frames: np.ndarray
    frame_rate_hz: float = 63.0

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 3:
            raise ValidationError(f"frames must be (n, height, width), got shape {frames.shape}")
        if frames.dtype != np.uint8:
            raise ValidationError(f"frames must be uint8, got {frames.dtype}")
        if not (self.frame_rate_hz > 0 and math.isfinite(self.frame_rate_hz)):
            raise ValidationError(f"frame rate must be positive, got {self.frame_rate_hz}")
        object.__setattr__(self, "frames", frames)

    def __len__(self):
        return self.frames.shape[0]

    def __getitem__(self, k):
        return self.frames[k]

    @property
    def height(self):
        return self.frames.shape[1]

    @property
    def width(self):
        return self.frames.shape[2]

    @property
    def timestamps(self):
        return np.arange(len(self), dtype=np.float64) / self.frame_rate_hz


@dataclass(frozen=True)
class AngleSeries:
    """Timestamped joint angles in degrees."""

    t_s: np.ndarray
    theta_deg: np.ndarray
    rate_hz: float = field(default=float("nan"))

    def __post_init__(self):
        t = np.asarray(self.t_s, dtype=np.float64)
        theta = np.asarray(self.theta_deg, dtype=np.float64)
        if t.ndim != 1 or theta.ndim != 1 or t.shape != theta.shape:
            raise ValidationError(
                f"t_s and theta_deg must be 1-D of equal length, got {t.shape} and {theta.shape}"
            )
        if t.size == 0:
            raise ValidationError("angle series is empty")
        if np.any(np.diff(t) <= 0):
            bad = int(np.argmax(np.diff(t) <= 0)) + 1
            raise ValidationError(f"timestamps must be strictly increasing (violated at sample {bad})")
        object.__setattr__(self, "t_s", t)
        object.__setattr__(self, "theta_deg", theta)
        object.__setattr__(self, "rate_hz", float(self.rate_hz))

    def __len__(self):
        return self.t_s.size


def infer_rate(t_s, tolerance=0.01):
    """Sample rate from the median timestamp step.

    Raises ValidationError when any step differs from the median by more than
    ``tolerance`` (relative), which usually means dropped samples.
    """
    dt = np.diff(np.asarray(t_s, dtype=np.float64))
    if dt.size == 0:
        raise ValidationError("need at least two timestamps to infer a rate")
    med = float(np.median(dt))
    if med <= 0:
        raise ValidationError("timestamps must be strictly increasing")
    dev = np.abs(dt - med) / med
    if np.any(dev > tolerance):
        k = int(np.argmax(dev > tolerance)) + 1
        raise ValidationError(
            f"irregular sampling at sample {k}: step {dt[k - 1]:.6g} s vs median {med:.6g} s"
        )
    return 1.0 / med


# ---------------------------------------------------------------- PGM


def _pgm_tokens(data, count):
    """Return ``count`` header tokens and the offset of the raster."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    return tokens, pos + 1


def read_pgm(path):
    """Read an 8-bit binary PGM (P5) file into a ``(height, width)`` uint8 array."""
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise DataIOError(f"{path}: {exc.strerror or exc}") from exc
    try:
        tokens, offset = _pgm_tokens(data, 4)
        magic, width, height, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise DataIOError(f"{path}: corrupt PGM header ({exc})") from exc
    if magic != b"P5":
        raise DataIOError(f"{path}: not a binary PGM (magic {magic!r})")
    if width <= 0 or height <= 0:
        raise DataIOError(f"{path}: invalid dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise DataIOError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    raster = data[offset : offset + width * height]
    if len(raster) != width * height:
        raise DataIOError(
            f"{path}: truncated raster ({len(raster)} of {width * height} bytes)"
        )
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path, image):
    image = np.asarray(image)
    if image.ndim != 2 or image.dtype != np.uint8:
        raise ValidationError("write_pgm expects a 2-D uint8 array")
    height, width = image.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(np.ascontiguousarray(image).tobytes())


def frame_filename(k):
    """Disk name of in-memory frame ``k`` (0-based)."""
    return f"frame_{k + 1:06d}.pgm"


def save_frames(seq, dir_path):
    os.makedirs(dir_path, exist_ok=True)
    paths = []
    for k in range(len(seq)):
        p = os.path.join(dir_path, frame_filename(k))
        write_pgm(p, seq[k])
        paths.append(p)
    return paths


def load_frames(dir_path, frame_rate_hz=63.0):
    """Load every ``frame_NNNNNN.pgm`` in ``dir_path``, ordered by number."""
    dir_path = os.fspath(dir_path)
    if not os.path.isdir(dir_path):
        raise DataIOError(f"{dir_path}: not a directory")
    numbered = []
    for name in os.listdir(dir_path):
        m = FRAME_PATTERN.match(name)
        if m:
            numbered.append((int(m.group(1)), name))
    numbered.sort()
    if len(numbered) < 2:
        raise DataIOError(f"{dir_path}: need at least 2 frame_*.pgm files, found {len(numbered)}")
    numbers = [n for n, _ in numbered]
    expected = list(range(numbers[0], numbers[0] + len(numbers)))
    if numbers != expected:
        missing = sorted(set(expected) - set(numbers))
        raise ValidationError(f"{dir_path}: frame numbering has gaps (first missing: {missing[0]})")

    first = read_pgm(os.path.join(dir_path, numbered[0][1]))
    frames = np.empty((len(numbered),) + first.shape, dtype=np.uint8)
    frames[0] = first
    for i, (_, name) in enumerate(numbered[1:], start=1):
        img = read_pgm(os.path.join(dir_path, name))
        if img.shape != first.shape:
            raise ValidationError(
                f"{name}: size {img.shape[1]}x{img.shape[0]} differs from "
                f"{numbered[0][1]} size {first.shape[1]}x{first.shape[0]}"
            )
        frames[i] = img
    return FrameSequence(frames, frame_rate_hz)


# ---------------------------------------------------------------- CSV


def save_angles(series, csv_path):
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ANGLE_HEADER)
        for t, theta in zip(series.t_s.tolist(), series.theta_deg.tolist()):
            w.writerow([repr(t), repr(theta)])


def load_angles(csv_path):
    """Parse a ``t_s,theta_deg`` CSV; the sample rate is inferred from timestamps."""
    csv_path = os.fspath(csv_path)
    try:
        with open(csv_path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataIOError(f"{csv_path}: {exc.strerror or exc}") from exc
    if not rows or [c.strip() for c in rows[0]] != ANGLE_HEADER:
        raise DataIOError(f"{csv_path}: expected header {','.join(ANGLE_HEADER)}")
    t, theta = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise ValidationError(f"{csv_path}: row {lineno}: expected 2 columns, got {len(row)}")
        try:
            t.append(float(row[0]))
            theta.append(float(row[1]))
        except ValueError as exc:
            raise ValidationError(f"{csv_path}: row {lineno}: non-numeric value ({exc})") from exc
    if len(t) < 2:
        raise ValidationError(f"{csv_path}: need at least 2 samples")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(theta))):
        raise ValidationError(f"{csv_path}: non-finite values")
    # validate monotonicity before rate inference so the error names the real problem
    series = AngleSeries(np.array(t), np.array(theta))
    return AngleSeries(series.t_s, series.theta_deg, infer_rate(series.t_s))
