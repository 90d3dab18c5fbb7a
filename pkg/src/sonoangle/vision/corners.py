"""Shi-Tomasi corner seeding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ValidationError


@dataclass(frozen=True)
class CornerParams:
    max_corners: int = 2000
    quality_level: float = 0.01
    min_distance_px: float = 5.0
    block_size_px: int = 3

    def __post_init__(self):
        if self.max_corners < 1:
            raise ConfigError("max_corners must be >= 1")
        if not 0 < self.quality_level < 1:
            raise ConfigError(f"quality_level must be in (0, 1), got {self.quality_level}")
        if self.min_distance_px < 1:
            raise ConfigError(f"min_distance_px must be >= 1, got {self.min_distance_px}")
        if self.block_size_px < 3 or self.block_size_px % 2 == 0:
            raise ConfigError(f"block_size_px must be odd and >= 3, got {self.block_size_px}")


def to_unit(frame):
    """uint8 frame -> float64 intensities in [0, 1]."""
    frame = np.asarray(frame)
    if frame.dtype == np.uint8:
        return frame.astype(np.float64) / 255.0
    return frame.astype(np.float64)


def central_gradients(img):
    """Central differences; the one-pixel border is left at zero."""
    gx = np.zeros_like(img)
    gy = np.zeros_like(img)
    gx[:, 1:-1] = 0.5 * (img[:, 2:] - img[:, :-2])
    gy[1:-1, :] = 0.5 * (img[2:, :] - img[:-2, :])
    return gx, gy


def _box_sum(a, r):
    """Sum over the (2r+1)^2 block centred on each pixel, valid region only."""
    c = np.zeros((a.shape[0] + 1, a.shape[1] + 1))
    c[1:, 1:] = a.cumsum(0).cumsum(1)
    k = 2 * r + 1
    return c[k:, k:] - c[:-k, k:] - c[k:, :-k] + c[:-k, :-k]


def min_eigenvalue_map(frame, block_size_px=3):
    """Smaller eigenvalue of the gradient structure tensor summed over a block.

    Pixels whose block would touch the image border (where central
    differences are undefined) are set to 0.
    """
    if block_size_px < 3 or block_size_px % 2 == 0:
        raise ValidationError(f"block size must be odd and >= 3, got {block_size_px}")
    img = to_unit(frame)
    r = block_size_px // 2
    b = r + 1  # gradient border + block half-width
    if img.ndim != 2 or min(img.shape) < 2 * b + 1:
        raise ValidationError(f"frame {img.shape} too small for block size {block_size_px}")
    gx, gy = central_gradients(img)
    inner = (slice(1, -1), slice(1, -1))
    sxx = _box_sum((gx * gx)[inner], r)
    syy = _box_sum((gy * gy)[inner], r)
    sxy = _box_sum((gx * gy)[inner], r)
    half_tr = 0.5 * (sxx + syy)
    disc = np.sqrt(0.25 * (sxx - syy) ** 2 + sxy * sxy)
    lam = half_tr - disc
    # the subtraction can dip a few ulps below zero for rank-1 tensors
    np.maximum(lam, 0.0, out=lam)
    out = np.zeros_like(img)
    out[b:-b, b:-b] = lam
    return out


def detect_corners(frame, params=None):
    """Greedy Shi-Tomasi selection; returns an ``(n, 2)`` array of (x, y).

    Candidates have response >= quality_level * max response and are taken in
    descending response order (ties by row, then column). A candidate closer
    than ``min_distance_px`` to an accepted corner is dropped.
    """
    params = params or CornerParams()
    resp = min_eigenvalue_map(frame, params.block_size_px)
    peak = resp.max()
    if peak <= 0:
        return np.empty((0, 2))
    rows, cols = np.nonzero(resp >= params.quality_level * peak)
    vals = resp[rows, cols]
    # lexsort: last key is primary
    order = np.lexsort((cols, rows, -vals))
    rows, cols = rows[order], cols[order]

    md = float(params.min_distance_px)
    rad = int(np.ceil(md)) - 1 if float(md).is_integer() else int(np.floor(md))
    dy, dx = np.mgrid[-rad : rad + 1, -rad : rad + 1]
    disk = dx * dx + dy * dy < md * md
    dy, dx = dy[disk], dx[disk]

    h, w = resp.shape
    blocked = np.zeros((h + 2 * rad, w + 2 * rad), dtype=bool)
    picked = []
    for y, x in zip(rows.tolist(), cols.tolist()):
        if blocked[y + rad, x + rad]:
            continue
        picked.append((x, y))
        if len(picked) >= params.max_corners:
            break
        blocked[y + rad + dy, x + rad + dx] = True
    return np.asarray(picked, dtype=np.float64).reshape(-1, 2)
