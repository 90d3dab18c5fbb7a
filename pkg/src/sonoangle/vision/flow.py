"""Pyramidal iterative Lucas-Kanade point tracking.

Each frame pair is processed coarse-to-fine. At every level a point's
template window is sampled (bilinearly, sub-pixel) from the previous frame
together with its central-difference gradients; the displacement is refined
by Gauss-Newton steps against the next frame until the step falls below
``epsilon_px``. Points are tracked frame-to-frame, each new position seeding
the next pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..errors import ConfigError, EmptyTracksError, ValidationError
from .corners import to_unit

ALIVE = 0
LOST_BOUNDS = 1
LOST_TEXTURE = 2
LOST_DIVERGED = 3

LOSS_REASONS = {
    ALIVE: "alive",
    LOST_BOUNDS: "left image bounds",
    LOST_TEXTURE: "min eigenvalue below threshold",
    LOST_DIVERGED: "no convergence",
}

_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass(frozen=True)
class FlowParams:
    window_px: int = 21
    pyramid_levels: int = 3
    max_iters: int = 30
    epsilon_px: float = 0.01
    # compared against the smaller eigenvalue of the window tensor divided by
    # the window pixel count, on [0, 1] intensities
    min_eig_threshold: float = 1e-4

    def __post_init__(self):
        if self.window_px < 5 or self.window_px % 2 == 0:
            raise ConfigError(f"window_px must be odd and >= 5, got {self.window_px}")
        if self.pyramid_levels < 1:
            raise ConfigError(f"pyramid_levels must be >= 1, got {self.pyramid_levels}")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if not self.epsilon_px > 0:
            raise ConfigError("epsilon_px must be positive")
        if self.min_eig_threshold < 0:
            raise ConfigError("min_eig_threshold must be >= 0")


@dataclass
class TrackSet:
    """Per-point trajectories.

    ``positions`` is ``(n_points, n_frames, 2)`` holding (x, y); entries after
    a point is lost are NaN. ``point_ids`` are the seed indices and survive
    pruning so channels can be traced back to their seeds.
    """

    positions: np.ndarray
    alive: np.ndarray
    point_ids: np.ndarray
    lost_at: np.ndarray
    lost_reason: np.ndarray

    @property
    def n_points(self):
        return self.positions.shape[0]

    @property
    def n_frames(self):
        return self.positions.shape[1]

    @property
    def n_alive(self):
        return int(np.count_nonzero(self.alive))


def _blur_decimate(img):
    k = _BINOMIAL5
    p = np.pad(img, 2, mode="reflect")
    tmp = k[0] * p[:, :-4] + k[1] * p[:, 1:-3] + k[2] * p[:, 2:-2] + k[3] * p[:, 3:-1] + k[4] * p[:, 4:]
    out = k[0] * tmp[:-4] + k[1] * tmp[1:-3] + k[2] * tmp[2:-2] + k[3] * tmp[3:-1] + k[4] * tmp[4:]
    return out[::2, ::2]


def build_pyramid(img, levels):
    """Level 0 is the image itself; each further level is blurred and halved."""
    pyr = [img]
    for _ in range(levels - 1):
        pyr.append(_blur_decimate(pyr[-1]))
    return pyr


class _Level:
    """One pyramid level, edge-padded so windows near the border stay in range."""

    __slots__ = ("img", "pad", "shape")

    def __init__(self, img, pad):
        self.shape = img.shape
        self.pad = pad
        self.img = np.ascontiguousarray(np.pad(img, pad, mode="edge"))


def _padded_pyramid(frame, levels, pad):
    return [_Level(lv, pad) for lv in build_pyramid(to_unit(frame), levels)]


@numba.njit(parallel=True, cache=True, fastmath=True)
def _lk_level(I, J, pad, pts, flow, status, converged, r, max_iters, eps, min_eig,
              check_texture):
    """Refine ``flow`` (level pixels) for every point with ``status == 0``.

    ``pts`` are the previous-frame positions in level coordinates (unpadded).
    """
    n = pts.shape[0]
    hp, wp = I.shape
    win = 2 * r + 1
    area = win * win
    eps2 = eps * eps
    for i in numba.prange(n):
        if status[i] != 0:
            continue
        px = pts[i, 0] + pad
        py = pts[i, 1] + pad
        x0 = int(np.floor(px))
        y0 = int(np.floor(py))
        if x0 - r - 1 < 0 or y0 - r - 1 < 0 or x0 + r + 2 >= wp or y0 + r + 2 >= hp:
            status[i] = 1
            continue
        fx = px - x0
        fy = py - y0
        w00 = (1.0 - fx) * (1.0 - fy)
        w01 = fx * (1.0 - fy)
        w10 = (1.0 - fx) * fy
        w11 = fx * fy
        # sample a one-pixel-wider template; central differences of the
        # bilinear samples equal bilinear samples of the central differences
        E = np.empty((win + 2, win + 2))
        for a in range(win + 2):
            yy = y0 - r - 1 + a
            for b in range(win + 2):
                xx = x0 - r - 1 + b
                E[a, b] = (w00 * I[yy, xx] + w01 * I[yy, xx + 1]
                           + w10 * I[yy + 1, xx] + w11 * I[yy + 1, xx + 1])
        T = np.empty((win, win))
        GX = np.empty((win, win))
        GY = np.empty((win, win))
        gxx = 0.0
        gyy = 0.0
        gxy = 0.0
        for a in range(win):
            for b in range(win):
                T[a, b] = E[a + 1, b + 1]
                gx = 0.5 * (E[a + 1, b + 2] - E[a + 1, b])
                gy = 0.5 * (E[a + 2, b + 1] - E[a, b + 1])
                GX[a, b] = gx
                GY[a, b] = gy
                gxx += gx * gx
                gyy += gy * gy
                gxy += gx * gy
        lam = 0.5 * ((gxx + gyy) - np.sqrt((gxx - gyy) ** 2 + 4.0 * gxy * gxy))
        det = gxx * gyy - gxy * gxy
        if (check_texture and lam / area < min_eig) or det <= 1e-15:
            status[i] = 2
            continue
        vx = flow[i, 0]
        vy = flow[i, 1]
        ok = False
        for _ in range(max_iters):
            qx = px + vx
            qy = py + vy
            qx0 = int(np.floor(qx))
            qy0 = int(np.floor(qy))
            if qx0 - r < 0 or qy0 - r < 0 or qx0 + r + 1 >= wp or qy0 + r + 1 >= hp:
                break
            ex = qx - qx0
            ey = qy - qy0
            v00 = (1.0 - ex) * (1.0 - ey)
            v01 = ex * (1.0 - ey)
            v10 = (1.0 - ex) * ey
            v11 = ex * ey
            bx = 0.0
            by = 0.0
            for a in range(win):
                yy = qy0 - r + a
                for b in range(win):
                    xx = qx0 - r + b
                    jv = (v00 * J[yy, xx] + v01 * J[yy, xx + 1]
                          + v10 * J[yy + 1, xx] + v11 * J[yy + 1, xx + 1])
                    diff = T[a, b] - jv
                    bx += diff * GX[a, b]
                    by += diff * GY[a, b]
            dx = (gyy * bx - gxy * by) / det
            dy = (gxx * by - gxy * bx) / det
            vx += dx
            vy += dy
            if dx * dx + dy * dy < eps2:
                ok = True
                break
        flow[i, 0] = vx
        flow[i, 1] = vy
        converged[i] = ok


def track_pair(prev_pyr, next_pyr, pts, status, params):
    """Track ``pts`` (level-0 x, y) from one frame to the next.

    ``status`` is updated in place; returns the new positions.
    """
    r = params.window_px // 2
    n = pts.shape[0]
    flow = np.zeros((n, 2))
    converged = np.zeros(n, dtype=np.bool_)
    top = len(prev_pyr) - 1
    for lv in range(top, -1, -1):
        scale = 2.0 ** lv
        prev = prev_pyr[lv]
        nxt = next_pyr[lv]
        converged[:] = False
        _lk_level(prev.img, nxt.img, float(prev.pad),
                  np.ascontiguousarray(pts / scale), flow, status, converged,
                  r, params.max_iters, params.epsilon_px, params.min_eig_threshold,
                  lv == 0)
        if lv > 0:
            flow *= 2.0
    new_pts = pts + flow
    live = status == ALIVE
    status[live & ~converged] = LOST_DIVERGED
    h, w = prev_pyr[0].shape
    out = (new_pts[:, 0] < 0) | (new_pts[:, 0] > w - 1) | (new_pts[:, 1] < 0) | (new_pts[:, 1] > h - 1)
    status[(status == ALIVE) & out] = LOST_BOUNDS
    return new_pts


def track_sequence(seq, seeds, params=None):
    """Track seed points (``(n, 2)`` x, y) through every frame of ``seq``."""
    params = params or FlowParams()
    seeds = np.asarray(seeds, dtype=np.float64).reshape(-1, 2)
    if seeds.shape[0] == 0:
        raise ValidationError("need at least one seed point")
    if len(seq) < 2:
        raise ValidationError("need at least two frames to track")
    if not np.all(np.isfinite(seeds)):
        raise ValidationError("seed coordinates must be finite")
    h, w = seq.height, seq.width
    n, T = seeds.shape[0], len(seq)
    pad = params.window_px // 2 + 2

    positions = np.full((n, T, 2), np.nan)
    status = np.zeros(n, dtype=np.int64)
    outside = (seeds[:, 0] < 0) | (seeds[:, 0] > w - 1) | (seeds[:, 1] < 0) | (seeds[:, 1] > h - 1)
    status[outside] = LOST_BOUNDS
    lost_at = np.where(outside, 0, -1)
    positions[~outside, 0] = seeds[~outside]

    pts = seeds.copy()
    prev_pyr = _padded_pyramid(seq[0], params.pyramid_levels, pad)
    for k in range(1, T):
        next_pyr = _padded_pyramid(seq[k], params.pyramid_levels, pad)
        was_alive = status == ALIVE
        pts = track_pair(prev_pyr, next_pyr, pts, status, params)
        alive = status == ALIVE
        positions[alive, k] = pts[alive]
        lost_at[was_alive & ~alive] = k
        if not alive.any():
            raise EmptyTracksError(
                f"all {n} points lost by frame {k} of {T}; check image texture and flow parameters"
            )
        prev_pyr = next_pyr
    return TrackSet(
        positions=positions,
        alive=status == ALIVE,
        point_ids=np.arange(n),
        lost_at=lost_at,
        lost_reason=status.copy(),
    )


def prune_lost(tracks):
    """Keep only points tracked to the final frame, preserving order."""
    keep = np.asarray(tracks.alive, dtype=bool)
    if not keep.any():
        raise EmptyTracksError("no feature point survived to the final frame")
    return TrackSet(
        positions=tracks.positions[keep],
        alive=np.ones(int(keep.sum()), dtype=bool),
        point_ids=tracks.point_ids[keep],
        lost_at=tracks.lost_at[keep],
        lost_reason=tracks.lost_reason[keep],
    )


def loss_summary(tracks):
    """Count of points per loss reason."""
    return {LOSS_REASONS[c]: int(np.count_nonzero(tracks.lost_reason == c)) for c in LOSS_REASONS}
