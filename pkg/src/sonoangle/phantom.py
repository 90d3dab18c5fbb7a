"""Synthetic speckle phantom with a known angle-to-motion mapping.

The target angle is a train of sine cycles with randomly chosen amplitudes.
Each frame is a fixed speckle field sheared horizontally by
``gain(row) * theta`` pixels, so the ground-truth motion of every texture
point is a linear function of the angle.

Randomness comes from numpy's ``PCG64`` bit generator (PCG-XSL-RR 128/64),
seeded through ``SeedSequence([seed, stream])`` so the amplitude draw, the
speckle layout and the pixel noise use independent streams. Gaussian deviates
are produced by Box-Muller from the uniform stream, which keeps the output
independent of numpy's ziggurat implementation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, ValidationError
from .imaging_io import AngleSeries, FrameSequence

PRNG_NAME = "numpy.PCG64/SeedSequence+BoxMuller v1"

_STREAM_AMPLITUDE = 1
_STREAM_SPECKLE = 2
_STREAM_NOISE = 3


def make_rng(seed, stream):
    seq = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, stream])
    return np.random.Generator(np.random.PCG64(seq))


def box_muller(rng, n):
    """``n`` standard normal deviates from pairs of uniforms."""
    m = (n + 1) // 2
    u1 = 1.0 - rng.random(m)  # (0, 1], keeps log finite
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:n]


@dataclass(frozen=True)
class MotionProtocol:
    amplitudes_deg: tuple = (20.0, 40.0, 60.0)
    period_s: float = 4.0
    n_cycles: int = 18
    trim_head_cycles: int = 2
    trim_tail_cycles: int = 1
    frame_rate_hz: float = 63.0
    rng_seed: int = 0

    def __post_init__(self):
        amps = tuple(sorted(float(a) for a in self.amplitudes_deg))
        object.__setattr__(self, "amplitudes_deg", amps)
        if not amps or any(not (a > 0 and math.isfinite(a)) for a in amps):
            raise ConfigError(f"amplitudes must be non-empty and positive, got {amps}")
        if not self.period_s > 0:
            raise ConfigError(f"period_s must be positive, got {self.period_s}")
        if not self.frame_rate_hz > 0:
            raise ConfigError(f"frame_rate_hz must be positive, got {self.frame_rate_hz}")
        if self.trim_head_cycles < 0 or self.trim_tail_cycles < 0:
            raise ConfigError("trim counts must be non-negative")
        if self.n_cycles <= self.trim_head_cycles + self.trim_tail_cycles:
            raise ConfigError(
                f"n_cycles ({self.n_cycles}) must exceed trimmed cycles "
                f"({self.trim_head_cycles}+{self.trim_tail_cycles})"
            )
        if self.samples_per_cycle < 2:
            raise ConfigError("period_s * frame_rate_hz must give at least 2 samples per cycle")

    @property
    def samples_per_cycle(self):
        return int(round(self.period_s * self.frame_rate_hz))

    @property
    def retained_cycles(self):
        return self.n_cycles - self.trim_head_cycles - self.trim_tail_cycles


@dataclass(frozen=True)
class PhantomConfig:
    width_px: int = 256
    height_px: int = 256
    n_speckles: int = 1500
    speckle_sigma_px: float = 2.0
    displacement_gain_px_per_deg: float = 1.0
    depth_profile: str = "linear"
    pixel_noise_sigma: float = 0.01
    rng_seed: int = 0

    def __post_init__(self):
        if self.width_px < 64 or self.height_px < 64:
            raise ConfigError(f"image must be at least 64x64, got {self.width_px}x{self.height_px}")
        if self.n_speckles < 100:
            raise ConfigError(f"n_speckles must be >= 100, got {self.n_speckles}")
        if not self.speckle_sigma_px > 0:
            raise ConfigError("speckle_sigma_px must be positive")
        if not self.pixel_noise_sigma >= 0:
            raise ConfigError("pixel_noise_sigma must be >= 0")
        if self.depth_profile not in ("constant", "linear"):
            raise ConfigError(f"depth_profile must be 'constant' or 'linear', got {self.depth_profile!r}")

    @property
    def margin_px(self):
        # widest allowed shift plus room for the bilinear neighbour
        return self.width_px // 4 + 2

    def row_gain(self):
        """Gain in px/deg for each image row.

        ``linear`` ramps from half the gain at the top row to the full gain at
        the bottom row; ``constant`` applies the full gain everywhere.
        """
        g = float(self.displacement_gain_px_per_deg)
        if self.depth_profile == "constant":
            return np.full(self.height_px, g)
        y = np.arange(self.height_px, dtype=np.float64)
        return g * (0.5 + 0.5 * y / (self.height_px - 1))


def draw_amplitudes(protocol):
    """Per-cycle amplitudes for all ``n_cycles`` measured cycles."""
    rng = make_rng(protocol.rng_seed, _STREAM_AMPLITUDE)
    idx = rng.integers(0, len(protocol.amplitudes_deg), size=protocol.n_cycles)
    return np.asarray(protocol.amplitudes_deg)[idx]


def generate_target_signal(protocol):
    """Retained target angle trajectory sampled at the frame rate.

    Every cycle is one full sine period starting at 0 deg and rising; cycles
    are ``round(period_s * frame_rate_hz)`` samples long. Head and tail cycles
    are dropped and the time axis restarts at 0 on the first retained sample.
    """
    amps = draw_amplitudes(protocol)
    n = protocol.samples_per_cycle
    shape = np.sin(2.0 * np.pi * np.arange(n) / n)
    keep = amps[protocol.trim_head_cycles : protocol.n_cycles - protocol.trim_tail_cycles]
    theta = (keep[:, None] * shape[None, :]).ravel()
    t = np.arange(theta.size, dtype=np.float64) / protocol.frame_rate_hz
    return AngleSeries(t, theta, float(protocol.frame_rate_hz))


def retained_amplitudes(protocol):
    amps = draw_amplitudes(protocol)
    return amps[protocol.trim_head_cycles : protocol.n_cycles - protocol.trim_tail_cycles]


def speckle_canvas(config):
    """Base speckle field, wider than the frame by ``margin_px`` on each side.

    Returns a float64 ``(height, width + 2*margin)`` array scaled to [0, 1].
    Speckle density (blobs per pixel) matches ``n_speckles`` over the visible
    frame area.
    """
    h, w, m = config.height_px, config.width_px, config.margin_px
    cw = w + 2 * m
    n = int(round(config.n_speckles * cw / w))
    rng = make_rng(config.rng_seed, _STREAM_SPECKLE)
    cx = rng.random(n) * cw
    cy = rng.random(n) * h
    amp = 0.2 + 0.8 * rng.random(n)

    sigma = float(config.speckle_sigma_px)
    r = int(math.ceil(4 * sigma))
    canvas = np.zeros((h, cw))
    offs = np.arange(-r, r + 1)
    for x0, y0, a in zip(cx, cy, amp):
        ix, iy = int(x0), int(y0)
        xs = ix + offs
        ys = iy + offs
        xs = xs[(xs >= 0) & (xs < cw)]
        ys = ys[(ys >= 0) & (ys < h)]
        gx = np.exp(-((xs - x0) ** 2) / (2 * sigma * sigma))
        gy = np.exp(-((ys - y0) ** 2) / (2 * sigma * sigma))
        canvas[ys[0] : ys[-1] + 1, xs[0] : xs[-1] + 1] += a * np.outer(gy, gx)
    lo, hi = canvas.min(), canvas.max()
    return (canvas - lo) / (hi - lo)


def max_displacement_px(config, angles):
    theta = np.asarray(angles.theta_deg if isinstance(angles, AngleSeries) else angles)
    return float(np.max(np.abs(theta)) * np.max(config.row_gain()))


def render_frame(canvas, config, row_gain, theta):
    """Shear the canvas by ``row_gain * theta`` px and crop to the frame (noise-free)."""
    h, w, m = config.height_px, config.width_px, config.margin_px
    # inverse mapping: output x samples source x - u(y)
    src = np.arange(w, dtype=np.float64)[None, :] + m - (row_gain * theta)[:, None]
    x0 = np.floor(src).astype(np.intp)
    fx = src - x0
    rows = np.arange(h)[:, None]
    return canvas[rows, x0] * (1.0 - fx) + canvas[rows, x0 + 1] * fx


def render_phantom(config, angles):
    """Render one 8-bit frame per angle sample."""
    theta = np.asarray(angles.theta_deg, dtype=np.float64)
    if theta.size == 0:
        raise ValidationError("angle series is empty")
    limit = config.width_px / 4
    peak = max_displacement_px(config, theta)
    if peak > limit:
        raise ConfigError(
            f"peak displacement {peak:.1f} px exceeds width/4 = {limit:.1f} px; "
            "reduce displacement_gain_px_per_deg or the amplitudes"
        )
    canvas = speckle_canvas(config)
    gain = config.row_gain()
    noise_rng = make_rng(config.rng_seed, _STREAM_NOISE)
    npx = config.height_px * config.width_px
    out = np.empty((theta.size, config.height_px, config.width_px), dtype=np.uint8)
    for k, th in enumerate(theta):
        img = render_frame(canvas, config, gain, th)
        if config.pixel_noise_sigma > 0:
            img = img + config.pixel_noise_sigma * box_muller(noise_rng, npx).reshape(img.shape)
        out[k] = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    rate = angles.rate_hz if math.isfinite(angles.rate_hz) else 63.0
    return FrameSequence(out, rate)


def phantom_metadata(config, protocol):
    return {
        "prng": PRNG_NAME,
        "phantom": asdict(config),
        "protocol": {**asdict(protocol), "amplitudes_deg": list(protocol.amplitudes_deg)},
        "cycle_amplitudes_deg": draw_amplitudes(protocol).tolist(),
        "retained_cycle_amplitudes_deg": retained_amplitudes(protocol).tolist(),
        "margin_px": config.margin_px,
    }
