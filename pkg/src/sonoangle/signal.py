"""Resampling, Butterworth low-pass filtering and Z-score standardization.

Multichannel signals are ``(channels, time)`` arrays; 1-D input is treated
as a single channel where that makes sense.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .errors import DegenerateChannelError, ValidationError
from .imaging_io import AngleSeries


def resample_to(series, target_times_s):
    """Linearly interpolate ``series`` at ``target_times_s``."""
    target = np.asarray(target_times_s, dtype=np.float64)
    t = series.t_s
    # allow for the last bit of rounding when grids share endpoints
    slack = 1e-9 * max(1.0, abs(t[-1]))
    if target.size and (target.min() < t[0] - slack or target.max() > t[-1] + slack):
        raise ValidationError(
            f"target times [{target.min():.6g}, {target.max():.6g}] s outside source range "
            f"[{t[0]:.6g}, {t[-1]:.6g}] s"
        )
    theta = np.interp(target, t, series.theta_deg)
    rate = float("nan")
    if target.size > 1:
        rate = 1.0 / float(np.median(np.diff(target)))
    return AngleSeries(target, theta, rate)


# ---------------------------------------------------------------- Butterworth


@dataclass(frozen=True)
class ButterworthDesign:
    order: int
    cutoff_hz: float
    sample_rate_hz: float
    b_coeffs: np.ndarray
    a_coeffs: np.ndarray

    def response(self, freqs_hz):
        """Complex frequency response evaluated from the coefficients."""
        z = np.exp(1j * 2.0 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / self.sample_rate_hz)
        return np.polyval(self.b_coeffs[::-1], 1.0 / z) / np.polyval(self.a_coeffs[::-1], 1.0 / z)

    @property
    def padlen(self):
        return 3 * max(len(self.a_coeffs), len(self.b_coeffs))


def design_butterworth(order, cutoff_hz, sample_rate_hz):
    """Digital low-pass Butterworth via the bilinear transform.

    The analog cutoff is prewarped so the digital -3 dB point lands exactly on
    ``cutoff_hz``; ``b`` is scaled for unit DC gain.
    """
    order = int(order)
    if order < 1:
        raise ValidationError(f"filter order must be >= 1, got {order}")
    if not sample_rate_hz > 0:
        raise ValidationError(f"sample rate must be positive, got {sample_rate_hz}")
    nyq = 0.5 * sample_rate_hz
    if not 0 < cutoff_hz < nyq:
        raise ValidationError(f"cutoff {cutoff_hz} Hz must lie in (0, Nyquist = {nyq} Hz)")

    fs2 = 2.0 * sample_rate_hz
    wc = fs2 * np.tan(np.pi * cutoff_hz / sample_rate_hz)
    k = np.arange(1, order + 1)
    s_poles = wc * np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))
    z_poles = (fs2 + s_poles) / (fs2 - s_poles)

    a = np.real(np.poly(z_poles))
    b = np.real(np.poly(-np.ones(order)))
    b = b * (a.sum() / b.sum())
    return ButterworthDesign(order, float(cutoff_hz), float(sample_rate_hz), b, a / a[0])


def butterworth_magnitude(freqs_hz, order, cutoff_hz, sample_rate_hz):
    """Closed-form magnitude of the bilinear-transformed Butterworth low-pass."""
    f = np.asarray(freqs_hz, dtype=np.float64)
    ratio = np.tan(np.pi * f / sample_rate_hz) / np.tan(np.pi * cutoff_hz / sample_rate_hz)
    return 1.0 / np.sqrt(1.0 + ratio ** (2 * order))


def _odd_extend(x, n):
    left = 2.0 * x[..., :1] - x[..., n:0:-1]
    right = 2.0 * x[..., -1:] - x[..., -2 : -n - 2 : -1]
    return np.concatenate([left, x, right], axis=-1)


def lfilter_causal(design, x):
    """Single forward pass, initial state set to the first sample's steady state."""
    x = np.asarray(x, dtype=np.float64)
    zi = sps.lfilter_zi(design.b_coeffs, design.a_coeffs)
    zi = zi.reshape((1,) * (x.ndim - 1) + (-1,)) * x[..., :1]
    y, _ = sps.lfilter(design.b_coeffs, design.a_coeffs, x, axis=-1, zi=zi)
    return y


def filtfilt(design, x):
    """Zero-phase forward-backward filtering along the last axis.

    The signal is extended at both ends by odd reflection of length
    ``3 * (order + 1)``; the extension is removed from the output.
    """
    x = np.asarray(x, dtype=np.float64)
    n = design.padlen
    if x.shape[-1] <= n:
        raise ValidationError(
            f"signal length {x.shape[-1]} too short for order-{design.order} filtfilt "
            f"(needs > {n} samples)"
        )
    ext = _odd_extend(x, n)
    y = lfilter_causal(design, ext)
    y = lfilter_causal(design, y[..., ::-1])[..., ::-1]
    return np.ascontiguousarray(y[..., n:-n])


def apply_filter(design, x, zero_phase=True):
    """Filter with ``design``; ``None`` passes the signal through unchanged."""
    if design is None:
        return np.array(x, dtype=np.float64)
    return filtfilt(design, x) if zero_phase else lfilter_causal(design, x)


# ---------------------------------------------------------------- Z-score


@dataclass(frozen=True)
class ZScoreParams:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        std = np.atleast_1d(np.asarray(self.std, dtype=np.float64))
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValidationError("mean and std must be 1-D and of equal length")
        if np.any(~(std > 0)):
            raise DegenerateChannelError(f"channel {int(np.argmax(~(std > 0)))} has zero spread")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def __len__(self):
        return self.mean.size

    def to_dict(self):
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


def _as_channels(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim != 2:
        raise ValidationError(f"expected a 1-D or (channels, time) array, got shape {x.shape}")
    return x, False


def zscore_params(x, labels=None):
    """Per-channel mean and population standard deviation."""
    xc, _ = _as_channels(x)
    mean = xc.mean(axis=1)
    std = np.sqrt(((xc - mean[:, None]) ** 2).mean(axis=1))
    # relative floor: a constant channel can pick up rounding noise from the mean
    bad = ~(std > 1e-12 * np.maximum(1.0, np.abs(mean)))
    if bad.any():
        i = int(np.argmax(bad))
        name = labels[i] if labels is not None else i
        raise DegenerateChannelError(f"channel {name} has zero variance and cannot be standardized")
    return ZScoreParams(mean, std)


def apply_zscore(x, params):
    xc, flat = _as_channels(x)
    if xc.shape[0] != len(params):
        raise ValidationError(f"{xc.shape[0]} channels but {len(params)} z-score parameter sets")
    out = (xc - params.mean[:, None]) / params.std[:, None]
    return out[0] if flat else out


def zscore(x, labels=None):
    """Standardize each channel; returns ``(standardized, params)``."""
    params = zscore_params(x, labels)
    return apply_zscore(x, params), params


def inverse_zscore(x, params):
    xc, flat = _as_channels(x)
    if xc.shape[0] != len(params):
        raise ValidationError(f"{xc.shape[0]} channels but {len(params)} z-score parameter sets")
    out = xc * params.std[:, None] + params.mean[:, None]
    return out[0] if flat else out


# ---------------------------------------------------------------- conditioning


@dataclass(frozen=True)
class FeatureMatrix:
    """Standardized, filtered coordinate channels ``(2 * n_points, T)``.

    Channel order is point 0 x, point 0 y, point 1 x, ...
    """

    values: np.ndarray
    channel_ids: list
    zparams: ZScoreParams

    @property
    def n_channels(self):
        return self.values.shape[0]


def track_channels(tracks):
    """Raw coordinate channels and their (point_id, axis) labels."""
    pos = np.asarray(tracks.positions, dtype=np.float64)
    if not np.all(np.isfinite(pos)):
        raise ValidationError("tracks contain lost points; prune them first")
    n, T, _ = pos.shape
    values = pos.transpose(0, 2, 1).reshape(2 * n, T)
    ids = [(int(pid), axis) for pid in tracks.point_ids for axis in ("x", "y")]
    return values, ids


def build_feature_matrix(tracks, design, zero_phase=True, stats_slice=None):
    """Standardize each coordinate channel, then low-pass it.

    ``stats_slice`` restricts the samples used for the mean/std (e.g. the
    training segment); by default the whole trial is used.
    """
    raw, ids = track_channels(tracks)
    ref = raw if stats_slice is None else raw[:, stats_slice]
    params = zscore_params(ref, labels=ids)
    values = apply_filter(design, apply_zscore(raw, params), zero_phase)
    return FeatureMatrix(values, ids, params)


def condition_angles(theta_deg, design, zero_phase=True, stats_slice=None):
    """Low-pass the angle, then standardize it. Returns ``(standardized, params)``."""
    filtered = apply_filter(design, theta_deg, zero_phase)
    ref = filtered if stats_slice is None else filtered[stats_slice]
    params = zscore_params(ref, labels=["theta"])
    return apply_zscore(filtered, params), params
