"""Flat TOML run configuration.

Every setting is a top-level key; see ``DEFAULT_CONFIG_TEXT`` for the
commented template written by ``sonoangle init-config``. Relative paths are
resolved against the directory of the config file.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .phantom import MotionProtocol, PhantomConfig
from .vision import CornerParams, FlowParams


@dataclass(frozen=True)
class PipelineConfig:
    # input: "phantom" renders a synthetic trial, "files" loads frames + angles
    source: str = "phantom"
    frames_dir: str = ""
    angles_csv: str = ""
    frame_rate_hz: float = 63.0
    seed: int = 0

    # phantom motion protocol
    amplitudes_deg: tuple = (20.0, 40.0, 60.0)
    period_s: float = 4.0
    n_cycles: int = 18
    trim_head_cycles: int = 2
    trim_tail_cycles: int = 1

    # phantom image
    width_px: int = 256
    height_px: int = 256
    n_speckles: int = 1500
    speckle_sigma_px: float = 2.0
    displacement_gain_px_per_deg: float = 1.0
    depth_profile: str = "linear"
    pixel_noise_sigma: float = 0.01

    # corner seeding
    max_corners: int = 2000
    quality_level: float = 0.01
    min_distance_px: float = 5.0
    block_size_px: int = 3

    # optical flow
    window_px: int = 21
    pyramid_levels: int = 3
    max_iters: int = 30
    epsilon_px: float = 0.01
    min_eig_threshold: float = 1e-4

    # conditioning
    filter_enabled: bool = True
    filter_order: int = 2
    cutoff_hz: float = 6.0
    zero_phase: bool = True
    standardize_scope: str = "full_trial"

    # readout
    ridge_lambda: float = 10.0
    train_fraction: float = 0.8

    out_dir: str = "out"
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "amplitudes_deg", tuple(float(a) for a in self.amplitudes_deg))
        if self.source not in ("phantom", "files"):
            raise ConfigError(f"source must be 'phantom' or 'files', got {self.source!r}")
        if self.standardize_scope not in ("full_trial", "train_only"):
            raise ConfigError(
                f"standardize_scope must be 'full_trial' or 'train_only', got {self.standardize_scope!r}"
            )
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if not self.ridge_lambda >= 0:
            raise ConfigError(f"lambda must be >= 0, got {self.ridge_lambda}")
        if not self.frame_rate_hz > 0:
            raise ConfigError("frame_rate_hz must be positive")
        if self.filter_enabled:
            if self.filter_order < 1:
                raise ConfigError("filter_order must be >= 1")
            if not 0 < self.cutoff_hz < self.frame_rate_hz / 2:
                raise ConfigError(
                    f"cutoff_hz {self.cutoff_hz} must be in (0, {self.frame_rate_hz / 2}) for "
                    f"{self.frame_rate_hz} Hz frames"
                )
        if self.seed < 0 or self.seed >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        # building the parameter objects runs their own validation
        self.corner_params()
        self.flow_params()
        if self.source == "phantom":
            self.protocol()
            self.phantom()

    # ------------------------------------------------------------ views

    def protocol(self):
        return MotionProtocol(
            amplitudes_deg=self.amplitudes_deg,
            period_s=self.period_s,
            n_cycles=self.n_cycles,
            trim_head_cycles=self.trim_head_cycles,
            trim_tail_cycles=self.trim_tail_cycles,
            frame_rate_hz=self.frame_rate_hz,
            rng_seed=self.seed,
        )

    def phantom(self):
        return PhantomConfig(
            width_px=self.width_px,
            height_px=self.height_px,
            n_speckles=self.n_speckles,
            speckle_sigma_px=self.speckle_sigma_px,
            displacement_gain_px_per_deg=self.displacement_gain_px_per_deg,
            depth_profile=self.depth_profile,
            pixel_noise_sigma=self.pixel_noise_sigma,
            rng_seed=self.seed,
        )

    def corner_params(self):
        return CornerParams(self.max_corners, self.quality_level, self.min_distance_px, self.block_size_px)

    def flow_params(self):
        return FlowParams(
            self.window_px, self.pyramid_levels, self.max_iters, self.epsilon_px, self.min_eig_threshold
        )

    def resolve(self, path):
        if not path:
            return path
        return path if os.path.isabs(path) else os.path.normpath(os.path.join(self.base_dir, path))

    # ------------------------------------------------------------ (de)serialization

    def to_dict(self):
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        d["amplitudes_deg"] = list(self.amplitudes_deg)
        d["lambda"] = d.pop("ridge_lambda")
        return d

    def canonical(self):
        """Sorted, whitespace-free JSON of every computational setting.

        ``out_dir`` is left out so that where results go does not change them.
        """
        d = self.to_dict()
        d.pop("out_dir")
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def fingerprint(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def replace(self, **changes):
        if "lambda" in changes:
            changes["ridge_lambda"] = changes.pop("lambda")
        try:
            return dataclasses.replace(self, **changes)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, d, base_dir="."):
        d = dict(d)
        if "lambda" in d:
            d["ridge_lambda"] = d.pop("lambda")
        names = {f.name for f in dataclasses.fields(cls)} - {"base_dir"}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for f in dataclasses.fields(cls):
            if f.name not in d:
                continue
            v = d[f.name]
            want = type(f.default)
            if want is float and isinstance(v, int) and not isinstance(v, bool):
                v = float(v)
            elif want is tuple and isinstance(v, list):
                v = tuple(v)
            if not isinstance(v, want) or (want is int and isinstance(v, bool)):
                raise ConfigError(f"{f.name}: expected {want.__name__}, got {type(v).__name__} ({v!r})")
            d[f.name] = v
        return cls(base_dir=base_dir, **d)

    def to_toml(self):
        lines = []
        for k, v in self.to_dict().items():
            lines.append(f"{k} = {_toml_value(v)}")
        return "\n".join(lines) + "\n"


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(type(v))


def load_config(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{path}: config must be flat, found tables {nested}")
    return PipelineConfig.from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))


DEFAULT_CONFIG_TEXT = """\
# sonoangle run configuration (flat key = value)

# "phantom" renders a synthetic trial; "files" reads frames_dir + angles_csv
source = "phantom"
frames_dir = ""
angles_csv = ""
frame_rate_hz = 63.0
seed = 0

# target motion: one sine cycle per period, amplitude drawn per cycle
amplitudes_deg = [20.0, 40.0, 60.0]
period_s = 4.0
n_cycles = 18
trim_head_cycles = 2
trim_tail_cycles = 1

# phantom image; peak shift (gain * max amplitude) must stay <= width/4
width_px = 256
height_px = 256
n_speckles = 1500
speckle_sigma_px = 2.0
displacement_gain_px_per_deg = 1.0
depth_profile = "linear"
pixel_noise_sigma = 0.01

# Shi-Tomasi seeding on the first frame
max_corners = 2000
quality_level = 0.01
min_distance_px = 5.0
block_size_px = 3

# pyramidal Lucas-Kanade
window_px = 21
pyramid_levels = 3
max_iters = 30
epsilon_px = 0.01
min_eig_threshold = 1e-4

# conditioning
filter_enabled = true
filter_order = 2
cutoff_hz = 6.0
zero_phase = true
standardize_scope = "full_trial"   # or "train_only"

# ridge readout
lambda = 10.0
train_fraction = 0.8

out_dir = "out"
"""
