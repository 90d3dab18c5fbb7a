"""End-to-end trial: frames -> tracks -> features -> ridge readout -> metrics."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np

from . import imaging_io, phantom, regression, signal
from .errors import ConfigError, DataIOError, SonoAngleError, StageError, ValidationError
from .vision import detect_corners, prune_lost, track_sequence
from .vision.flow import loss_summary

log = logging.getLogger(__name__)

ESTIMATES_HEADER = ["k", "t_s", "theta_meas_deg", "theta_est_deg", "is_validation"]
SUMMARY_HEADER = [
    "trial", "config", "status", "rmse_deg", "rmse_std_deg", "r2", "r2_std",
    "n_train", "n_val", "n_tracks", "error",
]


@dataclass
class RunReport:
    eval: regression.EvalReport
    n_seeds: int
    n_tracks: int
    n_channels: int
    timings_ms: dict
    config_fingerprint: str
    artifacts: dict
    lost_points: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["eval"] = asdict(self.eval)
        return d


@dataclass
class TrialData:
    """Everything ``run_trial`` computes, for callers that want more than files."""

    frames: imaging_io.FrameSequence
    angles: imaging_io.AngleSeries
    seeds: np.ndarray
    tracks: object
    features: signal.FeatureMatrix
    theta_std: np.ndarray
    model: regression.RidgeModel
    theta_meas_deg: np.ndarray
    theta_est_deg: np.ndarray
    train_idx: np.ndarray
    val_idx: np.ndarray


class _Stages:
    def __init__(self):
        self.timings_ms = {}

    @contextmanager
    def __call__(self, name):
        t0 = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except SonoAngleError as exc:
            raise StageError(name, exc) from exc
        finally:
            self.timings_ms[name] = round((time.perf_counter() - t0) * 1000.0, 3)
        log.info("%-10s %9.1f ms", name, self.timings_ms[name])


def acquire(config):
    """Frames and the raw angle series described by ``config``."""
    if config.source == "phantom":
        angles = phantom.generate_target_signal(config.protocol())
        frames = phantom.render_phantom(config.phantom(), angles)
        return frames, angles
    if not config.frames_dir or not config.angles_csv:
        raise ConfigError("source = 'files' needs frames_dir and angles_csv")
    frames = imaging_io.load_frames(config.resolve(config.frames_dir), config.frame_rate_hz)
    angles = imaging_io.load_angles(config.resolve(config.angles_csv))
    return frames, angles


def compute_trial(config, stage=None):
    """Run every computational stage; no files are written."""
    stage = stage or _Stages()
    with stage("acquire"):
        frames, raw_angles = acquire(config)
    with stage("resample"):
        angles = signal.resample_to(raw_angles, frames.timestamps)
    with stage("detect"):
        seeds = detect_corners(frames[0], config.corner_params())
        if len(seeds) == 0:
            raise StageError("detect", ValidationError("no corners found on the first frame"))
    with stage("track"):
        tracks = track_sequence(frames, seeds, config.flow_params())
    with stage("prune"):
        alive = prune_lost(tracks)

    T = len(frames)
    with stage("split"):
        train_idx, val_idx = regression.split_contiguous(T, config.train_fraction)
    stats = slice(0, len(train_idx)) if config.standardize_scope == "train_only" else None

    with stage("condition"):
        design = None
        if config.filter_enabled:
            design = signal.design_butterworth(config.filter_order, config.cutoff_hz, frames.frame_rate_hz)
        features = signal.build_feature_matrix(alive, design, config.zero_phase, stats)
        theta_std, angle_params = signal.condition_angles(angles.theta_deg, design, config.zero_phase, stats)

    with stage("fit"):
        S = features.values
        w = regression.ridge_fit(S[:, train_idx], theta_std[train_idx], config.ridge_lambda)
        model = regression.RidgeModel(
            weights=w,
            lam=config.ridge_lambda,
            feature_zparams=features.zparams,
            angle_zparams=angle_params,
            channel_ids=features.channel_ids,
            config_fingerprint=config.fingerprint(),
        )
    with stage("predict"):
        theta_meas = signal.inverse_zscore(theta_std, angle_params)
        theta_est = model.predict_deg(S)

    data = TrialData(frames, angles, seeds, tracks, features, theta_std, model,
                     theta_meas, theta_est, train_idx, val_idx)
    return data, stage


def evaluate(theta_meas, theta_est, train_idx, val_idx):
    """RMSE and R^2 on the validation segment, in degrees."""
    y, y_hat = theta_meas[val_idx], theta_est[val_idx]
    return regression.EvalReport(
        rmse_deg=regression.rmse(y, y_hat),
        r2=regression.r_squared(y, y_hat),
        n_train=int(len(train_idx)),
        n_val=int(len(val_idx)),
        split_boundary=int(len(train_idx)),
    )


def write_estimates(path, t_s, theta_meas, theta_est, n_train):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ESTIMATES_HEADER)
        for k, (t, m, e) in enumerate(zip(t_s.tolist(), theta_meas.tolist(), theta_est.tolist())):
            w.writerow([k, repr(t), repr(m), repr(e), int(k >= n_train)])


def read_estimates(path):
    """Columns of an ``estimates.csv`` as numpy arrays keyed by header name."""
    if not os.path.isfile(path):
        raise DataIOError(f"{path}: no such file")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ESTIMATES_HEADER:
        raise DataIOError(f"{path}: expected header {','.join(ESTIMATES_HEADER)}")
    body = np.array(rows[1:], dtype=np.float64).reshape(-1, len(ESTIMATES_HEADER))
    cols = {name: body[:, i] for i, name in enumerate(ESTIMATES_HEADER)}
    cols["k"] = cols["k"].astype(np.int64)
    cols["is_validation"] = cols["is_validation"].astype(bool)
    return cols


def run_trial(config, out_dir=None):
    """Run one trial and write ``model.json``, ``estimates.csv`` and ``report.json``."""
    out_dir = out_dir or config.resolve(config.out_dir)
    data, stage = compute_trial(config)
    with stage("evaluate"):
        ev = evaluate(data.theta_meas_deg, data.theta_est_deg, data.train_idx, data.val_idx)

    with stage("write"):
        os.makedirs(out_dir, exist_ok=True)
        model_path = os.path.join(out_dir, "model.json")
        est_path = os.path.join(out_dir, "estimates.csv")
        report_path = os.path.join(out_dir, "report.json")
        data.model.save(model_path)
        write_estimates(est_path, data.frames.timestamps, data.theta_meas_deg,
                        data.theta_est_deg, ev.n_train)

    report = RunReport(
        eval=ev,
        n_seeds=int(len(data.seeds)),
        n_tracks=data.tracks.n_alive,
        n_channels=data.features.n_channels,
        timings_ms=dict(stage.timings_ms),
        config_fingerprint=config.fingerprint(),
        artifacts={"model": model_path, "estimates": est_path, "report": report_path},
        lost_points=loss_summary(data.tracks),
    )
    doc = report.to_dict()
    doc["config"] = config.to_dict()
    with open(report_path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    log.info("rmse %.4f deg  r2 %.5f  tracks %d", ev.rmse_deg, ev.r2, report.n_tracks)
    return report


def run_batch(configs, out_dir, names=None):
    """Run independent trials and write ``summary.csv``.

    A failing trial becomes an error row; the others still run. Returns
    ``(rows, n_failed)``. The aggregate row holds the mean and population
    standard deviation over the successful trials.
    """
    if not configs:
        raise ConfigError("batch needs at least one config")
    names = names or [f"trial_{i + 1:02d}" for i in range(len(configs))]
    os.makedirs(out_dir, exist_ok=True)
    rows, rmses, r2s = [], [], []
    for name, cfg in zip(names, configs):
        row = dict.fromkeys(SUMMARY_HEADER, "")
        row.update(trial=name, config=cfg.fingerprint()[:16])
        try:
            rep = run_trial(cfg, os.path.join(out_dir, name))
        except SonoAngleError as exc:
            log.error("%s failed: %s", name, exc)
            row.update(status="error", error=str(exc))
        else:
            row.update(
                status="ok",
                rmse_deg=repr(rep.eval.rmse_deg),
                r2=repr(rep.eval.r2),
                n_train=rep.eval.n_train,
                n_val=rep.eval.n_val,
                n_tracks=rep.n_tracks,
            )
            rmses.append(rep.eval.rmse_deg)
            r2s.append(rep.eval.r2)
        rows.append(row)

    agg = dict.fromkeys(SUMMARY_HEADER, "")
    agg.update(trial="aggregate", status=f"{len(rmses)}/{len(configs)} ok")
    if rmses:
        agg.update(
            rmse_deg=repr(float(np.mean(rmses))),
            rmse_std_deg=repr(float(np.std(rmses))),
            r2=repr(float(np.mean(r2s))),
            r2_std=repr(float(np.std(r2s))),
        )
    rows.append(agg)

    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_HEADER, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return rows, len(configs) - len(rmses)


def emit_plot_data(estimates_path, out_dir=None, figures=True):
    """Write ``timeseries.csv`` and ``scatter.csv`` (and PNG figures) next to the estimates."""
    cols = read_estimates(estimates_path)
    out_dir = out_dir or os.path.dirname(os.path.abspath(estimates_path))
    os.makedirs(out_dir, exist_ok=True)
    val = cols["is_validation"]
    split_t = float(cols["t_s"][val][0]) if val.any() else float("nan")

    ts_path = os.path.join(out_dir, "timeseries.csv")
    with open(ts_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s", "theta_meas_deg", "theta_est_deg", "segment", "split_t_s"])
        for t, m, e, v in zip(cols["t_s"].tolist(), cols["theta_meas_deg"].tolist(),
                              cols["theta_est_deg"].tolist(), val.tolist()):
            w.writerow([repr(t), repr(m), repr(e), "validation" if v else "train", repr(split_t)])

    sc_path = os.path.join(out_dir, "scatter.csv")
    with open(sc_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta_meas_deg", "theta_est_deg"])
        for m, e in zip(cols["theta_meas_deg"][val].tolist(), cols["theta_est_deg"][val].tolist()):
            w.writerow([repr(m), repr(e)])

    paths = {"timeseries": ts_path, "scatter": sc_path}
    if figures:
        from . import plotting

        paths.update(plotting.render_figures(cols, out_dir))
    return paths


def write_tracks_csv(path, tracks):
    """``frame,point_id,x_px,y_px`` rows for the surviving points only."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "point_id", "x_px", "y_px"])
        idx = np.flatnonzero(tracks.alive)
        for k in range(tracks.n_frames):
            xy = tracks.positions[idx, k]
            for pid, (x, y) in zip(tracks.point_ids[idx].tolist(), xy.tolist()):
                w.writerow([k, pid, repr(x), repr(y)])
