"""Command line interface.

Exit codes: 0 success, 2 configuration error, 3 data/validation error,
4 numerical error, 5 partial batch failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import imaging_io, phantom, pipeline
from .config import DEFAULT_CONFIG_TEXT, PipelineConfig, load_config
from .errors import ConfigError, SonoAngleError, ValidationError
from .vision import detect_corners, track_sequence

log = logging.getLogger("sonoangle")

EXIT_PARTIAL = 5


def _bool(text):
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _overrides(cfg, args):
    changes = {}
    if getattr(args, "lam", None) is not None:
        changes["lambda"] = args.lam
    if getattr(args, "zero_phase", None) is not None:
        changes["zero_phase"] = args.zero_phase
    if getattr(args, "train_fraction", None) is not None:
        changes["train_fraction"] = args.train_fraction
    return cfg.replace(**changes) if changes else cfg


def _load(args):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return _overrides(cfg, args)


def cmd_phantom(args):
    cfg = _load(args)
    out = args.out or cfg.resolve(cfg.out_dir)
    protocol, pcfg = cfg.protocol(), cfg.phantom()
    angles = phantom.generate_target_signal(protocol)
    frames = phantom.render_phantom(pcfg, angles)
    imaging_io.save_frames(frames, out)
    imaging_io.save_angles(angles, os.path.join(out, "angles.csv"))
    with open(os.path.join(out, "phantom_meta.json"), "w") as fh:
        json.dump(phantom.phantom_metadata(pcfg, protocol), fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(frames)} frames to {out}")
    return 0


def cmd_track(args):
    cfg = _load(args)
    frames_dir = args.frames or cfg.resolve(cfg.frames_dir)
    if not frames_dir:
        raise ConfigError("track needs --frames or frames_dir in the config")
    seq = imaging_io.load_frames(frames_dir, cfg.frame_rate_hz)
    seeds = detect_corners(seq[0], cfg.corner_params())
    if len(seeds) == 0:
        raise ValidationError("no corners found on the first frame")
    tracks = track_sequence(seq, seeds, cfg.flow_params())
    out = args.out or cfg.resolve(cfg.out_dir)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "tracks.csv")
    pipeline.write_tracks_csv(path, tracks)
    print(f"{tracks.n_alive}/{len(seeds)} points tracked to frame {len(seq) - 1}; wrote {path}")
    return 0


def cmd_run(args):
    cfg = _load(args)
    rep = pipeline.run_trial(cfg, args.out)
    ev = rep.eval
    print(f"rmse_deg={ev.rmse_deg:.4f} r2={ev.r2:.5f} n_train={ev.n_train} n_val={ev.n_val} "
          f"tracks={rep.n_tracks}")
    print(f"report: {rep.artifacts['report']}")
    return 0


def cmd_batch(args):
    paths = list(args.configs) + list(args.config_list or [])
    base = [_overrides(load_config(p), args) for p in paths] or [_overrides(PipelineConfig(), args)]
    configs = []
    for cfg in base:
        first = cfg.seed if args.seed is None else args.seed
        configs.extend(cfg.replace(seed=first + j) for j in range(args.trials))
    out = args.out or base[0].resolve(base[0].out_dir)
    rows, failed = pipeline.run_batch(configs, out)
    for r in rows:
        print(f"{r['trial']:>10} {r['status']:>8} rmse={r['rmse_deg']} r2={r['r2']} {r['error']}")
    print(f"summary: {os.path.join(out, 'summary.csv')}")
    return EXIT_PARTIAL if failed else 0


def cmd_plot_data(args):
    est = args.estimates or os.path.join(args.run, "estimates.csv")
    paths = pipeline.emit_plot_data(est, args.out, figures=not args.no_figures)
    for k, p in paths.items():
        print(f"{k}: {p}")
    return 0


def cmd_init_config(args):
    if os.path.exists(args.path) and not args.force:
        raise ConfigError(f"{args.path} exists; pass --force to overwrite")
    with open(args.path, "w") as fh:
        fh.write(DEFAULT_CONFIG_TEXT)
    print(f"wrote {args.path}")
    return 0


def _run_flags(p, with_config=True):
    if with_config:
        p.add_argument("--config", help="flat TOML config file")
    p.add_argument("--out", help="output directory (default: out_dir from config)")
    p.add_argument("--seed", type=_u64, help="seed for the phantom and the amplitude draw")
    p.add_argument("--lambda", dest="lam", type=float, help="ridge regularization strength")
    p.add_argument("--zero-phase", type=_bool, help="forward-backward filtering (true/false)")
    p.add_argument("--train-fraction", type=float, help="leading fraction of samples used for training")


def build_parser():
    ap = argparse.ArgumentParser(prog="sonoangle", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phantom", help="render a synthetic dataset (PGM frames + angles.csv)")
    _run_flags(p)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("track", help="seed corners on frame 0 and track them (tracks.csv)")
    p.add_argument("--frames", help="directory of frame_NNNNNN.pgm files")
    _run_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("run", help="run a single trial")
    _run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="run several independent trials and summarize")
    p.add_argument("configs", nargs="*", help="config files, one trial set each")
    p.add_argument("--config", dest="config_list", action="append", help="config file (repeatable)")
    p.add_argument("--trials", type=int, default=1, help="trials per config with consecutive seeds")
    _run_flags(p, with_config=False)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("plot-data", help="timeseries/scatter CSVs and figures from a run")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--run", help="run output directory containing estimates.csv")
    g.add_argument("--estimates", help="path to estimates.csv")
    p.add_argument("--out", help="output directory (default: next to estimates.csv)")
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=cmd_plot_data)

    p = sub.add_parser("init-config", help="write a commented default config")
    p.add_argument("path", nargs="?", default="sonoangle.toml")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_init_config)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except SonoAngleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
