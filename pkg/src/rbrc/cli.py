"""``rbrc`` command line: encode, compare, sweep and regions."""

from __future__ import annotations

import argparse
import logging
import os
import sys


from . import report
from .config import RunConfig
from .controller import encode_sequence
from .motion import GlobalMotionVector, estimate_gmv
from .regions import REGION_NAMES, REGIONS, divide, region_pgm
from .yuv_io import ConfigurationError, IngestionError, load_sequence

log = logging.getLogger("rbrc")

# CLI flag -> RunConfig field, for everything that maps one to one
_FLAGS = {
    "input": str, "width": int, "height": int, "fps": float, "frames": int, "frame_skip": int,
    "mode": str, "bitrate": float, "buffer_ratio": float, "mu": float, "alpha": float,
    "th1": float, "th2": float, "gmv_search_range": int, "model_window": int, "me_range": int,
    "qp": int, "output": str,
}
_SWITCHES = ("no_gmc", "no_lambda_adjust", "dump_regions", "dump_recon", "dump_models")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file; flags override it")
    for name, typ in _FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
    for name in _SWITCHES:
        p.add_argument("--" + name.replace("_", "-"), dest=name, action="store_true",
                       default=None)
    p.add_argument("--gop", default="first", choices=["first"],
                   help="only 'first' (one leading I-frame) is supported")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rbrc", description="Region-based rate control runs")
    sub = ap.add_subparsers(dest="command", required=True)
    enc = sub.add_parser("encode", help="run one mode")
    _add_common(enc)
    cmp_ = sub.add_parser("compare", help="run several modes on the same input and budget")
    _add_common(cmp_)
    cmp_.add_argument("--modes", default=None, help="comma list, default mbl,fl,t1,t2")
    sw = sub.add_parser("sweep", help="sweep qp, bitrate or frame_skip")
    _add_common(sw)
    sw.add_argument("--axis", required=True, choices=["qp", "bitrate", "frame_skip"])
    sw.add_argument("--values", required=True, help="start:step:stop or comma list")
    sw.add_argument("--modes", default=None)
    sw.add_argument("--probes", default=None, help="probe frames for a qp sweep (comma list)")
    reg = sub.add_parser("regions", help="dump region maps only")
    _add_common(reg)
    return ap


def config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    kw = {}
    for name in (*_FLAGS, *_SWITCHES):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    if getattr(args, "modes", None):
        kw["modes"] = [m.strip() for m in args.modes.split(",") if m.strip()]
    cfg = cfg.replace(**kw)
    if not cfg.input:
        raise ConfigurationError("no input file given (--input or input= in --config)")
    return cfg


def load_frames(cfg: RunConfig, frame_skip: int | None = None):
    if not os.path.isfile(cfg.input):
        raise IngestionError(f"input file not found: {cfg.input}")
    skip = cfg.frame_skip if frame_skip is None else frame_skip
    return load_sequence(cfg.input, cfg.video, skip)


def cmd_encode(cfg: RunConfig) -> int:
    frames = load_frames(cfg)
    result = encode_sequence(frames, cfg)
    report.write_run(result, cfg.output, frames[0].grid)
    s = result.summary
    print(f"{cfg.mode}: {s['achieved_kbps']:.2f} kbps, {s['mean_psnr']:.2f} dB "
          f"over {s['frames']} frames -> {cfg.output}")
    return 0


def cmd_compare(cfg: RunConfig) -> int:
    frames = load_frames(cfg)
    rep = report.compare(frames, cfg)
    rep.write(cfg.output)
    for row in rep.compare_rows():
        print(f"{row[0]:>4}: {row[2]} kbps ({row[3]}%), {row[4]} dB")
    return 0


def cmd_sweep(cfg: RunConfig, axis: str, values: str, probes: str | None) -> int:
    vals = report.parse_values(values, integer=axis != "bitrate")
    os.makedirs(cfg.output, exist_ok=True)
    if axis == "qp":
        for q in vals:
            if not 0 <= q <= 51:
                raise ConfigurationError(f"qp {q} outside [0, 51]")
        frames = load_frames(cfg)
        pr = [int(p) for p in probes.split(",")] if probes else None
        samples, fits = report.qp_sweep(frames, cfg, vals, pr)
        report.write_csv(os.path.join(cfg.output, "sweep.csv"), report.QP_SAMPLE_FIELDS, samples)
        report.write_csv(os.path.join(cfg.output, "fits.csv"), report.QP_FIT_FIELDS, fits)
        print(f"qp sweep: {len(samples)} samples, {len(fits)} fits -> {cfg.output}")
        return 0
    rows = report.sweep(lambda skip: load_frames(cfg, skip), cfg, axis, vals)
    report.write_csv(os.path.join(cfg.output, "sweep.csv"), report.SWEEP_FIELDS, rows)
    print(f"{axis} sweep: {len(rows)} rows -> {cfg.output}")
    return 0


def cmd_regions(cfg: RunConfig) -> int:
    """Region maps from consecutive source frames, without coding anything.

    Complex/Flat subdivision needs the previous frame's coding error, which
    does not exist here, so every non-moving MB is reported as Complex.
    """
    frames = load_frames(cfg)
    os.makedirs(cfg.output, exist_ok=True)
    grid = frames[0].grid
    rows = []
    for prev, cur in zip(frames, frames[1:]):
        gmv = (GlobalMotionVector(0, 0) if cfg.no_gmc
               else estimate_gmv(cur.luma, prev.luma, cfg.gmv_search_range))
        _, regions = divide(cur.luma, prev.luma, gmv, None, cfg.th1, cfg.th2)
        with open(os.path.join(cfg.output, f"frame_{cur.index:05d}.pgm"), "wb") as fh:
            fh.write(region_pgm(regions, grid))
        rows.append([cur.index, gmv.gx, gmv.gy, *(int(c) for c in regions.counts)])
    report.write_csv(os.path.join(cfg.output, "regions.csv"),
                     ("frame", "gmv_x", "gmv_y", *(f"n_{REGION_NAMES[r].lower()}" for r in REGIONS)),
                     rows)
    print(f"{len(rows)} region maps -> {cfg.output}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if args.command == "encode":
            return cmd_encode(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.axis, args.values, args.probes)
        return cmd_regions(cfg)
    except (ConfigurationError, IngestionError, ValueError, OSError) as exc:
        print(f"rbrc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
