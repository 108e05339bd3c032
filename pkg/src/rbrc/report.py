"""Report assembly: CSV/JSON writers, mode comparison and parameter sweeps.

All CSVs go through :mod:`csv` with a fixed header and ``\\n`` line endings,
and numbers are formatted with explicit precision so repeated runs produce
identical bytes regardless of locale. Wall-clock timings only go to the
JSON summaries, never into a CSV.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from . import allocator as alloc
from .codec import encode_frame
from .config import RunConfig
from .controller import FrameRecord, RunResult, encode_sequence, shared_region_psnr
from .lagrange import original_lambda
from .motion import estimate_gmv
from .rd_models import ModelWindow, RegionObservation, refit, r_squared
from .regions import REGION_NAMES, REGIONS, RegionMap, divide, region_pgm
from .yuv_io import MbGrid, write_sequence

COMPARE_FIELDS = ("mode", "target_kbps", "achieved_kbps", "rate_error_pct", "mean_psnr",
                  "psnr_mr", "psnr_complex", "psnr_flat", "buffer_min", "buffer_max",
                  "clamp_events", "skip_coded_frames")
PER_REGION_FIELDS = ("mode", "region", "psnr", "psnr_shared_map", "shared_map_mode", "mbs",
                     "skip_fraction")
CURVE_FIELDS = ("coded", "frame", "mode", "psnr", "bits", "buffer_fullness",
                "qp_mr", "qp_complex", "qp_flat")
MODEL_FIELDS = ("k", "r", "a", "b", "c", "d", "r2_rate", "r2_dist")
QP_SAMPLE_FIELDS = ("probe", "region", "qp", "qs", "mad", "rate", "dist", "mbs")
QP_FIT_FIELDS = ("probe", "region", "a", "b", "c", "d", "r2_rate", "r2_dist", "points")
SWEEP_FIELDS = ("axis", "value", *COMPARE_FIELDS)


def fmt(x, nd: int = 4) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.{nd}f}"


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_run(result: RunResult, outdir, grid: MbGrid) -> None:
    """frames.csv, summary.json and whichever dumps the config asked for."""
    os.makedirs(outdir, exist_ok=True)
    write_csv(os.path.join(outdir, "frames.csv"), FrameRecord.CSV_FIELDS,
              (r.csv_row() for r in result.records))
    write_json(os.path.join(outdir, "summary.json"), result.summary)
    cfg = result.config
    if cfg.dump_regions:
        rdir = os.path.join(outdir, "regions")
        os.makedirs(rdir, exist_ok=True)
        for idx, regions in result.region_maps:
            with open(os.path.join(rdir, f"frame_{idx:05d}.pgm"), "wb") as fh:
                fh.write(region_pgm(regions, grid))
    if cfg.dump_recon:
        write_sequence(os.path.join(outdir, "recon.yuv"), result.recon)
    if cfg.dump_models:
        write_csv(os.path.join(outdir, "models.csv"), MODEL_FIELDS,
                  ([k, r, fmt(a, 6), fmt(b, 6), fmt(c, 6), fmt(d, 6), fmt(r2r, 6), fmt(r2d, 6)]
                   for k, r, a, b, c, d, r2r, r2d in result.model_rows))


# --- comparison ------------------------------------------------------------


@dataclass
class ComparisonReport:
    """Results of several modes on one input and budget.

    Per-region PSNR is reported two ways. The main columns score each mode on
    its own region division; every mode, including the single-region ones,
    divides its frames by the same rule from its own previous-frame error.
    The shared-map column scores every mode on the reference mode's maps,
    which puts all modes on identical MBs but classifies them by the
    reference mode's history.
    """

    config: RunConfig
    results: dict  # mode -> RunResult, in run order
    reference_mode: str | None

    def compare_rows(self) -> list:
        rows = []
        for mode, res in self.results.items():
            s = res.summary
            rp = self.region_psnr(mode)
            err = 100.0 * (s["achieved_kbps"] - s["target_kbps"]) / s["target_kbps"]
            rows.append([mode, fmt(s["target_kbps"], 3), fmt(s["achieved_kbps"], 3), fmt(err, 3),
                         fmt(s["mean_psnr"]), fmt(rp["MR"]), fmt(rp["Complex"]), fmt(rp["Flat"]),
                         fmt(s["buffer_min"], 1), fmt(s["buffer_max"], 1), s["clamp_events"],
                         s["skip_coded_frames"]])
        return rows

    def region_psnr(self, mode: str) -> dict:
        """Per-region PSNR of ``mode`` on its own region division."""
        return self.results[mode].summary["region_psnr"]

    def shared_psnr(self, mode: str) -> dict | None:
        """Per-region PSNR of ``mode`` on the reference mode's region maps."""
        if self.reference_mode is None:
            return None
        return shared_region_psnr(self.results[mode], self.results[self.reference_mode].labels)

    def per_region_rows(self) -> list:
        rows = []
        for mode, res in self.results.items():
            own = self.region_psnr(mode)
            shared = self.shared_psnr(mode) or {}
            skip = res.summary["skip_mode"]
            for r in REGIONS:
                name = REGION_NAMES[r]
                rows.append([mode, name, fmt(own[name]), fmt(shared.get(name)),
                             self.reference_mode or "", skip[name]["mbs"],
                             fmt(skip[name]["skip_fraction"])])
        return rows

    def curve_rows(self) -> list:
        rows = []
        for mode, res in self.results.items():
            for rec in res.records:
                rows.append([rec.coded, rec.frame, mode, fmt(rec.psnr), rec.bits,
                             fmt(rec.buffer_fullness, 1), *rec.qp])
        return rows

    def write(self, outdir) -> None:
        os.makedirs(outdir, exist_ok=True)
        write_csv(os.path.join(outdir, "compare.csv"), COMPARE_FIELDS, self.compare_rows())
        write_csv(os.path.join(outdir, "per-region.csv"), PER_REGION_FIELDS,
                  self.per_region_rows())
        write_csv(os.path.join(outdir, "curves.csv"), CURVE_FIELDS, self.curve_rows())
        write_json(os.path.join(outdir, "summary.json"), {
            "config": self.config.to_dict(),
            "region_reference_mode": self.reference_mode,
            "modes": {m: r.summary for m, r in self.results.items()},
        })


def pick_reference(modes) -> str | None:
    """The mode whose region maps define the per-region columns."""
    for m in ("t2", "t1"):
        if m in modes:
            return m
    return None


def compare(frames, cfg: RunConfig, modes=None) -> ComparisonReport:
    modes = list(modes or cfg.modes or ["mbl", "fl", "t1", "t2"])
    if len(modes) < 1:
        raise ValueError("compare needs at least one mode")
    if len(set(modes)) != len(modes):
        raise ValueError(f"duplicate modes in {modes}")
    results = {m: encode_sequence(frames, cfg.replace(mode=m)) for m in modes}
    return ComparisonReport(cfg, results, pick_reference(modes))


# --- sweeps ----------------------------------------------------------------


def parse_values(text: str, integer: bool = False) -> list:
    """``32:2:48`` (inclusive range) or a comma list."""
    text = text.strip()
    if not text:
        raise ValueError("empty value list")
    cast = int if integer else float
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:step:stop, got {text!r}")
        start, step, stop = (cast(p) for p in parts)
        if step <= 0:
            raise ValueError("range step must be > 0")
        out, v = [], start
        while v <= stop + (0 if integer else 1e-9):
            out.append(v)
            v += step
    else:
        out = [cast(p) for p in text.split(",") if p.strip()]
    if not out:
        raise ValueError("empty value list")
    return out


def default_probes(n_frames: int, count: int = 3) -> list:
    """Evenly spaced P-frames that have two predecessors."""
    if n_frames < 3:
        return [n_frames - 1] if n_frames == 2 else []
    picks = np.linspace(2, n_frames - 1, count + 2)[1:-1]
    return sorted({int(round(p)) for p in picks})


def _code_uniform(src, ref, qp, labels, alpha, me_range, intra=False):
    dec = alloc.RateControlDecision((qp,) * 3, (0.0,) * 3, 0.0, 0.0, "C")
    regions = RegionMap(labels)
    return encode_frame(src, ref, dec, regions, original_lambda((qp,) * 3, alpha),
                        search=me_range, intra=intra)


def qp_sweep(frames, cfg: RunConfig, qps, probes=None):
    """Per-region (QS, rate, distortion) samples and line fits at fixed QP.

    Each probe frame ``k`` gets one region map, taken from a pass at the
    median sweep QP, so every QP is measured on the same MBs. For each QP,
    frame ``k-1`` is coded against source ``k-2`` (intra when ``k-1`` is the
    first frame) and frame ``k`` is then coded against that reconstruction.
    Returns (sample rows, fit rows).
    """
    qps = [int(q) for q in qps]
    if not qps:
        raise ValueError("empty QP list")
    probes = default_probes(len(frames)) if probes is None else list(probes)
    if not probes:
        raise ValueError("a QP sweep needs at least two frames")
    n_mb = MbGrid.for_shape(frames[0].luma.shape).mb_count
    uniform = np.full(n_mb, 2, dtype=np.int8)
    mid = sorted(qps)[len(qps) // 2]
    samples, fits = [], []

    def code_pair(k, qp):
        prev, cur = frames[k - 1].luma, frames[k].luma
        if k - 1 == 0:
            _, ref = _code_uniform(prev, None, qp, uniform, cfg.alpha, cfg.me_range, intra=True)
            prev_stats = None
        else:
            prev_stats, ref = _code_uniform(prev, frames[k - 2].luma, qp, uniform, cfg.alpha,
                                            cfg.me_range)
        return prev_stats, ref, cur, prev

    for k in probes:
        if not 1 <= k < len(frames):
            raise ValueError(f"probe frame {k} outside [1, {len(frames) - 1}]")
        prev_stats, _, cur, prev = code_pair(k, mid)
        gmv = estimate_gmv(cur, prev, cfg.gmv_search_range)
        prev_mse = None if prev_stats is None else prev_stats.mse
        diff, regions = divide(cur, prev, gmv, prev_mse, cfg.th1, cfg.th2)
        window = ModelWindow(len(qps))
        for qp in qps:
            _, ref, cur, _ = code_pair(k, qp)
            stats, _ = _code_uniform(cur, ref, qp, regions.label, cfg.alpha, cfg.me_range)
            qs = float(alloc.qs_from_qp(qp))
            for r in REGIONS:
                sel = regions.label == r
                if not sel.any():
                    continue
                obs = RegionObservation(frame=k, r=r, qs=qs, mad=float(diff.diff[sel].mean()),
                                        rate=float(stats.bits[sel].mean()),
                                        dist=float(stats.mse[sel].mean()))
                window.add(obs)
                samples.append([k, REGION_NAMES[r], qp, fmt(qs), fmt(obs.mad), fmt(obs.rate),
                                fmt(obs.dist), int(sel.sum())])
        for r in REGIONS:
            obs = window.get(r)
            if len(obs) < 2:
                continue
            m = refit(window, r)
            fits.append([k, REGION_NAMES[r], fmt(m.a, 6), fmt(m.b, 6), fmt(m.c, 6), fmt(m.d, 6),
                         fmt(r_squared(window, m, "rate"), 6), fmt(r_squared(window, m, "dist"), 6),
                         len(obs)])
    return samples, fits


def sweep(frames_for, cfg: RunConfig, axis: str, values, modes=None) -> list:
    """One comparison per value of ``bitrate`` or ``frame_skip``.

    ``frames_for(frame_skip)`` returns the frame list to code, so the caller
    decides how sequences are loaded.
    """
    if axis not in ("bitrate", "frame_skip"):
        raise ValueError(f"axis must be bitrate or frame_skip here, got {axis!r}")
    if not values:
        raise ValueError("empty value list")
    rows = []
    for v in values:
        run_cfg = cfg.replace(**{axis: v})
        skip = run_cfg.frame_skip
        rep = compare(frames_for(skip), run_cfg, modes)
        for row in rep.compare_rows():
            rows.append([axis, fmt(v, 3) if axis == "bitrate" else int(v), *row])
    return rows
