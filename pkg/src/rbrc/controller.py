"""Per-frame rate-control loop: the region-based controllers and baselines.

Every P-frame of the region-based modes runs, in order: region division,
frame bit allocation, QP determination, RDO encoding and model refit. FL
is the same loop with the whole frame as one region; MBL hands the frame
budget out MB by MB in raster order; CQP codes everything at one QP.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import allocator as alloc
from .codec import SKIP, FrameEncoder, encode_frame, mse_to_psnr
from .config import RunConfig
from .lagrange import adjust_lambda, beta, delta, original_lambda, lambda_org
from .motion import GlobalMotionVector, estimate_gmv
from .rd_models import ModelWindow, RegionModel, RegionObservation, refit, r_squared
from .regions import COMPLEX, REGION_NAMES, REGIONS, RegionMap, divide

log = logging.getLogger(__name__)

BUFFER_SKIP_FRACTION = 0.95
MBL_MB_STEP = 2
MBL_FRAME_SPAN = 3
FL_CLAMP = (3, 3, 3)
SLOPE_FLOOR = 1.0


@dataclass
class FrameRecord:
    coded: int
    frame: int
    ftype: str
    mode: str
    qp: tuple
    bits: int
    target_bits: float
    psnr: float
    region_psnr: tuple
    region_counts: tuple
    buffer_fullness: float
    clamped: bool
    infeasible: bool
    gmv: tuple
    skip_counts: tuple
    mse: float

    CSV_FIELDS = (
        "coded", "frame", "type", "mode", "qp_mr", "qp_complex", "qp_flat", "bits",
        "target_bits", "psnr", "psnr_mr", "psnr_complex", "psnr_flat", "n_mr", "n_complex",
        "n_flat", "buffer_fullness", "clamped", "infeasible", "gmv_x", "gmv_y",
        "skip_mr", "skip_complex", "skip_flat",
    )

    def csv_row(self) -> list:
        def f(x, nd=4):
            return "" if x is None else f"{x:.{nd}f}"
        return [
            self.coded, self.frame, self.ftype, self.mode, *self.qp, self.bits,
            f(self.target_bits, 1), f(self.psnr), *(f(p) for p in self.region_psnr),
            *self.region_counts, f(self.buffer_fullness, 1), int(self.clamped),
            int(self.infeasible), *self.gmv, *self.skip_counts,
        ]


@dataclass
class RunResult:
    config: RunConfig
    records: list
    summary: dict
    recon: list = field(default_factory=list)
    region_maps: list = field(default_factory=list)
    model_rows: list = field(default_factory=list)
    # per P-frame MB labels and MB MSE, used to score modes on a shared region map
    labels: list = field(default_factory=list)
    mse_maps: list = field(default_factory=list)


def region_psnrs(stats, labels) -> tuple:
    out = []
    for r in REGIONS:
        sel = labels == r
        out.append(mse_to_psnr(float(stats.mse[sel].mean())) if sel.any() else None)
    return tuple(out)


class RateController:
    """Runs one mode over a sequence of luma frames."""

    def __init__(self, cfg: RunConfig, n_frames: int, shape):
        self.cfg = cfg
        self.mode = cfg.mode
        h, w = shape
        self.fr = cfg.coded_frame_rate
        self.drain = cfg.bitrate / self.fr
        self.bpp = self.drain / (w * h)
        self.boot_qp = alloc.bootstrap_qp(self.bpp)
        self.r_min = self.drain / 8
        self.RM = self.drain * n_frames
        self.NF = n_frames
        self.buffer = alloc.BufferState(size=cfg.buffer_ratio * cfg.bitrate)
        self.window = ModelWindow(cfg.model_window)
        self.models = {r: RegionModel.initial(self.bpp, r) for r in REGIONS}
        start = cfg.qp if self.mode == "cqp" else self.boot_qp
        self.prev_qp = (start,) * 3
        self.prev_mse = None
        self.p_frames = 0
        self.force_skip = False
        self.report_map = None

    # --- helpers -----------------------------------------------------------

    @property
    def single_region(self) -> bool:
        return self.mode in ("fl", "mbl")

    def _budget(self) -> float:
        b_k = alloc.buffer_feedback(self.buffer, self.fr, self.cfg.bitrate)
        return alloc.allocate_frame_bits(self.RM, max(self.NF, 1), b_k, self.cfg.mu, self.r_min).R_k

    def _account(self, bits: int) -> bool:
        self.RM -= bits
        self.NF -= 1
        clamped = self.buffer.update(bits, self.drain)
        if clamped:
            log.info("buffer clamp at fullness %.0f / %.0f", self.buffer.fullness, self.buffer.size)
        self.force_skip = self.buffer.fullness > BUFFER_SKIP_FRACTION * self.buffer.size
        return clamped

    def _regions(self, cur, prev):
        if self.cfg.no_gmc:
            gmv = GlobalMotionVector(0, 0)
        else:
            gmv = estimate_gmv(cur, prev, self.cfg.gmv_search_range)
        diff, regions = divide(cur, prev, gmv, self.prev_mse, self.cfg.th1, self.cfg.th2)
        # single-region modes code with one map but still report on their own
        # division, so every mode's per-region numbers come from the same rule
        self.report_map = regions
        if self.single_region:
            return gmv, diff, RegionMap.uniform(len(diff.diff), COMPLEX)
        return gmv, diff, regions

    def _observe(self, k, diff, regions, qps, stats):
        for r in REGIONS:
            sel = regions.label == r
            if not sel.any():
                continue
            qs = float(alloc.qs_from_qp(qps[r - 1]))
            self.window.add(RegionObservation(
                frame=k, r=r, qs=qs, mad=float(diff.diff[sel].mean()),
                rate=float(stats.bits[sel].mean()), dist=float(stats.mse[sel].mean())))
            self.models[r] = refit(self.window, r, self.models[r])

    # --- frame coding ------------------------------------------------------

    def intra(self, src):
        qp = self.prev_qp[0]
        lam = original_lambda((qp,) * 3, self.cfg.alpha)
        dec = alloc.RateControlDecision((qp,) * 3, (float(alloc.qs_from_qp(qp)),) * 3, 0.0, 0.0, "I")
        stats, recon = encode_frame(src, None, dec, None, lam, intra=True)
        return stats, recon, dec

    def inter(self, k, src, prev_src, ref):
        """Code one P-frame; returns (stats, recon, qp, regions, R_k, infeasible, gmv)."""
        gmv, diff, regions = self._regions(src, prev_src)
        if self.force_skip:
            qp = self.prev_qp
            lam = original_lambda(qp, self.cfg.alpha)
            stats, recon = encode_frame(src, ref, alloc.RateControlDecision(qp, (0,) * 3, 0, 0, "S"),
                                        regions, lam, search=self.cfg.me_range, force_skip=True)
            return stats, recon, qp, regions, 0.0, False, gmv, "S"
        R_k = self._budget()
        if self.mode == "cqp":
            qp = (self.cfg.qp,) * 3
            stats, recon = encode_frame(src, ref, alloc.RateControlDecision(qp, (0,) * 3, 0, 0, "C"),
                                        regions, original_lambda(qp, self.cfg.alpha),
                                        search=self.cfg.me_range)
            return stats, recon, qp, regions, R_k, False, gmv, "P"
        if self.mode == "mbl":
            stats, recon, qp = self._mbl_frame(src, ref, diff, R_k)
            self._observe_pooled(k, diff, stats)
            return stats, recon, qp, regions, R_k, False, gmv, "P"

        counts = regions.counts
        mads = [float(diff.diff[regions.label == r].mean()) if counts[r - 1] else 0.0
                for r in REGIONS]
        models = [self._solver_model(r) for r in REGIONS]
        infeasible = False
        if self.p_frames == 0:
            qp = (self.boot_qp,) * 3
        else:
            monotone = self.mode == "t2"
            dec = alloc.solve_qp(models, mads, counts, R_k, monotone=monotone)
            infeasible = dec.infeasible
            if self.mode == "fl":
                qp = (alloc.clamp_qp(dec.qp, self.prev_qp, FL_CLAMP, FL_CLAMP)[COMPLEX - 1],) * 3
            elif monotone:
                qp = alloc.clamp_qp_monotone(dec.qp, self.prev_qp)
            else:
                qp = alloc.clamp_qp(dec.qp, self.prev_qp)
        if self.mode == "t2" and not self.cfg.no_lambda_adjust:
            lam = adjust_lambda(qp, beta(counts, delta(models)), self.cfg.alpha)
        else:
            lam = original_lambda(qp, self.cfg.alpha)
        dec = alloc.RateControlDecision(qp, tuple(float(alloc.qs_from_qp(q)) for q in qp), 0, 0,
                                        self.mode)
        stats, recon = encode_frame(src, ref, dec, regions, lam, search=self.cfg.me_range)
        self._observe(k, diff, regions, qp, stats)
        return stats, recon, qp, regions, R_k, infeasible, gmv, "P"

    def _solver_model(self, r: int) -> RegionModel:
        """Model handed to the QS solver for region ``r``.

        A window confined to one side of a mode switch (a region coded almost
        entirely as SKIP, say) fits a slope near zero, and the solver then
        treats QS as free in one direction and never leaves it. Each slope is
        therefore floored at ``SLOPE_FLOOR`` times the slope of the
        proportional line through the window mean.
        """
        m = self.models[r]
        obs = self.window.get(r)
        if not obs or SLOPE_FLOOR <= 0:
            return m
        qs = np.array([o.qs for o in obs])
        x = float((np.array([o.mad for o in obs]) / qs).mean())
        rate = float(np.mean([o.rate for o in obs]))
        dist = float(np.mean([o.dist for o in obs]))
        if x > 0 and m.a < SLOPE_FLOOR * rate / x:
            m = replace(m, a=SLOPE_FLOOR * rate / x, b=rate - SLOPE_FLOOR * rate)
        if m.c < SLOPE_FLOOR * dist / float(qs.mean()):
            m = replace(m, c=SLOPE_FLOOR * dist / float(qs.mean()), d=dist - SLOPE_FLOOR * dist)
        return m

    # --- MB-layer baseline -------------------------------------------------

    def _observe_pooled(self, k, diff, stats):
        qs = alloc.qs_from_qp(stats.qps).astype(np.float64)
        mad = float(diff.diff.mean())
        x = float((diff.diff / qs).mean())
        qs_eff = mad / x if x > 0 else float(qs.mean())
        self.window.add(RegionObservation(frame=k, r=COMPLEX, qs=qs_eff, mad=mad,
                                          rate=float(stats.bits.mean()),
                                          dist=float(stats.mse.mean())))
        self.models[COMPLEX] = refit(self.window, COMPLEX, self.models[COMPLEX])

    def _mbl_frame(self, src, ref, diff, R_k):
        luma = np.asarray(getattr(src, "luma", src))
        enc = FrameEncoder(luma, ref, search=self.cfg.me_range)
        n = enc.mb_count
        frame_qp = int(round(np.mean(self.prev_qp)))
        model = self.models[COMPLEX]
        remaining = R_k
        qp_prev_mb = frame_qp
        first = self.p_frames == 0
        for p in range(n):
            if first:
                qp = self.boot_qp
            else:
                per_mb = remaining / (n - p)
                room = per_mb - model.b
                if room <= 0:
                    qp = alloc.QP_MAX
                elif diff.diff[p] <= 0 or model.a <= 0:
                    qp = 1
                else:
                    qp = alloc.qp_from_qs(model.a * diff.diff[p] / room)
                qp = min(max(qp, qp_prev_mb - MBL_MB_STEP, frame_qp - MBL_FRAME_SPAN, 1),
                         qp_prev_mb + MBL_MB_STEP, frame_qp + MBL_FRAME_SPAN, alloc.QP_MAX)
            lam = lambda_org(qp, self.cfg.alpha)
            res = enc.encode_mb(p, qp, lam, math.sqrt(lam))
            remaining -= res.bits
            qp_prev_mb = qp
        stats = enc.stats()
        mean_qp = int(round(float(stats.qps.mean())))
        return stats, enc.recon, (mean_qp,) * 3

    # --- driver ------------------------------------------------------------

    def run(self, frames) -> RunResult:
        cfg = self.cfg
        records, recon_planes, region_maps, model_rows = [], [], [], []
        label_maps, mse_maps = [], []
        times = []
        ref = None
        for i, fr in enumerate(frames):
            t0 = time.perf_counter()
            src = fr.luma
            if i == 0:
                target = self.RM / self.NF
                stats, ref, dec = self.intra(src)
                qp, regions, infeasible, gmv, ftype = dec.qp, None, False, (0, 0), "I"
            else:
                stats, ref, qp, regions, target, infeasible, gmv, ftype = self.inter(
                    i, src, frames[i - 1].luma, ref)
                gmv = gmv.as_tuple()
                if ftype == "P":
                    self.p_frames += 1
            bits = stats.frame_bits
            clamped = self._account(bits)
            self.prev_mse = None if i == 0 else stats.mse
            self.prev_qp = tuple(int(q) for q in qp)
            times.append(time.perf_counter() - t0)

            shown = self.report_map if regions is not None else None
            labels = shown.label if shown is not None else None
            if labels is not None:
                rp = region_psnrs(stats, labels)
                rc = tuple(int(c) for c in shown.counts)
                sk = tuple(stats.mode_counts(labels, r)[SKIP] for r in REGIONS)
            else:
                rp, rc, sk = (None, None, None), (0, 0, 0), (0, 0, 0)
            frame_mse = float(stats.mse.mean())
            if labels is not None:
                label_maps.append(labels.copy())
                mse_maps.append(np.asarray(stats.mse, dtype=np.float64).copy())
            records.append(FrameRecord(
                coded=i, frame=fr.index, ftype=ftype, mode=self.mode, qp=self.prev_qp, bits=bits,
                target_bits=float(target), psnr=mse_to_psnr(frame_mse), region_psnr=rp,
                region_counts=rc, buffer_fullness=self.buffer.fullness, clamped=clamped,
                infeasible=infeasible, gmv=tuple(gmv), skip_counts=sk, mse=frame_mse))
            if cfg.dump_recon:
                recon_planes.append(ref.copy())
            if cfg.dump_regions and shown is not None:
                region_maps.append((fr.index, shown))
            if cfg.dump_models and ftype == "P":
                model_rows.extend(self._model_rows(fr.index))
            log.debug("frame %d %s qp=%s bits=%d", fr.index, ftype, qp, bits)
        summary = summarize(records, cfg, len(frames), self.buffer, times)
        return RunResult(cfg, records, summary, recon_planes, region_maps, model_rows,
                         label_maps, mse_maps)

    def _model_rows(self, k):
        rows = []
        for r in REGIONS:
            m = self.models[r]
            obs = self.window.get(r)
            r2r = r_squared(self.window, m, "rate") if len(obs) >= 2 else None
            r2d = r_squared(self.window, m, "dist") if len(obs) >= 2 else None
            rows.append((k, r, m.a, m.b, m.c, m.d, r2r, r2d))
        return rows


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return float(np.mean(xs)) if xs else None


def summarize(records, cfg: RunConfig, n_frames: int, buffer, times) -> dict:
    total_bits = sum(r.bits for r in records)
    duration = n_frames / cfg.coded_frame_rate
    p_recs = [r for r in records if r.ftype != "I"]
    skip_dist = {}
    for i, name in enumerate(("MR", "Complex", "Flat")):
        n = sum(r.region_counts[i] for r in p_recs)
        s = sum(r.skip_counts[i] for r in p_recs)
        skip_dist[name] = {"mbs": n, "skip": s, "skip_fraction": (s / n) if n else None}
    fullness = [r.buffer_fullness for r in records]
    return {
        "mode": cfg.mode,
        "frames": n_frames,
        "target_kbps": cfg.bitrate / 1000.0,
        "achieved_kbps": total_bits / duration / 1000.0,
        "total_bits": total_bits,
        "mean_psnr": float(np.mean([r.psnr for r in records])),
        "region_psnr": {
            "MR": _mean(r.region_psnr[0] for r in p_recs),
            "Complex": _mean(r.region_psnr[1] for r in p_recs),
            "Flat": _mean(r.region_psnr[2] for r in p_recs),
        },
        "buffer_size": buffer.size,
        "buffer_min": float(min(fullness)),
        "buffer_max": float(max(fullness)),
        "clamp_events": int(sum(r.clamped for r in records)),
        "infeasible_frames": int(sum(r.infeasible for r in records)),
        "skip_coded_frames": int(sum(r.ftype == "S" for r in records)),
        "skip_mode": skip_dist,
        "encode_ms_per_frame": 1000.0 * float(np.mean(times)) if times else None,
        "encode_time_note": "wall-clock, not comparable across machines",
        "config": cfg.to_dict(),
    }


def shared_region_psnr(result: RunResult, labels: list) -> dict:
    """Mean per-region PSNR of ``result`` measured on someone else's region maps.

    FL and MBL code the frame as one region, so their own records carry no
    MR/Complex/Flat split. Scoring every mode on the same per-frame maps
    makes the per-region columns comparable.
    """
    if len(labels) != len(result.mse_maps):
        raise ValueError("label maps and MSE maps cover different frame counts")
    out = {}
    for r in REGIONS:
        vals = [mse_to_psnr(float(m[lab == r].mean()))
                for lab, m in zip(labels, result.mse_maps) if (lab == r).any()]
        out[REGION_NAMES[r]] = float(np.mean(vals)) if vals else None
    return out


def encode_sequence(frames, cfg: RunConfig) -> RunResult:
    if not frames:
        raise ValueError("no frames to encode")
    ctl = RateController(cfg, len(frames), frames[0].luma.shape)
    return ctl.run(frames)
