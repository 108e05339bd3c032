"""A minimal closed-loop block codec used to give the controller real feedback.

Not H.264. Each 16x16 MB is coded as SKIP, INTER (full-search integer-pel
motion compensation) or INTRA (DC prediction), chosen by minimizing
SSE + lambda * bits. Residuals go through the 4x4 integer core transform
with orthonormal scaling, uniform quantization with the QP ladder's step,
and are counted exactly with Exp-Golomb codes.

MB syntax (bits)::

    SKIP   '1'
    INTER  '01' se(mvd_x) se(mvd_y) qp_delta cbp texture
    INTRA  '00' qp_delta cbp texture

    qp_delta = '0' | '1' se(qp - qp_pred)      qp_pred starts at 26 each frame
    cbp      = 4 flags, one per 8x8 quadrant
    texture  = for each coded quadrant, four 4x4 blocks of
               ue(n_nonzero) then n x (ue(zero_run) ue(level_code))
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .allocator import qs_from_qp
from .yuv_io import MB_SIZE, MbGrid

SKIP, INTER, INTRA = "SKIP", "INTER", "INTRA"
MODES = (SKIP, INTER, INTRA)
DEFAULT_ME_RANGE = 16
QP_PRED_INIT = 26
PSNR_SENTINEL = 99.99

_CF = np.array([[1, 1, 1, 1], [2, 1, -1, -2], [1, -1, -1, 1], [1, -2, 2, -1]], dtype=np.float64)
_T = _CF * np.array([0.5, 1 / math.sqrt(10), 0.5, 1 / math.sqrt(10)])[:, None]

ZIGZAG = np.array([0, 1, 4, 8, 5, 2, 3, 6, 9, 12, 13, 10, 7, 11, 14, 15])
_UNZIGZAG = np.argsort(ZIGZAG)

# 16 4x4 blocks of an MB: quadrant-major order, raster inside each quadrant
_BLOCK_ORIGINS = [(8 * (q // 2) + 4 * (b // 2), 8 * (q % 2) + 4 * (b % 2))
                  for q in range(4) for b in range(4)]
_BLOCK_ROWS = np.array([o[0] for o in _BLOCK_ORIGINS])
_BLOCK_COLS = np.array([o[1] for o in _BLOCK_ORIGINS])


# --- Exp-Golomb lengths -----------------------------------------------------

def ue_bits(v):
    """Length of the unsigned Exp-Golomb code of ``v`` (array-friendly)."""
    v = np.asarray(v)
    _, e = np.frexp(v + 1.0)
    return 2 * (e - 1) + 1


def se_code(v):
    """Signed value -> unsigned code number (0, 1, -1, 2, -2 -> 0, 1, 2, 3, 4)."""
    v = np.asarray(v)
    return np.where(v > 0, 2 * v - 1, -2 * v)


def se_bits(v):
    return ue_bits(se_code(v))


def level_code(level):
    """Nonzero level -> code number (1, -1, 2, -2 -> 0, 1, 2, 3)."""
    level = np.asarray(level)
    return 2 * np.abs(level) - 2 + (level < 0)


# --- transform / quantization ------------------------------------------------

def forward_transform(blocks: np.ndarray) -> np.ndarray:
    return _T @ blocks @ _T.T


def inverse_transform(coeffs: np.ndarray) -> np.ndarray:
    return _T.T @ coeffs @ _T


def quantize(coeffs: np.ndarray, qs: float) -> np.ndarray:
    return np.rint(coeffs / qs).astype(np.int32)


def dequantize(levels: np.ndarray, qs: float) -> np.ndarray:
    return levels * qs


def split_blocks(mb: np.ndarray) -> np.ndarray:
    """(..., 16, 16) -> (..., 16 blocks, 4, 4) in coding order."""
    lead = mb.shape[:-2]
    b = mb.reshape(lead + (4, 4, 4, 4)).swapaxes(-3, -2).reshape(lead + (16, 4, 4))
    # raster 4x4 index -> quadrant-major coding order
    raster = (_BLOCK_ROWS // 4) * 4 + _BLOCK_COLS // 4
    return b[..., raster, :, :]


def merge_blocks(blocks: np.ndarray) -> np.ndarray:
    lead = blocks.shape[:-3]
    raster = (_BLOCK_ROWS // 4) * 4 + _BLOCK_COLS // 4
    out = np.empty_like(blocks)
    out[..., raster, :, :] = blocks
    return out.reshape(lead + (4, 4, 4, 4)).swapaxes(-3, -2).reshape(lead + (16, 16))


def block_bits(zz: np.ndarray) -> np.ndarray:
    """Bits of each 4x4 block given zigzag-ordered levels (..., 16)."""
    mask = zz != 0
    pos = np.arange(16)
    last = np.maximum.accumulate(np.where(mask, pos, -1), axis=-1)
    prev = np.concatenate([np.full(mask.shape[:-1] + (1,), -1), last[..., :-1]], axis=-1)
    run = pos - prev - 1
    per = np.where(mask, ue_bits(run) + ue_bits(level_code(np.where(mask, zz, 1))), 0)
    return ue_bits(mask.sum(axis=-1)) + per.sum(axis=-1)


def texture_bits(levels_zz: np.ndarray) -> np.ndarray:
    """cbp plus coded-quadrant bits for MB levels shaped (..., 16 blocks, 16)."""
    bb = block_bits(levels_zz)
    lead = bb.shape[:-1]
    bb = bb.reshape(lead + (4, 4))
    coded = (levels_zz != 0).reshape(lead + (4, 4, 16)).any(axis=(-1, -2))
    return 4 + np.where(coded, bb.sum(axis=-1), 0).sum(axis=-1)


def code_residual(residual: np.ndarray, qs: float):
    """Transform, quantize and reconstruct residual MBs shaped (..., 16, 16).

    Returns (zigzag levels (..., 16, 16), reconstructed residual, texture bits).
    """
    blocks = split_blocks(residual)
    levels = quantize(forward_transform(blocks), qs)
    rec = merge_blocks(inverse_transform(dequantize(levels, qs)))
    zz = levels.reshape(levels.shape[:-2] + (16,))[..., ZIGZAG]
    return zz, rec, texture_bits(zz)


def reconstruct(pred: np.ndarray, rec_residual: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(pred + rec_residual), 0, 255).astype(np.uint8)


def levels_from_zigzag(zz: np.ndarray) -> np.ndarray:
    return zz[..., _UNZIGZAG].reshape(zz.shape[:-1] + (4, 4))


@numba.njit(cache=True)
def _sad_table(src, pad, s):
    """SAD of every MB against every integer offset in [-s, s]^2.

    Row ``(dy + s) * (2s + 1) + (dx + s)`` holds offset (dx, dy).
    """
    h, w = src.shape
    gy, gx = h // 16, w // 16
    n = 2 * s + 1
    out = np.zeros((n * n, gy * gx), dtype=np.int64)
    for dy in range(-s, s + 1):
        for dx in range(-s, s + 1):
            o = (dy + s) * n + (dx + s)
            for by in range(gy):
                for bx in range(gx):
                    acc = 0
                    for i in range(16):
                        y = by * 16 + i
                        for j in range(16):
                            x = bx * 16 + j
                            d = np.int32(src[y, x]) - np.int32(pad[s + y + dy, s + x + dx])
                            acc += d if d >= 0 else -d
                    out[o, by * gx + bx] = acc
    return out


# --- encoder -----------------------------------------------------------------

@dataclass
class MbResult:
    mode: str
    bits: int
    header_bits: int
    sse: int
    mv: tuple = (0, 0)
    qp: int = 0
    levels: np.ndarray | None = field(default=None, repr=False)


@dataclass
class EncodeStats:
    bits: np.ndarray
    header_bits: np.ndarray
    sse: np.ndarray
    modes: list
    mvs: list
    qps: np.ndarray

    @property
    def frame_bits(self) -> int:
        return int(self.bits.sum())

    @property
    def mse(self) -> np.ndarray:
        return self.sse / float(MB_SIZE * MB_SIZE)

    def region_aggregates(self, labels: np.ndarray, r: int):
        """(mean bits per MB, mean MSE per MB) over MBs labelled ``r``."""
        sel = labels == r
        if not sel.any():
            return 0.0, 0.0
        return float(self.bits[sel].mean()), float(self.mse[sel].mean())

    def mode_counts(self, labels=None, r=None) -> dict:
        modes = np.array(self.modes)
        if labels is not None:
            modes = modes[labels == r]
        return {m: int((modes == m).sum()) for m in MODES}


class FrameEncoder:
    """Sequential raster-order MB encoder for one frame.

    ``ref`` is the previous reconstruction (None for an intra frame). Call
    :meth:`encode_mb` for p = 0 .. mb_count-1 in order, then :meth:`stats`.
    """

    def __init__(self, src: np.ndarray, ref: np.ndarray | None, search: int = DEFAULT_ME_RANGE,
                 keep_levels: bool = False):
        self.src = np.asarray(src, dtype=np.uint8)
        self.h, self.w = self.src.shape
        self.grid = MbGrid.for_shape(self.src.shape)
        self.ref = None if ref is None else np.asarray(ref, dtype=np.uint8)
        self.search = search
        self.keep_levels = keep_levels
        self.recon = np.zeros_like(self.src)
        self.results: list[MbResult] = []
        self.qp_pred = QP_PRED_INIT
        self._src_i = self.src.astype(np.int32)
        if self.ref is not None:
            self._prepare_motion()

    def _prepare_motion(self):
        s = self.search
        self._pad = np.pad(self.ref, s, mode="edge")
        self._offsets = np.array([(dx, dy) for dy in range(-s, s + 1) for dx in range(-s, s + 1)])
        self._sad = _sad_table(self.src, self._pad, s)

    @property
    def mb_count(self):
        return self.grid.mb_count

    def _pred_block(self, row, col, mv):
        s = self.search
        dx, dy = mv
        return self._pad[s + row + dy:s + row + dy + MB_SIZE, s + col + dx:s + col + dx + MB_SIZE]

    def _mv_pred(self, p):
        if p % self.grid.mbs_x == 0:
            return (0, 0)
        left = self.results[p - 1]
        return left.mv if left.mode != INTRA else (0, 0)

    def _dc_pred(self, row, col):
        parts = []
        if row > 0:
            parts.append(self.recon[row - 1, col:col + MB_SIZE])
        if col > 0:
            parts.append(self.recon[row:row + MB_SIZE, col - 1])
        if not parts:
            return 128
        vals = np.concatenate(parts).astype(np.int64)
        return int((vals.sum() + len(vals) // 2) // len(vals))

    def _qp_bits(self, qp):
        return 1 if qp == self.qp_pred else 1 + int(se_bits(qp - self.qp_pred))

    def encode_mb(self, p: int, qp: int, lam_mode: float, lam_me: float,
                  allow=(SKIP, INTER, INTRA)) -> MbResult:
        if p != len(self.results):
            raise ValueError(f"MBs must be coded in raster order; expected {len(self.results)}, got {p}")
        row, col = self.grid.origin(p)
        src = self.src[row:row + MB_SIZE, col:col + MB_SIZE]
        src_i = self._src_i[row:row + MB_SIZE, col:col + MB_SIZE]
        qs = float(qs_from_qp(qp))
        inter_ok = self.ref is not None
        cands = []  # (J, order, MbResult, recon)

        if inter_ok and SKIP in allow:
            mvp = self._mv_pred(p)
            pred = self._pred_block(row, col, mvp)
            sse = int(((src_i - pred) ** 2).sum())
            res = MbResult(SKIP, 1, 1, sse, mvp, qp)
            cands.append((sse + lam_mode * 1, 0, res, pred))

        preds, kinds, heads, mvs = [], [], [], []
        if inter_ok and INTER in allow:
            mvp = self._mv_pred(p)
            mvd_bits = se_bits(self._offsets[:, 0] - mvp[0]) + se_bits(self._offsets[:, 1] - mvp[1])
            cost = self._sad[:, p] + lam_me * mvd_bits
            best = int(np.argmin(cost))
            mv = (int(self._offsets[best, 0]), int(self._offsets[best, 1]))
            preds.append(self._pred_block(row, col, mv).astype(np.float64))
            kinds.append(INTER)
            heads.append(2 + int(mvd_bits[best]) + self._qp_bits(qp))
            mvs.append(mv)
        if INTRA in allow or not cands and not preds:
            preds.append(np.full((MB_SIZE, MB_SIZE), float(self._dc_pred(row, col))))
            kinds.append(INTRA)
            heads.append(2 + self._qp_bits(qp))
            mvs.append((0, 0))

        if preds:
            pred_arr = np.stack(preds)
            zz, rres, tex = code_residual(src_i - pred_arr, qs)
            for i, kind in enumerate(kinds):
                rec = reconstruct(pred_arr[i], rres[i])
                sse = int(((src_i - rec) ** 2).sum())
                bits = heads[i] + int(tex[i])
                res = MbResult(kind, bits, heads[i], sse, mvs[i], qp,
                               zz[i] if self.keep_levels else None)
                cands.append((sse + lam_mode * bits, 1 + i, res, rec))

        _, _, best, rec = min(cands, key=lambda c: (c[0], c[1]))
        self.recon[row:row + MB_SIZE, col:col + MB_SIZE] = rec
        if best.mode != SKIP:
            self.qp_pred = qp
        self.results.append(best)
        return best

    def stats(self) -> EncodeStats:
        res = self.results
        return EncodeStats(
            bits=np.array([r.bits for r in res], dtype=np.int64),
            header_bits=np.array([r.header_bits for r in res], dtype=np.int64),
            sse=np.array([r.sse for r in res], dtype=np.int64),
            modes=[r.mode for r in res],
            mvs=[r.mv for r in res],
            qps=np.array([r.qp for r in res], dtype=np.int64),
        )


def encode_picture(src, ref, qp_map, lam_mode_map, lam_me_map, search=DEFAULT_ME_RANGE,
                   force_skip=False, keep_levels=False):
    """Code a whole frame with per-MB QP and multipliers.

    ``ref=None`` codes an intra frame. ``force_skip`` codes every MB as SKIP
    (buffer protection). Returns (EncodeStats, recon plane, FrameEncoder).
    """
    enc = FrameEncoder(src, ref, search=0 if force_skip else search, keep_levels=keep_levels)
    allow = (SKIP,) if force_skip and ref is not None else (SKIP, INTER, INTRA)
    for p in range(enc.mb_count):
        enc.encode_mb(p, int(qp_map[p]), float(lam_mode_map[p]), float(lam_me_map[p]), allow)
    return enc.stats(), enc.recon, enc


def encode_frame(src, ref, decision, regions, lambdas, search=DEFAULT_ME_RANGE, intra=False,
                 force_skip=False, keep_levels=False):
    """Code one frame with the QP and multipliers of each MB's region.

    Intra frames ignore ``regions`` and use ``decision.qp[0]`` everywhere.
    Returns (EncodeStats, recon plane).
    """
    src = np.asarray(getattr(src, "luma", src))
    grid = MbGrid.for_shape(src.shape)
    if intra or ref is None:
        qp = np.full(grid.mb_count, int(decision.qp[0]))
        lm = np.full(grid.mb_count, float(lambdas.lambda_mode[0]))
        le = np.full(grid.mb_count, float(lambdas.lambda_me[0]))
        ref = None
    else:
        idx = np.asarray(regions.label, dtype=np.int64) - 1
        qp = np.asarray(decision.qp)[idx]
        lm = np.asarray(lambdas.lambda_mode)[idx]
        le = np.asarray(lambdas.lambda_me)[idx]
    stats, recon, _ = encode_picture(src, ref, qp, lm, le, search=search, force_skip=force_skip,
                                     keep_levels=keep_levels)
    return stats, recon


def encode_mb(src_block, ref_block, qp, lam_mode, lam_me, search=DEFAULT_ME_RANGE):
    """Code a lone MB against a reference plane with no coded neighbours.

    ``src_block`` is 16x16; ``ref_block`` is the reference plane the MB is
    motion-searched in, with the MB at its top-left corner.
    """
    src_block = np.asarray(src_block, dtype=np.uint8)
    ref = None if ref_block is None else np.asarray(ref_block, dtype=np.uint8)
    plane = np.zeros_like(ref) if ref is not None else np.zeros((MB_SIZE, MB_SIZE), np.uint8)
    plane[:MB_SIZE, :MB_SIZE] = src_block
    enc = FrameEncoder(plane, ref, search=search)
    res = enc.encode_mb(0, qp, lam_mode, lam_me)
    return res, enc.recon[:MB_SIZE, :MB_SIZE].copy()


def psnr(src, recon) -> float:
    a = np.asarray(getattr(src, "luma", src), dtype=np.float64)
    b = np.asarray(getattr(recon, "luma", recon), dtype=np.float64)
    mse = float(((a - b) ** 2).mean())
    return mse_to_psnr(mse)


def mse_to_psnr(mse: float) -> float:
    if mse <= 0:
        return PSNR_SENTINEL
    return 10.0 * math.log10(255.0 ** 2 / mse)
