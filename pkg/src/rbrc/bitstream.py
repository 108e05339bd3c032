"""Serialization of coded frames and a matching decoder.

Used to check that the bit counts charged by :mod:`rbrc.codec` are the real
length of a decodable stream.
"""

from __future__ import annotations

import numpy as np

from .allocator import qs_from_qp
from .codec import (INTER, INTRA, MB_SIZE, QP_PRED_INIT, SKIP, dequantize, inverse_transform,
                    levels_from_zigzag, merge_blocks, reconstruct)
from .yuv_io import MbGrid


class BitWriter:
    def __init__(self):
        self.bits: list[int] = []

    def write(self, value: int, n: int):
        for i in range(n - 1, -1, -1):
            self.bits.append((value >> i) & 1)

    def ue(self, v: int):
        v = int(v) + 1
        n = v.bit_length()
        self.write(0, n - 1)
        self.write(v, n)

    def se(self, v: int):
        v = int(v)
        self.ue(2 * v - 1 if v > 0 else -2 * v)

    def __len__(self):
        return len(self.bits)

    def to_bytes(self) -> bytes:
        return np.packbits(np.array(self.bits, dtype=np.uint8)).tobytes()


class BitReader:
    def __init__(self, data: bytes, nbits: int):
        self.bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:nbits]
        self.pos = 0

    def read(self, n: int) -> int:
        v = 0
        for _ in range(n):
            if self.pos >= len(self.bits):
                raise EOFError("read past end of stream")
            v = (v << 1) | int(self.bits[self.pos])
            self.pos += 1
        return v

    def ue(self) -> int:
        zeros = 0
        while self.read(1) == 0:
            zeros += 1
        return (1 << zeros) - 1 + self.read(zeros)

    def se(self) -> int:
        k = self.ue()
        return (k + 1) // 2 if k % 2 else -(k // 2)


def _write_levels(bw: BitWriter, zz: np.ndarray):
    coded = (zz != 0).reshape(4, 64).any(axis=1)
    for flag in coded:
        bw.write(int(flag), 1)
    for q in range(4):
        if not coded[q]:
            continue
        for blk in zz[4 * q:4 * q + 4]:
            nz = np.flatnonzero(blk)
            bw.ue(len(nz))
            prev = -1
            for pos in nz:
                bw.ue(pos - prev - 1)
                lv = int(blk[pos])
                bw.ue(2 * abs(lv) - 2 + (lv < 0))
                prev = pos


def _read_levels(br: BitReader) -> np.ndarray:
    zz = np.zeros((16, 16), dtype=np.int32)
    coded = [br.read(1) for _ in range(4)]
    for q in range(4):
        if not coded[q]:
            continue
        for b in range(4 * q, 4 * q + 4):
            n = br.ue()
            pos = -1
            for _ in range(n):
                pos += br.ue() + 1
                code = br.ue()
                mag = code // 2 + 1
                zz[b, pos] = -mag if code % 2 else mag
    return zz


def _mv_pred(results, p, mbs_x):
    if p % mbs_x == 0:
        return (0, 0)
    left = results[p - 1]
    return left.mv if left.mode != INTRA else (0, 0)


def write_frame(results, grid: MbGrid) -> tuple[bytes, int]:
    """Serialize MbResults coded with ``keep_levels=True``; returns (data, nbits)."""
    bw = BitWriter()
    qp_pred = QP_PRED_INIT
    for p, res in enumerate(results):
        if res.mode == SKIP:
            bw.write(1, 1)
            continue
        if res.levels is None:
            raise ValueError("frame was coded without keep_levels=True")
        bw.write(1 if res.mode == INTER else 0, 2)
        if res.mode == INTER:
            mvp = _mv_pred(results, p, grid.mbs_x)
            bw.se(res.mv[0] - mvp[0])
            bw.se(res.mv[1] - mvp[1])
        if res.qp == qp_pred:
            bw.write(0, 1)
        else:
            bw.write(1, 1)
            bw.se(res.qp - qp_pred)
        qp_pred = res.qp
        _write_levels(bw, res.levels)
    return bw.to_bytes(), len(bw)


class _Decoded:
    def __init__(self, mode, mv):
        self.mode, self.mv = mode, mv


def decode_frame(data: bytes, nbits: int, ref, shape, search: int = 16) -> np.ndarray:
    """Rebuild the reconstruction of a frame from its serialized MBs."""
    h, w = shape
    grid = MbGrid.for_shape(shape)
    recon = np.zeros((h, w), dtype=np.uint8)
    pad = None if ref is None else np.pad(np.asarray(ref, dtype=np.uint8), search, mode="edge")
    br = BitReader(data, nbits)
    qp_pred = QP_PRED_INIT
    done = []
    for p in range(grid.mb_count):
        row, col = grid.origin(p)
        if br.read(1) == 1:
            mv = _mv_pred(done, p, grid.mbs_x)
            recon[row:row + MB_SIZE, col:col + MB_SIZE] = _mc(pad, search, row, col, mv)
            done.append(_Decoded(SKIP, mv))
            continue
        mode = INTER if br.read(1) == 1 else INTRA
        mv = (0, 0)
        if mode == INTER:
            mvp = _mv_pred(done, p, grid.mbs_x)
            mv = (mvp[0] + br.se(), mvp[1] + br.se())
        if br.read(1) == 1:
            qp_pred += br.se()
        qs = float(qs_from_qp(qp_pred))
        zz = _read_levels(br)
        if mode == INTER:
            pred = _mc(pad, search, row, col, mv).astype(np.float64)
        else:
            pred = np.full((MB_SIZE, MB_SIZE), float(_dc(recon, row, col)))
        rres = merge_blocks(inverse_transform(dequantize(levels_from_zigzag(zz), qs)))
        recon[row:row + MB_SIZE, col:col + MB_SIZE] = reconstruct(pred, rres)
        done.append(_Decoded(mode, mv))
    if br.pos != nbits:
        raise ValueError(f"decoded {br.pos} of {nbits} bits")
    return recon


def _mc(pad, s, row, col, mv):
    dx, dy = mv
    return pad[s + row + dy:s + row + dy + MB_SIZE, s + col + dx:s + col + dx + MB_SIZE]


def _dc(recon, row, col):
    parts = []
    if row > 0:
        parts.append(recon[row - 1, col:col + MB_SIZE])
    if col > 0:
        parts.append(recon[row:row + MB_SIZE, col - 1])
    if not parts:
        return 128
    vals = np.concatenate(parts).astype(np.int64)
    return int((vals.sum() + len(vals) // 2) // len(vals))
