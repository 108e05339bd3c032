"""Deterministic synthetic test sequences.

``translate`` frames satisfy cur(x, y) = prev(x + dx, y + dy) exactly, the
global motion convention of :mod:`rbrc.motion`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .yuv_io import FrameY, VideoSpec

KINDS = ("static", "translate", "burst", "textured", "flat", "scene")


@dataclass(frozen=True)
class SyntheticSpec:
    kind: str = "textured"
    shift: tuple = (1, 0)
    burst_frame: int = 0
    noise: float = 1.0
    seed: int = 0
    object_speed: tuple = (2, 1)
    object_size: int = 40
    detail: float = 1.0
    sway: tuple = (6, 3)
    period: int = 48

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of {KINDS}")


def texture(rng, shape, detail=1.0, lo=30.0, hi=220.0):
    """Smooth multi-scale noise texture scaled into [lo, hi]."""
    img = np.zeros(shape)
    for sigma, amp in ((12.0, 1.0), (4.0, 0.6 * detail), (1.5, 0.35 * detail)):
        img += amp * gaussian_filter(rng.normal(size=shape), sigma, mode="wrap")
    img -= img.min()
    img /= img.max() or 1.0
    return lo + (hi - lo) * img


def _flat_band(canvas, frac=0.3):
    """Replace the top band with a gentle gradient (a flat, easy region)."""
    h = canvas.shape[0]
    band = int(h * frac)
    ramp = np.linspace(170, 185, canvas.shape[1])[None, :]
    canvas[:band] = ramp
    return canvas


def gen_sequence(spec: SyntheticSpec, video: VideoSpec) -> list[FrameY]:
    rng = np.random.default_rng(spec.seed)
    n, h, w = video.frame_count, video.height, video.width
    dx, dy = spec.shift
    if spec.kind == "flat":
        return [FrameY(k, np.full((h, w), 128, np.uint8)) for k in range(n)]

    pad_x = int(math.ceil(abs(dx) * n)) + 8
    pad_y = int(math.ceil(abs(dy) * n)) + 8
    canvas = texture(rng, (h + 2 * pad_y, w + 2 * pad_x), spec.detail)
    if spec.kind == "textured":
        canvas = _flat_band(canvas)
    elif spec.kind == "scene":
        canvas = _room(rng, canvas.shape, spec.detail)
    obj = texture(rng, (spec.object_size, spec.object_size), 1.5, 0, 255)
    yy, xx = np.mgrid[:spec.object_size, :spec.object_size] - (spec.object_size - 1) / 2
    obj_mask = (xx ** 2 + yy ** 2) <= (spec.object_size / 2) ** 2

    frames = []
    for k in range(n):
        if spec.kind == "static":
            ox, oy = pad_x, pad_y
        else:
            # frame k+1 at (x, y) shows frame k at (x + dx, y + dy)
            ox, oy = pad_x + dx * k, pad_y + dy * k
        img = _window(canvas, oy, ox, h, w)
        if spec.kind == "scene":
            img = _paste_head(img, rng, k, spec)
        elif spec.kind in ("textured", "burst"):
            active = spec.kind == "textured" or k >= spec.burst_frame
            if active:
                img = _paste_object(img, obj, obj_mask, k, spec)
        if spec.kind == "burst" and k >= spec.burst_frame:
            # activity lands in the bottom half, the MBs a raster-order coder reaches last
            img[h // 2:] += rng.normal(0, 12.0, (h - h // 2, w))
        if spec.noise > 0 and spec.kind != "static":
            img = img + rng.normal(0, spec.noise, img.shape)
        frames.append(FrameY(k, np.clip(np.rint(img), 0, 255).astype(np.uint8)))
    return frames


def _window(canvas, oy, ox, h, w):
    """``canvas[oy:oy+h, ox:ox+w]``, bilinearly resampled for fractional offsets.

    Real camera pans rarely land on whole pixels; a fractional shift leaves an
    interpolation residual that integer-pel motion search cannot remove.
    """
    iy, ix = int(math.floor(oy)), int(math.floor(ox))
    fy, fx = oy - iy, ox - ix
    if fy == 0 and fx == 0:
        return canvas[iy:iy + h, ix:ix + w].copy()
    win = canvas[iy:iy + h + 1, ix:ix + w + 1]
    top = (1 - fx) * win[:h, :w] + fx * win[:h, 1:w + 1]
    bot = (1 - fx) * win[1:h + 1, :w] + fx * win[1:h + 1, 1:w + 1]
    return (1 - fy) * top + fy * bot


def _paste_object(img, obj, mask, k, spec):
    h, w = img.shape
    s = spec.object_size
    vx, vy = spec.object_speed
    # bounce inside the frame
    span_x, span_y = max(w - s, 1), max(h - s, 1)
    px = (w // 3 + vx * k) % (2 * span_x)
    py = (h // 3 + vy * k) % (2 * span_y)
    px = px if px < span_x else 2 * span_x - px
    py = py if py < span_y else 2 * span_y - py
    region = img[py:py + s, px:px + s]
    m = mask[:region.shape[0], :region.shape[1]]
    region[m] = obj[:region.shape[0], :region.shape[1]][m]
    return img


def _room(rng, shape, detail):
    """Conversational-style backdrop: smooth walls and textured panels."""
    h, w = shape
    yy, xx = np.mgrid[:h, :w]
    img = 90.0 + 40.0 * xx / w + 20.0 * yy / h
    img[: h // 4] = 175.0 + 10.0 * xx[: h // 4] / w
    panels = ((h // 4, w // 16, h // 2, w // 4),
              (h // 4, w - w // 16 - w // 4, h // 2, w // 4),
              (h // 4 + h // 2 + 4, 0, h, w))
    for top, left, ph, pw in panels:
        sl = (slice(top, top + ph), slice(left, left + pw))
        img[sl] = texture(rng, img[sl].shape, detail, 40.0, 210.0)
    return img


_HEAD_CACHE: dict = {}


def _head(seed, size=(64, 52)):
    if (seed, size) not in _HEAD_CACHE:
        rng = np.random.default_rng(seed + 1000)
        hh, hw = size
        yy, xx = np.mgrid[:hh, :hw]
        ry, rx = (hh - 1) / 2, (hw - 1) / 2
        r2 = ((yy - ry) / ry) ** 2 + ((xx - rx) / rx) ** 2
        face = 150.0 - 40.0 * r2 + 90.0 * gaussian_filter(rng.normal(size=size), 1.5)
        face[: hh // 3] = 60.0 + 120.0 * gaussian_filter(rng.normal(size=(hh // 3, hw)), 1.0)
        _HEAD_CACHE[(seed, size)] = (np.clip(face, 0, 255), r2 <= 1.0)
    return _HEAD_CACHE[(seed, size)]


def _paste_head(img, rng, k, spec):
    """A smooth face-like ellipse swaying about the lower centre, with a
    mouth patch whose brightness changes from frame to frame."""
    face, mask = _head(spec.seed)
    hh, hw = face.shape
    h, w = img.shape
    ax, ay = spec.sway
    ph = 2 * np.pi * k / max(spec.period, 1)
    px = (w - hw) // 2 + int(round(ax * np.sin(ph)))
    py = h - hh - 4 + int(round(ay * np.sin(2 * ph)))
    face = face.copy()
    mouth_level = 90.0 + 30.0 * np.sin(3 * ph)
    face[int(hh * 0.7):int(hh * 0.78), int(hw * 0.35):int(hw * 0.65)] = mouth_level
    py = min(max(py, 0), h - hh)
    px = min(max(px, 0), w - hw)
    region = img[py:py + hh, px:px + hw]
    region[mask] = face[mask]
    return img


# Named clips used by the scripts and the acceptance checks. The first four
# move in whole pixels; the "sub" family pans by fractions of a pixel, which
# leaves real residual in the background at every QP.
CATALOGUE = {
    "pan": SyntheticSpec("textured", shift=(1, 0), seed=1),
    "still": SyntheticSpec("textured", shift=(0, 0), seed=2),
    "tilt": SyntheticSpec("textured", shift=(0, 1), seed=3, object_speed=(1, 2)),
    "pan2": SyntheticSpec("textured", shift=(-1, 0), seed=4, detail=0.6),
    "subpan": SyntheticSpec("textured", shift=(0.6, 0.2), seed=11),
    "subtilt": SyntheticSpec("textured", shift=(0.3, 0.7), seed=12, object_speed=(1, 2)),
    "subpan2": SyntheticSpec("textured", shift=(-0.45, 0), seed=13, detail=0.6),
    "substill": SyntheticSpec("textured", shift=(0.25, -0.25), seed=14),
    "scene": SyntheticSpec("scene", shift=(0, 0), seed=5),
}
INTEGER_SET = ("pan", "still", "tilt", "pan2")
SUBPIXEL_SET = ("subpan", "subtilt", "subpan2", "substill")
