"""Fit the linear rate and distortion models over a fixed-QP sweep.

    python scripts/qp_sweep.py --clips subpan,subtilt,subpan2 --qps 32:2:48

Prints, per clip and region, the median R^2 of the per-probe-frame fits.
"""

import argparse

import numpy as np

from rbrc.config import RunConfig
from rbrc.report import parse_values, qp_sweep
from rbrc.synthetic import CATALOGUE, SUBPIXEL_SET, gen_sequence
from rbrc.yuv_io import VideoSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--clips", default=",".join(SUBPIXEL_SET[:3]))
    ap.add_argument("--qps", default="32:2:48")
    ap.add_argument("--frames", type=int, default=60)
    ap.add_argument("--probes", default="10,20,30,40,50")
    args = ap.parse_args()
    qps = parse_values(args.qps, integer=True)
    probes = [int(p) for p in args.probes.split(",")]
    for name in args.clips.split(","):
        frames = gen_sequence(CATALOGUE[name], VideoSpec(176, 144, 15, args.frames))
        _, fits = qp_sweep(frames, RunConfig(), qps, probes)
        for region in ("MR", "Complex", "Flat"):
            rows = [f for f in fits if f[1] == region]
            if not rows:
                continue
            r2r = np.median([float(f[6]) for f in rows])
            r2d = np.median([float(f[7]) for f in rows])
            print(f"{name:<9} {region:<8} R2 rate {r2r:.3f}  dist {r2d:.3f}  ({len(rows)} probes)")


if __name__ == "__main__":
    main()
