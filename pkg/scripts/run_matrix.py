"""Run MBL, FL, T1 and T2 over a clip/bitrate matrix and print a summary table.

    python scripts/run_matrix.py --clips pan,still,tilt,pan2 --rates 24000,48000 --out matrix

Each (clip, bitrate) cell is written as a full comparison report under
``--out/<clip>_<bitrate>/``.
"""

import argparse
import os

from rbrc.config import RunConfig
from rbrc.report import compare
from rbrc.synthetic import CATALOGUE, INTEGER_SET, gen_sequence
from rbrc.yuv_io import VideoSpec

MODES = ["mbl", "fl", "t1", "t2"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--clips", default=",".join(INTEGER_SET))
    ap.add_argument("--rates", default="24000,48000")
    ap.add_argument("--frames", type=int, default=100)
    ap.add_argument("--out", default="matrix")
    args = ap.parse_args()
    rates = [float(r) for r in args.rates.split(",")]
    print(f"{'clip':<9}{'kbps':>6}  " + "  ".join(f"{m:>14}" for m in MODES)
          + "   T2 MR/Cx/Flat dB")
    for name in args.clips.split(","):
        frames = gen_sequence(CATALOGUE[name], VideoSpec(176, 144, 15, args.frames))
        for rate in rates:
            rep = compare(frames, RunConfig(bitrate=rate), MODES)
            rep.write(os.path.join(args.out, f"{name}_{int(rate)}"))
            cells = []
            for m in MODES:
                s = rep.results[m].summary
                cells.append(f"{s['achieved_kbps']:6.2f}k {s['mean_psnr']:5.2f}")
            rp = rep.region_psnr("t2")
            regions = "/".join("-" if rp[k] is None else f"{rp[k]:.1f}"
                               for k in ("MR", "Complex", "Flat"))
            print(f"{name:<9}{rate / 1000:>6.0f}  " + "  ".join(f"{c:>14}" for c in cells)
                  + f"   {regions}", flush=True)


if __name__ == "__main__":
    main()
