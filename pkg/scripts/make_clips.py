"""Write the synthetic test clips used by the comparison matrix as I420 files.

    python scripts/make_clips.py --out clips --frames 100
"""

import argparse
import os

from rbrc.synthetic import CATALOGUE, gen_sequence
from rbrc.yuv_io import VideoSpec, write_sequence


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="clips")
    ap.add_argument("--frames", type=int, default=100)
    ap.add_argument("--width", type=int, default=176)
    ap.add_argument("--height", type=int, default=144)
    ap.add_argument("--only", default="", help="comma list of clip names, default all")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    video = VideoSpec(args.width, args.height, 15, args.frames)
    names = [n for n in args.only.split(",") if n] or list(CATALOGUE)
    for name in names:
        frames = gen_sequence(CATALOGUE[name], video)
        path = os.path.join(args.out, f"{name}_{args.width}x{args.height}.yuv")
        write_sequence(path, [f.luma for f in frames])
        print(path)


if __name__ == "__main__":
    main()
