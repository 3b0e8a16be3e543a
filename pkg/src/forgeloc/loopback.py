"""Reference external scorer for the file-exchange protocol.

Usage: ``python -m forgeloc.loopback [--constant-logit V] REQ_DIR RESP_DIR``

Pixel mode (the default) echoes each request's red channel back as a 16-bit
probability PNG. Tile mode writes the mean of the red channel as the logit,
or ``V`` for every patch when given.
"""

import argparse
import os
import sys

import cv2
import numpy as np

from .raster import encode_prob16
from .scorer import KIND_ENV, read_manifest, read_rgb


def main(argv=None):
    parser = argparse.ArgumentParser(prog="forgeloc-loopback")
    parser.add_argument("req_dir")
    parser.add_argument("resp_dir")
    parser.add_argument("--kind", choices=("pixel", "tile"), default=None)
    parser.add_argument("--constant-logit", type=float, default=None)
    args = parser.parse_args(argv)
    kind = args.kind or os.environ.get(KIND_ENV, "pixel")
    os.makedirs(args.resp_dir, exist_ok=True)
    lines = []
    for i, name, h, w in read_manifest(args.req_dir):
        red = read_rgb(os.path.join(args.req_dir, name))[:, :, 0]
        if red.shape != (h, w):
            print(f"index {i}: manifest says {(h, w)}, file is {red.shape}", file=sys.stderr)
            return 1
        if kind == "tile":
            logit = args.constant_logit if args.constant_logit is not None else red.mean()
            lines.append(f"{i} {float(logit)!r}\n")
        else:
            cv2.imwrite(os.path.join(args.resp_dir, f"{i:05d}.png"), encode_prob16(red))
    if kind == "tile":
        with open(os.path.join(args.resp_dir, "scores.txt"), "w") as fh:
            fh.writelines(lines)
    return 0


if __name__ == "__main__":
    sys.exit(main())
