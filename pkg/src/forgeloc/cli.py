"""Command-line interface.

Exit codes: 0 success, 2 input error, 3 scorer/protocol error.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys

from . import freqedge
from .edgetarget import EdgeTargetConfig, soft_edge_target
from .errors import InputError, ProtocolError, ScorerError
from .fuseval import fuse_max, sweep
from .heatmap import sh_heatmap
from .pipeline import (
    PipelineConfig,
    load_config,
    load_manifest,
    localize,
    resolve_scorers,
    run_eval,
)
from .raster import load_image, load_mask, load_prob_map, save_mask, save_prob_map, write_raw
from .tiler import plan_tiles, plan_windows

EXIT_INPUT = 2
EXIT_PROTOCOL = 3

log = logging.getLogger("forgeloc")


def _base_config(args):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {"threads": args.threads, "seed": args.seed}
    for flag, name in (("egs_scorer", "egs_scorer"), ("sh_scorer", "sh_scorer"),
                       ("prior", "prior_scorer"), ("tau", "tau"), ("patch", "patch"),
                       ("stride", "stride"), ("max_tile_side", "max_tile_side")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(cfg, **overrides).validate()


def _gt(args):
    return load_mask(args.mask) if getattr(args, "mask", None) else None


def cmd_localize(args):
    cfg = _base_config(args)
    img = load_image(args.image, as_uint8=True)
    if args.dump_plan:
        h, w = img.shape[:2]
        sys.stdout.write("# tiles\n" + plan_tiles(h, w, cfg.max_tile_side).dumps())
        sys.stdout.write("# windows\n" + plan_windows(h, w, cfg.patch, cfg.stride).dumps())
    result = localize(img, cfg, gt=_gt(args))
    save_mask(args.out_mask, result.mask)
    for path, raster in ((args.out_prob, result.fused), (args.out_egs, result.egs),
                         (args.out_sh, result.sh)):
        if path:
            save_prob_map(path, raster)


def cmd_heatmap(args):
    cfg = _base_config(args)
    img = load_image(args.image, as_uint8=True)
    cfg = dataclasses.replace(cfg, sh_scorer=args.scorer)
    _, scorer, _ = resolve_scorers(dataclasses.replace(cfg, egs_scorer="constant:0",
                                                       prior_scorer="constant:0"), _gt(args))
    scorer.validate()
    heat = sh_heatmap(img, scorer, cfg.patch, cfg.stride, epsilon=cfg.heatmap_epsilon,
                      n_jobs=cfg.threads, batch_size=cfg.window_batch)
    save_prob_map(args.out, heat)


def cmd_edge_targets(args):
    radii = tuple(int(r) for r in args.radii.split(","))
    cfg = EdgeTargetConfig(radii, args.lam, args.epsilon)
    save_prob_map(args.out, soft_edge_target(load_mask(args.mask), cfg))


def cmd_features(args):
    if args.dump_kernels:
        sys.stdout.write(freqedge.dump_kernels())
    if args.image:
        if not args.out_dir:
            raise InputError("--out-dir is required with --image")
        os.makedirs(args.out_dir, exist_ok=True)
        img = load_image(args.image)
        stack = freqedge.feature_stack(img, args.sigma)
        names = freqedge.RESIDUAL_PLANES + freqedge.GRADIENT_PLANES
        for name, plane in zip(names, stack):
            write_raw(os.path.join(args.out_dir, f"{name}.raw"), plane)
        save_prob_map(os.path.join(args.out_dir, "edge_energy.png"),
                      freqedge.edge_energy_score(img, sigma=args.sigma))
    elif not args.dump_kernels:
        raise InputError("nothing to do: pass --image and/or --dump-kernels")


def cmd_fuse(args):
    save_prob_map(args.out, fuse_max(load_prob_map(args.a), load_prob_map(args.b)))


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_eval(args):
    cfg = _base_config(args)
    report = run_eval(load_manifest(args.manifest), cfg)
    _write(args.out, report.curve.to_csv())
    if args.report:
        _write(args.report, report.report_csv())


def cmd_sweep(args):
    root = os.path.dirname(os.path.abspath(args.manifest))
    preds, gts = [], []
    with open(args.manifest) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pred, mask = obj["pred"], obj["mask"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise InputError(f"{args.manifest}:{lineno}: need 'pred' and 'mask'") from None
            if obj.get("category", "SP").upper() != "SP":
                continue
            preds.append(load_prob_map(os.path.join(root, pred)))
            gts.append(load_mask(os.path.join(root, mask)))
    if not preds:
        raise InputError("no SP samples in manifest")
    _write(args.out, sweep(preds, gts).to_csv())


def _tau(text):
    if text == "sweep":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'sweep', got {text!r}") from None


def _add_scorer_flags(p):
    p.add_argument("--egs-scorer", help="pixel scorer spec (default edge-energy)")
    p.add_argument("--sh-scorer", help="tile scorer spec (default constant:-8)")
    p.add_argument("--prior", help="edge-prior scorer spec (default edge-energy)")
    p.add_argument("--patch", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--max-tile-side", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="forgeloc", description=__doc__)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--config", help="key=value settings file")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("localize", help="localize manipulated regions in one image")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", help="ground truth, used by bare 'oracle' scorers")
    p.add_argument("--tau", type=_tau)
    p.add_argument("--out-mask", required=True)
    p.add_argument("--out-prob")
    p.add_argument("--out-egs")
    p.add_argument("--out-sh")
    p.add_argument("--dump-plan", action="store_true")
    _add_scorer_flags(p)
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("heatmap", help="sliding-window heatmap from a tile scorer")
    p.add_argument("--image", required=True)
    p.add_argument("--scorer", required=True)
    p.add_argument("--mask")
    p.add_argument("--patch", type=int)
    p.add_argument("--stride", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("edge-targets", help="soft multi-scale edge target from a mask")
    p.add_argument("--mask", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--radii", default="3,7,15")
    p.add_argument("--lam", type=float, default=0.5)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.set_defaults(func=cmd_edge_targets)

    p = sub.add_parser("features", help="fixed filter-bank planes / kernel dump")
    p.add_argument("--image")
    p.add_argument("--out-dir")
    p.add_argument("--sigma", type=float, default=1.5)
    p.add_argument("--dump-kernels", action="store_true")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("fuse", help="pixel-wise max of two probability maps")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("eval", help="localize SP entries of a manifest and sweep tau")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--report", help="per-image IoU at the best tau (CSV)")
    _add_scorer_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="threshold sweep over saved probability maps")
    p.add_argument("--manifest", required=True, help="JSON lines with 'pred' and 'mask'")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ProtocolError, ScorerError) as exc:
        log.error("%s", exc)
        return EXIT_PROTOCOL
    except (InputError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
