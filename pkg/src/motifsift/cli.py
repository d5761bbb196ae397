"""``motifsift`` command line: detect, match, deform, synth, bench, report.

Exit status is 0 on success, 1 on a usage error and 2 on an input or data
error; failures print a single diagnostic line on stderr.
"""
import argparse
import dataclasses
import json
import math
import os
import sys

from . import bench, deform, synth
from .errors import MotifSiftError, ParameterError
from .image import read_image, write_image
from .matching import DEFAULT_THRESHOLDS, match_features, ransac_homography, save_matches
from .sift import SiftParams, extract, load_features, save_features

PROG = "motifsift"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _sift_flags(p):
    g = p.add_argument_group("SIFT parameters")
    g.add_argument("--contrast-threshold", type=float, default=0.03, help="DoG contrast threshold (default 0.03)")
    g.add_argument("--edge-ratio", type=float, default=10.0,
                   help="principal-curvature ratio limit; 'inf' disables the edge test (default 10)")
    g.add_argument("--no-upsample", action="store_true", help="skip the 2x upsampled first octave")


def _sift_params(args):
    return SiftParams(contrast_threshold=args.contrast_threshold, edge_ratio_threshold=args.edge_ratio,
                      upsample_first_octave=not args.no_upsample)


def _size(text):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like WxH, got {text!r}")


def build_parser():
    parser = _Parser(prog=PROG, description="SIFT features and a deformation-robustness benchmark.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("detect", help="extract SIFT features from an image")
    p.add_argument("image", help="PNG or JPEG input")
    p.add_argument("--out", required=True, help="feature JSON to write")
    _sift_flags(p)

    p = sub.add_parser("match", help="match two images (or feature JSON files)")
    p.add_argument("template", help="template image or feature JSON")
    p.add_argument("query", help="query image or feature JSON")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLDS[-1],
                   help="absolute descriptor-distance cutoff (default 0.8)")
    p.add_argument("--ratio", type=float, default=None, help="also apply the nearest/second-nearest ratio test")
    p.add_argument("--ransac", action="store_true", help="verify matches with a RANSAC homography")
    p.add_argument("--seed", type=int, default=0, help="RANSAC seed (default 0)")
    p.add_argument("--iterations", type=int, default=1000, help="RANSAC iterations (default 1000)")
    p.add_argument("--inlier-threshold", type=float, default=3.0, help="RANSAC inlier distance in px (default 3)")
    p.add_argument("--out", help="match JSON to write")
    p.add_argument("--viz", help="side-by-side PNG of the matches (needs image inputs)")
    _sift_flags(p)

    p = sub.add_parser("deform", help="apply one scheduled deformation")
    p.add_argument("image", help="PNG or JPEG input")
    p.add_argument("--kind", required=True, help="Blur, Compression, Light, ZoomRotation or Viewpoint")
    p.add_argument("--level", type=int, required=True, help="intensity level 1..5")
    p.add_argument("--out", required=True, help="deformed PNG to write")
    p.add_argument("--gt", help="sidecar JSON with kind, level, params and ground-truth H")

    p = sub.add_parser("synth", help="render a synthetic motif")
    p.add_argument("--family", required=True, help="Chevron, DiagonalTwill, SymmetricDiamond, RepetitiveTile, NonGeometric")
    p.add_argument("--size", type=_size, default=(800, 355), help="canvas WxH (default 800x355)")
    p.add_argument("--seed", type=int, default=0, help="generator seed (default 0)")
    p.add_argument("--period", type=int, default=16, help="motif period in px (default 16)")
    p.add_argument("--contrast", type=float, default=0.8, help="tone separation in (0, 1] (default 0.8)")
    p.add_argument("--border-rows", type=int, default=2, help="twill frame rows (default 2)")
    p.add_argument("--smooth", action="store_true", help="soften edges with a 0.5 px Gaussian")
    p.add_argument("--out", required=True, help="PNG to write")
    p.add_argument("--spec", help="motif spec JSON (default: next to --out with a .json suffix)")

    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("--config", default="default_synth.json",
                   help="suite config JSON; a missing default_synth.json falls back to the bundled copy")
    p.add_argument("--out", required=True, help="CSV of per-cell records")
    p.add_argument("--report", help="markdown report to write")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default from config)")
    p.add_argument("--deformed-dir", help="directory for deformed images (overrides config)")
    p.add_argument("--viz-dir", help="directory for per-cell match visualisations (overrides config)")
    p.add_argument("--no-ransac", action="store_true", help="skip RANSAC verification")

    p = sub.add_parser("report", help="mean retained percentage over classes")
    p.add_argument("records", help="CSV written by 'bench'")
    p.add_argument("--kind", required=True, help="deformation kind")
    p.add_argument("--level", type=int, required=True, help="level 1..5")
    p.add_argument("--threshold", type=float, required=True, help="matching threshold")
    return parser


def _features(path, params):
    if path.lower().endswith(".json"):
        feats, _ = load_features(path)
        return feats, None
    img = read_image(path)
    return extract(img, params), img


def cmd_detect(args, out):
    params = _sift_params(args)
    feats = extract(read_image(args.image), params)
    save_features(args.out, feats, params)
    print(f"{len(feats)} features -> {args.out}", file=out)


def cmd_match(args, out):
    params = _sift_params(args)
    tf, timg = _features(args.template, params)
    qf, qimg = _features(args.query, params)
    matches = match_features(tf, qf, args.threshold, args.ratio)
    pct = bench.retained_percentage(len(matches), len(tf)) if tf else math.nan
    print(f"matches {len(matches)} / {len(tf)} template features, retained {pct:.2f}%", file=out)
    verified = None
    shown = matches
    if args.ransac:
        try:
            verified = ransac_homography(matches, tf, qf, args.iterations, args.inlier_threshold, args.seed)
            shown = verified.inliers
            print(f"ransac inliers {len(verified.inliers)}", file=out)
        except MotifSiftError as exc:
            print(f"ransac inliers 0 ({exc})", file=out)
    if args.out:
        save_matches(args.out, matches, verified)
    if args.viz:
        if timg is None or qimg is None:
            raise ParameterError("--viz needs image inputs, not feature files")
        write_image(args.viz, bench.render_matches(timg, qimg, shown, tf, qf))


def cmd_deform(args, out):
    spec = deform.schedule(args.kind, args.level)
    result = deform.apply(read_image(args.image), spec)
    write_image(args.out, result.image)
    if args.gt:
        deform.save_sidecar(args.gt, result)
    print(f"{spec.kind.value}-{spec.level} {json.dumps(spec.params)} -> {args.out}", file=out)


def cmd_synth(args, out):
    w, h = args.size
    spec = synth.MotifSpec(synth.Family.parse(args.family), w, h, args.period, args.contrast,
                           args.border_rows, args.seed, args.smooth)
    write_image(args.out, synth.generate_motif(spec))
    synth.save_spec(args.spec or os.path.splitext(args.out)[0] + ".json", spec)
    print(f"{spec.family.value} {w}x{h} seed {spec.seed} -> {args.out}", file=out)


def _resolve_config(path):
    if not os.path.exists(path) and os.path.basename(path) == "default_synth.json":
        return bench.default_config_path()
    return path


def cmd_bench(args, out):
    cfg = bench.load_config(_resolve_config(args.config))
    base = os.path.dirname(os.path.abspath(args.out))

    def place(override, configured):
        # relative output directories live next to the CSV
        d = override or configured
        return os.path.join(base, d) if d and not os.path.isabs(d) else d

    changes = {"deformed_dir": place(args.deformed_dir, cfg.deformed_dir),
               "viz_dir": place(args.viz_dir, cfg.viz_dir)}
    if args.jobs is not None:
        changes["jobs"] = args.jobs
    if args.no_ransac:
        changes["ransac"] = dataclasses.replace(cfg.ransac, enabled=False)
    cfg = dataclasses.replace(cfg, **changes)
    records = bench.run_suite(cfg)
    bench.write_report(records, "csv", args.out)
    if args.report or cfg.markdown:
        bench.write_report(records, "markdown", args.report or place(None, cfg.markdown))
    print(f"{len(records)} records -> {args.out}", file=out)


def cmd_report(args, out):
    records = bench.read_records(args.records)
    mean = bench.aggregate(records, args.kind, args.threshold, args.level)
    print(f"{mean:.2f}", file=out)


COMMANDS = {"detect": cmd_detect, "match": cmd_match, "deform": cmd_deform,
            "synth": cmd_synth, "bench": cmd_bench, "report": cmd_report}


def run_command(argv, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args, out)
    except SystemExit as exc:
        # --help exits cleanly through argparse
        return int(exc.code or 0)
    except (UsageError, ParameterError) as exc:
        print(f"{PROG}: usage error: {exc}", file=err)
        return 1
    except (MotifSiftError, OSError, ValueError) as exc:
        print(f"{PROG}: error: {exc}", file=err)
        return 2
    return 0


def main(argv=None):
    sys.exit(run_command(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
