"""Command-line front end: ``stereomatch {synth,match,train,eval,fuse}``.

Exit codes: 0 ok, 2 usage, 3 data/format, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .census import DEFAULT_RADIUS
from .cnn import DEFAULT_CHANNELS, load_weights, save_weights
from .disparity import median_fuse
from .estimator import StereoMatcher
from .evaluation import EvalConfig, evaluate, save_error_image, write_report
from .exceptions import StereoError, TrainingError
from .image_io import load_pfm, load_pgm, save_pfm
from .synth import generate, load_scene_config, write_scene

log = logging.getLogger("stereomatch")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _channels(text: str) -> tuple[int, ...]:
    try:
        parts = tuple(int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated ints, got {text!r}") from None
    if len(parts) != 5 or parts[0] != 1:
        raise argparse.ArgumentTypeError("need five channel counts starting with 1, e.g. 1,64,64,64,64")
    return parts


def cmd_synth(args) -> int:
    spec = load_scene_config(args.config)
    paths = write_scene(*generate(spec), args.out_dir)
    for name, p in paths.items():
        log.info("wrote %s -> %s", name, p)
    return EXIT_OK


def cmd_match(args) -> int:
    network = load_weights(args.weights) if args.cost == "cnn" else None
    matcher = StereoMatcher(
        cost=args.cost,
        d_max=args.dmax,
        radius=args.radius,
        use_sgm=not args.no_sgm,
        p1=args.p1,
        p2=args.p2,
        num_paths=args.paths,
        subpixel=args.subpixel,
        lr_tol=None if args.lr_tol < 0 else args.lr_tol,
        network=network,
    )
    d = matcher.match(load_pgm(args.left), load_pgm(args.right))
    save_pfm(d, args.out)
    log.info("%s: %d valid / %d invalid pixels", args.out, d.n_valid, d.n_invalid)
    return EXIT_OK


def _scene_dirs(root: Path) -> list[Path]:
    dirs = [root] if (root / "left.pgm").exists() else []
    dirs += sorted(p.parent for p in root.glob("*/left.pgm"))
    return dirs


def cmd_train(args) -> int:
    root = Path(args.data_dir)
    dirs = _scene_dirs(root)
    if not dirs:
        raise FileNotFoundError(f"no left.pgm/right.pgm/truth.pfm scene under {root}")
    X, y = [], []
    for d in dirs:
        X.append((load_pgm(d / "left.pgm"), load_pgm(d / "right.pgm")))
        y.append(load_pfm(d / "truth.pfm"))
    start = load_weights(args.init) if args.init else None
    matcher = StereoMatcher(
        cost="cnn",
        network=start,
        channels=args.channels,
        margin=args.margin,
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch,
        n_triples=args.triples,
        augment=not args.no_augment,
        random_state=args.seed,
    ).fit(X, y)
    save_weights(matcher.network_, args.out)
    log.info("initial loss %.6f, final loss %.6f", matcher.initial_loss_,
             matcher.loss_curve_[-1] if matcher.loss_curve_ else matcher.initial_loss_)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = EvalConfig(args.sigma, args.bin)
    d, truth = load_pfm(args.disparity), load_pfm(args.truth)
    report = evaluate(d, truth, cfg)
    csv_path = write_report(report, args.report)
    if args.error_pgm:
        save_error_image(d, truth, args.error_pgm, cfg)
    print(f"M_ab={report.m_ab:.6f} M_sys={report.m_sys:.6f} M_cpl={report.m_cpl:.6f} "
          f"evaluated={report.n_evaluated}")
    log.info("wrote %s and %s", args.report, csv_path)
    return EXIT_OK


def cmd_fuse(args) -> int:
    fused = median_fuse([load_pfm(p) for p in args.maps])
    save_pfm(fused, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="stereomatch", description=__doc__.splitlines()[0],
                                     formatter_class=fmt)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic stereo pair", formatter_class=fmt)
    p.add_argument("config", help="flat key=value scene file")
    p.add_argument("out_dir")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("match", help="compute a disparity map", formatter_class=fmt)
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("out", help="output PFM")
    p.add_argument("--cost", choices=("census", "cnn"), default="census")
    p.add_argument("--weights", help="FCNN1 weight file (required for --cost cnn)")
    p.add_argument("--dmax", type=int, default=16, help="largest disparity")
    p.add_argument("--radius", type=int, default=DEFAULT_RADIUS, help="census window radius")
    p.add_argument("--p1", type=float, default=0.03, help="SGM penalty for |dd| = 1")
    p.add_argument("--p2", type=float, default=0.3, help="SGM penalty for |dd| > 1")
    p.add_argument("--paths", type=int, choices=(4, 8), default=8)
    p.add_argument("--no-sgm", action="store_true", help="winner-take-all on raw costs")
    p.add_argument("--subpixel", action="store_true", help="parabolic refinement")
    p.add_argument("--lr-tol", type=float, default=1.0,
                   help="left-right check tolerance; negative disables the check")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("train", help="train the feature network", formatter_class=fmt)
    p.add_argument("data_dir", help="directory with left.pgm/right.pgm/truth.pfm (or subdirs)")
    p.add_argument("out", help="output weight file")
    p.add_argument("--margin", type=float, default=0.2)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--batch", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--triples", type=int, default=5000, help="training triples in total")
    p.add_argument("--channels", type=_channels, default=DEFAULT_CHANNELS,
                   help="comma separated layer widths")
    p.add_argument("--init", help="start from this weight file instead of random weights")
    p.add_argument("--no-augment", action="store_true",
                   help="disable gain/bias and vertical-jitter augmentation")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a disparity map", formatter_class=fmt)
    p.add_argument("disparity")
    p.add_argument("truth")
    p.add_argument("report", help="JSON report; histogram goes to <stem>_histogram.csv")
    p.add_argument("--sigma", type=float, default=10.0, help="error cap in disparities")
    p.add_argument("--bin", type=float, default=0.1, help="histogram bin width")
    p.add_argument("--error-pgm", help="also write a capped error-magnitude image")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fuse", help="per-pixel median of disparity maps", formatter_class=fmt)
    p.add_argument("maps", nargs="+", help="input PFMs")
    p.add_argument("out", help="output PFM")
    p.set_defaults(func=cmd_fuse)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "match" and args.cost == "cnn" and not args.weights:
        parser.error("--cost cnn requires --weights")
    if args.command == "fuse" and not args.maps:
        parser.error("fuse needs at least one input map")
    try:
        return args.func(args)
    except TrainingError as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC
    except (StereoError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
