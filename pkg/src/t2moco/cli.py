"""Command-line entry point.

Exit codes: 0 success, 1 validation error (bad config/arguments/data),
2 I/O error (missing files, corrupt containers).
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, default_config, load_config
from .pipeline import (
    cmd_detect,
    cmd_fit,
    cmd_metrics,
    cmd_orba,
    cmd_phantom,
    cmd_reconstruct,
    cmd_report,
    cmd_simulate,
)
from .qmek import QmekError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="t2moco",
        description="Simulate motion-corrupted multi-echo k-space, detect corrupted "
                    "lines, and reconstruct motion-corrected T2* maps.",
    )
    parser.add_argument("--config", help="run configuration file (section.key = value)")
    parser.add_argument("--out", default="out", help="output directory (default: out)")
    parser.add_argument("--seed", type=int, help="override the global seed")
    parser.add_argument("--threads", type=int, help="slice-level worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("phantom", help="generate ground truth, coils and clean echoes")
    sub.add_parser("simulate", help="simulate motion-corrupted k-space")
    p_rec = sub.add_parser("reconstruct", help="unrolled reconstruction per slice")
    p_rec.add_argument("--mask-source", choices=("all-ones", "oracle", "file"), default="all-ones")
    p_rec.add_argument("--mask-file", help="mask container for --mask-source file")
    p_rec.add_argument("--tag", help="artifact tag (default: derived from the mask source)")
    p_fit = sub.add_parser("fit", help="voxel-wise decay fit of a reconstruction")
    p_fit.add_argument("--tag", default="allones", help="reconstruction tag to fit")
    sub.add_parser("detect", help="optimize exclusion masks, then reconstruct and fit")
    sub.add_parser("orba", help="mask-averaging baseline end to end")
    p_met = sub.add_parser("metrics", help="MAE/SSIM rows for map pairs")
    p_met.add_argument("pairs", nargs="+", metavar="NAME=MAP_A:MAP_B",
                       help="comparison pairs, e.g. nomoco=out/t2star_allones.qmek:out/truth_t2star.qmek")
    sub.add_parser("report", help="summary CSV, PGM panels and PNG figures")
    return parser


def _parse_pairs(raw_pairs):
    pairs = []
    for raw in raw_pairs:
        if "=" not in raw or ":" not in raw.split("=", 1)[1]:
            raise ConfigError(f"bad pair {raw!r}; expected NAME=MAP_A:MAP_B")
        name, _, rest = raw.partition("=")
        path_a, _, path_b = rest.partition(":")
        pairs.append((name, path_a, path_b))
    return pairs


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else default_config()
        overrides = {}
        if args.seed is not None:
            overrides["run.seed"] = args.seed
        if args.threads is not None:
            overrides["run.threads"] = args.threads
        cfg = cfg.with_overrides(**overrides)
        if args.command == "phantom":
            cmd_phantom(cfg, args.out)
        elif args.command == "simulate":
            cmd_simulate(cfg, args.out)
        elif args.command == "reconstruct":
            cmd_reconstruct(cfg, args.out, mask_source=args.mask_source,
                            mask_file=args.mask_file, tag=args.tag)
        elif args.command == "fit":
            cmd_fit(cfg, args.out, tag=args.tag)
        elif args.command == "detect":
            cmd_detect(cfg, args.out)
        elif args.command == "orba":
            cmd_orba(cfg, args.out)
        elif args.command == "metrics":
            cmd_metrics(cfg, args.out, _parse_pairs(args.pairs))
        elif args.command == "report":
            cmd_report(cfg, args.out)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, QmekError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
