"""``riga`` command-line front end."""
from __future__ import annotations

import argparse
import sys

from . import pipeline
from .augment import AUGMENTERS
from .classify import CLASSIFIERS
from .config import ConfigError, PipelineConfig, explain, load_config, with_overrides
from .imgmap import GridTooSmallError

COMMANDS = ("transform", "augment", "classify", "bnlearn", "pipeline", "report")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML configuration file")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--dataset", help="CSV path, 'synthetic', or 'madelon:<dir>'")
    p.add_argument("--augmenter", choices=AUGMENTERS)
    p.add_argument("--classifier", choices=CLASSIFIERS)
    p.add_argument("--folds", type=int, help="cross-validation folds (default 5)")
    p.add_argument("--grid-size", type=int, help="image side length (default 28)")
    p.add_argument("--workers", type=int, help="processes for fold-level parallelism")
    p.add_argument("--explain", action="store_true", help="print the effective configuration and exit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riga", description="Image-based minority augmentation for tabular data.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "transform": "fit the feature-to-pixel mapping and render images",
        "augment": "balance the dataset with synthetic minority rows",
        "classify": "cross-validated AUC for one augmenter/classifier pair",
        "bnlearn": "Bayesian-network structure learning and Markov blankets",
        "pipeline": "classification plus optional structure comparison",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "transform":
            p.add_argument("--dump-images", type=int, default=0, help="write PGMs for the first N rows (-1: all)")
    rp = sub.add_parser("report", help="tabulate one or more manifests")
    rp.add_argument("manifests", nargs="+", help="manifest files or run directories")
    rp.add_argument("--out", default="riga_report")
    return parser


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    return with_overrides(
        cfg,
        seed=args.seed,
        out=args.out,
        dataset=args.dataset,
        augmenter=args.augmenter,
        classifier=args.classifier,
        folds=args.folds,
        grid_size=args.grid_size,
        workers=args.workers,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            for line in pipeline.cmd_report(args.manifests, args.out):
                print(line)
            return 0
        cfg = resolve_config(args)
        if args.explain:
            sys.stdout.write(explain(cfg))
            return 0
        if args.command == "transform":
            m = pipeline.cmd_transform(cfg, cfg.out, args.dump_images)
            print(f"mapping: {m.extras['n_cells']} features on a {m.extras['grid_size']}x{m.extras['grid_size']} grid")
        else:
            m = getattr(pipeline, f"cmd_{args.command}")(cfg, cfg.out)
            if m.results:
                print(m.results["row"])
            bn = m.extras.get("bn") if m.extras else None
            if bn and "before" in bn:
                print(f"BIC before: {bn['before']['bic']:.4f}  after: {bn['after']['bic']:.4f}")
                print(f"Markov blanket size: {bn['blanket_sizes'][0]} -> {bn['blanket_sizes'][1]}")
            elif bn:
                print(f"BIC: {bn['bic']:.4f}  Markov blanket size: {bn['blanket_size']}")
        for w in m.warnings:
            print(f"warning: {w}", file=sys.stderr)
        print(f"manifest: {cfg.out}/{pipeline.MANIFEST_NAME} ({m.content_hash()[:16]})")
        return 0
    except (ConfigError, GridTooSmallError, pipeline.IncompatibleManifests, FileNotFoundError, ValueError) as exc:
        print(f"riga {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
