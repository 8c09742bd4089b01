"""Command line entry point.

    textnet <stage|run|sweep> --config path [--set key=value]... [--threads n] [--seed n]
    textnet synth --out corpus.jsonl [--docs 500] [--topics 8] ...

Exit codes: 0 success, 2 configuration or input error, 3 missing dependency
(upstream artifact or Python package), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import __version__, pipeline, synthetic
from .config import ConfigError, load_config, load_sweep, parse_grid
from .lsa import ConvergenceError
from .simgraph import ZeroVarianceError

EXIT_CONFIG, EXIT_MISSING, EXIT_NUMERIC = 2, 3, 4


def _common(p):
    p.add_argument("--config", required=True, help="TOML config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config setting (repeatable)")
    p.add_argument("--threads", type=int, default=1, help="worker processes for partition extraction")
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="textnet", description="Community extraction from short text reports.")
    parser.add_argument("--version", action="version", version=f"textnet {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in pipeline.STAGES:
        p = sub.add_parser(stage, help=f"run the {stage} stage")
        _common(p)
        p.add_argument("--force", action="store_true", help="rerun even if up to date")
    _common(sub.add_parser("run", help="run every stage and print a summary"))
    p = sub.add_parser("sweep", help="full run per combination of settings")
    _common(p)
    p.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2",
                   help="values to sweep (repeatable); adds to the config's [sweep] table")

    p = sub.add_parser("synth", help="write a synthetic tagged corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--docs", type=int, default=500)
    p.add_argument("--topics", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--background", type=float, default=0.0, help="fraction of topic-free documents")
    p.add_argument("--topic-share", type=float, default=0.6, help="chance a word comes from the topic vocabulary")
    return parser


def _dispatch(args) -> int:
    if args.command == "synth":
        if args.docs < 1 or args.topics < 1 or not 0 <= args.background <= 1 or not 0 <= args.topic_share <= 1:
            raise ConfigError("synth: docs and topics must be >= 1; background and topic-share in [0, 1]")
        recs = synthetic.generate_corpus(args.docs, args.topics, args.seed, args.background,
                                         topic_share=args.topic_share)
        synthetic.write_corpus(recs, args.out)
        print(f"wrote {len(recs)} documents to {args.out}")
        return 0
    if args.threads < 1:
        raise ConfigError("threads: must be >= 1")
    cfg = load_config(args.config, args.overrides, args.seed)
    if args.command == "run":
        pipeline.run_all(cfg, args.threads)
    elif args.command == "sweep":
        grid = load_sweep(args.config)
        grid.update(parse_grid(g) for g in args.grid)
        pipeline.sweep(cfg, grid, args.threads)
    else:
        entry = pipeline.run_stage(args.command, cfg, args.threads, force=args.force)
        state = "up to date" if entry["skipped"] else "done"
        print(f"{args.command}: {state} ({', '.join(entry['outputs'])})")
    return 0


def _exit_code(exc: BaseException) -> int | None:
    if isinstance(exc, (ConvergenceError, ZeroVarianceError, np.linalg.LinAlgError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, (pipeline.MissingArtifactError, ImportError)):
        return EXIT_MISSING
    # ConfigError, CorpusError and EmptyDocumentError are ValueErrors
    if isinstance(exc, (ValueError, FileNotFoundError, pipeline.PipelineError)):
        return EXIT_CONFIG
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except Exception as exc:
        inner = exc.__cause__ if isinstance(exc, pipeline.StageFailed) else exc
        code = _exit_code(inner)
        if code is None:
            raise
        print(f"textnet: error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
