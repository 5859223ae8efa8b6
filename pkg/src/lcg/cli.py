"""Command-line interface.

`lcg run` executes the whole pipeline; each stage is also its own
subcommand (`embed`, `cluster`, `coreset`, `train`, `score`, `select`,
`report`, `sweep`) so runs can be composed or resumed manually.

Options can come from a config file (--config, simple `key = value` lines,
`[section]` headers allowed and ignored, `#` starts a comment) and from
flags; flags win. Exit codes: 0 success, 2 configuration error, 3 data
error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import sys

from . import report as report_mod
from .errors import ConfigError, DataError, LcgError, NumericError, StageError
from .pipeline import PipelineConfig, run_pipeline, run_stage
from .selection import load_scores

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}

_COERCERS = {
    "dataset": str,
    "format": str,
    "provider": str,
    "embeddings_path": str,
    "dim": int,
    "k": int,
    "seed": int,
    "coreset_mode": str,
    "coreset_param": float,
    "classifier": str,
    "lr": float,
    "epochs": int,
    "batch": int,
    "alpha": float,
    "strategy": str,
    "tau": float,
    "k_per_cluster": int,
    "include_coreset": "bool",
    "out_dir": str,
    "threads": int,
}


def _coerce(key: str, raw: str):
    kind = _COERCERS[key]
    if kind == "bool":
        low = raw.strip().lower()
        if low in _BOOL_TRUE:
            return True
        if low in _BOOL_FALSE:
            return False
        raise ConfigError(f"config key {key!r}: expected a boolean, got {raw!r}")
    try:
        return kind(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from exc


def parse_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                if stripped.startswith("[") and stripped.endswith("]"):
                    continue  # section headers are cosmetic
                if "=" not in stripped:
                    raise ConfigError(f"{path}: line {lineno}: expected key = value")
                key, _, raw = stripped.partition("=")
                key = key.strip()
                if key not in _COERCERS:
                    raise ConfigError(f"{path}: line {lineno}: unknown key {key!r}")
                values[key] = _coerce(key, raw)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def _add_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config file of key = value lines")
    parser.add_argument("--dataset", help="path to the instruction dataset")
    parser.add_argument("--format", choices=["jsonl", "json-array"])
    parser.add_argument("--provider", choices=["hashing", "lcge"])
    parser.add_argument("--embeddings-path", dest="embeddings_path",
                        help="LCGE file to use when provider=lcge")
    parser.add_argument("--dim", type=int, help="hashing embedder width (default 384)")
    parser.add_argument("--k", type=int, help="number of clusters (default 100)")
    parser.add_argument("--seed", type=int, help="global random seed (default 0)")
    parser.add_argument("--coreset-mode", dest="coreset_mode",
                        choices=["nearest_fraction", "distance_percentile"])
    parser.add_argument("--coreset-param", dest="coreset_param", type=float,
                        help="fraction in (0,1] or percentile in (0,100]")
    parser.add_argument("--classifier", choices=["mlp", "mnb"])
    parser.add_argument("--lr", type=float, help="learning rate (default 1e-5)")
    parser.add_argument("--epochs", type=int, help="training epochs, hard-capped at 3")
    parser.add_argument("--batch", type=int, help="minibatch size (default 32)")
    parser.add_argument("--alpha", type=float, help="NB smoothing (default 1.0)")
    parser.add_argument("--strategy", choices=["threshold", "topk"])
    parser.add_argument("--tau", type=float, help="confidence threshold (default 0.7)")
    parser.add_argument("--k-per-cluster", dest="k_per_cluster", type=int)
    parser.add_argument("--include-coreset", dest="include_coreset",
                        action="store_const", const=True,
                        help="union the coreset into the written subset")
    parser.add_argument("--out-dir", dest="out_dir", help="artifact directory")
    parser.add_argument("--threads", type=int, help="worker cap; 1 is the reference")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcg",
        description="Cluster, pseudo-label, and confidence-filter instruction datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("run", "execute the full pipeline"),
        ("embed", "produce or adopt the embedding matrix"),
        ("cluster", "fit k-means over normalized embeddings"),
        ("coreset", "select the centroid-proximal training subset"),
        ("train", "train the confidence classifier on the coreset"),
        ("score", "score every non-coreset record"),
        ("select", "apply the low-confidence selection rule"),
        ("report", "write report.json and print the histogram"),
        ("sweep", "train one model per learning rate and compare"),
    ]:
        _add_options(sub.add_parser(name, help=help_text))
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    values = {}
    if args.config:
        values.update(parse_config_file(args.config))
    for key in _COERCERS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if "dataset" not in values:
        raise ConfigError("a dataset is required (--dataset or config file)")
    return PipelineConfig(**values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "run":
            run_pipeline(cfg)
            print(f"pipeline complete; artifacts in {cfg.out_dir}")
        elif args.command == "sweep":
            rows = run_stage(cfg, "sweep")
            for row in rows:
                print(f"lr={row.lr:g}  held-out accuracy={row.accuracy:.4f}")
                print(row.histogram.render())
        elif args.command == "report":
            run_stage(cfg, "report")
            hist = report_mod.build_histogram(load_scores(cfg.path("scores.jsonl")))
            print(hist.render())
        else:
            run_stage(cfg, args.command)
            print(f"stage {args.command} complete")
    except LcgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        cause = exc.cause if isinstance(exc, StageError) else exc
        if isinstance(cause, ConfigError):
            return 2
        if isinstance(cause, DataError):
            return 3
        if isinstance(cause, NumericError):
            return 4
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
