"""Command-line interface.

Subcommands::

    credamp label    --input posts.jsonl --credibility scores.csv --output labeled.jsonl
    credamp analyze  --input labeled.jsonl --stratify verified --output report.json
    credamp synth    --output corpus/ --gamma 1.5
    credamp verify   --input corpus/ --tolerance 5

Exit codes: 0 success, 1 usage error, 2 data error, 3 analysis error (or a
``verify`` estimate outside tolerance).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .amplify import VARIABLES, AnalysisConfig, baseline_analysis, stratified_delta
from .bootstrap import BootstrapConfig
from .errors import AnalysisError, ConfigError, DataError
from .ingest import (
    DEFAULT_HIGH_MIN,
    DEFAULT_LOW_MAX,
    is_labeled_file,
    label_posts,
    parse_posts,
    read_bias_table,
    read_credibility_table,
    read_labeled_posts,
    write_labeled_posts,
)
from .report import AmplificationReport, emit_report, file_digest
from .synth import SCOPES, SynthConfig, generate, read_corpus, write_corpus

log = logging.getLogger("credamp")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ANALYSIS = 0, 1, 2, 3

_SCOPE_VARIABLE = {
    "verified-only": "verified",
    "toxicity-high-only": "toxicity",
    "bias-right-only": "bias",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _labeling_args(p):
    p.add_argument("--input", required=True, help="posts (JSON lines) or a labeled file")
    p.add_argument("--credibility", help="CSV with header domain,score")
    p.add_argument("--bias", help="CSV with header domain,bias")
    p.add_argument("--low-threshold", type=float, default=DEFAULT_LOW_MAX)
    p.add_argument("--high-threshold", type=float, default=DEFAULT_HIGH_MIN)
    p.add_argument("--field-map", help="JSON object mapping record attributes to input field names")


def _analysis_args(p, stratify_default=None):
    p.add_argument("--bins", type=int, default=4)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--min-stratum-size", type=int, default=2)
    p.add_argument("--stratify", action="append", choices=VARIABLES, default=stratify_default,
                   help="extra stratification variable (repeatable)")
    p.add_argument("--weighting", choices=("size", "equal"), default="size")
    p.add_argument("--jackknife", choices=("stratum", "block"), default="stratum")
    p.add_argument("--jackknife-blocks", type=int, default=20)
    p.add_argument("--global-bins", action="store_true",
                   help="reuse full-population bin edges inside --stratify subsets")
    p.add_argument("--workers", type=int, default=1, help="bootstrap threads; never changes results")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="credamp", description="Measure impression amplification of low-credibility posts.")
    parser.add_argument("--version", action="version", version=f"credamp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("label", help="label posts by domain credibility")
    _labeling_args(p)
    p.add_argument("--output", required=True, help="labeled JSON-lines file")

    p = sub.add_parser("analyze", help="baseline amplification and optional deltas")
    _labeling_args(p)
    _analysis_args(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", required=True, help="report file (json) or directory (csv)")

    p = sub.add_parser("synth", help="generate a synthetic corpus with planted amplification")
    p.add_argument("--output", required=True, help="directory for the corpus files")
    p.add_argument("--n-posts", type=int, default=10_000)
    p.add_argument("--low-fraction", type=float, default=0.0377)
    p.add_argument("--unlabeled-fraction", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--scope", choices=SCOPES, default="all")
    p.add_argument("--stratum-gamma", action="append", default=[], metavar="E,F=GAMMA",
                   help="uplift for one stratum (per-stratum scope, repeatable)")
    p.add_argument("--verified-fraction", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("verify", help="analyze a synthetic corpus and compare with its ground truth")
    p.add_argument("--input", required=True, help="directory written by `credamp synth`")
    p.add_argument("--tolerance", type=float, default=5.0, help="allowed error in percentage points")
    _analysis_args(p)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", help="optional report path")
    return parser


# ---------------------------------------------------------------- helpers


def _analysis_config(args) -> AnalysisConfig:
    return AnalysisConfig(
        bins=args.bins,
        rebin_subsets=not args.global_bins,
        bootstrap=BootstrapConfig(
            iterations=args.iterations,
            seed=args.seed,
            confidence=args.confidence,
            min_stratum_size=args.min_stratum_size,
            weighting=args.weighting,
            jackknife=args.jackknife,
            jackknife_blocks=args.jackknife_blocks,
            workers=args.workers,
        ),
    )


def _canonical_argv(args, config: AnalysisConfig, labeling: dict | None) -> list[str]:
    """Flags that reproduce the analysis, without paths or --workers."""
    argv = [
        "--bins", str(config.bins),
        "--iterations", str(config.bootstrap.iterations),
        "--seed", str(config.bootstrap.seed),
        "--confidence", repr(config.bootstrap.confidence),
        "--min-stratum-size", str(config.bootstrap.min_stratum_size),
        "--weighting", config.bootstrap.weighting,
        "--jackknife", config.bootstrap.jackknife,
        "--jackknife-blocks", str(config.bootstrap.jackknife_blocks),
    ]
    if labeling is not None:
        argv += ["--low-threshold", repr(labeling["low_threshold"]),
                 "--high-threshold", repr(labeling["high_threshold"])]
    if not config.rebin_subsets:
        argv.append("--global-bins")
    for v in args.stratify or []:
        argv += ["--stratify", v]
    return argv


def _load_dataset(args, inputs: list[dict]):
    """Return (dataset, labeling summary or None, labeling config or None)."""
    path = Path(args.input)
    inputs.append({"role": "posts", "name": path.name, "sha256": file_digest(path)})
    if args.credibility is None:
        if not is_labeled_file(path):
            raise UsageError("--credibility is required unless --input is a labeled file")
        data = read_labeled_posts(path)
        return data, None, None

    bias = None
    if args.bias:
        inputs.append({"role": "bias", "name": Path(args.bias).name, "sha256": file_digest(args.bias)})
        bias = read_bias_table(args.bias)
    inputs.append({"role": "credibility", "name": Path(args.credibility).name,
                   "sha256": file_digest(args.credibility)})
    table = read_credibility_table(args.credibility, bias)
    field_map = None
    if args.field_map:
        field_map = json.loads(Path(args.field_map).read_text())
        inputs.append({"role": "field_map", "name": Path(args.field_map).name,
                       "sha256": file_digest(args.field_map)})
    posts, skipped = parse_posts(path, field_map)
    data = label_posts(posts, table, bias, args.low_threshold, args.high_threshold, skipped_lines=skipped)
    cfg = {"low_threshold": args.low_threshold, "high_threshold": args.high_threshold}
    return data, data.summary, cfg


def _run_analysis(args, data, summary, labeling_cfg, inputs, variables):
    config = _analysis_config(args)
    baseline = baseline_analysis(data, config)
    deltas = [stratified_delta(data, v, config, baseline) for v in variables]
    echo = config.to_dict()
    echo["stratify"] = list(variables)
    if labeling_cfg is not None:
        echo.update(labeling_cfg)
    return AmplificationReport(
        baseline=baseline,
        config=echo,
        deltas=deltas,
        labeling=summary,
        inputs=inputs,
        argv=_canonical_argv(args, config, labeling_cfg),
    )


def _unique(seq):
    return list(dict.fromkeys(seq))


# ---------------------------------------------------------------- commands


def cmd_label(args) -> int:
    if args.credibility is None:
        raise UsageError("label requires --credibility")
    data, summary, _ = _load_dataset(args, [])
    write_labeled_posts(data, args.output)
    summary_path = Path(args.output).with_suffix(".summary.json")
    summary_path.write_text(json.dumps(summary.to_dict(), indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_analyze(args) -> int:
    inputs: list[dict] = []
    data, summary, labeling_cfg = _load_dataset(args, inputs)
    report = _run_analysis(args, data, summary, labeling_cfg, inputs, _unique(args.stratify or []))
    emit_report(report, args.format, args.output)
    return EXIT_OK


def _parse_stratum_gamma(items) -> dict:
    out = {}
    for item in items:
        try:
            cell, g = item.split("=")
            e, f = (int(x) for x in cell.split(","))
            out[(e, f)] = float(g)
        except ValueError:
            raise UsageError(f"bad --stratum-gamma {item!r}; expected E,F=GAMMA") from None
    return out


def cmd_synth(args) -> int:
    config = SynthConfig(
        n_posts=args.n_posts,
        low_fraction=args.low_fraction,
        unlabeled_fraction=args.unlabeled_fraction,
        planted_gamma=args.gamma,
        gamma_scope=args.scope,
        stratum_gammas=_parse_stratum_gamma(args.stratum_gamma),
        verified_fraction=args.verified_fraction,
        seed=args.seed,
    )
    paths = write_corpus(generate(config), args.output)
    print(json.dumps({k: str(v) for k, v in paths.items()}, sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    paths, truth = read_corpus(args.input)
    args.credibility = str(paths["credibility"])
    args.bias = str(paths["bias"])
    args.low_threshold, args.high_threshold = DEFAULT_LOW_MAX, DEFAULT_HIGH_MIN
    args.field_map = None
    args.input = str(paths["posts"])
    inputs: list[dict] = []
    data, summary, labeling_cfg = _load_dataset(args, inputs)

    variables = list(args.stratify or [])
    variables += [v for v in truth.expected_by_value if v not in variables]
    report = _run_analysis(args, data, summary, labeling_cfg, inputs, _unique(variables))
    if args.output:
        emit_report(report, args.format, args.output)

    checks = [{
        "quantity": "baseline.mean_pct",
        "expected": truth.expected_baseline_pct,
        "estimate": report.baseline.mean_pct,
    }]
    for delta in report.deltas:
        for value, expected in truth.expected_by_value.get(delta.variable, {}).items():
            dv = delta[value]
            checks.append({
                "quantity": f"{delta.variable}={value}.amplification_pct",
                "expected": expected,
                "estimate": dv.amplification_pct,
            })
    ok = True
    for c in checks:
        est = c["estimate"]
        c["error"] = None if est is None else est - c["expected"]
        c["within_tolerance"] = est is not None and abs(c["error"]) <= args.tolerance
        ok &= c["within_tolerance"]
    print(json.dumps({"tolerance": args.tolerance, "passed": ok, "checks": checks}, indent=2, sort_keys=True))
    return EXIT_OK if ok else EXIT_ANALYSIS


COMMANDS = {"label": cmd_label, "analyze": cmd_analyze, "synth": cmd_synth, "verify": cmd_verify}


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except (DataError, OSError, json.JSONDecodeError) as exc:
        return _fail(EXIT_DATA, "data", str(exc))
    except AnalysisError as exc:
        return _fail(EXIT_ANALYSIS, "analysis", str(exc))


if __name__ == "__main__":
    sys.exit(main())
