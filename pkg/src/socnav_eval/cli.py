"""Command-line front end.

One executable with subcommands for each stage (convert, synth, metrics,
normalize, cluster, correlate, aggregate, report) plus ``pipeline`` for the
whole chain. Stage subcommands recompute their prerequisites in memory and
write only their own files, so any of them can run from a bare dataset.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .dataset import AdapterMapping, convert_capture_tree, save_dataset, save_survey
from .pipeline import PipelineConfig, StageError, apply_overrides, load_config, run_pipeline
from .synth import corpus_specs, corpus_survey, generate, load_specs

STAGE_OUTPUTS = {
    "metrics": {"metrics"},
    "normalize": {"normalize"},
    "cluster": {"cluster"},
    "correlate": {"correlate"},
    "aggregate": {"aggregate"},
    "report": {"aggregate", "correlate", "cluster", "figures"},
    "pipeline": None,  # everything
}


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_argument_group("common options")
    group.add_argument("--config", metavar="PATH", help="INI config file")
    group.add_argument("--seed", type=int, help="clustering seed (overrides config)")
    group.add_argument("--out", metavar="DIR", default="out", help="output directory")
    group.add_argument("--k", metavar="K[,K...]",
                       help="cluster counts for the subset search, e.g. 2,3")
    group.add_argument("--norm", choices=("ratio", "minmax"),
                       help="per-scenario scaling rule")
    group.add_argument("--qm-only", action="store_true",
                       help="skip every survey-dependent stage")
    group.add_argument("--data", metavar="DIR", help="experiment JSON directory")
    group.add_argument("--survey", metavar="FILE", help="survey CSV file")
    group.add_argument("--restarts", type=int, help="k-means restarts")
    group.add_argument("--sw-raw-sum", action="store_true",
                       help="sum per-step social work instead of time-integrating it")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="socnav-eval",
        description="Evaluate social-navigation runs: trajectory metrics, survey "
                    "alignment, metric-subset selection, and reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_convert = sub.add_parser("convert", parents=[common],
                               help="convert a raw capture tree into experiment JSON")
    p_convert.add_argument("--src", required=True, metavar="DIR",
                           help="capture tree (one directory per run)")
    p_convert.add_argument("--mapping", metavar="FILE",
                           help="JSON column/layout mapping for the capture format")

    p_synth = sub.add_parser("synth", parents=[common],
                             help="generate synthetic runs with known geometry")
    p_synth.add_argument("--spec", metavar="FILE", help="JSON list of run specs")
    p_synth.add_argument("--corpus", action="store_true",
                         help="emit the built-in 8-scenario fixture corpus")
    p_synth.add_argument("--with-survey", action="store_true",
                         help="also write the matching synthetic survey.csv")

    for name, help_text in (
        ("metrics", "compute the per-run metric table"),
        ("normalize", "scale metrics and survey scores per scenario"),
        ("cluster", "run the exhaustive metric-subset search"),
        ("correlate", "rank-correlate metrics against survey scores"),
        ("aggregate", "compute per-run aggregate scores and trends"),
        ("report", "write report tables and SVG figures"),
        ("pipeline", "run every stage and write the manifest"),
    ):
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    search_ks = None
    if args.k:
        search_ks = tuple(int(part) for part in args.k.split(",") if part)
    return apply_overrides(
        cfg,
        data_dir=args.data,
        survey_path=args.survey,
        seed=args.seed,
        search_ks=search_ks,
        norm_method=args.norm,
        restarts=args.restarts,
        sw_raw_sum=True if args.sw_raw_sum else None,
    )


def _cmd_convert(args: argparse.Namespace) -> int:
    mapping = AdapterMapping.from_json(args.mapping) if args.mapping else AdapterMapping()
    written = convert_capture_tree(args.src, args.out, mapping)
    for path in written:
        print(f"wrote {path}")
    print(f"converted {len(written)} run(s) into {args.out}")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    if bool(args.spec) == bool(args.corpus):
        print("synth: pass exactly one of --spec FILE or --corpus", file=sys.stderr)
        return 2
    if args.with_survey and not args.corpus:
        print("synth: --with-survey requires --corpus (survey grades match the "
              "built-in runs)", file=sys.stderr)
        return 2
    specs = corpus_specs() if args.corpus else load_specs(args.spec)
    records = [generate(spec) for spec in specs]
    paths = save_dataset(records, args.out)
    for path in paths:
        print(f"wrote {path}")
    if args.with_survey:
        survey_path = Path(args.out) / "survey.csv"
        save_survey(corpus_survey(), survey_path)
        print(f"wrote {survey_path}")
    return 0


def _cmd_stage(args: argparse.Namespace) -> int:
    cfg = _resolve_config(args)
    result = run_pipeline(cfg, args.out, qm_only=args.qm_only,
                          outputs=STAGE_OUTPUTS[args.command])
    for path in result.files:
        print(f"wrote {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "convert":
            return _cmd_convert(args)
        if args.command == "synth":
            return _cmd_synth(args)
        return _cmd_stage(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
