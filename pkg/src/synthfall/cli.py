"""Command-line interface.

Subcommands: ingest, kinematics, windows, align, train, experiment,
ablate-quantity, prompts, report.  Experiment-style commands read a JSON
config file mirroring ExperimentConfig; every field can be overridden by a
flag, and --seed is always required for them.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness, ingest, windowing
from .classifier import save_checkpoint
from .errors import ConfigError, DataError, ToolkitError
from .harness import (
    AlignmentOptions,
    ExperimentConfig,
    emit_report,
    run_ablation_quantity,
    run_alignment,
    run_experiment,
    run_training,
)
from .kinematics import DEFAULT_FRAME_RATE_HZ, SensorPlacement, differentiate_to_accel, extract_joint

DEFAULT_VARIANTS = "neutral,man,woman,young,elderly,left_wrist,right_wrist"


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file mirroring the experiment config")
    parser.add_argument("--seed", type=int, required=True, help="master seed (required)")
    parser.add_argument("--real-manifest", help="real dataset manifest path")
    parser.add_argument(
        "--synthetic-manifest", action="append", dest="synthetic_manifests",
        metavar="PATH", help="synthetic manifest; repeat to pool sources",
    )
    parser.add_argument("--window", type=int)
    parser.add_argument("--stride", type=int)
    parser.add_argument("--mix", help="ADL,real-fall,synthetic-fall fractions, e.g. 0.6,0.2,0.2")
    parser.add_argument("--split-sizes", help="train,val,test subject counts, e.g. 8,2,2")
    parser.add_argument("--iterations", type=int)
    parser.add_argument("--hidden-size", type=int)
    parser.add_argument("--dense-units", type=int)
    parser.add_argument("--learning-rate", type=float)
    parser.add_argument("--max-epochs", type=int)
    parser.add_argument("--patience", type=int)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--no-shuffle", action="store_true", help="disable epoch shuffling")
    parser.add_argument("--bins", type=int)
    parser.add_argument("--k", type=int)
    parser.add_argument("--threshold", type=float)
    parser.add_argument("--baseline-report", help="baseline report JSON for the percent delta")
    parser.add_argument("--out", default=".", help="output directory")


def _parse_floats(text: str, n: int, flag: str) -> list[float]:
    parts = text.split(",")
    if len(parts) != n:
        raise ConfigError(f"{flag} expects {n} comma-separated values, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"{flag} expects numbers, got {text!r}") from None


def _build_experiment_config(args) -> ExperimentConfig:
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            base = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
    else:
        base = {}
    base["seed"] = args.seed
    if args.real_manifest:
        base["real_manifest"] = args.real_manifest
    if args.synthetic_manifests:
        base["synthetic_manifests"] = args.synthetic_manifests
    for attr, key in (
        ("window", "window"), ("stride", "stride"), ("iterations", "iterations"),
        ("hidden_size", "hidden_size"), ("dense_units", "dense_units"),
        ("bins", "bins"), ("k", "k"), ("threshold", "threshold"),
    ):
        value = getattr(args, attr)
        if value is not None:
            base[key] = value
    if args.mix:
        base["mix"] = _parse_floats(args.mix, 3, "--mix")
    if args.split_sizes:
        base["split_sizes"] = [int(v) for v in _parse_floats(args.split_sizes, 3, "--split-sizes")]
    if args.baseline_report:
        base["baseline_report"] = args.baseline_report
    train_cfg = dict(base.get("train", {}))
    for attr, key in (
        ("learning_rate", "learning_rate"), ("max_epochs", "max_epochs"),
        ("patience", "patience"), ("batch_size", "batch_size"),
    ):
        value = getattr(args, attr)
        if value is not None:
            train_cfg[key] = value
    if args.no_shuffle:
        train_cfg["shuffle"] = False
    if train_cfg:
        base["train"] = train_cfg
    if "real_manifest" not in base:
        raise ConfigError("a real manifest is required (--real-manifest or config file)")
    return ExperimentConfig.from_dict(base)


def _cmd_ingest(args) -> int:
    catalog = ingest.catalog_dataset(args.manifest)
    hist = catalog.activity_histogram()
    print(f"entries: {len(catalog)}")
    print(f"subjects: {len(catalog.subjects())}")
    print(f"adl files: {hist['adl']}")
    print(f"fall files: {hist['fall']}")
    return 0


def _cmd_kinematics(args) -> int:
    placement = SensorPlacement(args.placement)
    if not args.dt > 0:
        raise ConfigError("--dt must be positive")
    traj = ingest.read_motion_array(Path(args.motion).read_bytes(), frame_rate=1.0 / args.dt)
    series = differentiate_to_accel(
        extract_joint(traj, placement),
        central_second_difference=args.central_diff,
    )
    Path(args.output).write_bytes(ingest.write_accel_csv(series))
    print(f"wrote {len(series)} samples at {series.sampling_rate:g} Hz to {args.output}")
    return 0


def _cmd_windows(args) -> int:
    catalog = ingest.catalog_dataset(args.manifest)
    windows = []
    for entry in catalog.entries:
        windows.extend(windowing.slide_windows(ingest.load_entry(entry), args.window, args.stride))
    windowing.save_window_cache(windows, args.output)
    if args.debug_csv:
        Path(args.debug_csv).write_text(windowing.windows_to_csv(windows), "utf-8")
    print(f"cached {len(windows)} windows to {args.output}")
    return 0


def _cmd_align(args) -> int:
    options = AlignmentOptions(
        window=args.window, stride=args.stride, bins=args.bins, k=args.k,
        per_axis=args.per_axis,
    )
    report = run_alignment(args.real_manifest, args.synthetic_manifest, options)
    paths = emit_report(report, "json", args.out)
    print(f"jsd: {report.jsd:.6f}  coverage: {report.coverage:.6f}  ks mean D: {report.ks_mean_statistic:.6f}")
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_train(args) -> int:
    config = _build_experiment_config(args)
    model, history, result = run_training(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tag = config.fingerprint()[:12]
    ckpt = out_dir / f"model_{tag}.ckpt"
    save_checkpoint(model, ckpt, window_len=config.window)
    (out_dir / f"history_{tag}.csv").write_text(history.to_csv(), "utf-8")
    print(f"test f1: {result.f1:.4f}  precision: {result.precision:.4f}  recall: {result.recall:.4f}")
    print(f"wrote {ckpt}")
    return 0


def _cmd_experiment(args, runner) -> int:
    config = _build_experiment_config(args)
    report = runner(config)
    paths = emit_report(report, args.format, args.out)
    print(f"mean f1: {report.mean_f1:.4f} over {len(report.iterations)} iterations")
    if report.delta_percent is not None:
        print(f"delta vs baseline: {report.delta_percent:+.2f}%")
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_prompts(args) -> int:
    catalog = ingest.load_prompt_catalog(args.base)
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    prompts = ingest.generate_prompt_variants(catalog, variants)
    text = "\n".join(prompts) + "\n"
    if args.out:
        Path(args.out).write_text(text, "utf-8")
        print(f"wrote {len(prompts)} prompts to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_report(args) -> int:
    path = Path(args.report)
    if not path.is_file():
        raise DataError(f"report not found: {path}")
    try:
        payload = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"report is not valid JSON: {exc}") from None
    if "iterations" in payload:
        report = harness.ExperimentReport.from_dict(payload)
    elif "ks" in payload:
        from .metrics import AlignmentReport

        report = AlignmentReport.from_dict(payload)
    else:
        raise DataError("unrecognized report payload")
    for out_path in emit_report(report, args.format, args.out):
        print(f"wrote {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synthfall", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate a dataset manifest")
    p.add_argument("manifest")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("kinematics", help="convert a motion array to an accelerometer CSV")
    p.add_argument("motion", help="NPY motion file")
    p.add_argument("output", help="output CSV path")
    p.add_argument(
        "--placement", default=SensorPlacement.LEFT_WRIST.value,
        choices=[pl.value for pl in SensorPlacement],
    )
    p.add_argument("--dt", type=float, default=1.0 / DEFAULT_FRAME_RATE_HZ,
                   help="seconds per motion frame")
    p.add_argument("--central-diff", action="store_true",
                   help="use the central second difference (output length F-2)")
    p.set_defaults(func=_cmd_kinematics)

    p = sub.add_parser("windows", help="build a window cache from a manifest")
    p.add_argument("manifest")
    p.add_argument("output", help="cache file path")
    p.add_argument("--window", type=int, default=windowing.DEFAULT_WINDOW)
    p.add_argument("--stride", type=int, default=windowing.DEFAULT_STRIDE)
    p.add_argument("--debug-csv", help="also write windows as CSV")
    p.set_defaults(func=_cmd_windows)

    p = sub.add_parser("align", help="real-vs-synthetic alignment report")
    p.add_argument("real_manifest")
    p.add_argument("synthetic_manifest")
    p.add_argument("--window", type=int, default=windowing.DEFAULT_WINDOW)
    p.add_argument("--stride", type=int, default=windowing.DEFAULT_STRIDE)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--per-axis", action="store_true", help="also report per-axis JSD")
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_align)

    p = sub.add_parser("train", help="train one classifier and save a checkpoint")
    _add_experiment_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("experiment", help="multi-iteration augmentation experiment")
    _add_experiment_flags(p)
    p.add_argument("--format", default="json", choices=["json", "csv"])
    p.set_defaults(func=lambda args: _cmd_experiment(args, run_experiment))

    p = sub.add_parser("ablate-quantity", help="experiment with the 50/10/40 quantity mix")
    _add_experiment_flags(p)
    p.add_argument("--format", default="json", choices=["json", "csv"])
    p.set_defaults(func=lambda args: _cmd_experiment(args, run_ablation_quantity))

    p = sub.add_parser("prompts", help="generate a prompt variant catalog")
    p.add_argument("--base", help="base prompt file (default: bundled catalog)")
    p.add_argument("--variants", default=DEFAULT_VARIANTS,
                   help="comma-separated variant tags")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=_cmd_prompts)

    p = sub.add_parser("report", help="re-emit an existing report")
    p.add_argument("report", help="report JSON file")
    p.add_argument("--format", default="json", choices=["json", "csv"])
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
