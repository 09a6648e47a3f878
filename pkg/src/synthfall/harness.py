"""Experiment orchestration: alignment studies, augmentation runs with
iterated subject splits, ablations, and report emission.

Every run is driven by a master seed.  Per-iteration seeds are derived as
hashes of (master seed, iteration, role), so the subject split of iteration
i never changes when more iterations are added, and baseline (synthetic
fraction 0) and augmented runs under the same master seed are paired on
identical subject splits.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .classifier import TrainConfig, evaluate, init_model, train
from .errors import ConfigError, DataError
from .ingest import DatasetCatalog, catalog_dataset, load_entry
from .kinematics import ActivityLabel
from .metrics import (
    AlignmentReport,
    coverage,
    histogram_density,
    jsd,
    ks_two_sample,
    percent_delta,
)
from .windowing import (
    MixSpec,
    Window,
    apply_scaler,
    compose_training_mix,
    fit_scaler,
    slide_windows,
    split_subjects,
)

logger = logging.getLogger(__name__)

_AXES = ("x", "y", "z")


def derive_seed(master_seed: int, index: int, role: str) -> int:
    """Stable sub-seed for (iteration, role); independent of iteration count."""
    digest = hashlib.sha256(f"{master_seed}:{index}:{role}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def _catalog_windows(catalog: DatasetCatalog, width: int, stride: int, activity=None) -> list[Window]:
    windows: list[Window] = []
    for entry in catalog.entries:
        if activity is not None and entry.activity != activity:
            continue
        series = load_entry(entry)
        cut = slide_windows(series, width, stride)
        if not cut:
            logger.warning(
                "skipping %s: %d samples is shorter than the window (%d)",
                entry.path, len(series), width,
            )
        windows.extend(cut)
    return windows


# ---------------------------------------------------------------------------
# Alignment runs

@dataclass(frozen=True)
class AlignmentOptions:
    window: int = 128
    stride: int = 10
    bins: int = 100
    k: int = 5
    per_axis: bool = False


def _normalized_values(real: np.ndarray, other: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Z-score both value sets against the real set's statistics."""
    mu = real.mean()
    sd = max(float(real.std()), 1e-8)
    return (real - mu) / sd, (other - mu) / sd


def _density_pair(real_vals: np.ndarray, syn_vals: np.ndarray, bins: int):
    lo = min(float(real_vals.min()), float(syn_vals.min()))
    hi = max(float(real_vals.max()), float(syn_vals.max()))
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return (
        histogram_density(real_vals, bins=bins, value_range=(lo, hi)),
        histogram_density(syn_vals, bins=bins, value_range=(lo, hi)),
    )


def run_alignment(real_manifest, synthetic_manifest, options: AlignmentOptions | None = None) -> AlignmentReport:
    """Window the fall data of both manifests and measure their alignment.

    All values are standardized against the real set (pooled over axes);
    density curves, JSD, per-axis KS, and coverage over flattened windows are
    computed from the standardized windows.
    """
    opts = options or AlignmentOptions()
    real_windows = _catalog_windows(catalog_dataset(real_manifest), opts.window, opts.stride, ActivityLabel.FALL)
    syn_windows = _catalog_windows(catalog_dataset(synthetic_manifest), opts.window, opts.stride, ActivityLabel.FALL)
    if not real_windows:
        raise DataError("real manifest yields no fall windows")
    if not syn_windows:
        raise DataError("synthetic manifest yields no fall windows")

    real_arr = np.stack([w.values for w in real_windows])
    syn_arr = np.stack([w.values for w in syn_windows])
    real_norm, syn_norm = _normalized_values(real_arr, syn_arr)

    real_curve, syn_curve = _density_pair(real_norm.ravel(), syn_norm.ravel(), opts.bins)
    jsd_value = jsd(real_curve, syn_curve)

    ks = {
        axis: ks_two_sample(real_norm[:, :, i].ravel(), syn_norm[:, :, i].ravel())
        for i, axis in enumerate(_AXES)
    }
    cov = coverage(
        real_norm.reshape(real_norm.shape[0], -1),
        syn_norm.reshape(syn_norm.shape[0], -1),
        k=opts.k,
    )

    jsd_per_axis = None
    if opts.per_axis:
        jsd_per_axis = {}
        for i, axis in enumerate(_AXES):
            r_ax, s_ax = _normalized_values(real_arr[:, :, i], syn_arr[:, :, i])
            curves = _density_pair(r_ax.ravel(), s_ax.ravel(), opts.bins)
            jsd_per_axis[axis] = jsd(*curves)

    return AlignmentReport(
        ks_x=ks["x"], ks_y=ks["y"], ks_z=ks["z"],
        jsd=jsd_value, coverage=cov,
        real_curve=real_curve, synthetic_curve=syn_curve,
        jsd_per_axis=jsd_per_axis,
    )


# ---------------------------------------------------------------------------
# Experiment configuration and report

@dataclass(frozen=True)
class ExperimentConfig:
    real_manifest: str
    seed: int
    synthetic_manifests: tuple[str, ...] = ()
    window: int = 128
    stride: int = 10
    mix: MixSpec = MixSpec(0.6, 0.2, 0.2)
    split_sizes: tuple[int, int, int] = (8, 2, 2)
    iterations: int = 5
    hidden_size: int = 128
    dense_units: int = 128
    train: TrainConfig = TrainConfig()
    bins: int = 100
    k: int = 5
    threshold: float = 0.5
    baseline_report: str | None = None

    def __post_init__(self):
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        object.__setattr__(self, "synthetic_manifests", tuple(self.synthetic_manifests))
        object.__setattr__(self, "split_sizes", tuple(self.split_sizes))

    def to_dict(self) -> dict:
        # train.seed is omitted: per-iteration training seeds derive from the
        # master seed, so the nested value never takes effect.
        return {
            "real_manifest": self.real_manifest,
            "synthetic_manifests": list(self.synthetic_manifests),
            "window": self.window,
            "stride": self.stride,
            "mix": list(self.mix.as_tuple()),
            "split_sizes": list(self.split_sizes),
            "iterations": self.iterations,
            "seed": self.seed,
            "hidden_size": self.hidden_size,
            "dense_units": self.dense_units,
            "train": {
                "learning_rate": self.train.learning_rate,
                "max_epochs": self.train.max_epochs,
                "patience": self.train.patience,
                "batch_size": self.train.batch_size,
                "shuffle": self.train.shuffle,
            },
            "bins": self.bins,
            "k": self.k,
            "threshold": self.threshold,
            "baseline_report": self.baseline_report,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {
            "real_manifest", "synthetic_manifests", "window", "stride", "mix",
            "split_sizes", "iterations", "seed", "hidden_size", "dense_units",
            "train", "bins", "k", "threshold", "baseline_report",
        }
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "real_manifest" not in d:
            raise ConfigError("config requires real_manifest")
        if "seed" not in d:
            raise ConfigError("config requires seed")
        train_d = dict(d.get("train", {}))
        train_d.pop("seed", None)
        try:
            train_cfg = TrainConfig(**train_d)
        except TypeError as exc:
            raise ConfigError(f"invalid train config: {exc}") from None
        mix = d.get("mix", (0.6, 0.2, 0.2))
        return cls(
            real_manifest=d["real_manifest"],
            seed=d["seed"],
            synthetic_manifests=tuple(d.get("synthetic_manifests", ())),
            window=d.get("window", 128),
            stride=d.get("stride", 10),
            mix=MixSpec(*mix),
            split_sizes=tuple(d.get("split_sizes", (8, 2, 2))),
            iterations=d.get("iterations", 5),
            hidden_size=d.get("hidden_size", 128),
            dense_units=d.get("dense_units", 128),
            train=train_cfg,
            bins=d.get("bins", 100),
            k=d.get("k", 5),
            threshold=d.get("threshold", 0.5),
            baseline_report=d.get("baseline_report"),
        )

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class IterationResult:
    index: int
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    val_subjects: tuple[str, ...]
    test_subjects: tuple[str, ...]
    train_size: int
    best_epoch: int
    stop_reason: str

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "val_subjects": list(self.val_subjects),
            "test_subjects": list(self.test_subjects),
            "train_size": self.train_size,
            "best_epoch": self.best_epoch,
            "stop_reason": self.stop_reason,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "IterationResult":
        return cls(
            index=d["index"], precision=d["precision"], recall=d["recall"], f1=d["f1"],
            tp=d["tp"], fp=d["fp"], fn=d["fn"], tn=d["tn"],
            val_subjects=tuple(d["val_subjects"]), test_subjects=tuple(d["test_subjects"]),
            train_size=d["train_size"], best_epoch=d["best_epoch"], stop_reason=d["stop_reason"],
        )


@dataclass(frozen=True)
class ExperimentReport:
    fingerprint: str
    config: dict
    iterations: tuple[IterationResult, ...]
    mean_precision: float
    mean_recall: float
    mean_f1: float
    baseline_mean_f1: float | None = None
    delta_percent: float | None = None

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "config": self.config,
            "iterations": [it.to_dict() for it in self.iterations],
            "mean_precision": self.mean_precision,
            "mean_recall": self.mean_recall,
            "mean_f1": self.mean_f1,
            "baseline_mean_f1": self.baseline_mean_f1,
            "delta_percent": self.delta_percent,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(
            fingerprint=d["fingerprint"],
            config=d["config"],
            iterations=tuple(IterationResult.from_dict(it) for it in d["iterations"]),
            mean_precision=d["mean_precision"],
            mean_recall=d["mean_recall"],
            mean_f1=d["mean_f1"],
            baseline_mean_f1=d.get("baseline_mean_f1"),
            delta_percent=d.get("delta_percent"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        lines = ["iteration;precision;recall;f1;tp;fp;fn;tn"]
        for it in self.iterations:
            lines.append(
                f"{it.index};{it.precision!r};{it.recall!r};{it.f1!r};{it.tp};{it.fp};{it.fn};{it.tn}"
            )
        lines.append(f"mean;{self.mean_precision!r};{self.mean_recall!r};{self.mean_f1!r};;;;")
        lines.append("")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# Experiment runs

def _subject_windows(windows: list[Window], subjects) -> list[Window]:
    return [w for w in windows if w.subject_id in subjects]


def _load_pools(config: ExperimentConfig) -> tuple[tuple[str, ...], list[Window], list[Window]]:
    real_catalog = catalog_dataset(config.real_manifest)
    subjects = real_catalog.subjects()
    if len(subjects) < sum(config.split_sizes):
        raise DataError(
            f"manifest has {len(subjects)} subjects; split sizes {config.split_sizes} need {sum(config.split_sizes)}"
        )
    real_windows = _catalog_windows(real_catalog, config.window, config.stride)
    synthetic_pool: list[Window] = []
    for manifest in config.synthetic_manifests:
        synthetic_pool.extend(
            _catalog_windows(catalog_dataset(manifest), config.window, config.stride, ActivityLabel.FALL)
        )
    return subjects, real_windows, synthetic_pool


def _run_iteration(config, i, subjects, real_windows, synthetic_pool):
    """One split/mix/train/evaluate round; returns (result, model, history)."""
    split = split_subjects(subjects, config.split_sizes, derive_seed(config.seed, i, "split"))
    train_pool = _subject_windows(real_windows, split.train)
    adl_pool = [w for w in train_pool if w.label == ActivityLabel.ADL]
    fall_pool = [w for w in train_pool if w.label == ActivityLabel.FALL]
    mix = compose_training_mix(
        adl_pool, fall_pool, synthetic_pool, config.mix, derive_seed(config.seed, i, "mix")
    )
    val_windows = _subject_windows(real_windows, split.validation)
    test_windows = _subject_windows(real_windows, split.test)
    if not val_windows or not test_windows:
        raise DataError(f"iteration {i}: empty validation or test window set")

    scaler = fit_scaler(mix)
    train_w = apply_scaler(scaler, mix)
    val_w = apply_scaler(scaler, val_windows)
    test_w = apply_scaler(scaler, test_windows)

    model = init_model(
        derive_seed(config.seed, i, "init"),
        hidden_size=config.hidden_size,
        dense_units=config.dense_units,
    )
    train_cfg = replace(config.train, seed=derive_seed(config.seed, i, "train"))
    best, history = train(model, train_w, val_w, train_cfg)
    scores = evaluate(best, test_w, config.threshold)
    result = IterationResult(
        index=i,
        precision=scores.precision, recall=scores.recall, f1=scores.f1,
        tp=scores.tp, fp=scores.fp, fn=scores.fn, tn=scores.tn,
        val_subjects=tuple(sorted(split.validation)),
        test_subjects=tuple(sorted(split.test)),
        train_size=len(train_w),
        best_epoch=history.best_epoch,
        stop_reason=history.stop_reason,
    )
    return result, best, history


def run_training(config: ExperimentConfig):
    """Single training round (iteration 0 of the experiment protocol).

    Returns (model, history, iteration_result) for checkpointing.
    """
    subjects, real_windows, synthetic_pool = _load_pools(config)
    result, model, history = _run_iteration(config, 0, subjects, real_windows, synthetic_pool)
    return model, history, result


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Seeded multi-iteration augmentation experiment.

    Each iteration splits the real subjects, composes a training mix per the
    configured fractions (synthetic fraction 0 reproduces the baseline
    condition), standardizes with training statistics, trains the classifier,
    and scores the held-out test subjects.  Metrics are averaged over
    iterations; when a baseline report is referenced, the percentage delta of
    mean F1 is included.
    """
    subjects, real_windows, synthetic_pool = _load_pools(config)
    results = []
    for i in range(config.iterations):
        result, _, _ = _run_iteration(config, i, subjects, real_windows, synthetic_pool)
        results.append(result)

    mean_f1 = sum(r.f1 for r in results) / len(results)
    mean_precision = sum(r.precision for r in results) / len(results)
    mean_recall = sum(r.recall for r in results) / len(results)
    baseline_mean_f1 = None
    delta = None
    if config.baseline_report is not None:
        baseline_mean_f1 = _load_baseline_mean_f1(config.baseline_report)
        delta = percent_delta(baseline_mean_f1, mean_f1)
    return ExperimentReport(
        fingerprint=config.fingerprint(),
        config=config.to_dict(),
        iterations=tuple(results),
        mean_precision=mean_precision,
        mean_recall=mean_recall,
        mean_f1=mean_f1,
        baseline_mean_f1=baseline_mean_f1,
        delta_percent=delta,
    )


def _load_baseline_mean_f1(path: str | Path) -> float:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"baseline report not found: {path}")
    try:
        data = json.loads(path.read_text("utf-8"))
        return float(data["mean_f1"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataError(f"baseline report is not a valid experiment report: {exc}") from None


ABLATION_MIX = MixSpec(0.5, 0.1, 0.4)


def run_ablation_quantity(config: ExperimentConfig) -> ExperimentReport:
    """Quantity ablation: identical mechanics with the 50/10/40 mix.

    Multiple synthetic manifests are pooled before sampling, so the drawn
    synthetic windows can come from any of the listed sources.
    """
    return run_experiment(replace(config, mix=ABLATION_MIX))


# ---------------------------------------------------------------------------
# Report emission

def emit_report(report, fmt: str = "json", out_dir: str | Path = ".") -> list[Path]:
    """Write a report (plus any density-curve CSVs) into ``out_dir``.

    Filenames embed the report fingerprint (for alignment reports, a content
    hash).  Returns the written paths.
    """
    if fmt not in ("json", "csv"):
        raise ConfigError(f"format must be 'json' or 'csv', got {fmt!r}")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {out_dir}: {exc}") from None
    written: list[Path] = []

    if isinstance(report, ExperimentReport):
        tag = report.fingerprint[:12]
        path = out_dir / f"report_{tag}.{fmt}"
        path.write_text(report.to_json() if fmt == "json" else report.to_csv(), "utf-8")
        written.append(path)
        return written

    if isinstance(report, AlignmentReport):
        payload = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
        tag = hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]
        path = out_dir / f"alignment_{tag}.json"
        path.write_text(payload, "utf-8")
        written.append(path)
        for name, curve in (("real", report.real_curve), ("synthetic", report.synthetic_curve)):
            curve_path = out_dir / f"density_{name}_{tag}.csv"
            curve_path.write_text(curve.to_csv(), "utf-8")
            written.append(curve_path)
        return written

    raise ConfigError(f"cannot emit report of type {type(report).__name__}")
