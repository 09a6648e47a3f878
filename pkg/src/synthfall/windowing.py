"""Window construction and training-set assembly.

Turns accelerometer series into fixed-length labeled windows, standardizes
them with training-set statistics, partitions subjects into train/val/test,
and draws seeded real/synthetic training mixes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .kinematics import AccelSeries, ActivityLabel, Provenance

DEFAULT_WINDOW = 128
DEFAULT_STRIDE = 10

STD_FLOOR = 1e-8

# Guards floor() against float error in pool_size/fraction and total*fraction.
_FLOOR_EPS = 1e-9


@dataclass
class Window:
    """W x 3 segment with its label, source subject, and provenance."""

    values: np.ndarray
    label: ActivityLabel
    subject_id: str | None
    provenance: Provenance

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise DataError(f"window must have shape (W, 3), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DataError("window contains non-finite values")
        self.values = arr
        self.label = ActivityLabel(self.label)
        self.provenance = Provenance(self.provenance)

    @property
    def width(self) -> int:
        return self.values.shape[0]


def slide_windows(series: AccelSeries, width: int = DEFAULT_WINDOW, stride: int = DEFAULT_STRIDE) -> list[Window]:
    """Cut overlapping windows starting at offsets 0, stride, 2*stride, ...

    Yields floor((N - W)/stride) + 1 windows when N >= W, else an empty list.
    Windows inherit the series label, subject, and provenance.
    """
    if width < 1 or stride < 1:
        raise ConfigError("window width and stride must be >= 1")
    n = len(series)
    if n < width:
        return []
    count = (n - width) // stride + 1
    return [
        Window(
            values=series.samples[start : start + width].copy(),
            label=series.label,
            subject_id=series.subject_id,
            provenance=series.provenance,
        )
        for start in (i * stride for i in range(count))
    ]


# ---------------------------------------------------------------------------
# Standardization

@dataclass(frozen=True)
class Scaler:
    """Per-axis mean/std computed over a pooled training set."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).reshape(3)
        std = np.asarray(self.std, dtype=np.float64).reshape(3)
        if np.any(std < STD_FLOOR):
            raise DataError(f"scaler std entries must be >= {STD_FLOOR}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)


def fit_scaler(windows: list[Window]) -> Scaler:
    """Per-axis mean and population std over all window values pooled together."""
    if not windows:
        raise DataError("cannot fit a scaler on zero windows")
    pooled = np.concatenate([w.values for w in windows], axis=0)
    mean = pooled.mean(axis=0)
    std = np.maximum(pooled.std(axis=0), STD_FLOOR)
    return Scaler(mean=mean, std=std)


def apply_scaler(scaler: Scaler, windows: list[Window]) -> list[Window]:
    """Standardize window values; labels and provenance are untouched."""
    return [
        Window(
            values=(w.values - scaler.mean) / scaler.std,
            label=w.label,
            subject_id=w.subject_id,
            provenance=w.provenance,
        )
        for w in windows
    ]


# ---------------------------------------------------------------------------
# Subject splits

@dataclass(frozen=True)
class SubjectSplit:
    train: frozenset[str]
    validation: frozenset[str]
    test: frozenset[str]

    def __post_init__(self):
        train, val, test = map(frozenset, (self.train, self.validation, self.test))
        if train & val or train & test or val & test:
            raise ConfigError("split groups must be pairwise disjoint")
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "validation", val)
        object.__setattr__(self, "test", test)


def split_subjects(subjects, sizes: tuple[int, int, int] = (8, 2, 2), seed: int = 0) -> SubjectSplit:
    """Uniformly random disjoint partition of subjects, fully seed-determined."""
    ordered = sorted(subjects)
    n_train, n_val, n_test = sizes
    if min(sizes) < 0:
        raise ConfigError("split sizes must be non-negative")
    if n_train + n_val + n_test != len(ordered):
        raise ConfigError(
            f"split sizes {sizes} must sum to the subject count {len(ordered)}"
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(ordered))
    shuffled = [ordered[i] for i in perm]
    return SubjectSplit(
        train=frozenset(shuffled[:n_train]),
        validation=frozenset(shuffled[n_train : n_train + n_val]),
        test=frozenset(shuffled[n_train + n_val :]),
    )


# ---------------------------------------------------------------------------
# Training mixes

@dataclass(frozen=True)
class MixSpec:
    """Fractions of ADL / real-fall / synthetic-fall windows in a training set."""

    adl_fraction: float
    real_fall_fraction: float
    synthetic_fall_fraction: float

    def __post_init__(self):
        fracs = (self.adl_fraction, self.real_fall_fraction, self.synthetic_fall_fraction)
        if any(f < 0 or f > 1 for f in fracs):
            raise ConfigError("mix fractions must lie in [0, 1]")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ConfigError(f"mix fractions must sum to 1, got {sum(fracs)}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.adl_fraction, self.real_fall_fraction, self.synthetic_fall_fraction)


def compose_training_mix(
    adl_pool: list[Window],
    real_fall_pool: list[Window],
    synthetic_fall_pool: list[Window],
    spec: MixSpec,
    seed: int = 0,
) -> list[Window]:
    """Draw a shuffled training set honoring the mix fractions.

    The total size T is bounded by the scarcest pool: T = min over categories
    with fraction > 0 of floor(pool_size / fraction).  Each category then
    contributes floor(T * fraction) windows, drawn without replacement.
    """
    pools = (adl_pool, real_fall_pool, synthetic_fall_pool)
    fracs = spec.as_tuple()
    bound = None
    for pool, frac in zip(pools, fracs):
        if frac <= 0:
            continue
        if not pool:
            raise DataError(
                f"infeasible mix: empty pool for a category with fraction {frac}"
            )
        ratio = len(pool) / frac
        bound = ratio if bound is None else min(bound, ratio)
    if bound is None or not np.isfinite(bound) or bound < 1:
        raise DataError("infeasible mix: no category has a positive fraction and data")
    total = int(bound + _FLOOR_EPS)
    rng = np.random.default_rng(seed)
    chosen: list[Window] = []
    for pool, frac in zip(pools, fracs):
        if frac <= 0:
            continue
        count = int(total * frac + _FLOOR_EPS)
        if count > len(pool):
            raise DataError(
                f"infeasible mix: need {count} windows from a pool of {len(pool)}"
            )
        idx = rng.choice(len(pool), size=count, replace=False)
        chosen.extend(pool[i] for i in idx)
    order = rng.permutation(len(chosen))
    return [chosen[i] for i in order]


# ---------------------------------------------------------------------------
# Window cache (versioned binary) and debug CSV

_CACHE_MAGIC = b"SFWC"
_CACHE_VERSION = 1


def save_window_cache(windows: list[Window], path: str | Path) -> None:
    """Write windows to a versioned binary cache (float64, little-endian)."""
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack("<HI", _CACHE_VERSION, len(windows)))
        for w in windows:
            subject = (w.subject_id or "").encode("utf-8")
            fh.write(struct.pack("<IBBH", w.width, int(w.label), w.provenance == Provenance.SYNTHETIC, len(subject)))
            fh.write(subject)
            fh.write(np.ascontiguousarray(w.values, dtype="<f8").tobytes())


def load_window_cache(path: str | Path) -> list[Window]:
    data = Path(path).read_bytes()
    if data[:4] != _CACHE_MAGIC:
        raise DataError("not a window cache: bad magic")
    version, count = struct.unpack_from("<HI", data, 4)
    if version != _CACHE_VERSION:
        raise DataError(f"unsupported window cache version {version}")
    offset = 10
    windows = []
    for _ in range(count):
        if offset + 8 > len(data):
            raise DataError("truncated window cache")
        width, label, synthetic, subject_len = struct.unpack_from("<IBBH", data, offset)
        offset += 8
        nbytes = width * 3 * 8
        if offset + subject_len + nbytes > len(data):
            raise DataError("truncated window cache")
        subject = data[offset : offset + subject_len].decode("utf-8") or None
        offset += subject_len
        values = np.frombuffer(data[offset : offset + nbytes], dtype="<f8").reshape(width, 3)
        offset += nbytes
        windows.append(
            Window(
                values=values.copy(),
                label=ActivityLabel(label),
                subject_id=subject,
                provenance=Provenance.SYNTHETIC if synthetic else Provenance.REAL,
            )
        )
    return windows


def windows_to_csv(windows: list[Window]) -> str:
    """Debug export: one row per (window, step), semicolon-separated."""
    lines = ["window;step;x;y;z;label;subject;provenance"]
    for i, w in enumerate(windows):
        for t, (x, y, z) in enumerate(w.values):
            lines.append(
                f"{i};{t};{x:.6f};{y:.6f};{z:.6f};{int(w.label)};{w.subject_id or ''};{w.provenance.value}"
            )
    lines.append("")
    return "\n".join(lines)
