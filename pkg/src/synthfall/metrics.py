"""Distribution-alignment and classification metrics.

Two-sample statistics (Kolmogorov-Smirnov, Jensen-Shannon divergence over
histogram densities, nearest-neighbor coverage) quantify how closely
synthetic accelerometer values track real ones; the classification side
scores the downstream fall detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ConfigError, DataError
from .windowing import Window

EXACT_KS_LIMIT = 14


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n: int
    m: int


def _ecdf_gap(a: np.ndarray, b: np.ndarray) -> float:
    """sup over thresholds of |ECDF_a - ECDF_b|, evaluated at pooled points."""
    a = np.sort(a)
    b = np.sort(b)
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def _kolmogorov_survival(lam: float) -> float:
    """Two-sided asymptotic tail: 2 * sum_{j>=1} (-1)^(j-1) exp(-2 j^2 lam^2)."""
    if lam < 0.2:
        # Survival is 1 within double precision below this point and the
        # alternating series converges too slowly to evaluate directly.
        return 1.0
    total = 0.0
    sign = 1.0
    for j in range(1, 1001):
        term = math.exp(-2.0 * j * j * lam * lam)
        total += sign * term
        if term <= 1e-16 * abs(total):
            break
        sign = -sign
    return min(max(2.0 * total, 0.0), 1.0)


def ks_two_sample(a, b, exact: bool = False) -> KsResult:
    """Two-sample Kolmogorov-Smirnov test.

    D is the maximum gap between the two empirical CDFs.  The default p-value
    uses the asymptotic Kolmogorov distribution with the small-sample
    correction lambda = (sqrt(ne) + 0.12 + 0.11/sqrt(ne)) * D on the effective
    size ne = n*m/(n+m).  With ``exact=True`` (n+m <= 14 only) the p-value is
    the fraction of all C(n+m, n) label assignments whose D reaches the
    observed one.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise DataError("ks_two_sample requires non-empty samples")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DataError("ks_two_sample requires finite samples")
    d = _ecdf_gap(a, b)
    n, m = a.size, b.size
    if exact:
        if n + m > EXACT_KS_LIMIT:
            raise ConfigError(f"exact mode supports n+m <= {EXACT_KS_LIMIT}, got {n + m}")
        pooled = np.concatenate([a, b])
        hits = 0
        total = 0
        for pick in combinations(range(n + m), n):
            mask = np.zeros(n + m, dtype=bool)
            mask[list(pick)] = True
            if _ecdf_gap(pooled[mask], pooled[~mask]) >= d:
                hits += 1
            total += 1
        p = hits / total
    else:
        ne = n * m / (n + m)
        lam = (math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)) * d
        p = _kolmogorov_survival(lam)
    return KsResult(statistic=d, p_value=p, n=n, m=m)


# ---------------------------------------------------------------------------
# Histogram densities and Jensen-Shannon divergence

@dataclass(frozen=True)
class DensityCurve:
    """Equal-width histogram density rendered as (bin center, density) pairs."""

    bin_centers: np.ndarray
    densities: np.ndarray

    def __post_init__(self):
        centers = np.asarray(self.bin_centers, dtype=np.float64)
        dens = np.asarray(self.densities, dtype=np.float64)
        if centers.ndim != 1 or centers.shape != dens.shape or centers.size == 0:
            raise DataError("density curve needs matching 1-D centers and densities")
        if np.any(dens < 0):
            raise DataError("densities must be non-negative")
        object.__setattr__(self, "bin_centers", centers)
        object.__setattr__(self, "densities", dens)

    @property
    def bin_width(self) -> float:
        if self.bin_centers.size == 1:
            # Width is not recoverable from a single center; integral of the
            # one bin is density * width = 1, so invert.
            return 1.0 / self.densities[0] if self.densities[0] > 0 else 1.0
        return float(self.bin_centers[1] - self.bin_centers[0])

    def masses(self) -> np.ndarray:
        return self.densities * self.bin_width

    def to_csv(self) -> str:
        lines = ["center;density"]
        for c, d in zip(self.bin_centers, self.densities):
            lines.append(f"{c:.17g};{d:.17g}")
        lines.append("")
        return "\n".join(lines)


def histogram_density(values, bins: int = 100, value_range: tuple[float, float] | None = None) -> DensityCurve:
    """Histogram density over equal-width bins; out-of-range values land in
    the edge bins rather than being dropped."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise DataError("histogram_density requires at least one value")
    if bins < 1:
        raise ConfigError("bins must be >= 1")
    if value_range is None:
        lo, hi = float(values.min()), float(values.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
    else:
        lo, hi = value_range
    if not lo < hi:
        raise ConfigError(f"range must satisfy lo < hi, got ({lo}, {hi})")
    clipped = np.clip(values, lo, hi)
    counts, edges = np.histogram(clipped, bins=bins, range=(lo, hi))
    width = (hi - lo) / bins
    densities = counts / (values.size * width)
    centers = (edges[:-1] + edges[1:]) / 2.0
    return DensityCurve(bin_centers=centers, densities=densities)


def jsd(p: DensityCurve, q: DensityCurve) -> float:
    """Jensen-Shannon divergence (base-2 logs, range [0, 1]) between two
    density curves on the same bin grid."""
    if p.bin_centers.shape != q.bin_centers.shape or not np.allclose(
        p.bin_centers, q.bin_centers, rtol=1e-12, atol=1e-12
    ):
        raise DataError("jsd requires identical bin grids")
    pm = p.masses()
    qm = q.masses()
    mm = 0.5 * (pm + qm)

    def kl(x: np.ndarray) -> float:
        mask = x > 0
        return float(np.sum(x[mask] * np.log2(x[mask] / mm[mask])))

    return 0.5 * kl(pm) + 0.5 * kl(qm)


# ---------------------------------------------------------------------------
# Coverage

def _as_matrix(samples) -> np.ndarray:
    if isinstance(samples, (list, tuple)) and samples and isinstance(samples[0], Window):
        return np.stack([w.values.ravel() for w in samples])
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr.reshape(arr.shape[0], -1)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise DataError("expected a non-empty set of windows or sample vectors")
    return arr


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(sq, 0.0)


def coverage(real, synthetic, k: int = 5) -> float:
    """Fraction of real samples whose k-NN ball contains a synthetic sample.

    Each window is flattened to a vector.  A real sample's radius is the
    Euclidean distance to its k-th nearest neighbor among the *other* real
    samples; it counts as covered when some synthetic sample lies within
    (<=) that radius.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    r = _as_matrix(real)
    s = _as_matrix(synthetic)
    if r.shape[0] <= k:
        raise DataError(f"coverage needs more than k={k} real samples, got {r.shape[0]}")
    d_rr = np.sqrt(_pairwise_sq_dists(r, r))
    np.fill_diagonal(d_rr, np.inf)
    radii = np.partition(d_rr, k - 1, axis=1)[:, k - 1]
    d_rs = np.sqrt(_pairwise_sq_dists(r, s))
    return float(np.mean(d_rs.min(axis=1) <= radii))


# ---------------------------------------------------------------------------
# Classifier scoring

@dataclass(frozen=True)
class ClassificationMetrics:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int


def classification_metrics(probabilities, labels, threshold: float = 0.5) -> ClassificationMetrics:
    """Confusion counts and precision/recall/F1 at a probability threshold.

    Predicts the positive (fall) class when probability >= threshold; zero
    denominators yield 0 by convention.
    """
    probs = np.asarray(probabilities, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(np.int64)
    if probs.size != y.size:
        raise DataError(f"length mismatch: {probs.size} probabilities vs {y.size} labels")
    if probs.size == 0:
        raise DataError("classification_metrics requires at least one sample")
    pred = probs >= threshold
    pos = y == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    tn = int(np.sum(~pred & ~pos))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return ClassificationMetrics(precision=precision, recall=recall, f1=f1, tp=tp, fp=fp, fn=fn, tn=tn)


def percent_delta(baseline_f1: float, augmented_f1: float) -> float:
    """Signed percentage change of augmented vs. baseline F1."""
    if not baseline_f1 > 0:
        raise DataError("percent_delta requires a positive baseline F1")
    return 100.0 * (augmented_f1 - baseline_f1) / baseline_f1


# ---------------------------------------------------------------------------
# Alignment report

@dataclass(frozen=True)
class AlignmentReport:
    """Alignment statistics for one real/synthetic comparison."""

    ks_x: KsResult
    ks_y: KsResult
    ks_z: KsResult
    jsd: float
    coverage: float
    real_curve: DensityCurve
    synthetic_curve: DensityCurve
    jsd_per_axis: dict[str, float] | None = None

    @property
    def ks_mean_statistic(self) -> float:
        return (self.ks_x.statistic + self.ks_y.statistic + self.ks_z.statistic) / 3.0

    @property
    def ks_mean_p_value(self) -> float:
        return (self.ks_x.p_value + self.ks_y.p_value + self.ks_z.p_value) / 3.0

    def to_dict(self) -> dict:
        def ks_dict(r: KsResult) -> dict:
            return {"statistic": r.statistic, "p_value": r.p_value, "n": r.n, "m": r.m}

        out = {
            "ks": {
                "x": ks_dict(self.ks_x),
                "y": ks_dict(self.ks_y),
                "z": ks_dict(self.ks_z),
                "mean_statistic": self.ks_mean_statistic,
                "mean_p_value": self.ks_mean_p_value,
            },
            "jsd": self.jsd,
            "coverage": self.coverage,
            "curves": {
                "real": {
                    "centers": self.real_curve.bin_centers.tolist(),
                    "densities": self.real_curve.densities.tolist(),
                },
                "synthetic": {
                    "centers": self.synthetic_curve.bin_centers.tolist(),
                    "densities": self.synthetic_curve.densities.tolist(),
                },
            },
        }
        if self.jsd_per_axis is not None:
            out["jsd_per_axis"] = dict(self.jsd_per_axis)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "AlignmentReport":
        def ks_from(v: dict) -> KsResult:
            return KsResult(statistic=v["statistic"], p_value=v["p_value"], n=v["n"], m=v["m"])

        return cls(
            ks_x=ks_from(d["ks"]["x"]),
            ks_y=ks_from(d["ks"]["y"]),
            ks_z=ks_from(d["ks"]["z"]),
            jsd=d["jsd"],
            coverage=d["coverage"],
            real_curve=DensityCurve(
                bin_centers=np.array(d["curves"]["real"]["centers"]),
                densities=np.array(d["curves"]["real"]["densities"]),
            ),
            synthetic_curve=DensityCurve(
                bin_centers=np.array(d["curves"]["synthetic"]["centers"]),
                densities=np.array(d["curves"]["synthetic"]["densities"]),
            ),
            jsd_per_axis=d.get("jsd_per_axis"),
        )
