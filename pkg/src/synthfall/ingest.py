"""File formats and catalogs: accelerometer CSV, motion arrays, dataset
manifests, and prompt-variant generation.

All readers take bytes (or str) so callers decide where data comes from;
writers return bytes.  Dataset layout is decoupled from directory conventions
through a JSON manifest, one entry per recording.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .kinematics import (
    DEFAULT_FRAME_RATE_HZ,
    JOINT_COUNT,
    AccelSeries,
    ActivityLabel,
    JointTrajectory,
    Provenance,
    SensorPlacement,
)

CSV_HEADER = "x;y;z"

# ---------------------------------------------------------------------------
# Accelerometer CSV (header `x;y;z`, semicolon-separated, LF line endings)


def read_accel_csv(
    data: bytes | str,
    *,
    sampling_rate: float = DEFAULT_FRAME_RATE_HZ,
    label: ActivityLabel = ActivityLabel.ADL,
    provenance: Provenance = Provenance.REAL,
    subject_id: str | None = None,
) -> AccelSeries:
    """Parse an accelerometer CSV into an AccelSeries.

    The file itself carries no rate/label metadata; callers supply it
    (the dataset manifest does for cataloged files).
    """
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DataError(f"accel CSV is not valid UTF-8: {exc}") from None
    else:
        text = data
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].rstrip("\r") != CSV_HEADER:
        got = lines[0].rstrip("\r") if lines else ""
        raise DataError(f"missing or misordered header: expected {CSV_HEADER!r}, got {got!r}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.rstrip("\r").split(";")
        if len(parts) != 3:
            raise DataError(f"line {lineno}: expected 3 semicolon-separated values, got {len(parts)}")
        try:
            row = [float(p) for p in parts]
        except ValueError:
            raise DataError(f"line {lineno}: non-numeric cell") from None
        if not all(np.isfinite(row)):
            raise DataError(f"line {lineno}: non-finite value")
        rows.append(row)
    if not rows:
        raise DataError("accel CSV has a header but no samples")
    return AccelSeries(
        samples=np.array(rows, dtype=np.float64),
        sampling_rate=sampling_rate,
        label=label,
        provenance=provenance,
        subject_id=subject_id,
    )


def write_accel_csv(series: AccelSeries) -> bytes:
    """Serialize an AccelSeries to CSV bytes (6 decimal places, LF endings)."""
    out = [CSV_HEADER]
    for x, y, z in series.samples:
        out.append(f"{x:.6f};{y:.6f};{z:.6f}")
    out.append("")
    return "\n".join(out).encode("utf-8")


# ---------------------------------------------------------------------------
# Motion arrays (NPY v1.0, little-endian float32/float64, C order)

_NPY_MAGIC = b"\x93NUMPY"


def read_motion_array(data: bytes, frame_rate: float = DEFAULT_FRAME_RATE_HZ) -> JointTrajectory:
    """Parse an NPY v1.0 payload of shape (F, 22, 3) or (F, 66) into a trajectory.

    Only plain little-endian float arrays in C order are accepted; the header
    is parsed directly so malformed or pickled payloads are rejected rather
    than executed.  Motion files carry no frame rate, so ``frame_rate``
    defaults to the generators' 46 Hz output.
    """
    if len(data) < 10 or data[:6] != _NPY_MAGIC:
        raise DataError("not an NPY file: bad magic")
    major, minor = data[6], data[7]
    if (major, minor) != (1, 0):
        raise DataError(f"unsupported NPY version {major}.{minor}; expected 1.0")
    header_len = int.from_bytes(data[8:10], "little")
    header_end = 10 + header_len
    if len(data) < header_end:
        raise DataError("truncated NPY header")
    try:
        header = ast.literal_eval(data[10:header_end].decode("latin-1").strip())
    except (ValueError, SyntaxError):
        raise DataError("malformed NPY header") from None
    if not isinstance(header, dict) or not {"descr", "fortran_order", "shape"} <= set(header):
        raise DataError("malformed NPY header")
    descr = header["descr"]
    if descr not in ("<f4", "<f8"):
        raise DataError(f"unsupported dtype {descr!r}; expected little-endian float32/float64")
    if header["fortran_order"]:
        raise DataError("Fortran-order arrays are not supported")
    shape = tuple(header["shape"])
    if not (
        (len(shape) == 3 and shape[1] == JOINT_COUNT and shape[2] == 3)
        or (len(shape) == 2 and shape[1] == JOINT_COUNT * 3)
    ):
        raise DataError(
            f"incompatible motion shape {shape}; expected (F, {JOINT_COUNT}, 3) or (F, {JOINT_COUNT * 3})"
        )
    dtype = np.dtype(descr)
    count = int(np.prod(shape))
    nbytes = count * dtype.itemsize
    payload = data[header_end:]
    if len(payload) < nbytes:
        raise DataError("truncated NPY payload")
    arr = np.frombuffer(payload[:nbytes], dtype=dtype).reshape(shape)
    positions = arr.astype(np.float64).reshape(shape[0], JOINT_COUNT, 3)
    return JointTrajectory(positions=positions, frame_rate=frame_rate)


# ---------------------------------------------------------------------------
# Prompt catalogs and variant generation

VARIANT_TAGS = (
    "neutral",
    "man",
    "woman",
    "young",
    "elderly",
    "left_wrist",
    "right_wrist",
    "waist",
)

_SUBJECT_PHRASE = {
    "man": "a man",
    "woman": "a woman",
    "young": "a young person",
    "elderly": "an elderly person",
}

_PLACEMENT_CLAUSE = {
    "left_wrist": "The sensor is worn on the left wrist.",
    "right_wrist": "The sensor is worn on the right wrist.",
    "waist": "The sensor is worn on the waist.",
}

_SUBJECT_RE = re.compile(
    r"^(a|an)\s+(?:(?:elderly|old|young)\s+)?(?:person|man|woman|child|lady|gentleman)\b",
    re.IGNORECASE,
)


@dataclass(frozen=True)
class PromptCatalog:
    """Ordered, unique base prompts plus the tag vocabulary for variants."""

    base_prompts: tuple[str, ...]
    variants: tuple[str, ...] = VARIANT_TAGS

    def __post_init__(self):
        prompts = tuple(self.base_prompts)
        if len(set(prompts)) != len(prompts):
            raise DataError("base prompts must be unique")
        if not prompts:
            raise DataError("prompt catalog is empty")
        unknown = set(self.variants) - set(VARIANT_TAGS)
        if unknown:
            raise ConfigError(f"unknown variant tags: {sorted(unknown)}")
        object.__setattr__(self, "base_prompts", prompts)
        object.__setattr__(self, "variants", tuple(self.variants))

    def __len__(self) -> int:
        return len(self.base_prompts)


def load_prompt_catalog(source: str | Path | None = None) -> PromptCatalog:
    """Load a prompt catalog (one prompt per line); None loads the bundled one."""
    if source is None:
        text = (resources.files("synthfall.data") / "base_prompts.txt").read_text("utf-8")
    else:
        path = Path(source)
        if not path.is_file():
            raise DataError(f"prompt file not found: {path}")
        text = path.read_text("utf-8")
    prompts = tuple(line.strip() for line in text.splitlines() if line.strip())
    return PromptCatalog(base_prompts=prompts)


def _rewrite_prompt(prompt: str, tag: str) -> str:
    if tag == "neutral":
        return prompt
    if tag in _PLACEMENT_CLAUSE:
        return prompt.rstrip() + " " + _PLACEMENT_CLAUSE[tag]
    phrase = _SUBJECT_PHRASE[tag]
    m = _SUBJECT_RE.match(prompt)
    if m:
        replacement = phrase[0].upper() + phrase[1:] if prompt[0].isupper() else phrase
        rewritten = replacement + prompt[m.end():]
        if rewritten != prompt:
            return rewritten
    # No rewritable subject phrase, or the rewrite is a no-op: append a
    # descriptor so every (prompt, tag) pair stays distinct.
    return prompt.rstrip() + f" The subject is {phrase}."


def generate_prompt_variants(catalog: PromptCatalog, variants) -> list[str]:
    """Expand base prompts by the selected variant tags, base-major order.

    Output size is exactly ``len(catalog) * len(variants)``.  Demographic tags
    substitute the subject noun phrase; placement tags append a sensor clause;
    ``neutral`` emits the base prompt verbatim.  The rewrite templates are a
    toolkit convention.
    """
    tags = list(dict.fromkeys(variants))
    unknown = [t for t in tags if t not in VARIANT_TAGS]
    if unknown:
        raise ConfigError(f"unknown variant tags: {unknown}")
    ordered = [t for t in VARIANT_TAGS if t in tags]
    return [_rewrite_prompt(p, tag) for p in catalog.base_prompts for tag in ordered]


# ---------------------------------------------------------------------------
# Dataset manifests

_ACTIVITY_FROM_STR = {"adl": ActivityLabel.ADL, "fall": ActivityLabel.FALL}


@dataclass(frozen=True)
class CatalogEntry:
    subject_id: str
    activity: ActivityLabel
    path: Path
    sampling_rate: float
    placement: SensorPlacement
    provenance: Provenance


@dataclass(frozen=True)
class DatasetCatalog:
    """Validated view of a manifest: one entry per recording file."""

    entries: tuple[CatalogEntry, ...]

    def subjects(self) -> tuple[str, ...]:
        return tuple(sorted({e.subject_id for e in self.entries}))

    def activity_histogram(self) -> dict[str, int]:
        hist = {"adl": 0, "fall": 0}
        for e in self.entries:
            hist["fall" if e.activity == ActivityLabel.FALL else "adl"] += 1
        return hist

    def fall_entries(self) -> tuple[CatalogEntry, ...]:
        return tuple(e for e in self.entries if e.activity == ActivityLabel.FALL)

    def adl_entries(self) -> tuple[CatalogEntry, ...]:
        return tuple(e for e in self.entries if e.activity == ActivityLabel.ADL)

    def __len__(self) -> int:
        return len(self.entries)


def catalog_dataset(manifest_path: str | Path) -> DatasetCatalog:
    """Load and validate a JSON manifest into a DatasetCatalog.

    The manifest is a JSON array of objects with keys: subject, activity
    ("adl"|"fall"), path (relative paths resolve against the manifest's
    directory), rate_hz, placement, provenance ("real"|"synthetic").
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise DataError(f"manifest not found: {manifest_path}")
    try:
        raw = json.loads(manifest_path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"manifest is not valid JSON: {exc}") from None
    if not isinstance(raw, list):
        raise DataError("manifest must be a JSON array of entries")
    root = manifest_path.parent
    entries: list[CatalogEntry] = []
    seen_paths: set[Path] = set()
    for i, item in enumerate(raw):
        where = f"manifest entry {i}"
        if not isinstance(item, dict):
            raise DataError(f"{where}: expected an object")
        missing = {"subject", "activity", "path", "rate_hz", "placement", "provenance"} - set(item)
        if missing:
            raise DataError(f"{where}: missing keys {sorted(missing)}")
        subject = item["subject"]
        if not isinstance(subject, str) or not subject:
            raise DataError(f"{where}: subject must be a non-empty string")
        activity = _ACTIVITY_FROM_STR.get(item["activity"])
        if activity is None:
            raise DataError(f"{where}: activity must be 'adl' or 'fall', got {item['activity']!r}")
        try:
            placement = SensorPlacement(item["placement"])
        except ValueError:
            raise DataError(f"{where}: unknown placement {item['placement']!r}") from None
        try:
            provenance = Provenance(item["provenance"])
        except ValueError:
            raise DataError(f"{where}: provenance must be 'real' or 'synthetic'") from None
        rate = item["rate_hz"]
        if not isinstance(rate, (int, float)) or not rate > 0:
            raise DataError(f"{where}: rate_hz must be a positive number")
        path = Path(item["path"])
        if not path.is_absolute():
            path = root / path
        if path in seen_paths:
            raise DataError(f"{where}: duplicate file entry {path}")
        seen_paths.add(path)
        if not path.is_file():
            raise DataError(f"{where}: file not found: {path}")
        entries.append(
            CatalogEntry(
                subject_id=subject,
                activity=activity,
                path=path,
                sampling_rate=float(rate),
                placement=placement,
                provenance=provenance,
            )
        )
    return DatasetCatalog(entries=tuple(entries))


def load_entry(entry: CatalogEntry) -> AccelSeries:
    """Read one cataloged file as an AccelSeries with the manifest's metadata."""
    return read_accel_csv(
        entry.path.read_bytes(),
        sampling_rate=entry.sampling_rate,
        label=entry.activity,
        provenance=entry.provenance,
        subject_id=entry.subject_id,
    )
