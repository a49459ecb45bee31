"""Point annotations, patch spectra and grouped spectral statistics.

A dataset manifest is a JSON-lines file, one record per line::

    {"record_id": "rec_000", "cube_path": "cubes/rec_000.hsc",
     "patient_id": "P01", "body_part": "Arms", "lesion_present": true,
     "annotation": {"x": 16, "y": 16, "class_label": "Lesion",
                    "pattern": "Globular", "histology": "Compound"}}

``cube_path`` is resolved relative to the manifest's directory when it is
not absolute. ``pattern`` and ``histology`` are optional.
"""

from __future__ import annotations

import enum
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .cube import BandMap, BodyPart, HyperCube, band_index_for_wavelength
from .errors import (
    BandMapMismatch,
    DataError,
    EmptyInput,
    EvenWindow,
    HyperdermError,
    ManifestIoFailure,
    MissingInput,
    WindowOutOfBounds,
)
from .fileio import atomic_write_bytes, write_text
from .hsc import load_cube
from .labels import ClassLabel, Histology, Pattern

UNLABELED = "Unlabeled"
CSV_HEADER = "wavelength_nm,group,stat,value,n"


class Stat(str, enum.Enum):
    MEAN = "Mean"
    MEDIAN = "Median"
    STD = "Std"


class StratifyKey(str, enum.Enum):
    CLASS_LABEL = "ClassLabel"
    BODY_PART = "BodyPart"
    PATIENT_ID = "PatientId"
    PATTERN = "Pattern"
    HISTOLOGY = "Histology"


@dataclass(frozen=True)
class PointAnnotation:
    x: int  # column
    y: int  # row
    class_label: ClassLabel
    pattern: Pattern | None = None
    histology: Histology | None = None

    def __post_init__(self):
        for name in ("x", "y"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 0:
                raise DataError(f"annotation {name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        object.__setattr__(self, "class_label", ClassLabel(self.class_label))
        if self.pattern is not None:
            object.__setattr__(self, "pattern", Pattern(self.pattern))
        if self.histology is not None:
            object.__setattr__(self, "histology", Histology(self.histology))
        if self.class_label is ClassLabel.SKIN and (self.pattern or self.histology):
            raise DataError("pattern and histology labels apply only to Lesion annotations")

    def to_dict(self) -> dict:
        d = {"x": self.x, "y": self.y, "class_label": self.class_label.value}
        if self.pattern is not None:
            d["pattern"] = self.pattern.value
        if self.histology is not None:
            d["histology"] = self.histology.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PointAnnotation":
        unknown = set(d) - {"x", "y", "class_label", "pattern", "histology"}
        if unknown:
            raise DataError(f"unknown annotation key(s) {sorted(unknown)}")
        return cls(d["x"], d["y"], d["class_label"], d.get("pattern"), d.get("histology"))


_RECORD_KEYS = {"record_id", "cube_path", "patient_id", "body_part", "lesion_present", "annotation"}


@dataclass(frozen=True)
class AnnotatedRecord:
    record_id: str
    cube_path: str
    annotation: PointAnnotation
    patient_id: str
    body_part: BodyPart = BodyPart.OTHER
    lesion_present: bool = False

    def __post_init__(self):
        if not str(self.record_id):
            raise DataError("record_id must be nonempty")
        if not str(self.patient_id):
            raise DataError("patient_id must be nonempty")
        object.__setattr__(self, "body_part", BodyPart(self.body_part))
        object.__setattr__(self, "lesion_present", bool(self.lesion_present))

    def to_dict(self) -> dict:
        return {
            "record_id": self.record_id,
            "cube_path": self.cube_path,
            "patient_id": self.patient_id,
            "body_part": self.body_part.value,
            "lesion_present": self.lesion_present,
            "annotation": self.annotation.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotatedRecord":
        if not isinstance(d, dict):
            raise DataError("record must be a JSON object")
        unknown = set(d) - _RECORD_KEYS
        if unknown:
            raise DataError(f"unknown record key(s) {sorted(unknown)}")
        missing = {"record_id", "cube_path", "patient_id", "annotation"} - set(d)
        if missing:
            raise DataError(f"missing record key(s) {sorted(missing)}")
        if not isinstance(d["annotation"], dict):
            raise DataError("annotation must be a JSON object")
        return cls(
            record_id=str(d["record_id"]),
            cube_path=str(d["cube_path"]),
            annotation=PointAnnotation.from_dict(d["annotation"]),
            patient_id=str(d["patient_id"]),
            body_part=d.get("body_part", BodyPart.OTHER),
            lesion_present=d.get("lesion_present", False),
        )

    def resolve(self, base_dir) -> Path:
        p = Path(self.cube_path)
        return p if p.is_absolute() else Path(base_dir) / p


# --- manifest ------------------------------------------------------------------

@dataclass
class Manifest:
    records: list[AnnotatedRecord]
    base_dir: Path = field(default_factory=Path)

    def __len__(self):
        return len(self.records)

    def path_of(self, rec: AnnotatedRecord) -> Path:
        return rec.resolve(self.base_dir)


def _record_line(rec: AnnotatedRecord) -> str:
    return json.dumps(rec.to_dict(), sort_keys=True, separators=(",", ":"))


def parse_manifest_lines(lines: Iterable[str], source: str = "<manifest>"):
    """Yield ``(line_number, record)``; malformed lines raise naming the line."""
    seen = set()
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = AnnotatedRecord.from_dict(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"{source}:{n}: invalid JSON ({exc.msg})") from exc
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"{source}:{n}: {exc}") from exc
        if rec.record_id in seen:
            raise DataError(f"{source}:{n}: duplicate record_id {rec.record_id!r}")
        seen.add(rec.record_id)
        yield n, rec


def _read_manifest_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise MissingInput(f"manifest not found: {path}") from exc
    except OSError as exc:
        raise ManifestIoFailure(f"cannot read manifest {path}: {exc}") from exc


def load_manifest(path, check_files: bool = True) -> Manifest:
    """Load a JSON-lines manifest.

    With ``check_files`` every referenced cube must exist; the first
    missing one raises ``MissingInput`` naming its line.
    """
    path = Path(path)
    base = path.parent
    records = []
    for n, rec in parse_manifest_lines(_read_manifest_text(path).splitlines(), str(path)):
        if check_files and not rec.resolve(base).is_file():
            raise MissingInput(f"{path}:{n}: cube not found: {rec.cube_path}")
        records.append(rec)
    return Manifest(records, base)


def save_manifest(path, records: Sequence[AnnotatedRecord]) -> None:
    text = "".join(_record_line(r) + "\n" for r in records)
    write_text(path, text)


def append_record(path, rec: AnnotatedRecord) -> None:
    """Add one record, rejecting duplicate ids. The file is rewritten atomically."""
    path = Path(path)
    existing = []
    if path.exists():
        existing = [r for _, r in parse_manifest_lines(_read_manifest_text(path).splitlines(), str(path))]
    if any(r.record_id == rec.record_id for r in existing):
        raise DataError(f"record_id {rec.record_id!r} already in {path}")
    save_manifest(path, existing + [rec])


@dataclass
class ValidationIssue:
    line: int
    record_id: str | None
    kind: str  # "missing" | "invalid"
    message: str

    def __str__(self):
        rid = f" [{self.record_id}]" if self.record_id else ""
        return f"line {self.line}{rid}: {self.message}"


@dataclass
class ValidationReport:
    total: int = 0
    lesion_present: int = 0
    by_class: dict = field(default_factory=dict)
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "lesion_present": self.lesion_present,
            "by_class": dict(sorted(self.by_class.items())),
            "issues": [
                {"line": i.line, "record_id": i.record_id, "kind": i.kind, "message": i.message}
                for i in self.issues
            ],
        }


def validate_manifest(path, check_cubes: bool = True) -> ValidationReport:
    """Check every line instead of stopping at the first problem.

    Cubes are opened and the annotation window checked against their
    size when ``check_cubes`` is set.
    """
    path = Path(path)
    report = ValidationReport()
    seen = set()
    for n, line in enumerate(_read_manifest_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = AnnotatedRecord.from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            report.issues.append(ValidationIssue(n, None, "invalid", str(exc)))
            continue
        if rec.record_id in seen:
            report.issues.append(ValidationIssue(n, rec.record_id, "invalid", "duplicate record_id"))
            continue
        seen.add(rec.record_id)
        report.total += 1
        report.lesion_present += int(rec.lesion_present)
        label = rec.annotation.class_label.value
        report.by_class[label] = report.by_class.get(label, 0) + 1
        cube_file = rec.resolve(path.parent)
        if not cube_file.is_file():
            report.issues.append(ValidationIssue(n, rec.record_id, "missing", f"cube not found: {rec.cube_path}"))
            continue
        if check_cubes:
            try:
                cube = load_cube(cube_file)
                _window_bounds(cube, rec.annotation, 3)
            except HyperdermError as exc:
                report.issues.append(ValidationIssue(n, rec.record_id, "invalid", str(exc)))
    return report


# --- spectra -------------------------------------------------------------------

@dataclass
class SpectrumSample:
    values: np.ndarray
    band_map: BandMap
    provenance: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).ravel()
        if self.values.size != self.band_map.channel_count:
            raise BandMapMismatch(f"{self.values.size} values for {self.band_map.channel_count} bands")
        if not np.all(np.isfinite(self.values)):
            raise DataError("spectrum values must be finite")


def _window_bounds(cube: HyperCube, ann: PointAnnotation, window: int):
    if window < 1 or window % 2 == 0:
        raise EvenWindow(f"window must be an odd integer >= 1, got {window}")
    h = window // 2
    r0, r1, c0, c1 = ann.y - h, ann.y + h + 1, ann.x - h, ann.x + h + 1
    if r0 < 0 or c0 < 0 or r1 > cube.rows or c1 > cube.cols:
        raise WindowOutOfBounds(
            f"{window}x{window} window at (x={ann.x}, y={ann.y}) leaves the {cube.rows}x{cube.cols} frame"
        )
    return r0, r1, c0, c1


def extract_patch_mean(cube: HyperCube, ann: PointAnnotation, window: int = 3,
                       provenance: str = "") -> SpectrumSample:
    r0, r1, c0, c1 = _window_bounds(cube, ann, window)
    patch = cube.data[r0:r1, c0:c1, :].astype(np.float64)
    return SpectrumSample(patch.mean(axis=(0, 1)), cube.band_map, provenance)


@dataclass
class AggregateResult:
    group: str
    stat: Stat
    values: np.ndarray
    n: int
    band_map: BandMap

    @property
    def wavelengths(self) -> np.ndarray:
        return np.asarray(self.band_map.centers)


def _stack(samples: Sequence[SpectrumSample]):
    if not samples:
        raise EmptyInput("aggregate needs at least one sample")
    bm = samples[0].band_map
    for s in samples[1:]:
        if s.band_map != bm:
            raise BandMapMismatch(f"sample {s.provenance!r} has a different band map")
    # reduce in provenance order so the result does not depend on input order
    ordered = sorted(samples, key=lambda s: s.provenance)
    return np.stack([s.values for s in ordered]), bm


def aggregate(samples: Sequence[SpectrumSample], stat: Stat | str = Stat.MEAN, group: str = "",
              ddof: int = 0) -> AggregateResult:
    """Per-band statistic over a sample set.

    Median takes the midpoint of the two central values for even counts.
    Std uses divisor ``n - ddof`` (population by default); it is exactly
    zero on bands where all samples agree.
    """
    stat = Stat(stat)
    x, bm = _stack(samples)
    lo, hi = x.min(axis=0), x.max(axis=0)
    if stat is Stat.MEAN:
        v = np.clip(x.mean(axis=0), lo, hi)
    elif stat is Stat.MEDIAN:
        v = np.median(x, axis=0)
    else:
        if x.shape[0] - ddof < 1:
            raise EmptyInput(f"std with ddof={ddof} needs more than {ddof} samples")
        v = np.where(lo == hi, 0.0, x.std(axis=0, ddof=ddof))
    return AggregateResult(group, stat, v, x.shape[0], bm)


def record_group(rec: AnnotatedRecord, key: StratifyKey | str) -> str:
    key = StratifyKey(key)
    ann = rec.annotation
    if key is StratifyKey.CLASS_LABEL:
        return ann.class_label.value
    if key is StratifyKey.BODY_PART:
        return rec.body_part.value
    if key is StratifyKey.PATIENT_ID:
        return rec.patient_id
    if key is StratifyKey.PATTERN:
        return ann.pattern.value if ann.pattern is not None else UNLABELED
    return ann.histology.value if ann.histology is not None else UNLABELED


def group_records(records: Iterable[AnnotatedRecord], key) -> dict[str, list[AnnotatedRecord]]:
    """Partition records by key, each group sorted by record id."""
    groups: dict[str, list[AnnotatedRecord]] = {}
    for rec in records:
        groups.setdefault(record_group(rec, key), []).append(rec)
    return {g: sorted(v, key=lambda r: r.record_id) for g, v in sorted(groups.items())}


def stratify(manifest: Manifest, key, window: int = 3,
             loader: Callable[[Path], HyperCube] = load_cube) -> dict[str, list[SpectrumSample]]:
    """Patch-mean spectra of every record, grouped by ``key``.

    Records without an optional label land in the ``"Unlabeled"`` group.
    """
    cache: dict[Path, HyperCube] = {}
    out = {}
    for g, recs in group_records(manifest.records, key).items():
        samples = []
        for rec in recs:
            p = manifest.path_of(rec)
            if p not in cache:
                try:
                    cache[p] = loader(p)
                except (OSError, DataError) as exc:
                    raise ManifestIoFailure(f"record {rec.record_id}: cannot load {p}: {exc}") from exc
            samples.append(extract_patch_mean(cache[p], rec.annotation, window, rec.record_id))
        out[g] = samples
    return out


def aggregate_groups(groups: dict[str, list[SpectrumSample]], stat) -> list[AggregateResult]:
    return [aggregate(s, stat, g) for g, s in sorted(groups.items())]


@dataclass
class Contrast:
    difference: np.ndarray  # skin - lesion per band
    ratio: float
    band_map: BandMap


def class_contrast(skin, lesion, near_nm: float = 950.0, far_nm: float = 550.0) -> Contrast:
    """Skin-minus-lesion difference and NIR convergence ratio.

    ``ratio = |d(950)| / |d(550)|`` with bands picked by nearest center.
    Defined as 0 when both differences vanish and as infinity when only
    the visible one does.
    """
    if skin.band_map != lesion.band_map:
        raise BandMapMismatch("skin and lesion spectra use different band maps")
    d = np.asarray(skin.values, dtype=np.float64) - np.asarray(lesion.values, dtype=np.float64)
    k_near = band_index_for_wavelength(skin.band_map, near_nm).index
    k_far = band_index_for_wavelength(skin.band_map, far_nm).index
    num, den = abs(d[k_near]), abs(d[k_far])
    if den == 0:
        ratio = 0.0 if num == 0 else float("inf")
    else:
        ratio = float(num / den)
    return Contrast(d, ratio, skin.band_map)


def csv_bytes(results: Sequence[AggregateResult]) -> bytes:
    rows = []
    for res in results:
        for lam, v in zip(res.band_map.centers, res.values):
            rows.append((res.group, float(lam), res.stat.value, float(v), res.n))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for group, lam, stat, v, n in rows:
        if any(ch in group for ch in ',"\n'):
            group = '"' + group.replace('"', '""') + '"'
        buf.write(f"{lam:g},{group},{stat},{v!r},{n}\n")
    return buf.getvalue().encode("utf-8")


def export_csv(results: Sequence[AggregateResult], path) -> None:
    """Write aggregation results as CSV with deterministic bytes."""
    atomic_write_bytes(path, csv_bytes(results))


def read_csv(path) -> list[dict]:
    """Parse a file written by ``export_csv``."""
    import csv

    with open(os.fspath(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        r["wavelength_nm"] = float(r["wavelength_nm"])
        r["value"] = float(r["value"])
        r["n"] = int(r["n"])
    return rows
