"""Dataset layer: the JSON manifest describing annotated nodules, loading it
into memory, and deterministic train/test splitting.

Manifest format (schema 1)::

    {
      "schema": 1,
      "entries": [
        {
          "nodule_id": "n0001",
          "subject_id": "s001",
          "image": "images/n0001.pgm",
          "spacing_x": 0.68,
          "spacing_y": 0.68,
          "source_max": 255,            # optional override
          "polygons": [[[col, row], ...], ...],
          "diagnosis": 2                # 0 unknown, 1 benign, 2 primary, 3 metastatic
        },
        ...
      ]
    }

Image paths resolve relative to the manifest's directory. Diagnosis 0 entries
are dropped (counted), 1 maps to label -1, and 2/3 map to +1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError, PipelineError
from .imaging import GrayImage, Polygon, load_gray_image

MANIFEST_SCHEMA = 1

DIAGNOSIS_UNKNOWN = 0
DIAGNOSIS_BENIGN = 1
DIAGNOSIS_PRIMARY = 2
DIAGNOSIS_METASTATIC = 3

_LABEL_BY_DIAGNOSIS = {
    DIAGNOSIS_BENIGN: -1,
    DIAGNOSIS_PRIMARY: 1,
    DIAGNOSIS_METASTATIC: 1,
}


@dataclass
class ManifestEntry:
    """One manifest row, validated but with the image not yet loaded."""

    nodule_id: str
    subject_id: str
    image_path: Path
    spacing_x: float
    spacing_y: float
    polygons: list[Polygon]
    diagnosis: int
    source_max: int | None = None

    @property
    def label(self) -> int | None:
        return _LABEL_BY_DIAGNOSIS.get(self.diagnosis)


@dataclass
class AnnotatedSample:
    """A fully loaded nodule: image, outlines, and its -1/+1 label."""

    nodule_id: str
    subject_id: str
    image: GrayImage
    polygons: list[Polygon]
    label: int


@dataclass
class Dataset:
    samples: list[AnnotatedSample]
    dropped_unknown: int = 0

    def __len__(self) -> int:
        return len(self.samples)

    def labels(self) -> np.ndarray:
        return np.asarray([s.label for s in self.samples], dtype=np.int64)

    def subjects(self) -> list[str]:
        return [s.subject_id for s in self.samples]


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InputError(message)


def _parse_entry(raw: object, index: int, base: Path) -> ManifestEntry:
    where = f"manifest entry {index}"
    _require(isinstance(raw, dict), f"{where}: must be an object")
    nodule_id = raw.get("nodule_id")
    _require(
        isinstance(nodule_id, str) and nodule_id != "",
        f"{where}: nodule_id must be a non-empty string",
    )
    where = f"manifest entry {index} ({nodule_id})"
    subject_id = raw.get("subject_id")
    _require(
        isinstance(subject_id, str) and subject_id != "",
        f"{where}: subject_id must be a non-empty string",
    )
    image = raw.get("image")
    _require(isinstance(image, str) and image != "", f"{where}: image path missing")
    spacing_x = raw.get("spacing_x")
    spacing_y = raw.get("spacing_y")
    for name, value in (("spacing_x", spacing_x), ("spacing_y", spacing_y)):
        _require(
            isinstance(value, (int, float))
            and not isinstance(value, bool)
            and math.isfinite(value)
            and value > 0,
            f"{where}: {name} must be a positive number",
        )
    diagnosis = raw.get("diagnosis")
    _require(
        isinstance(diagnosis, int) and not isinstance(diagnosis, bool),
        f"{where}: diagnosis must be an integer",
    )
    _require(
        diagnosis in (0, 1, 2, 3),
        f"{where}: diagnosis must be one of 0, 1, 2, 3; got {diagnosis}",
    )
    source_max = raw.get("source_max")
    if source_max is not None:
        _require(
            isinstance(source_max, int)
            and not isinstance(source_max, bool)
            and source_max > 0,
            f"{where}: source_max must be a positive integer",
        )
    raw_polys = raw.get("polygons")
    _require(
        isinstance(raw_polys, list) and len(raw_polys) >= 1,
        f"{where}: polygons must be a non-empty list",
    )
    polygons: list[Polygon] = []
    for p_idx, outline in enumerate(raw_polys):
        try:
            vertices = np.asarray(outline, dtype=np.float64)
        except (TypeError, ValueError):
            raise InputError(f"{where}: polygon {p_idx} is not numeric") from None
        try:
            polygons.append(Polygon(vertices=vertices))
        except PipelineError as exc:
            raise InputError(f"{where}: polygon {p_idx}: {exc}") from None
    image_path = Path(image)
    if not image_path.is_absolute():
        image_path = base / image_path
    return ManifestEntry(
        nodule_id=nodule_id,
        subject_id=subject_id,
        image_path=image_path,
        spacing_x=float(spacing_x),
        spacing_y=float(spacing_y),
        polygons=polygons,
        diagnosis=diagnosis,
        source_max=source_max,
    )


def load_manifest_entries(path: str | Path) -> list[ManifestEntry]:
    """Parse and validate a manifest without touching any image files."""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"manifest not found: {path}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"manifest is not valid JSON: {path}: {exc}") from None
    _require(isinstance(doc, dict), f"manifest must be a JSON object: {path}")
    _require(
        doc.get("schema") == MANIFEST_SCHEMA,
        f"manifest {path} has schema {doc.get('schema')!r}; this build reads schema "
        f"{MANIFEST_SCHEMA}",
    )
    entries_raw = doc.get("entries")
    _require(isinstance(entries_raw, list), f"manifest {path} needs an entries list")
    base = p.parent
    entries = [_parse_entry(raw, i, base) for i, raw in enumerate(entries_raw)]
    seen: set[str] = set()
    for entry in entries:
        if entry.nodule_id in seen:
            raise InputError(f"duplicate nodule_id {entry.nodule_id!r} in manifest")
        seen.add(entry.nodule_id)
    return entries


def load_manifest(path: str | Path) -> Dataset:
    """Load a manifest and every referenced image.

    Entries with diagnosis 0 (unknown) are dropped and counted. Polygon
    vertices must land inside the loaded image grid.
    """
    entries = load_manifest_entries(path)
    samples: list[AnnotatedSample] = []
    dropped = 0
    for entry in entries:
        if entry.diagnosis == DIAGNOSIS_UNKNOWN:
            dropped += 1
            continue
        try:
            image = load_gray_image(
                entry.image_path, entry.spacing_x, entry.spacing_y, entry.source_max
            )
        except PipelineError as exc:
            raise InputError(f"nodule {entry.nodule_id}: {exc}") from None
        for p_idx, poly in enumerate(entry.polygons):
            cols = poly.vertices[:, 0]
            rows = poly.vertices[:, 1]
            if (
                cols.min() < 0
                or rows.min() < 0
                or cols.max() > image.width - 1
                or rows.max() > image.height - 1
            ):
                raise InputError(
                    f"nodule {entry.nodule_id}: polygon {p_idx} leaves the "
                    f"{image.width}x{image.height} image grid"
                )
        samples.append(
            AnnotatedSample(
                nodule_id=entry.nodule_id,
                subject_id=entry.subject_id,
                image=image,
                polygons=entry.polygons,
                label=entry.label,
            )
        )
    return Dataset(samples=samples, dropped_unknown=dropped)


def save_manifest(path: str | Path, entries: list[dict]) -> None:
    """Write a schema-1 manifest; entries are already-shaped dicts."""
    from .ioutil import atomic_write_text, dump_json

    atomic_write_text(path, dump_json({"schema": MANIFEST_SCHEMA, "entries": entries}))


def _class_split_indices(
    labels: np.ndarray, train_fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    train_parts: list[np.ndarray] = []
    test_parts: list[np.ndarray] = []
    for cls in (-1, 1):
        members = np.flatnonzero(labels == cls)
        order = rng.permutation(members)
        n_train = int(math.floor(train_fraction * members.shape[0]))
        train_parts.append(order[:n_train])
        test_parts.append(order[n_train:])
    return (
        np.sort(np.concatenate(train_parts)),
        np.sort(np.concatenate(test_parts)),
    )


def _subject_split_indices(
    labels: np.ndarray,
    subjects: list[str],
    train_fraction: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Greedy subject assignment: visit subjects in shuffled order and put each
    whole subject on the side that keeps both sides' per-class counts closest
    to the target fractions."""
    names = sorted(set(subjects))
    per_subject = {name: np.zeros(2, dtype=np.int64) for name in names}
    for label, subject in zip(labels, subjects):
        per_subject[subject][0 if label == -1 else 1] += 1
    totals = np.asarray(
        [int(np.sum(labels == -1)), int(np.sum(labels == 1))], dtype=np.float64
    )
    target_train = train_fraction * totals
    target_test = (1.0 - train_fraction) * totals
    train_counts = np.zeros(2)
    test_counts = np.zeros(2)
    train_subjects: set[str] = set()
    for name in rng.permutation(names):
        counts = per_subject[name]
        cost_train = np.abs(train_counts + counts - target_train).sum() + np.abs(
            test_counts - target_test
        ).sum()
        cost_test = np.abs(train_counts - target_train).sum() + np.abs(
            test_counts + counts - target_test
        ).sum()
        if cost_train <= cost_test:
            train_subjects.add(str(name))
            train_counts += counts
        else:
            test_counts += counts
    train_idx = np.asarray(
        [i for i, s in enumerate(subjects) if s in train_subjects], dtype=np.int64
    )
    test_idx = np.asarray(
        [i for i, s in enumerate(subjects) if s not in train_subjects], dtype=np.int64
    )
    return train_idx, test_idx


def split_train_test(
    labels: np.ndarray,
    subjects: list[str] | None = None,
    train_fraction: float = 0.65,
    seed: int = 0,
    level: str = "slice",
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic stratified train/test split.

    `level="slice"` splits nodules independently; `level="subject"` keeps all
    nodules of a subject on one side. Either way both classes must land on
    both sides; if a draw fails that, the next seeds are tried (up to 100)
    before giving up.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if not np.all(np.isin(labels, (-1, 1))):
        raise InputError("labels must be -1 or +1 for splitting")
    if not 0.0 < train_fraction < 1.0:
        raise InputError(f"train fraction must be in (0, 1), got {train_fraction}")
    if level not in ("slice", "subject"):
        raise InputError(f"split level must be 'slice' or 'subject', got {level!r}")
    if level == "subject":
        if subjects is None or len(subjects) != labels.shape[0]:
            raise InputError("subject-level split needs one subject id per sample")
    for attempt in range(100):
        rng = np.random.default_rng(seed + attempt)
        if level == "slice":
            train_idx, test_idx = _class_split_indices(labels, train_fraction, rng)
        else:
            train_idx, test_idx = _subject_split_indices(
                labels, subjects, train_fraction, rng
            )
        ok = all(
            np.any(labels[part] == cls)
            for part in (train_idx, test_idx)
            for cls in (-1, 1)
        )
        if ok:
            return train_idx, test_idx
    raise InputError(
        "could not produce a split with both classes on both sides; "
        "the dataset is too small or too lopsided"
    )
