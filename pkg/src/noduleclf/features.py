"""Heterogeneous nodule features: geometry, gray histogram, gradient histogram.

The default feature vector has 29 entries in fixed order:
[diameter_mm, aspect_ratio, area_mm2, perimeter_mm | 16 gray bins | 9 gradient bins].
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, InputError
from .imaging import (
    GrayImage,
    Mask,
    Polygon,
    boundary_pixels,
    crop_with_margin,
    mask_bbox,
    rasterize_polygon,
    union_masks,
)

GRAY_BINS_DEFAULT = 16
GRAD_BINS_DEFAULT = 9


@dataclass
class GeometricFeatures:
    """Metric shape descriptors of a nodule mask."""

    diameter_mm: float
    aspect_ratio: float
    area_mm2: float
    perimeter_mm: float

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.diameter_mm, self.aspect_ratio, self.area_mm2, self.perimeter_mm]
        )


@dataclass
class Histogram:
    """L1-normalized histogram; kind is 'gray' or 'gradient'."""

    values: np.ndarray
    kind: str

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.kind not in ("gray", "gradient"):
            raise ContractError(f"unknown histogram kind {self.kind!r}")
        if np.any(self.values < 0):
            raise ContractError("histogram bins must be non-negative")
        total = float(self.values.sum())
        if total == 0.0:
            if self.kind != "gradient":
                raise ContractError("all-zero histogram is only valid for gradients")
        elif abs(total - 1.0) > 1e-9:
            raise ContractError(f"histogram not L1-normalized (sum={total})")


@dataclass
class FeatureVector:
    """Feature values in the fixed order, with an optional -1/+1 label."""

    values: np.ndarray
    label: int | None = None

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ContractError("feature vector must be 1D")
        if not np.all(np.isfinite(self.values)):
            raise ContractError("feature vector has non-finite entries")
        if self.label not in (-1, +1, None):
            raise ContractError(f"label must be -1, +1 or None, got {self.label!r}")


def _max_pairwise_distance_mm(points_mm: np.ndarray) -> float:
    """Largest Euclidean distance between any two points, chunked to bound memory."""
    best = 0.0
    step = 512
    for i in range(0, points_mm.shape[0], step):
        chunk = points_mm[i : i + step]
        d2 = ((chunk[:, None, :] - points_mm[None, :, :]) ** 2).sum(axis=-1)
        best = max(best, float(d2.max()))
    return float(np.sqrt(best))


def geometric_features(mask: Mask, spacing_x: float, spacing_y: float) -> GeometricFeatures:
    """Diameter, aspect ratio, area, and perimeter of a mask in metric units.

    area = (# nodule pixels) * sx * sy, perimeter = (# boundary pixels) * (sx+sy)/2,
    aspect = (box_height * sy) / (box_width * sx), diameter = largest distance
    between boundary-pixel centers (Feret diameter). A single-pixel mask gets
    one mean pixel pitch as its diameter so that all features stay positive.
    """
    if not (spacing_x > 0 and spacing_y > 0):
        raise ContractError("pixel spacing must be positive")
    n_pixels = mask.count()
    if n_pixels == 0:
        raise ContractError("geometric features of an empty mask")
    boundary = boundary_pixels(mask)
    r0, r1, c0, c1 = mask_bbox(mask)
    area = n_pixels * spacing_x * spacing_y
    perimeter = boundary.shape[0] * (spacing_x + spacing_y) / 2.0
    aspect = ((r1 - r0 + 1) * spacing_y) / ((c1 - c0 + 1) * spacing_x)
    points_mm = np.column_stack(
        (boundary[:, 1] * spacing_x, boundary[:, 0] * spacing_y)
    )
    diameter = _max_pairwise_distance_mm(points_mm)
    if diameter == 0.0:
        diameter = (spacing_x + spacing_y) / 2.0
    return GeometricFeatures(
        diameter_mm=diameter, aspect_ratio=aspect, area_mm2=area, perimeter_mm=perimeter
    )


def gray_histogram(img: GrayImage, bins: int = GRAY_BINS_DEFAULT) -> Histogram:
    """Intensity histogram over the fixed range [0, 256), L1-normalized.

    The bin of pixel value v is floor(v * bins / 256); the range never adapts
    to the image content.
    """
    if bins < 1:
        raise ContractError("bin count must be at least 1")
    idx = np.floor(img.pixels * (bins / 256.0)).astype(np.int64)
    np.clip(idx, 0, bins - 1, out=idx)
    counts = np.bincount(idx.ravel(), minlength=bins).astype(np.float64)
    return Histogram(values=counts / counts.sum(), kind="gray")


def oriented_gradient_histogram(img: GrayImage, bins: int = GRAD_BINS_DEFAULT) -> Histogram:
    """Contrast-insensitive oriented gradient histogram, one per image.

    Gradients come from central differences with replicated borders; each
    pixel adds its gradient magnitude to the bin of its orientation taken
    modulo 180 degrees. A gradient-free image yields the all-zero vector.
    """
    if bins < 1:
        raise ContractError("bin count must be at least 1")
    if img.height < 2 or img.width < 2:
        raise ContractError("gradient histogram needs an image of at least 2x2")
    padded = np.pad(img.pixels, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    magnitude = np.hypot(gx, gy)
    phi = np.degrees(np.arctan2(gy, gx)) % 180.0
    idx = np.floor(phi * (bins / 180.0)).astype(np.int64)
    idx[idx >= bins] = 0  # phi rounding onto exactly 180 wraps to bin 0
    hist = np.bincount(idx.ravel(), weights=magnitude.ravel(), minlength=bins)
    total = hist.sum()
    if total > 0:
        hist = hist / total
    return Histogram(values=hist, kind="gradient")


def assemble_feature_vector(
    geo: GeometricFeatures,
    gh: Histogram,
    ogh: Histogram,
    gray_bins: int = GRAY_BINS_DEFAULT,
    grad_bins: int = GRAD_BINS_DEFAULT,
    label: int | None = None,
) -> FeatureVector:
    """Concatenate the three feature sets in the fixed order."""
    if gh.kind != "gray" or gh.values.shape[0] != gray_bins:
        raise ContractError(
            f"expected a {gray_bins}-bin gray histogram, got {gh.kind} "
            f"with {gh.values.shape[0]} bins"
        )
    if ogh.kind != "gradient" or ogh.values.shape[0] != grad_bins:
        raise ContractError(
            f"expected a {grad_bins}-bin gradient histogram, got {ogh.kind} "
            f"with {ogh.values.shape[0]} bins"
        )
    values = np.concatenate([geo.as_array(), gh.values, ogh.values])
    return FeatureVector(values=values, label=label)


def nodule_features(
    img: GrayImage,
    polygons: list[Polygon],
    margin: float = 0.05,
    gray_bins: int = GRAY_BINS_DEFAULT,
    grad_bins: int = GRAD_BINS_DEFAULT,
    label: int | None = None,
) -> FeatureVector:
    """Full per-nodule extraction: union of polygon masks -> geometry, and both
    histograms on the margin-expanded rectangular crop."""
    masks = [rasterize_polygon(p, img.width, img.height) for p in polygons]
    mask = union_masks(masks)
    geo = geometric_features(mask, img.spacing_x, img.spacing_y)
    crop = crop_with_margin(img, mask, margin)
    gh = gray_histogram(crop, gray_bins)
    ogh = oriented_gradient_histogram(crop, grad_bins)
    return assemble_feature_vector(geo, gh, ogh, gray_bins, grad_bins, label=label)


# ---------------------------------------------------------------------------
# Standardization (fit on training data only).


@dataclass
class Standardizer:
    """Per-feature affine transform to zero mean, unit variance."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self) -> None:
        self.means = np.asarray(self.means, dtype=np.float64)
        self.stds = np.asarray(self.stds, dtype=np.float64)
        if self.means.shape != self.stds.shape or self.means.ndim != 1:
            raise ContractError("means and stds must be matching 1D vectors")
        if np.any(self.stds <= 0):
            raise ContractError("standardizer stds must be positive")

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.means.shape[0]:
            raise ContractError(
                f"expected {self.means.shape[0]} features, got {X.shape[-1]}"
            )
        return (X - self.means) / self.stds

    def inverse(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) * self.stds + self.means

    def to_dict(self) -> dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(means=np.array(d["means"]), stds=np.array(d["stds"]))


def fit_standardizer(matrix: np.ndarray) -> Standardizer:
    """Column means and population standard deviations; constant columns get
    their std forced to 1 so they standardize to exactly zero."""
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ContractError("standardizer needs at least 2 rows")
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds = np.where(stds < 1e-12, 1.0, stds)
    return Standardizer(means=means, stds=stds)


def apply_standardizer(s: Standardizer, v: FeatureVector) -> FeatureVector:
    """Standardize one feature vector; the label passes through."""
    return FeatureVector(values=s.transform(v.values), label=v.label)


# ---------------------------------------------------------------------------
# Feature CSV contract: id, label, then the feature columns in fixed order.


def feature_names(
    gray_bins: int = GRAY_BINS_DEFAULT, grad_bins: int = GRAD_BINS_DEFAULT
) -> list[str]:
    names = ["f_diam_mm", "f_aspect", "f_area_mm2", "f_perim_mm"]
    names += [f"f_gh_{i:02d}" for i in range(gray_bins)]
    names += [f"f_ogh_{i:02d}" for i in range(grad_bins)]
    return names


@dataclass
class FeatureTable:
    """In-memory form of a feature CSV."""

    ids: list[str]
    labels: np.ndarray  # int, -1/+1
    X: np.ndarray  # float64, shape (n, d)
    names: list[str]

    def __post_init__(self) -> None:
        if len(self.ids) != self.X.shape[0] or len(self.labels) != self.X.shape[0]:
            raise ContractError("feature table row counts disagree")
        if len(self.names) != self.X.shape[1]:
            raise ContractError("feature table column names disagree with matrix")


def render_feature_csv(table: FeatureTable) -> str:
    """Render a feature table as CSV text with deterministic float formatting."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "label"] + table.names)
    for i, nodule_id in enumerate(table.ids):
        row = [nodule_id, str(int(table.labels[i]))]
        row += [repr(float(x)) for x in table.X[i]]
        writer.writerow(row)
    return buf.getvalue()


def write_feature_csv(path: str | Path, table: FeatureTable) -> None:
    from .ioutil import atomic_write_text

    atomic_write_text(path, render_feature_csv(table))


def read_feature_csv(path: str | Path) -> FeatureTable:
    """Parse a feature CSV produced by the extract stage."""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"feature CSV not found: {path}")
    with p.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"empty feature CSV: {path}") from None
        if len(header) < 3 or header[0] != "id" or header[1] != "label":
            raise InputError(f"feature CSV header must start with id,label: {path}")
        names = header[2:]
        ids: list[str] = []
        labels: list[int] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(f"{path}:{lineno}: expected {len(header)} columns")
            ids.append(row[0])
            try:
                labels.append(int(row[1]))
                rows.append([float(x) for x in row[2:]])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    if not ids:
        raise InputError(f"feature CSV has no data rows: {path}")
    return FeatureTable(
        ids=ids,
        labels=np.array(labels, dtype=np.int64),
        X=np.array(rows, dtype=np.float64),
        names=names,
    )
