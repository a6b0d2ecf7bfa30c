"""Grayscale CT slices, radiologist boundary polygons, and nodule masks.

Coordinate conventions: pixel (col, row) has its center at the point
(col, row) in polygon space, arrays are indexed [row, col], and polygon
vertices are (col, row) pairs. Intensities live in the half-open range
[0, 256) after normalization; physical pixel spacing is carried in
mm/pixel separately for each axis.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, InputError, PipelineError


class EmptyMaskError(PipelineError):
    """A polygon rasterized to zero pixels, or an operation got an empty mask."""


@dataclass
class GrayImage:
    """Normalized 2D intensity grid with metric pixel spacing."""

    pixels: np.ndarray  # float64, shape (height, width), values in [0, 256)
    spacing_x: float  # mm per pixel along columns
    spacing_y: float  # mm per pixel along rows

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise ContractError("image must be a non-empty 2D grid")
        if not np.all(np.isfinite(self.pixels)):
            raise ContractError("image contains non-finite pixels")
        lo, hi = float(self.pixels.min()), float(self.pixels.max())
        if lo < 0.0 or hi >= 256.0:
            raise ContractError(f"pixel values outside [0, 256): min={lo}, max={hi}")
        if not (self.spacing_x > 0 and self.spacing_y > 0):
            raise ContractError("pixel spacing must be positive")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass
class Polygon:
    """Closed boundary polygon; vertices are (col, row) pairs, reals allowed."""

    vertices: np.ndarray  # float64, shape (k, 2), k >= 3

    def __post_init__(self) -> None:
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise ContractError("polygon vertices must be (k, 2) pairs")
        if self.vertices.shape[0] < 3:
            raise ContractError("polygon needs at least 3 vertices")
        if not np.all(np.isfinite(self.vertices)):
            raise ContractError("polygon has non-finite vertices")

    def signed_area(self) -> float:
        """Shoelace area; zero means the polygon is degenerate."""
        x = self.vertices[:, 0]
        y = self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass
class Mask:
    """Binary nodule mask; True marks a nodule pixel."""

    bits: np.ndarray  # bool, shape (height, width)

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits, dtype=bool)
        if self.bits.ndim != 2:
            raise ContractError("mask must be 2D")

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass
class NoduleAnnotation:
    """One nodule: source image reference, one polygon per annotating radiologist,
    and a diagnosis label (-1 benign, +1 malignant, None unknown)."""

    image_ref: str
    polygons: list[Polygon]
    label: int | None

    def __post_init__(self) -> None:
        if not self.polygons:
            raise ContractError("annotation needs at least one polygon")
        if self.label not in (-1, +1, None):
            raise ContractError(f"label must be -1, +1 or None, got {self.label!r}")


def normalize_intensity(
    raw: np.ndarray, source_max: int, spacing_x: float, spacing_y: float
) -> GrayImage:
    """Map raw integer intensities in [0, source_max] onto [0, 256).

    Each output pixel is raw * 256 / (source_max + 1), which keeps the full
    range strictly below 256 for any source bit depth.
    """
    if source_max <= 0:
        raise InputError(f"source_max must be positive, got {source_max}")
    raw = np.asarray(raw)
    if raw.ndim != 2 or raw.size == 0:
        raise InputError("raw image must be a non-empty 2D grid")
    if raw.min() < 0 or raw.max() > source_max:
        raise InputError(
            f"raw values outside [0, {source_max}]: min={raw.min()}, max={raw.max()}"
        )
    pixels = raw.astype(np.float64) * 256.0 / (float(source_max) + 1.0)
    np.clip(pixels, 0.0, np.nextafter(256.0, 0.0), out=pixels)
    return GrayImage(pixels=pixels, spacing_x=spacing_x, spacing_y=spacing_y)


def _on_edge(px: np.ndarray, py: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Boolean grid: pixel center lies exactly on a polygon edge segment."""
    hit = np.zeros(px.shape, dtype=bool)
    k = poly.shape[0]
    for i in range(k):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % k]
        cross = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        in_box = (
            (px >= min(x1, x2))
            & (px <= max(x1, x2))
            & (py >= min(y1, y2))
            & (py <= max(y1, y2))
        )
        hit |= (cross == 0.0) & in_box
    return hit


def rasterize_polygon(poly: Polygon, width: int, height: int) -> Mask:
    """Fill a polygon on a width x height grid.

    A pixel is set iff its center is inside by the even-odd rule; centers
    exactly on an edge are included. Raises EmptyMaskError for degenerate
    (zero-area) polygons and polygons covering no pixel center.
    """
    if width <= 0 or height <= 0:
        raise ContractError("grid dimensions must be positive")
    if poly.signed_area() == 0.0:
        raise EmptyMaskError("zero-area polygon")
    v = poly.vertices
    py, px = np.mgrid[0:height, 0:width].astype(np.float64)
    inside = np.zeros((height, width), dtype=bool)
    k = v.shape[0]
    for i in range(k):
        x1, y1 = v[i]
        x2, y2 = v[(i + 1) % k]
        if y1 == y2:
            continue
        crosses = (y1 > py) != (y2 > py)
        x_at = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < x_at)
    inside |= _on_edge(px, py, v)
    if not inside.any():
        raise EmptyMaskError("polygon covers no pixel center")
    return Mask(bits=inside)


def union_masks(masks: list[Mask]) -> Mask:
    """Pixelwise OR of masks with identical dimensions."""
    if not masks:
        raise ContractError("union of an empty mask list")
    shape = masks[0].bits.shape
    out = np.zeros(shape, dtype=bool)
    for m in masks:
        if m.bits.shape != shape:
            raise ContractError(
                f"mask dimension mismatch: {m.bits.shape} vs {shape}"
            )
        out |= m.bits
    return Mask(bits=out)


def mask_bbox(mask: Mask) -> tuple[int, int, int, int]:
    """Tight bounding box of true pixels as (row0, row1, col0, col1), inclusive."""
    if not mask.bits.any():
        raise EmptyMaskError("bounding box of an empty mask")
    rows = np.any(mask.bits, axis=1)
    cols = np.any(mask.bits, axis=0)
    r0, r1 = np.where(rows)[0][[0, -1]]
    c0, c1 = np.where(cols)[0][[0, -1]]
    return int(r0), int(r1), int(c0), int(c1)


def crop_with_margin(img: GrayImage, mask: Mask, margin: float = 0.05) -> GrayImage:
    """Crop the mask's bounding box expanded by ceil(margin * side) per side.

    The expansion is clipped at the image edges; spacing is preserved.
    margin * side is rounded to 9 decimals before ceil so that products such
    as 0.05 * 40 do not creep past the integer they represent.
    """
    if margin < 0:
        raise ContractError("margin must be non-negative")
    if mask.bits.shape != img.pixels.shape:
        raise ContractError("mask and image dimensions differ")
    r0, r1, c0, c1 = mask_bbox(mask)
    box_h = r1 - r0 + 1
    box_w = c1 - c0 + 1
    pad_r = math.ceil(round(margin * box_h, 9))
    pad_c = math.ceil(round(margin * box_w, 9))
    r0 = max(0, r0 - pad_r)
    r1 = min(img.height - 1, r1 + pad_r)
    c0 = max(0, c0 - pad_c)
    c1 = min(img.width - 1, c1 + pad_c)
    crop = img.pixels[r0 : r1 + 1, c0 : c1 + 1].copy()
    return GrayImage(pixels=crop, spacing_x=img.spacing_x, spacing_y=img.spacing_y)


def boundary_pixels(mask: Mask) -> np.ndarray:
    """(row, col) coordinates of true pixels with a false or off-grid 4-neighbor."""
    bits = mask.bits
    if not bits.any():
        raise EmptyMaskError("boundary of an empty mask")
    padded = np.pad(bits, 1, mode="constant", constant_values=False)
    up = padded[:-2, 1:-1]
    down = padded[2:, 1:-1]
    left = padded[1:-1, :-2]
    right = padded[1:-1, 2:]
    interior = up & down & left & right
    return np.argwhere(bits & ~interior)


# ---------------------------------------------------------------------------
# Image file I/O: binary PGM (P5) and single-channel PNG.

_PGM_HEADER = re.compile(rb"^P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(\d+)\s+(\d+)\s")


def read_pgm(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a binary P5 PGM file; returns (raw array, maxval)."""
    data = Path(path).read_bytes()
    m = _PGM_HEADER.match(data)
    if m is None:
        raise InputError(f"not a binary PGM (P5) file: {path}")
    width, height, maxval = (int(g) for g in m.groups())
    if maxval <= 0 or maxval > 65535:
        raise InputError(f"unsupported PGM maxval {maxval} in {path}")
    body = data[m.end() :]
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    expected = width * height * dtype.itemsize
    if len(body) < expected:
        raise InputError(f"truncated PGM pixel data in {path}")
    raw = np.frombuffer(body[:expected], dtype=dtype).reshape(height, width)
    return raw.astype(np.uint16 if maxval > 255 else np.uint8), maxval


def write_pgm(path: str | Path, raw: np.ndarray, maxval: int = 255) -> None:
    """Write an 8-bit binary P5 PGM file."""
    if maxval != 255:
        raise ContractError("only 8-bit PGM output is supported")
    raw = np.asarray(raw)
    if raw.min() < 0 or raw.max() > maxval:
        raise ContractError("pixel values out of range for PGM output")
    header = f"P5\n{raw.shape[1]} {raw.shape[0]}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + raw.astype(np.uint8).tobytes())


def read_png(path: str | Path) -> tuple[np.ndarray, int]:
    """Read an 8- or 16-bit grayscale PNG; returns (raw array, default source max)."""
    from PIL import Image

    try:
        with Image.open(path) as im:
            mode = im.mode
            arr = np.asarray(im)
    except Exception as exc:
        raise InputError(f"cannot read PNG {path}: {exc}") from exc
    if mode == "L":
        return arr.astype(np.uint8), 255
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = arr.astype(np.int64)
        if arr.min() < 0 or arr.max() > 65535:
            raise InputError(f"PNG sample values out of 16-bit range in {path}")
        return arr.astype(np.uint16), 65535
    raise InputError(f"PNG must be single-channel grayscale, got mode {mode!r}: {path}")


def load_raw_image(path: str | Path) -> tuple[np.ndarray, int]:
    """Load a PGM or PNG file by magic bytes; returns (raw array, default source max)."""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"image file not found: {path}")
    head = p.open("rb").read(8)
    if head.startswith(b"P5"):
        raw, maxval = read_pgm(p)
        return raw, 65535 if maxval > 255 else 255
    if head.startswith(b"\x89PNG"):
        return read_png(p)
    raise InputError(f"unsupported image format (need binary PGM or PNG): {path}")


def load_gray_image(
    path: str | Path,
    spacing_x: float,
    spacing_y: float,
    source_max: int | None = None,
) -> GrayImage:
    """Load an image file and normalize it onto [0, 256).

    source_max defaults to 255 for 8-bit files and 65535 for 16-bit files;
    a manifest may override it. Spacing always comes from the caller.
    """
    raw, default_max = load_raw_image(path)
    return normalize_intensity(
        raw, source_max if source_max is not None else default_max, spacing_x, spacing_y
    )
