"""Seeded synthetic nodule generator for end-to-end runs and benchmarks.

Each nodule is a harmonically perturbed ellipse rendered as a soft intensity
dome over a noisy background, plus the matching outline polygon(s). Benign
and malignant draws differ in size, eccentricity, lobulation, and contrast,
with deliberately overlapping ranges and a minority archetype per class
(large-but-smooth benign, small-but-spiky malignant) so that no single
feature separates the classes on its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset, AnnotatedSample, save_manifest
from .errors import InputError
from .imaging import Polygon, normalize_intensity, write_pgm

_CONTOUR_POINTS = 48
_HARMONICS = (2, 3, 4, 5)
_MIN_RADIUS_FACTOR = 0.35

# Sampling ranges per class: (low, high) for each parameter. "alt" is the
# minority archetype drawn with probability alt_p.
_CLASS_PARAMS = {
    "benign": {
        "alt_p": 0.25,
        "radius": (4.0, 8.0),
        "alt_radius": (9.0, 15.0),
        "amp": (0.02, 0.12),
        "alt_amp": (0.01, 0.08),
        "contrast": (22.0, 58.0),
        "alt_contrast": (22.0, 52.0),
        "ecc": (1.0, 1.25),
    },
    "malignant": {
        "alt_p": 0.25,
        "radius": (8.0, 18.0),
        "alt_radius": (4.5, 8.0),
        "amp": (0.09, 0.28),
        "alt_amp": (0.16, 0.33),
        "contrast": (40.0, 95.0),
        "alt_contrast": (55.0, 95.0),
        "ecc": (1.1, 1.9),
    },
}

_BACKGROUND = (45.0, 70.0)
_NOISE_SIGMA = (4.0, 9.0)
_SPACING = (0.5, 1.0)


@dataclass
class SyntheticNodule:
    nodule_id: str
    subject_id: str
    diagnosis: int
    raw: np.ndarray  # uint8 (size, size)
    spacing_x: float
    spacing_y: float
    polygons: list[np.ndarray]  # each (k, 2) float64 (col, row)


def _radial(base: float, amps: np.ndarray, phases: np.ndarray, angle: np.ndarray) -> np.ndarray:
    r = np.full_like(angle, 1.0)
    for amp, phase, k in zip(amps, phases, _HARMONICS):
        r = r + amp * np.cos(k * angle + phase)
    return np.maximum(base * r, _MIN_RADIUS_FACTOR * base)


def _make_nodule(
    rng: np.random.Generator,
    kind: str,
    nodule_id: str,
    subject_id: str,
    diagnosis: int,
    image_size: int,
    extra_polygon: bool,
) -> SyntheticNodule:
    p = _CLASS_PARAMS[kind]
    use_alt = rng.uniform() < p["alt_p"]
    spacing_x = float(rng.uniform(*_SPACING))
    spacing_y = float(rng.uniform(*_SPACING))
    radius = float(rng.uniform(*(p["alt_radius"] if use_alt else p["radius"])))
    ecc = float(rng.uniform(*p["ecc"]))
    rotation = float(rng.uniform(0.0, math.pi))
    amp_total = float(rng.uniform(*(p["alt_amp"] if use_alt else p["amp"])))
    raw_amps = rng.uniform(0.2, 1.0, size=len(_HARMONICS))
    amps = raw_amps / raw_amps.sum() * amp_total
    phases = rng.uniform(0.0, 2.0 * math.pi, size=len(_HARMONICS))
    contrast = float(rng.uniform(*(p["alt_contrast"] if use_alt else p["contrast"])))
    background = float(rng.uniform(*_BACKGROUND))
    noise_sigma = float(rng.uniform(*_NOISE_SIGMA))
    jitter = image_size / 10.0
    cx = image_size / 2.0 + float(rng.uniform(-jitter, jitter))
    cy = image_size / 2.0 + float(rng.uniform(-jitter, jitter))
    noise = rng.normal(0.0, 1.0, size=(image_size, image_size))

    scale_x = math.sqrt(ecc)
    scale_y = 1.0 / math.sqrt(ecc)
    cos_r = math.cos(rotation)
    sin_r = math.sin(rotation)

    rows, cols = np.mgrid[0:image_size, 0:image_size].astype(np.float64)
    u = cols - cx
    v = rows - cy
    a = (cos_r * u + sin_r * v) / scale_x
    b = (-sin_r * u + cos_r * v) / scale_y
    angle = np.arctan2(b, a)
    rho = np.hypot(a, b)
    r_at = _radial(radius, amps, phases, angle)
    profile = np.clip(1.0 - (rho / r_at) ** 2, 0.0, 1.0)
    pixels = background + contrast * profile + noise_sigma * noise
    raw = np.rint(np.clip(pixels, 0.0, 255.0)).astype(np.uint8)

    def contour(offset: float) -> np.ndarray:
        theta = offset + 2.0 * math.pi * np.arange(_CONTOUR_POINTS) / _CONTOUR_POINTS
        r = _radial(radius, amps, phases, theta)
        local_x = r * np.cos(theta) * scale_x
        local_y = r * np.sin(theta) * scale_y
        col = cx + cos_r * local_x - sin_r * local_y
        row = cy + sin_r * local_x + cos_r * local_y
        points = np.stack([col, row], axis=1)
        return np.clip(points, 0.0, float(image_size - 1))

    polygons = [contour(0.0)]
    if extra_polygon:
        polygons.append(contour(math.pi / _CONTOUR_POINTS))
    return SyntheticNodule(
        nodule_id=nodule_id,
        subject_id=subject_id,
        diagnosis=diagnosis,
        raw=raw,
        spacing_x=spacing_x,
        spacing_y=spacing_y,
        polygons=polygons,
    )


def generate_synthetic(
    n_benign: int, n_malignant: int, image_size: int = 96, seed: int = 0
) -> list[SyntheticNodule]:
    """Generate `n_benign` + `n_malignant` nodules, reproducible from `seed`.

    Subjects group three consecutive nodules of one class; every fifth nodule
    carries a second reader outline, and every fourth malignant one is coded
    metastatic (3) instead of primary (2).
    """
    if n_benign < 1 or n_malignant < 1:
        raise InputError("need at least one nodule of each class")
    if image_size < 32:
        raise InputError(f"image_size must be >= 32, got {image_size}")
    rng = np.random.default_rng(seed)
    nodules: list[SyntheticNodule] = []
    for i in range(n_benign):
        nodules.append(
            _make_nodule(
                rng,
                "benign",
                nodule_id=f"b{i:04d}",
                subject_id=f"sb{i // 3:03d}",
                diagnosis=1,
                image_size=image_size,
                extra_polygon=(i % 5 == 0),
            )
        )
    for i in range(n_malignant):
        nodules.append(
            _make_nodule(
                rng,
                "malignant",
                nodule_id=f"m{i:04d}",
                subject_id=f"sm{i // 3:03d}",
                diagnosis=3 if i % 4 == 0 else 2,
                image_size=image_size,
                extra_polygon=(i % 5 == 0),
            )
        )
    return nodules


def write_synthetic_dataset(nodules: list[SyntheticNodule], out_dir: str | Path) -> Path:
    """Write PGM images plus a schema-1 manifest; returns the manifest path."""
    out = Path(out_dir)
    images = out / "images"
    images.mkdir(parents=True, exist_ok=True)
    entries: list[dict] = []
    for nod in nodules:
        rel = f"images/{nod.nodule_id}.pgm"
        write_pgm(out / rel, nod.raw)
        entries.append(
            {
                "nodule_id": nod.nodule_id,
                "subject_id": nod.subject_id,
                "image": rel,
                "spacing_x": nod.spacing_x,
                "spacing_y": nod.spacing_y,
                "polygons": [
                    [[float(x), float(y)] for x, y in poly] for poly in nod.polygons
                ],
                "diagnosis": nod.diagnosis,
            }
        )
    manifest = out / "manifest.json"
    save_manifest(manifest, entries)
    return manifest


def to_dataset(nodules: list[SyntheticNodule]) -> Dataset:
    """View generated nodules as a loaded Dataset without touching disk."""
    samples = [
        AnnotatedSample(
            nodule_id=nod.nodule_id,
            subject_id=nod.subject_id,
            image=normalize_intensity(nod.raw, 255, nod.spacing_x, nod.spacing_y),
            polygons=[Polygon(vertices=poly) for poly in nod.polygons],
            label=-1 if nod.diagnosis == 1 else 1,
        )
        for nod in nodules
    ]
    return Dataset(samples=samples, dropped_unknown=0)
