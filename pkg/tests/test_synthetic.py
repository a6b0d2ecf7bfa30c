"""Unit tests for the synthetic dataset generator."""

import numpy as np
import pytest

from noduleclf.dataset import load_manifest
from noduleclf.errors import InputError
from noduleclf.features import nodule_features
from noduleclf.synthetic import generate_synthetic, to_dataset, write_synthetic_dataset


def test_generator_is_deterministic_per_seed():
    a = generate_synthetic(5, 5, image_size=64, seed=42)
    b = generate_synthetic(5, 5, image_size=64, seed=42)
    c = generate_synthetic(5, 5, image_size=64, seed=43)
    for na, nb in zip(a, b):
        assert np.array_equal(na.raw, nb.raw)
        assert na.spacing_x == nb.spacing_x
        assert all(np.array_equal(pa, pb) for pa, pb in zip(na.polygons, nb.polygons))
    assert any(not np.array_equal(na.raw, nc.raw) for na, nc in zip(a, c))


def test_generator_ids_subjects_diagnoses_and_extra_outlines():
    nodules = generate_synthetic(7, 6, image_size=64, seed=1)
    assert len(nodules) == 13
    benign, malignant = nodules[:7], nodules[7:]
    assert [n.nodule_id for n in benign] == [f"b{i:04d}" for i in range(7)]
    assert [n.nodule_id for n in malignant] == [f"m{i:04d}" for i in range(6)]
    assert all(n.diagnosis == 1 for n in benign)
    assert [n.diagnosis for n in malignant] == [3, 2, 2, 2, 3, 2]
    # subjects group three consecutive nodules
    assert benign[0].subject_id == benign[2].subject_id != benign[3].subject_id
    # every fifth nodule of each class carries a second reader outline
    assert [len(n.polygons) for n in benign] == [2, 1, 1, 1, 1, 2, 1]


def test_generator_output_ranges():
    for nod in generate_synthetic(4, 4, image_size=48, seed=3):
        assert nod.raw.dtype == np.uint8
        assert nod.raw.shape == (48, 48)
        assert 0.5 <= nod.spacing_x <= 1.0
        assert 0.5 <= nod.spacing_y <= 1.0
        for poly in nod.polygons:
            assert poly.shape[0] >= 3
            assert poly.min() >= 0.0
            assert poly.max() <= 47.0


def test_generator_rejects_bad_parameters():
    with pytest.raises(InputError):
        generate_synthetic(0, 5)
    with pytest.raises(InputError):
        generate_synthetic(5, 5, image_size=16)


def test_written_dataset_loads_and_extracts(tmp_path):
    nodules = generate_synthetic(4, 4, image_size=64, seed=11)
    manifest = write_synthetic_dataset(nodules, tmp_path)
    ds = load_manifest(manifest)
    assert len(ds) == 8
    assert ds.dropped_unknown == 0
    assert sorted(s.label for s in ds.samples) == [-1] * 4 + [1] * 4
    vec = nodule_features(ds.samples[0].image, ds.samples[0].polygons)
    assert vec.values.shape == (29,)
    assert np.all(np.isfinite(vec.values))


def test_in_memory_dataset_matches_disk_round_trip(tmp_path):
    nodules = generate_synthetic(3, 3, image_size=64, seed=21)
    manifest = write_synthetic_dataset(nodules, tmp_path)
    from_disk = load_manifest(manifest)
    in_memory = to_dataset(nodules)
    for a, b in zip(from_disk.samples, in_memory.samples):
        assert a.nodule_id == b.nodule_id
        assert a.label == b.label
        assert np.array_equal(a.image.pixels, b.image.pixels)
