"""Unit tests for feature extraction, standardization, and the feature CSV."""

import math

import numpy as np
import pytest

from noduleclf.errors import ContractError, InputError
from noduleclf.features import (
    FeatureTable,
    FeatureVector,
    Standardizer,
    apply_standardizer,
    assemble_feature_vector,
    feature_names,
    fit_standardizer,
    geometric_features,
    gray_histogram,
    nodule_features,
    oriented_gradient_histogram,
    read_feature_csv,
    write_feature_csv,
)
from noduleclf.imaging import GrayImage, Mask, Polygon


# ---------------------------------------------------------------------------
# Geometric features.


def test_geometry_of_a_rectangle_by_hand():
    bits = np.zeros((10, 10), dtype=bool)
    bits[2:5, 3:8] = True  # 3 rows x 5 cols; (3,4),(3,5),(3,6) are interior
    sx, sy = 0.5, 2.0
    geo = geometric_features(Mask(bits=bits), sx, sy)
    assert geo.area_mm2 == 15 * sx * sy
    assert geo.perimeter_mm == 12 * (sx + sy) / 2.0
    assert geo.aspect_ratio == (3 * sy) / (5 * sx)
    # farthest boundary pair: (2,3) and (4,7) -> dx=4*0.5, dy=2*2.0
    assert geo.diameter_mm == pytest.approx(math.hypot(4 * sx, 2 * sy), abs=1e-12)


def test_single_pixel_mask_gets_mean_pitch_diameter():
    bits = np.zeros((4, 4), dtype=bool)
    bits[2, 1] = True
    geo = geometric_features(Mask(bits=bits), 0.6, 0.8)
    assert geo.diameter_mm == pytest.approx((0.6 + 0.8) / 2.0, abs=1e-15)
    assert geo.area_mm2 == pytest.approx(0.48, abs=1e-15)
    assert geo.aspect_ratio == pytest.approx(0.8 / 0.6, abs=1e-15)


def test_geometry_rejects_empty_mask_and_bad_spacing():
    with pytest.raises(ContractError):
        geometric_features(Mask(bits=np.zeros((3, 3), dtype=bool)), 1.0, 1.0)
    bits = np.ones((2, 2), dtype=bool)
    with pytest.raises(ContractError):
        geometric_features(Mask(bits=bits), 0.0, 1.0)


# ---------------------------------------------------------------------------
# Gray histogram.


def _image(pixels, sx=1.0, sy=1.0):
    return GrayImage(pixels=np.asarray(pixels, dtype=np.float64), spacing_x=sx, spacing_y=sy)


def test_gray_histogram_bins_are_fixed_width_over_256():
    img = _image([[0.0, 15.999], [16.0, 255.0]])
    h = gray_histogram(img, bins=16)
    assert h.values[0] == pytest.approx(0.5)  # 0.0 and 15.999 share bin 0
    assert h.values[1] == pytest.approx(0.25)
    assert h.values[15] == pytest.approx(0.25)
    assert h.values.sum() == pytest.approx(1.0, abs=1e-12)


def test_gray_histogram_constant_image_is_one_hot():
    h = gray_histogram(_image(np.full((5, 5), 100.0)), bins=16)
    expected = np.zeros(16)
    expected[int(100.0 * 16 / 256)] = 1.0
    assert np.allclose(h.values, expected)


def test_gray_histogram_does_not_adapt_to_content():
    # same shape, shifted values: bins shift, the range does not rescale
    lo = gray_histogram(_image(np.full((3, 3), 10.0)), bins=16)
    hi = gray_histogram(_image(np.full((3, 3), 250.0)), bins=16)
    assert lo.values[0] == 1.0
    assert hi.values[15] == 1.0


# ---------------------------------------------------------------------------
# Oriented gradient histogram.


def test_ogh_horizontal_ramp_lands_in_bin_zero():
    img = _image(np.tile(np.arange(8.0) * 4.0, (6, 1)))
    h = oriented_gradient_histogram(img, bins=9)
    assert h.values[0] == pytest.approx(1.0)


def test_ogh_vertical_ramp_lands_in_the_90_degree_bin():
    img = _image(np.tile((np.arange(8.0) * 4.0)[:, None], (1, 6)))
    h = oriented_gradient_histogram(img, bins=9)
    assert h.values[int(90 * 9 / 180)] == pytest.approx(1.0)


def test_ogh_diagonal_ramp_splits_exactly_between_known_bins():
    # pixels = 2(r + c) on 8x8: interior gradients are (2, 2) -> 45 degrees,
    # replicated borders halve one component -> (2, 1) or (1, 2), and the
    # four corners give (1, 1). Expected masses follow from the magnitudes.
    rows, cols = np.mgrid[0:8, 0:8].astype(float)
    img = _image((rows + cols) * 2.0)
    h = oriented_gradient_histogram(img, bins=9)
    total = (36 * 2 + 4) * math.sqrt(2.0) + 24 * math.sqrt(5.0)
    assert h.values[2] == pytest.approx((36 * 2 + 4) * math.sqrt(2.0) / total, abs=1e-12)
    assert h.values[1] == pytest.approx(12 * math.sqrt(5.0) / total, abs=1e-12)
    assert h.values[3] == pytest.approx(12 * math.sqrt(5.0) / total, abs=1e-12)
    assert h.values.sum() == pytest.approx(1.0, abs=1e-12)


def test_ogh_constant_image_is_all_zero():
    h = oriented_gradient_histogram(_image(np.full((4, 4), 7.0)), bins=9)
    assert np.all(h.values == 0.0)


def test_ogh_orientation_wraps_modulo_180():
    # descending ramp: gradient points in -x, phi = 180 -> wraps to bin 0
    img = _image(np.tile(np.arange(8.0, 0.0, -1.0) * 4.0, (6, 1)))
    h = oriented_gradient_histogram(img, bins=9)
    assert h.values[0] == pytest.approx(1.0)


def test_ogh_requires_two_by_two():
    with pytest.raises(ContractError):
        oriented_gradient_histogram(_image(np.zeros((1, 5))), bins=9)


def test_ogh_magnitude_weighting():
    # two vertical seams: one strong, one weak, plus flat elsewhere
    pixels = np.zeros((4, 6))
    pixels[:, 0] = 0.0
    pixels[:, 1] = 40.0  # strong horizontal gradient around col 0-2
    pixels[:, 2:] = 40.0
    h = oriented_gradient_histogram(_image(pixels), bins=9)
    assert h.values[0] == pytest.approx(1.0)  # all gradient mass is horizontal


# ---------------------------------------------------------------------------
# Assembly and vector layout.


def test_assemble_order_and_names():
    bits = np.zeros((6, 6), dtype=bool)
    bits[2:4, 2:5] = True
    mask = Mask(bits=bits)
    geo = geometric_features(mask, 1.0, 1.0)
    img = _image(np.random.default_rng(0).uniform(0, 255, size=(6, 6)))
    gh = gray_histogram(img, 16)
    ogh = oriented_gradient_histogram(img, 9)
    vec = assemble_feature_vector(geo, gh, ogh, 16, 9, label=1)
    assert vec.values.shape == (29,)
    assert np.array_equal(vec.values[:4], geo.as_array())
    assert np.array_equal(vec.values[4:20], gh.values)
    assert np.array_equal(vec.values[20:], ogh.values)
    names = feature_names(16, 9)
    assert len(names) == 29
    assert names[0] == "f_diam_mm" and names[4] == "f_gh_00" and names[-1] == "f_ogh_08"


def test_assemble_rejects_mismatched_histograms():
    bits = np.ones((2, 2), dtype=bool)
    geo = geometric_features(Mask(bits=bits), 1.0, 1.0)
    img = _image(np.random.default_rng(1).uniform(0, 255, size=(4, 4)))
    gh = gray_histogram(img, 8)
    ogh = oriented_gradient_histogram(img, 9)
    with pytest.raises(ContractError):
        assemble_feature_vector(geo, gh, ogh, 16, 9)
    with pytest.raises(ContractError):
        assemble_feature_vector(geo, ogh, gh, 16, 9)


def test_nodule_features_end_to_end_on_a_synthetic_blob():
    rng = np.random.default_rng(2)
    pixels = rng.uniform(20, 60, size=(20, 20))
    pixels[6:14, 6:14] += 120.0
    img = GrayImage(pixels=np.clip(pixels, 0, 255.9), spacing_x=0.7, spacing_y=0.7)
    poly = Polygon(
        vertices=np.array([[6.0, 6.0], [13.0, 6.0], [13.0, 13.0], [6.0, 13.0]])
    )
    vec = nodule_features(img, [poly], margin=0.05, label=-1)
    assert vec.values.shape == (29,)
    assert vec.label == -1
    assert vec.values[2] == pytest.approx(64 * 0.49, abs=1e-9)  # 8x8 pixels area


# ---------------------------------------------------------------------------
# Standardization.


def test_standardizer_round_trip_and_constant_columns():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(40, 5))
    X[:, 3] = 2.5  # constant column
    std = fit_standardizer(X)
    Z = std.transform(X)
    assert np.allclose(Z.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(Z[:, 3], 0.0)
    assert np.allclose(std.inverse(Z), X, atol=1e-12)
    back = Standardizer.from_dict(std.to_dict())
    assert np.array_equal(back.means, std.means)
    assert np.array_equal(back.stds, std.stds)


def test_standardizer_needs_two_rows_and_matching_width():
    with pytest.raises(ContractError):
        fit_standardizer(np.zeros((1, 3)))
    std = fit_standardizer(np.random.default_rng(0).normal(size=(5, 3)))
    with pytest.raises(ContractError):
        std.transform(np.zeros((2, 4)))


def test_apply_standardizer_keeps_label():
    std = Standardizer(means=np.array([1.0, 2.0]), stds=np.array([2.0, 4.0]))
    vec = FeatureVector(values=np.array([3.0, 10.0]), label=1)
    out = apply_standardizer(std, vec)
    assert np.allclose(out.values, [1.0, 2.0])
    assert out.label == 1


# ---------------------------------------------------------------------------
# Feature CSV round trip.


def _toy_table():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(6, 29)) * rng.uniform(0.001, 1000.0, size=29)
    return FeatureTable(
        ids=[f"n{i:03d}" for i in range(6)],
        labels=np.array([-1, 1, -1, 1, 1, -1]),
        X=X,
        names=feature_names(),
    )


def test_feature_csv_round_trip_is_bit_exact(tmp_path):
    table = _toy_table()
    path = tmp_path / "features.csv"
    write_feature_csv(path, table)
    back = read_feature_csv(path)
    assert back.ids == table.ids
    assert np.array_equal(back.labels, table.labels)
    assert np.array_equal(back.X, table.X)  # repr round trip is exact
    assert back.names == table.names


def test_feature_csv_rejects_malformed_input(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("id,label,f\nn1,1\n")
    with pytest.raises(InputError):
        read_feature_csv(path)
    path.write_text("nodule,label,f\nn1,1,0.5\n")
    with pytest.raises(InputError):
        read_feature_csv(path)
    path.write_text("id,label,f\nn1,benign,0.5\n")
    with pytest.raises(InputError):
        read_feature_csv(path)
    path.write_text("")
    with pytest.raises(InputError):
        read_feature_csv(path)
    with pytest.raises(InputError):
        read_feature_csv(tmp_path / "missing.csv")
