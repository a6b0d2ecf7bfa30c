"""Unit tests for image loading, normalization, rasterization, and masks."""

import numpy as np
import pytest

from noduleclf.errors import ContractError, InputError
from noduleclf.imaging import (
    EmptyMaskError,
    GrayImage,
    Mask,
    Polygon,
    boundary_pixels,
    crop_with_margin,
    load_gray_image,
    load_raw_image,
    mask_bbox,
    normalize_intensity,
    rasterize_polygon,
    read_pgm,
    union_masks,
    write_pgm,
)


# ---------------------------------------------------------------------------
# Intensity normalization.


def test_normalize_maps_8bit_onto_fixed_range():
    raw = np.array([[0, 128], [255, 64]], dtype=np.uint8)
    img = normalize_intensity(raw, 255, 0.7, 0.7)
    expected = raw.astype(float) * 256.0 / 256.0
    assert np.allclose(img.pixels, expected)
    assert img.pixels.max() < 256.0


def test_normalize_maps_16bit_onto_same_range():
    raw = np.array([[0, 65535]], dtype=np.uint16)
    img = normalize_intensity(raw, 65535, 1.0, 1.0)
    assert img.pixels[0, 0] == 0.0
    assert 255.9 < img.pixels[0, 1] < 256.0


def test_normalize_rejects_out_of_range_values():
    with pytest.raises(InputError):
        normalize_intensity(np.array([[300]]), 255, 1.0, 1.0)
    with pytest.raises(InputError):
        normalize_intensity(np.array([[-1]]), 255, 1.0, 1.0)
    with pytest.raises(InputError):
        normalize_intensity(np.array([[1]]), 0, 1.0, 1.0)


def test_gray_image_validates_range_and_spacing():
    with pytest.raises(ContractError):
        GrayImage(pixels=np.full((2, 2), 256.0), spacing_x=1.0, spacing_y=1.0)
    with pytest.raises(ContractError):
        GrayImage(pixels=np.zeros((2, 2)), spacing_x=0.0, spacing_y=1.0)
    with pytest.raises(ContractError):
        GrayImage(pixels=np.array([[np.nan]]), spacing_x=1.0, spacing_y=1.0)


# ---------------------------------------------------------------------------
# Rasterization. The oracle is a scalar even-odd ray cast with the same tie
# conventions (centers on an edge count as inside).


def _oracle_inside(px: float, py: float, vertices: np.ndarray) -> bool:
    k = len(vertices)
    for i in range(k):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % k]
        if (
            min(x1, x2) <= px <= max(x1, x2)
            and min(y1, y2) <= py <= max(y1, y2)
            and (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1) == 0.0
        ):
            return True
    inside = False
    for i in range(k):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % k]
        if y1 == y2:
            continue
        if (y1 > py) != (y2 > py):
            x_at = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < x_at:
                inside = not inside
    return inside


def test_rasterize_axis_aligned_square_includes_edge_centers():
    poly = Polygon(vertices=np.array([[1.0, 1.0], [4.0, 1.0], [4.0, 4.0], [1.0, 4.0]]))
    mask = rasterize_polygon(poly, 6, 6)
    expected = np.zeros((6, 6), dtype=bool)
    expected[1:5, 1:5] = True  # corners/edges at integer centers are included
    assert np.array_equal(mask.bits, expected)


def test_rasterize_diamond():
    poly = Polygon(vertices=np.array([[2.0, 0.0], [4.0, 2.0], [2.0, 4.0], [0.0, 2.0]]))
    mask = rasterize_polygon(poly, 5, 5)
    for r in range(5):
        for c in range(5):
            assert mask.bits[r, c] == (abs(c - 2) + abs(r - 2) <= 2)


def test_rasterize_zero_area_polygon_raises():
    degenerate = Polygon(vertices=np.array([[1.0, 1.0], [3.0, 3.0], [2.0, 2.0]]))
    with pytest.raises(EmptyMaskError):
        rasterize_polygon(degenerate, 6, 6)


def test_rasterize_polygon_covering_no_center_raises():
    tiny = Polygon(
        vertices=np.array([[1.2, 1.2], [1.8, 1.2], [1.8, 1.8], [1.2, 1.8]])
    )
    with pytest.raises(EmptyMaskError):
        rasterize_polygon(tiny, 4, 4)


def test_rasterize_matches_scalar_oracle_on_random_polygons():
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(60):
        k = int(rng.integers(3, 9))
        vertices = rng.uniform(0.0, 14.0, size=(k, 2))
        poly = Polygon(vertices=vertices)
        if poly.signed_area() == 0.0:
            continue
        try:
            mask = rasterize_polygon(poly, 15, 15)
        except EmptyMaskError:
            # the oracle must agree that no center is covered
            assert not any(
                _oracle_inside(float(c), float(r), vertices)
                for r in range(15)
                for c in range(15)
            )
            continue
        for r in range(15):
            for c in range(15):
                assert mask.bits[r, c] == _oracle_inside(float(c), float(r), vertices), (
                    f"pixel ({r},{c}) disagrees for vertices {vertices!r}"
                )
        checked += 1
    assert checked >= 40


def test_union_masks_is_pixelwise_or_and_checks_shapes():
    a = Mask(bits=np.array([[True, False], [False, False]]))
    b = Mask(bits=np.array([[False, False], [False, True]]))
    u = union_masks([a, b])
    assert np.array_equal(u.bits, [[True, False], [False, True]])
    with pytest.raises(ContractError):
        union_masks([a, Mask(bits=np.zeros((3, 3), dtype=bool))])
    with pytest.raises(ContractError):
        union_masks([])


# ---------------------------------------------------------------------------
# Bounding box, crop margin, boundary.


def test_mask_bbox_and_empty_mask():
    bits = np.zeros((5, 7), dtype=bool)
    bits[1:3, 2:6] = True
    assert mask_bbox(Mask(bits=bits)) == (1, 2, 2, 5)
    with pytest.raises(EmptyMaskError):
        mask_bbox(Mask(bits=np.zeros((2, 2), dtype=bool)))


def test_crop_margin_rounding_does_not_inflate_exact_products():
    # 0.05 * 40 is 2.0000000000000004 in floats; the pad must still be 2.
    img = GrayImage(pixels=np.zeros((100, 100)), spacing_x=1.0, spacing_y=1.0)
    bits = np.zeros((100, 100), dtype=bool)
    bits[30:70, 30:70] = True  # 40 x 40 box
    crop = crop_with_margin(img, Mask(bits=bits), margin=0.05)
    assert crop.pixels.shape == (44, 44)


def test_crop_margin_ceils_fractional_pads_and_clips_at_borders():
    img = GrayImage(pixels=np.zeros((10, 10)), spacing_x=1.0, spacing_y=1.0)
    bits = np.zeros((10, 10), dtype=bool)
    bits[0:3, 0:5] = True  # 3 rows -> pad ceil(0.15)=1; 5 cols -> pad ceil(0.25)=1
    crop = crop_with_margin(img, Mask(bits=bits), margin=0.05)
    assert crop.pixels.shape == (4, 6)  # clipped at top/left image borders


def test_crop_preserves_pixels_and_spacing():
    rng = np.random.default_rng(3)
    pixels = rng.uniform(0, 255, size=(12, 12))
    img = GrayImage(pixels=pixels, spacing_x=0.6, spacing_y=0.8)
    bits = np.zeros((12, 12), dtype=bool)
    bits[4:7, 5:9] = True
    crop = crop_with_margin(img, Mask(bits=bits), margin=0.0)
    assert np.array_equal(crop.pixels, pixels[4:7, 5:9])
    assert (crop.spacing_x, crop.spacing_y) == (0.6, 0.8)


def test_boundary_pixels_against_scalar_oracle():
    rng = np.random.default_rng(11)
    for _ in range(30):
        bits = rng.uniform(size=(9, 9)) < 0.45
        if not bits.any():
            bits[4, 4] = True
        got = {tuple(rc) for rc in boundary_pixels(Mask(bits=bits))}
        expected = set()
        for r in range(9):
            for c in range(9):
                if not bits[r, c]:
                    continue
                on_border = False
                for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    rr, cc = r + dr, c + dc
                    if not (0 <= rr < 9 and 0 <= cc < 9) or not bits[rr, cc]:
                        on_border = True
                if on_border:
                    expected.add((r, c))
        assert got == expected


# ---------------------------------------------------------------------------
# File formats.


def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    raw = rng.integers(0, 256, size=(7, 9)).astype(np.uint8)
    path = tmp_path / "img.pgm"
    write_pgm(path, raw)
    back, maxval = read_pgm(path)
    assert maxval == 255
    assert np.array_equal(back, raw)


def test_pgm_header_with_comments(tmp_path):
    raw = np.arange(6, dtype=np.uint8).reshape(2, 3)
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n3 2\n255\n" + raw.tobytes())
    back, maxval = read_pgm(path)
    assert maxval == 255
    assert np.array_equal(back, raw)


def test_pgm_16bit_big_endian(tmp_path):
    raw = np.array([[0, 1000], [40000, 65535]], dtype=np.uint16)
    path = tmp_path / "w.pgm"
    path.write_bytes(b"P5\n2 2\n65535\n" + raw.astype(">u2").tobytes())
    back, maxval = read_pgm(path)
    assert maxval == 65535
    assert np.array_equal(back, raw)


def test_png_round_trip(tmp_path):
    from PIL import Image

    raw = np.random.default_rng(5).integers(0, 256, size=(6, 5)).astype(np.uint8)
    path = tmp_path / "img.png"
    Image.fromarray(raw, mode="L").save(path)
    back, default_max = load_raw_image(path)
    assert default_max == 255
    assert np.array_equal(back, raw)


def test_load_raw_image_rejects_unknown_format(tmp_path):
    path = tmp_path / "bogus.dat"
    path.write_bytes(b"GIF89a not supported")
    with pytest.raises(InputError):
        load_raw_image(path)
    with pytest.raises(InputError):
        load_raw_image(tmp_path / "missing.pgm")


def test_load_gray_image_applies_source_max_override(tmp_path):
    raw = np.array([[0, 100, 200]], dtype=np.uint8)
    path = tmp_path / "o.pgm"
    write_pgm(path, raw)
    img = load_gray_image(path, 1.0, 1.0, source_max=1023)
    assert np.allclose(img.pixels, raw * 256.0 / 1024.0)
