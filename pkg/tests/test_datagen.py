import colorsys

import numpy as np
import pytest

from dress import datagen
from dress.datagen import (
    BACKDROP_SATURATION,
    FactorSpec,
    default_factor_specs,
    generate_dataset,
    hue_rgb,
    render_scene,
    shape_mask,
    split_dataset,
)


def test_default_spec_layout():
    spec = default_factor_specs()
    assert [f.name for f in spec] == [
        "floor-hue", "wall-hue", "object-hue",
        "object-scale", "object-shape", "object-x-offset",
    ]
    assert [f.cardinality for f in spec] == [10, 10, 10, 8, 4, 15]


def test_full_factorial_product_matches_published_count():
    # [PAPER] 10*10*10*8*4*15 distinct scenes
    cards = [f.cardinality for f in default_factor_specs()]
    assert int(np.prod(cards)) == 480_000


def test_hue_rgb_matches_colorsys_and_is_distinct():
    for card in (4, 10, 15):
        seen = set()
        for v in range(card):
            rgb = hue_rgb(v, card)
            expect = colorsys.hsv_to_rgb(v / card, 1.0, 1.0)
            assert np.allclose(rgb, expect)
            seen.add(tuple(np.round(rgb, 6)))
        assert len(seen) == card


def test_render_scene_shape_and_range():
    img = render_scene([0, 0, 0, 0, 0, 0], 32)
    assert img.shape == (32, 32, 3)
    assert img.dtype == np.float32
    assert img.min() >= 0.0 and img.max() <= 1.0


def test_render_regions_follow_masks():
    # Oracle: every pixel is exactly one of wall / floor / object color,
    # selected by half-plane and shape-mask membership.
    factors = [2, 5, 8, 3, 1, 10]
    res = 32
    img = render_scene(factors, res)
    mask = shape_mask(factors, res)
    wall = hue_rgb(5, 10, BACKDROP_SATURATION)
    floor = hue_rgb(2, 10, BACKDROP_SATURATION)
    obj = hue_rgb(8, 10)
    for y in range(res):
        for x in range(res):
            if mask[y, x]:
                expect = obj
            elif y < res // 2:
                expect = wall
            else:
                expect = floor
            assert np.array_equal(img[y, x], expect), (y, x)


def test_factor_edit_changes_only_its_region():
    base = [4, 4, 4, 4, 2, 7]
    res = 32
    img0 = render_scene(base, res)
    mask = shape_mask(base, res)
    half = res // 2

    wall_edit = list(base)
    wall_edit[1] = 9
    diff = np.any(render_scene(wall_edit, res) != img0, axis=-1)
    assert diff.any()
    assert not diff[half:].any()
    assert not diff[mask].any()

    floor_edit = list(base)
    floor_edit[0] = 9
    diff = np.any(render_scene(floor_edit, res) != img0, axis=-1)
    assert diff.any()
    assert not diff[:half].any()
    assert not diff[mask].any()

    obj_edit = list(base)
    obj_edit[2] = 9
    diff = np.any(render_scene(obj_edit, res) != img0, axis=-1)
    assert diff.any()
    assert diff[mask].all()
    assert not diff[~mask].any()


def test_shape_mask_scale_monotone_and_offset_moves_center():
    for shape in range(4):
        areas = [shape_mask([0, 0, 0, s, shape, 7], 32).sum() for s in range(8)]
        assert all(a2 >= a1 for a1, a2 in zip(areas, areas[1:])), shape
        assert areas[0] > 0

    centers = []
    for off in range(15):
        m = shape_mask([0, 0, 0, 4, 0, off], 64)
        centers.append(np.nonzero(m)[1].mean())
    assert all(c2 > c1 for c1, c2 in zip(centers, centers[1:]))


def test_mask_symmetry_at_centered_offset():
    # offset index 7 of 15 puts the shape dead center; mask must mirror in x
    for shape in range(4):
        m = shape_mask([0, 0, 0, 5, shape, 7], 33)
        assert np.array_equal(m, m[:, ::-1]), shape


def test_out_of_range_factor_names_the_factor():
    with pytest.raises(ValueError, match="object-shape"):
        render_scene([0, 0, 0, 0, 4, 0], 32)
    with pytest.raises(ValueError, match="floor-hue"):
        render_scene([10, 0, 0, 0, 0, 0], 32)
    with pytest.raises(ValueError, match="object-x-offset"):
        render_scene([0, 0, 0, 0, 0, -1], 32)


def test_renderer_rejects_unknown_layout():
    bad = default_factor_specs()
    bad[2] = FactorSpec("object-brightness", 10)
    with pytest.raises(ValueError, match="object-brightness"):
        render_scene([0] * 6, 32, spec=bad)


def test_generate_dataset_deterministic_and_unique():
    spec = default_factor_specs()
    d1 = generate_dataset(spec, 300, 16, seed=11)
    d2 = generate_dataset(spec, 300, 16, seed=11)
    d3 = generate_dataset(spec, 300, 16, seed=12)
    assert np.array_equal(d1.images, d2.images)
    assert np.array_equal(d1.labels, d2.labels)
    assert not np.array_equal(d1.labels, d3.labels)
    assert len({tuple(r) for r in d1.labels}) == 300


def test_generate_dataset_matches_single_renders():
    d = generate_dataset(default_factor_specs(), 64, 24, seed=3)
    for i in range(len(d)):
        assert np.array_equal(d.images[i], render_scene(d.labels[i], 24))


def test_generate_dataset_count_bounds():
    small = [
        FactorSpec("floor-hue", 2), FactorSpec("wall-hue", 2),
        FactorSpec("object-hue", 2), FactorSpec("object-scale", 2),
        FactorSpec("object-shape", 2), FactorSpec("object-x-offset", 2),
    ]
    with pytest.raises(ValueError, match="count"):
        generate_dataset(small, 65, 8, seed=0)
    with pytest.raises(ValueError, match="count"):
        generate_dataset(small, 0, 8, seed=0)
    full = generate_dataset(small, 64, 8, seed=0)
    assert len({tuple(r) for r in full.labels}) == 64


def test_full_grid_enumerates_every_combination():
    small = [
        FactorSpec("floor-hue", 3), FactorSpec("wall-hue", 2),
        FactorSpec("object-hue", 2), FactorSpec("object-scale", 2),
        FactorSpec("object-shape", 3), FactorSpec("object-x-offset", 4),
    ]
    total = 3 * 2 * 2 * 2 * 3 * 4
    d = generate_dataset(small, total, 8, seed=5)
    got = {tuple(r) for r in d.labels}
    assert len(got) == total
    for f, card in enumerate([3, 2, 2, 2, 3, 4]):
        assert set(d.labels[:, f]) == set(range(card))


def test_split_dataset_partitions_exactly():
    d = generate_dataset(default_factor_specs(), 250, 8, seed=2)
    tr, te = split_dataset(d, 0.8, seed=9)
    assert len(tr) == 200 and len(te) == 50
    tr2, te2 = split_dataset(d, 0.8, seed=9)
    assert np.array_equal(tr.labels, tr2.labels)
    assert np.array_equal(te.images, te2.images)

    all_rows = {tuple(r) for r in d.labels}
    got_rows = [tuple(r) for r in tr.labels] + [tuple(r) for r in te.labels]
    assert len(got_rows) == 250
    assert set(got_rows) == all_rows

    for bad in (0.0, 1.0, -0.2, 1.7):
        with pytest.raises(ValueError, match="train_fraction"):
            split_dataset(d, bad, seed=0)


def test_flat_images_layout():
    d = generate_dataset(default_factor_specs(), 5, 16, seed=0)
    flat = d.flat_images()
    assert flat.shape == (5, 16 * 16 * 3)
    assert np.array_equal(flat[3], d.images[3].ravel())
