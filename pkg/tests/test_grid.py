import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gridscan.errors import DegenerateGrid
from gridscan.grid import (
    GridModel,
    build_grid,
    column_positions,
    connected_components,
    extract_cells,
    group_positions,
    render_overlay,
    row_positions,
    save_cells,
)
from gridscan.imaging import load_image
from gridscan.pipeline import detect_grid

from oracles import flood_fill_components


def _as_tuples(comps):
    return [(c.x, c.y, c.w, c.h, c.area) for c in comps]


def test_components_empty():
    assert connected_components(np.zeros((5, 5), bool)) == []


def test_components_two_pixels():
    m = np.zeros((12, 12), bool)
    m[0, 0] = m[10, 10] = True
    comps = connected_components(m)
    assert [(c.w, c.h) for c in comps] == [(1, 1), (1, 1)]
    assert comps[0].bbox == (0, 0, 1, 1)


def test_components_diagonal_touch_is_one():
    m = np.zeros((6, 6), bool)
    m[0:3, 0] = True
    m[3, 1] = True  # touches (2, 0) only diagonally
    m[3, 2:5] = True
    assert len(connected_components(m)) == 1
    assert _as_tuples(connected_components(m)) == flood_fill_components(m)


@given(arrays(bool, st.tuples(st.integers(1, 32), st.integers(1, 32))))
def test_components_match_flood_fill(mask):
    comps = connected_components(mask)
    assert _as_tuples(comps) == flood_fill_components(mask)
    assert sum(c.area for c in comps) == mask.sum()
    for c in comps:
        assert c.area <= c.w * c.h


def _vertical_lines(xs, h=200, w=600, thickness=2):
    m = np.zeros((h, w), bool)
    for x in xs:
        m[10:190, x : x + thickness] = True
    return m


def test_column_positions_two_lines():
    assert column_positions(_vertical_lines([100, 500])) == [100, 500]


def test_column_positions_empty():
    assert column_positions(np.zeros((50, 50), bool)) == []


def test_column_positions_drop_speck():
    m = _vertical_lines([100])
    m[50:55, 300] = True
    assert column_positions(m) == [100]


def test_column_positions_drop_short_stroke_relative_to_lines():
    m = _vertical_lines([100, 500])
    m[60:100, 300] = True  # 40 px: passes the absolute filter, not the relative one
    assert column_positions(m) == [100, 500]
    assert column_positions(m, min_span_frac=0.0) == [100, 300, 500]


def test_row_positions_mirror():
    m = _vertical_lines([100, 500]).T.copy()
    assert row_positions(m) == [100, 500]
    m[300, 50:55] = True
    assert row_positions(m) == [100, 500]
    assert row_positions(np.zeros((50, 50), bool)) == []


@pytest.mark.parametrize(
    "xs,expected",
    [([100, 105, 200], [100, 200]), ([], []), ([0, 31, 61, 80], [0, 31, 80]), ([5, 35], [5])],
)
def test_group_positions(xs, expected):
    # [0, 31, 61, 80]: 61 - 31 = 30 is not > 30, so 61 drops and 80 (49 past 31) stays
    assert group_positions(xs) == expected


def test_group_positions_rejects_unsorted():
    with pytest.raises(ValueError):
        group_positions([10, 5])


@given(st.lists(st.integers(0, 2000), max_size=40).map(sorted))
def test_group_positions_properties(xs):
    out = group_positions(xs)
    assert all(b - a > 30 for a, b in zip(out, out[1:]))
    it = iter(xs)
    assert all(v in it for v in out)  # subsequence
    if xs:
        assert out[0] == xs[0]
        # every dropped element lies within 30 px of a kept one at or before it
        for x in xs:
            assert any(0 <= x - k <= 30 for k in out)


def test_build_grid():
    assert build_grid([0, 100, 200], [0, 50]).n_cells == 2
    assert build_grid(list(range(0, 1100, 100)), list(range(0, 900, 100))).n_cells == 80
    with pytest.raises(DegenerateGrid):
        build_grid([0], [0, 50])
    with pytest.raises(DegenerateGrid):
        build_grid([0, 10], [])


def test_extract_cells_with_inset():
    img = np.arange(100 * 100, dtype=np.uint32).reshape(100, 100).astype(np.uint8)
    cells = extract_cells(img, GridModel((0, 50, 100), (0, 100)))
    assert [(c.row, c.col) for c in cells] == [(0, 0), (0, 1)]
    assert all(c.image.shape == (96, 46) for c in cells)
    assert np.array_equal(cells[1].image, img[2:98, 52:98])


@given(
    st.lists(st.integers(1, 40), min_size=1, max_size=5),
    st.lists(st.integers(1, 40), min_size=1, max_size=5),
    st.integers(0, 10),
    st.integers(0, 10),
)
def test_extract_cells_partition(widths, heights, x0, y0):
    xs = list(np.cumsum([x0] + widths))
    ys = list(np.cumsum([y0] + heights))
    img = np.zeros((ys[-1] + 3, xs[-1] + 3), np.uint8)
    grid = GridModel(tuple(xs), tuple(ys))
    cells = extract_cells(img, grid, inset=0)
    cover = np.zeros(img.shape, int)
    for cell in cells:
        x, y = xs[cell.col], ys[cell.row]
        h, w = cell.image.shape
        cover[y : y + h, x : x + w] += 1
    assert sum(c.image.size for c in cells) == (xs[-1] - xs[0]) * (ys[-1] - ys[0])
    assert (cover[ys[0] : ys[-1], xs[0] : xs[-1]] == 1).all()
    assert cover.sum() == (xs[-1] - xs[0]) * (ys[-1] - ys[0])


def test_extract_cells_out_of_bounds():
    with pytest.raises(ValueError):
        extract_cells(np.zeros((10, 10), np.uint8), GridModel((0, 20), (0, 5)))


def test_save_cells(tmp_path):
    img = np.random.default_rng(1).integers(0, 256, (90, 330), dtype=np.uint8)
    grid = GridModel(tuple(range(0, 330, 30)), tuple(range(0, 90, 10)))
    cells = extract_cells(img, grid)
    assert len(cells) == 80
    save_cells(cells, tmp_path)
    assert len(list(tmp_path.glob("cell_*.pgm"))) == 80
    cell = next(c for c in cells if (c.row, c.col) == (2, 5))
    assert np.array_equal(load_image(tmp_path / "cell_2_5.pgm"), cell.image)


def test_overlay_colors():
    img = np.full((20, 20), 77, np.uint8)
    out = render_overlay(img, GridModel((5, 15), (3, 12)))
    assert tuple(out[8, 5]) == (255, 0, 0)
    assert tuple(out[3, 5]) == (0, 255, 0)
    assert tuple(out[8, 8]) == (77, 77, 77)
    assert out.shape == (20, 20, 3)


@settings(max_examples=15)
@given(
    st.integers(2, 6),
    st.integers(2, 6),
    st.integers(1, 5),
    st.randoms(use_true_random=False),
)
def test_drawn_grid_recovered(n_v, n_h, thickness, rnd):
    """V vertical and H horizontal full-span lines come back within 3 px."""
    xs = sorted(rnd.sample(range(20, 960), 1))
    while len(xs) < n_v:
        x = xs[-1] + rnd.randint(40, 160)
        if x > 970:
            break
        xs.append(x)
    ys = [20]
    while len(ys) < n_h and ys[-1] + 140 <= 970:
        ys.append(ys[-1] + rnd.randint(40, 140))
    img = np.full((1000, 1000), 255, np.uint8)
    for x in xs:
        img[ys[0] : ys[-1] + thickness, x : x + thickness] = 0
    for y in ys:
        img[y : y + thickness, xs[0] : xs[-1] + thickness] = 0
    if len(xs) < 2 or len(ys) < 2:
        with pytest.raises(DegenerateGrid):
            detect_grid(img)
        return
    g = detect_grid(img).grid
    assert len(g.col_xs) == len(xs) and len(g.row_ys) == len(ys)
    assert max(abs(a - b) for a, b in zip(g.col_xs, xs)) <= 3
    assert max(abs(a - b) for a, b in zip(g.row_ys, ys)) <= 3
