import numpy as np
import pytest

from topocomp import grid
from topocomp.errors import DegenerateFieldError

from oracles import freudenthal_link


def test_total_order_distinct_values():
    f = grid.ScalarField((8, 1, 1), np.array([5., 1., 2., 3., 4., 0., 6., 7.]))
    assert grid.total_order_less(5, 3, f)       # 0.0 < 3.0
    assert not grid.total_order_less(3, 5, f)


def test_total_order_tie_breaks_by_index():
    vals = np.full(10, 0.7)
    f = grid.ScalarField((10, 1, 1), vals)
    assert grid.total_order_less(3, 7, f)
    assert not grid.total_order_less(7, 3, f)


def test_total_order_irreflexive():
    f = grid.ScalarField((2, 2, 1), np.array([1., 1., 2., 2.]))
    assert not grid.total_order_less(2, 2, f)


def test_total_order_out_of_range():
    f = grid.ScalarField((2, 1, 1), np.array([0., 1.]))
    with pytest.raises(ValueError):
        grid.total_order_less(0, 5, f)


def test_total_order_is_strict_total_order(rng):
    f = grid.ScalarField((4, 4, 4), rng.integers(0, 4, 64).astype(float))
    for _ in range(300):
        a, b, c = rng.integers(0, 64, 3)
        if a != b:
            assert grid.total_order_less(int(a), int(b), f) != \
                grid.total_order_less(int(b), int(a), f)
        if grid.total_order_less(int(a), int(b), f) and \
                grid.total_order_less(int(b), int(c), f):
            assert grid.total_order_less(int(a), int(c), f)


def test_neighbor_counts_interior_and_corner():
    f = grid.ScalarField((8, 8, 8), np.zeros(512))
    center = f.index_of(4, 4, 4)
    assert len(grid.neighbors(center, f)) == 14
    assert len(grid.neighbors(f.index_of(0, 0, 0), f)) == 7


def test_single_vertex_has_no_neighbors():
    f = grid.ScalarField((1, 1, 1), np.array([1.0]))
    assert grid.neighbors(0, f) == []


def test_neighbors_match_tetrahedral_enumeration():
    dims = (4, 5, 3)
    f = grid.ScalarField(dims, np.zeros(60))
    for v in range(60):
        assert set(grid.neighbors(v, f)) == freudenthal_link(v, dims), v


def test_neighbors_symmetric(rng):
    dims = (5, 4, 6)
    f = grid.ScalarField(dims, np.zeros(120))
    table = grid.neighbor_table(dims)
    for v in range(120):
        for w in grid.neighbors(v, f):
            assert v in grid.neighbors(w, f)
        row = [x for x in table[v] if x >= 0]
        assert row == grid.neighbors(v, f)


def test_neighbors_out_of_range():
    f = grid.ScalarField((2, 2, 2), np.zeros(8))
    with pytest.raises(ValueError):
        grid.neighbors(-1, f)


def test_index_round_trip(rng):
    for _ in range(20):
        dims = tuple(int(d) for d in rng.integers(1, 9, 3))
        f = grid.ScalarField(dims, np.zeros(int(np.prod(dims))))
        for v in rng.integers(0, f.size, 30):
            i, j, k = f.coords_of(int(v))
            assert f.index_of(i, j, k) == int(v)


def test_normalize_affine():
    f = grid.ScalarField((3, 1, 1), np.array([2., 4., 6.]))
    out = grid.normalize(f)
    assert np.allclose(out.values, [0., 0.5, 1.])


def test_normalize_identity_on_unit_range():
    f = grid.ScalarField((3, 1, 1), np.array([0., 0.25, 1.]))
    assert np.array_equal(grid.normalize(f).values, f.values)


def test_normalize_constant_field_raises():
    f = grid.ScalarField((2, 2, 1), np.full(4, 3.0))
    with pytest.raises(DegenerateFieldError):
        grid.normalize(f)


def test_raw_round_trip(tmp_path, rng):
    vals = rng.random(24).astype(np.float32).astype(np.float64)
    f = grid.ScalarField((4, 3, 2), vals, "f32")
    path = tmp_path / "vol.raw"
    grid.write_raw(f, path)
    back = grid.read_raw(path, (4, 3, 2), "f32")
    assert np.array_equal(back.values, f.values)
    f64 = grid.ScalarField((4, 3, 2), rng.random(24), "f64")
    grid.write_raw(f64, path)
    assert np.array_equal(grid.read_raw(path, (4, 3, 2), "f64").values,
                          f64.values)


def test_field_validation():
    with pytest.raises(ValueError):
        grid.ScalarField((2, 2, 2), np.zeros(7))
    with pytest.raises(ValueError):
        grid.ScalarField((2, 2, 1), np.array([0., np.nan, 1., 2.]))
    with pytest.raises(ValueError):
        grid.ScalarField((0, 2, 2), np.zeros(0))


def test_sort_order_reverse_is_exact_mirror(rng):
    f = grid.ScalarField((4, 4, 2), rng.integers(0, 3, 32).astype(float))
    fwd = grid.sort_order(f)
    rev = grid.sort_order(f, reverse=True)
    assert np.array_equal(fwd[::-1], rev)
