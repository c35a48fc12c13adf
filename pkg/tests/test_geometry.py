"""Rotated boxes: frame exactness, boundary classification, enumeration."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rwre import BoxSpec, PolyBox, box_spec, build_rotation
from rwre.geometry import (
    FAR,
    INTERIOR,
    OTHER_BOUNDARY,
    POSITIVE_BOUNDARY,
    boundary_sites,
    box_sites,
    classify,
    in_box,
    on_positive_side,
    slab_exit_test,
)

E1 = (1.0, 0.0)


# ---------------------------------------------------------------------------
# rotations
# ---------------------------------------------------------------------------


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


unit_vectors = st.builds(
    lambda parts: _unit(parts),
    st.lists(
        st.floats(min_value=-1.0, max_value=1.0).filter(lambda x: abs(x) > 1e-3),
        min_size=2,
        max_size=4,
    ),
)


def test_rotation_axis_cases():
    np.testing.assert_array_equal(build_rotation(E1), np.eye(2))
    np.testing.assert_array_equal(build_rotation((-1.0, 0.0)), np.diag([-1.0, -1.0]))
    with pytest.raises(ValueError):
        build_rotation((0.7, 0.0))  # not unit


@given(unit_vectors)
def test_rotation_is_orthonormal_and_maps_e1(l):
    R = build_rotation(l)
    d = len(l)
    assert np.abs(R.T @ R - np.eye(d)).max() <= 1e-12
    np.testing.assert_allclose(R[:, 0], l, atol=1e-12)


# ---------------------------------------------------------------------------
# classification, exact for axis boxes
# ---------------------------------------------------------------------------


def test_axis_box_classification_table():
    B = box_spec(E1, 5, 5, 5)
    assert B.snap == 0.0  # signed permutation frame: exact integer tests
    assert classify(B, (0, 0)) == INTERIOR
    assert classify(B, (-4, 4)) == INTERIOR
    assert classify(B, (5, 0)) == POSITIVE_BOUNDARY  # face hit is inclusive
    assert classify(B, (5, -4)) == POSITIVE_BOUNDARY
    assert classify(B, (-5, 0)) == OTHER_BOUNDARY
    assert classify(B, (0, 5)) == OTHER_BOUNDARY
    assert classify(B, (0, -5)) == OTHER_BOUNDARY
    assert classify(B, (5, 5)) == FAR  # corner has no interior neighbor
    assert classify(B, (6, 0)) == FAR


def test_axis_box_is_exact_at_large_coordinates():
    n = 2**49
    B = box_spec(E1, n, n, n)
    assert classify(B, (n, 0)) == POSITIVE_BOUNDARY
    assert classify(B, (n - 1, 0)) == INTERIOR
    assert classify(B, (-n, 0)) == OTHER_BOUNDARY
    assert classify(B, (1 - n, n - 1)) == INTERIOR
    assert classify(B, (n + 1, 0)) == FAR


@given(
    st.integers(min_value=-8, max_value=8),
    st.integers(min_value=-8, max_value=8),
    st.integers(min_value=2, max_value=6),
    st.integers(min_value=2, max_value=6),
)
def test_classification_invariant_under_transverse_reflection(x1, x2, L, Lt):
    B = box_spec(E1, L, L, Lt)
    assert classify(B, (x1, x2)) == classify(B, (x1, -x2))


@given(st.integers(min_value=-6, max_value=6), st.integers(min_value=-6, max_value=6))
def test_classify_partitions(x1, x2):
    B = box_spec(E1, 4, 4, 3)
    label = classify(B, (x1, x2))
    inside = bool(in_box(B, np.array([[x1, x2]]))[0])
    assert (label == INTERIOR) == inside
    if label == POSITIVE_BOUNDARY:
        assert bool(on_positive_side(B, np.array([[x1, x2]]))[0])


# ---------------------------------------------------------------------------
# enumeration
# ---------------------------------------------------------------------------


def test_box_sites_axis_case_counts():
    B = box_spec(E1, 5, 5, 5)
    sites = box_sites(B)
    assert sites.shape == (81, 2)  # 9 x 9 interior
    assert bool(in_box(B, sites).all())
    assert np.array_equal(sites, sites[np.lexsort(sites.T[::-1])])  # lexicographic


def test_boundary_sites_are_adjacent_and_outside():
    B = box_spec(E1, 4, 4, 3)
    interior = box_sites(B)
    bdry = boundary_sites(B, interior)
    assert not bool(in_box(B, bdry).any())
    steps = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])
    interior_set = {tuple(s) for s in interior}
    for b in bdry:
        assert any(tuple(b + s) in interior_set for s in steps)


def test_rotated_box_site_enumeration_is_consistent():
    l = _unit((3.0, 4.0))
    B = box_spec(l, 6, 6, 4)
    sites = box_sites(B)
    f = sites @ B.rotation[:, 0]
    t = sites @ B.rotation[:, 1]
    # face hits in a float frame are only resolved to snap precision
    tol = 1e-6
    assert bool(((f > -6 - tol) & (f < 6 + tol) & (np.abs(t) < 4 + tol)).all())
    for b in boundary_sites(B, sites):
        assert classify(B, b) in (POSITIVE_BOUNDARY, OTHER_BOUNDARY)


# ---------------------------------------------------------------------------
# constructors and slabs
# ---------------------------------------------------------------------------


def test_spec_validation():
    with pytest.raises(ValueError):
        BoxSpec(np.array([[1.0, 0.1], [0.0, 1.0]]), 2, 2, 2)  # skewed frame
    with pytest.raises(ValueError):
        box_spec(E1, 0, 2, 2)
    with pytest.raises(ValueError):
        PolyBox(E1, 2.0, 70.0 * 8 + 1)  # widths capped at 70 L^3
    pb = PolyBox(E1, 2.0, 5.0)
    assert pb.spec().L_plus == 2.0


def test_slab_exit_test_thresholds():
    assert slab_exit_test(E1, 3, 3, (3, 0)) == "plus"
    assert slab_exit_test(E1, 3, 3, (-3, 7)) == "minus"
    assert slab_exit_test(E1, 3, 3, (2, -9)) == "none"
    with pytest.raises(ValueError):
        slab_exit_test(E1, 0, 3, (0, 0))
