"""Environment laws: ellipticity, purity, translation, distribution shape."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from rwre import (
    DirichletFloor,
    EnvironmentLaw,
    Homogeneous,
    TwoPoint,
)
from rwre.env import (
    direction_vectors,
    law_from_dict,
    law_to_dict,
    sample_site,
    sample_sites,
    translate,
    validate_transition_vector,
)


def test_direction_order_alternates_sign_per_axis():
    dirs = direction_vectors(3)
    assert dirs.shape == (6, 3)
    for i in range(3):
        assert list(dirs[2 * i]) == [1 if j == i else 0 for j in range(3)]
        assert list(dirs[2 * i + 1]) == [-1 if j == i else 0 for j in range(3)]


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def test_transition_vector_validation():
    validate_transition_vector((0.4, 0.1, 0.25, 0.25), 2, 0.1)
    with pytest.raises(ValueError):
        validate_transition_vector((0.4, 0.1, 0.25, 0.25), 2, 0.2)  # below floor
    with pytest.raises(ValueError):
        validate_transition_vector((0.5, 0.2, 0.25, 0.25), 2, 0.1)  # sum != 1
    with pytest.raises(ValueError):
        validate_transition_vector((0.4, 0.1, 0.25), 2, 0.1)  # wrong arity


def test_law_validation():
    with pytest.raises(ValueError):
        EnvironmentLaw(1, 0.25, Homogeneous((0.5, 0.5)))
    with pytest.raises(ValueError):
        EnvironmentLaw(2, 0.3, Homogeneous((0.25, 0.25, 0.25, 0.25)))  # kappa > 1/(2d)
    with pytest.raises(ValueError):
        EnvironmentLaw(2, 0.05, TwoPoint((0.4, 0.1, 0.25, 0.25), (0.1, 0.4, 0.25, 0.25), 1.5))
    with pytest.raises(ValueError):
        EnvironmentLaw(2, 0.05, DirichletFloor((1.0, -1.0, 1.0, 1.0)))


def test_law_dict_round_trip(biased_law, dirichlet_law, two_point_law):
    for law in (biased_law, dirichlet_law, two_point_law):
        assert law_from_dict(law_to_dict(law)) == law


# ---------------------------------------------------------------------------
# ellipticity and normalization at random sites, all families
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("fixture", ["biased_law", "dirichlet_law", "two_point_law"])
def test_ellipticity_everywhere(fixture, request):
    law = request.getfixturevalue(fixture)
    env = law.realize(0)
    r = np.random.default_rng(1)
    xs = r.integers(-(10**6), 10**6, size=(10**4, law.d))
    probs = sample_sites(env, xs)
    assert probs.min() >= law.kappa - 1e-15
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)


# ---------------------------------------------------------------------------
# purity and translation
# ---------------------------------------------------------------------------

coords = st.integers(min_value=-(2**40), max_value=2**40)


@given(coords, coords, coords, coords)
def test_translate_composes_with_lookup(x1, x2, y1, y2):
    law = EnvironmentLaw(2, 0.05, DirichletFloor((2.0, 1.0, 1.5, 1.5)), master_seed=7)
    env = law.realize(0)
    moved = translate(env, (x1, x2))
    np.testing.assert_array_equal(
        sample_site(moved, (y1, y2)), sample_site(env, (x1 + y1, x2 + y2))
    )


def test_batched_lookup_equals_scalar(dirichlet_law):
    env = dirichlet_law.realize(0)
    xs = np.array([[0, 0], [5, -3], [-(2**30), 2**30], [123456, -654321]])
    batch = sample_sites(env, xs)
    for row, x in zip(batch, xs):
        np.testing.assert_array_equal(row, sample_site(env, x))


def test_realizations_differ_but_replay(dirichlet_law):
    e0, e1 = dirichlet_law.realize(0), dirichlet_law.realize(1)
    x = (3, 4)
    assert not np.array_equal(sample_site(e0, x), sample_site(e1, x))
    np.testing.assert_array_equal(sample_site(e0, x), sample_site(dirichlet_law.realize(0), x))


# ---------------------------------------------------------------------------
# distribution shape
# ---------------------------------------------------------------------------


def test_two_point_mixture_frequency(two_point_law):
    env = two_point_law.realize(0)
    n = 10**5
    xs = np.stack([np.arange(n), np.zeros(n, dtype=np.int64)], axis=1)
    probs = sample_sites(env, xs)
    freq = (probs[:, 0] == two_point_law.family.v_plus[0]).mean()
    assert 0.495 <= freq <= 0.505


def test_dirichlet_floor_marginal_matches_beta(dirichlet_law):
    # coordinate j of the floored Dirichlet is kappa + (1-2dk) Beta(a_j, a0-a_j)
    law = dirichlet_law
    conc = np.asarray(law.family.concentrations)
    env = law.realize(0)
    n = 10**5
    xs = np.stack([np.arange(n), np.zeros(n, dtype=np.int64)], axis=1)
    p0 = sample_sites(env, xs)[:, 0]
    y = (p0 - law.kappa) / (1.0 - 2 * law.d * law.kappa)
    marginal = stats.beta(conc[0], conc.sum() - conc[0])
    edges = marginal.ppf(np.linspace(0.0, 1.0, 51))
    counts, _ = np.histogram(y, bins=edges)
    assert stats.chisquare(counts).pvalue > 0.001


def test_dirichlet_floor_mean(dirichlet_law):
    law = dirichlet_law
    conc = np.asarray(law.family.concentrations)
    env = law.realize(0)
    n = 10**5
    xs = np.stack([np.arange(n), np.zeros(n, dtype=np.int64)], axis=1)
    probs = sample_sites(env, xs)
    expected = law.kappa + (1.0 - 2 * law.d * law.kappa) * conc / conc.sum()
    # Beta variance bound: each coordinate's sd < 0.5, so 3 sigma < 0.005
    np.testing.assert_allclose(probs.mean(axis=0), expected, atol=5e-3)
