"""Scale recursion and certified inequalities at the stock parameters.

Frozen numeric expectations were derived independently: N_0 from its
closed form, m_k from the certified quotient settle, the three decay
exponents from their defining formulas at L = 8^64.
"""

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rwre import (
    ScaleError,
    ScaleParams,
    build_scales,
    case_scales,
    check_G,
    check_refined_bound,
    f_tower,
    gamma_effective,
    hypothesis_phi0,
    locate_k,
    propagate_phi,
    superadditivity_check,
)
from rwre.renorm import scale_N
from rwre.towermath import (
    ONE,
    ZERO,
    mantissa_ulps_apart,
    tower_compare,
    tower_from_real,
    tower_mul,
    tower_pow,
    tower_to_real,
    tower_to_string,
)

STOCK = ScaleParams(d=2, kappa=0.25, L0=1e4, c3=2.0, c4=2.0)


@pytest.fixture(scope="module")
def seq():
    return build_scales(STOCK, k_max=42)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


def test_param_validation():
    for bad in (
        dict(d=1),
        dict(kappa=0.3),
        dict(kappa=0.0),
        dict(L0=5.0),  # below c2 = 7
        dict(Ltilde0=1.0),  # below 3 sqrt(d)
        dict(Ltilde0=1e13),  # above L0^3
        dict(a0=0.0),
        dict(c3=-1.0),
    ):
        with pytest.raises(ScaleError):
            ScaleParams(**{"d": 2, "kappa": 0.25, "L0": 1e4, **bad})


def test_u0_defining_identity():
    for d, kappa, L0 in [(2, 0.25, 1e4), (3, 0.1, 500.0), (4, 0.05, 100.0)]:
        p = ScaleParams(d=d, kappa=kappa, L0=L0)
        assert kappa ** (p.u0 * L0) == pytest.approx(math.exp(-3 * (d - 1)), rel=1e-14)
    p = STOCK
    assert p.u(3) == p.u0 / 512.0
    assert p.a(2) == p.a0 / 4.0
    assert p.c5 == 2.0 * p.c3 * p.c4
    assert p.Ltilde0 == p.L0**3  # default transverse seed


# ---------------------------------------------------------------------------
# scale construction
# ---------------------------------------------------------------------------


def test_first_scales_closed_form(seq):
    # N_0 = alpha c1 / u0 and L_1 = N_0 L_0
    n0 = 240.0 * math.sqrt(2.0) / STOCK.u0
    assert tower_to_real(seq.N[0]) == pytest.approx(n0, rel=1e-12)
    assert tower_to_real(seq.L[1]) == pytest.approx(n0 * 1e4, rel=1e-12)
    assert tower_to_real(seq.L[0]) == 1e4
    assert tower_to_real(seq.Lt[0]) == pytest.approx(1e12, rel=1e-12)


def test_scale_recursion_consistency(seq):
    # the stored L_{k+1} must match N_k L_k while both are comparable
    for k in range(6):
        prod = tower_mul(seq.N[k], seq.L[k])
        assert mantissa_ulps_apart(prod, seq.L[k + 1]) <= 64.0


def test_scales_strictly_increase(seq):
    for k in range(10):
        assert tower_compare(seq.L[k + 1], seq.L[k]) > 0
        assert tower_compare(seq.N[k + 1], seq.N[k]) > 0
        assert tower_compare(seq.Lt[k + 1], seq.Lt[k]) > 0


def test_heights_grow_linearly(seq):
    # one extra exponentiation every other scale
    assert seq.L[10].height - seq.L[4].height == 3
    assert seq.L[40].height >= 18


def test_build_scales_bounds():
    with pytest.raises(ScaleError):
        build_scales(STOCK, k_max=-1)
    with pytest.raises(ScaleError):
        build_scales(STOCK, k_max=10**6)


# ---------------------------------------------------------------------------
# tower function and superadditivity
# ---------------------------------------------------------------------------


def test_f_tower_small_values():
    assert tower_compare(f_tower(0, 3.0), ONE) == 0  # depth zero is the constant 1
    assert tower_to_real(f_tower(1, 2.0)) == pytest.approx(64.0, rel=1e-14)
    # f_2(3) = 8^(8^3) = 8^512 = 2^1536
    f23 = f_tower(2, 3.0)
    assert tower_compare(f23, tower_pow(tower_from_real(8.0), 512.0)) == 0


def test_f_tower_composition(seq):
    # f_{n+1}(x) = f_n(8^x) on exact small inputs
    lhs = f_tower(3, 2.0)
    rhs = f_tower(2, 64.0)
    assert mantissa_ulps_apart(lhs, rhs) <= 4.0


@given(
    st.integers(min_value=0, max_value=5),
    st.floats(min_value=1.0, max_value=8.0),
    st.floats(min_value=1.0, max_value=8.0),
)
def test_superadditivity(n, a, b):
    assert superadditivity_check(n, a, b)


def test_superadditivity_domain():
    with pytest.raises(ScaleError):
        superadditivity_check(7, 2.0, 2.0)
    with pytest.raises(ScaleError):
        superadditivity_check(2, 0.5, 2.0)


# ---------------------------------------------------------------------------
# growth condition and its perturbation
# ---------------------------------------------------------------------------


def test_growth_condition_stock(seq):
    g = check_G(seq)
    assert g.ok and g.first_failure() is None
    assert tower_compare(g.items[0].g1_margin, ZERO) == 0  # exact cancellation at k=0
    assert tower_compare(g.items[5].g1_margin, g.items[1].g1_margin) > 0
    assert all(it.g2 for it in g.items)


def test_shrinking_N_breaks_g1_exactly_at_the_margin(seq):
    factor = 1e-6
    cut = math.log(1.0 / factor)
    shrunk = check_G(scale_N(seq, factor))
    original = check_G(seq)
    for before, after in zip(original.items, shrunk.items):
        predicted = tower_compare(before.g1_margin, tower_from_real(cut)) >= 0
        assert after.g1 == predicted, f"k={before.k}"
    assert not shrunk.ok and shrunk.first_failure() == 0


# ---------------------------------------------------------------------------
# moment recursion
# ---------------------------------------------------------------------------


def test_hypothesis_phi0_value():
    assert tower_to_real(hypothesis_phi0(STOCK)) == pytest.approx(math.exp(-3.0), rel=1e-12)
    assert tower_to_real(
        hypothesis_phi0(ScaleParams(d=3, kappa=0.1, L0=1e4))
    ) == pytest.approx(math.exp(-6.0), rel=1e-12)


def test_phi_recursion_certifies_stock(seq):
    rep = propagate_phi(hypothesis_phi0(STOCK), seq, STOCK, k_max=40)
    assert rep.ok and rep.first_failure is None
    assert len(rep.verdicts) == 41
    # targets are kappa^(u_k L_k); at k=0 that is e^-3 again
    assert tower_to_real(rep.targets[0]) == pytest.approx(math.exp(-3.0), rel=1e-9)


def test_phi_recursion_refutes_weak_hypothesis(seq):
    weak = tower_from_real(math.exp(-2.9))
    rep = propagate_phi(weak, seq, STOCK, k_max=6)
    assert rep.verdicts[0] is False and rep.first_failure == 0


def test_phi_equal_to_one_is_a_forced_failure_with_diagnostics(seq):
    rep = propagate_phi(ONE, seq, STOCK, k_max=4)
    assert rep.first_failure == 0 and not rep.ok
    assert all(v is False for v in rep.verdicts)
    assert len(rep.bounds) == 5  # recursion still ran


def test_phi_domain_and_depth_guards(seq):
    for bad in (0.0, -0.5, 1.5):
        with pytest.raises(ScaleError):
            propagate_phi(tower_from_real(bad), seq, STOCK, k_max=2)
    with pytest.raises(ScaleError):
        propagate_phi(hypothesis_phi0(STOCK), seq, STOCK, k_max=41)  # needs k+2 scales


# ---------------------------------------------------------------------------
# locating lengths, intermediate scales, refined chain
# ---------------------------------------------------------------------------


def test_locate_known_length(seq):
    L = tower_pow(tower_from_real(8.0), 64.0)
    loc = locate_k(L, seq)
    assert (loc.k, loc.n_of_L) == (3, 2)
    assert loc.iterlog == pytest.approx(2.0, abs=1e-12)
    assert locate_k(seq.L[0], seq).k == 0
    with pytest.raises(ScaleError):
        locate_k(tower_from_real(10.0), seq)


def test_case_split_and_floor(seq):
    inside = tower_mul(tower_from_real(0.9), seq.L[3])
    cs = case_scales(inside, seq)
    assert (cs.k, cs.case) == (2, "two")
    assert cs.m_k == 2960280469571
    # m_k is the floor of L / L_2
    q = tower_to_real(seq.N[2]) * 0.9  # = L / L_2 for this construction
    assert cs.m_k == math.floor(q)

    low = tower_mul(tower_from_real(1.5), seq.L[1])
    assert case_scales(low, seq).case == "one"


def test_case_two_beyond_float_floor_resolution(seq):
    big = tower_pow(tower_from_real(8.0), 190.0)
    cs = case_scales(big, seq)
    assert cs.case == "two" and cs.k == 4
    assert tower_compare(cs.S1, seq.L[4]) > 0


def test_refined_chain_certifies(seq):
    inside = tower_mul(tower_from_real(0.9), seq.L[3])
    cs = case_scales(inside, seq)
    rep = check_refined_bound(cs, seq)
    assert rep.ok and rep.failed is None
    assert set(rep.links) == {"mk", "aux1", "last", "desfinal"}
    with pytest.raises(ValueError):
        check_refined_bound(case_scales(tower_mul(tower_from_real(1.5), seq.L[1]), seq), seq)


# ---------------------------------------------------------------------------
# effective decay exponents
# ---------------------------------------------------------------------------


def test_gamma_spot_values(seq):
    L = tower_pow(tower_from_real(8.0), 64.0)
    rep = gamma_effective(L, STOCK, seq)
    assert rep.gamma_paper == pytest.approx(1.0 - 2.0 / 64.0, abs=1e-12)  # 0.96875
    assert rep.gamma_sznitman == pytest.approx(1.0 - 1.0 / 8.0, abs=1e-12)  # 0.875
    assert rep.gamma_T == pytest.approx(1.0 - 1.0 / 64.0, abs=1e-12)
    assert (rep.k, rep.n_L) == (3, 2)


def test_gamma_gap_ordering(seq):
    # paper gap < sznitman gap < T-free gap ... no: it/X < 1/sqrt(X) < ... check order
    L = tower_pow(tower_from_real(8.0), 64.0)
    rep = gamma_effective(L, STOCK, seq)
    assert tower_compare(rep.gap_paper, rep.gap_sznitman) < 0
    assert tower_compare(rep.gap_T, rep.gap_sznitman) < 0


def test_gamma_with_zero_constant(seq):
    p0 = ScaleParams(d=2, kappa=0.25, L0=1e4, c3=2.0, c4=2.0, C_result=0.0)
    rep = gamma_effective(tower_pow(tower_from_real(8.0), 64.0), p0, seq)
    assert rep.gamma_paper == rep.gamma_sznitman == rep.gamma_T == 1.0
