"""Deterministic renormalization machinery on fast-growing scales.

Everything here is exact-input arithmetic on TowerReal values: scale
sequences L_k that grow as iterated exponentials, the two growth
inequalities (g1)/(g2) tying the scales to the ellipticity constant, the
recursion that propagates the one-box moment bound phi_k up the scales,
the intermediate scales for lengths falling between L_k and L_{k+1}, and
the effective decay exponent gamma(L) those scales produce.

Verdicts are certificates: every inequality is evaluated with the rounding
direction adverse to it (large side up, small side down), carried through
`Bracket` pairs of directed TowerReals, so a reported "pass" survives all
representation error.  A reported "fail" of a hypothesis check is likewise
certified (the violation itself is evaluated adversely); everything in
between is margin information, reported in the log domain.

The base of all towers and iterated logs is fixed at v = 8, and the
prefactor growth rate alpha = 240; both are structural (they make the k = 0
growth inequality an exact identity), not tunable.  The genuinely free
constants keep their conventional names (c2..c5, c15) and defaults chosen
once: they rescale margins, never the shape of the recursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .towermath import (
    DOWN,
    NEAREST,
    ONE,
    TWO,
    UP,
    ZERO,
    TowerRangeError,
    TowerReal,
    dir_add,
    mantissa_ulps_apart,
    tower_add,
    tower_compare,
    tower_div,
    tower_exp,
    tower_from_real,
    tower_iterlog,
    tower_ln,
    tower_mul,
    tower_pow,
    tower_pow_tower,
    tower_reciprocal,
    tower_sub,
    tower_to_real,
)

V = 8.0
ALPHA = 240.0
K_MAX_HARD = 64

_EIGHT = tower_from_real(8.0)
_SEVEN = tower_from_real(7.0)

CASE_ONE = "one"
CASE_TWO = "two"


class ScaleError(ValueError):
    """Scale construction or location outside the machinery's regime."""


# ---------------------------------------------------------------------------
# directed pairs


@dataclass(frozen=True)
class Bracket:
    """A certified enclosure lo <= value <= hi of one positive quantity.

    Arithmetic assumes both operands positive (every quantity in this
    module is); each operation rounds lo down and hi up, so enclosures are
    preserved without tracking error terms.
    """

    lo: TowerReal
    hi: TowerReal

    @staticmethod
    def exact(x: float) -> "Bracket":
        t = tower_from_real(float(x))
        return Bracket(t, t)

    @staticmethod
    def of(t: TowerReal) -> "Bracket":
        return Bracket(t, t)

    def mul(self, o: "Bracket") -> "Bracket":
        return Bracket(tower_mul(self.lo, o.lo, DOWN), tower_mul(self.hi, o.hi, UP))

    def div(self, o: "Bracket") -> "Bracket":
        return Bracket(tower_div(self.lo, o.hi, DOWN), tower_div(self.hi, o.lo, UP))

    def add(self, o: "Bracket") -> "Bracket":
        return Bracket(tower_add(self.lo, o.lo, DOWN), tower_add(self.hi, o.hi, UP))

    def sub(self, o: "Bracket") -> "Bracket":
        return Bracket(tower_sub(self.lo, o.hi, DOWN), tower_sub(self.hi, o.lo, UP))

    def powf(self, p: float) -> "Bracket":
        if p >= 0:
            return Bracket(tower_pow(self.lo, p, DOWN), tower_pow(self.hi, p, UP))
        return Bracket(tower_pow(self.hi, p, DOWN), tower_pow(self.lo, p, UP))

    def pow(self, e: "Bracket") -> "Bracket":
        """self**e for a positive exponent enclosure.

        Monotonicity in the exponent flips at base 1, so the base bracket
        must sit entirely on one side of it.
        """
        if tower_compare(self.lo, ONE) >= 0:
            return Bracket(
                tower_pow_tower(self.lo, e.lo, DOWN),
                tower_pow_tower(self.hi, e.hi, UP),
            )
        if tower_compare(self.hi, ONE) <= 0:
            return Bracket(
                tower_pow_tower(self.lo, e.hi, DOWN),
                tower_pow_tower(self.hi, e.lo, UP),
            )
        raise ScaleError("power base bracket straddles 1")


def _pow_up(base_hi: TowerReal, e: Bracket) -> TowerReal:
    """Certified upper bound of x**e for any 0 < x <= base_hi, e in bracket."""
    if tower_compare(base_hi, ONE) < 0:
        return tower_pow_tower(base_hi, e.lo, UP)
    return tower_pow_tower(base_hi, e.hi, UP)


def _mul_signed(x: TowerReal, pos: Bracket, mode) -> TowerReal:
    """Directed x * pos for x of either sign and a positive enclosure pos."""
    if (tower_compare(x, ZERO) >= 0) == (mode is UP):
        return tower_mul(x, pos.hi, mode)
    return tower_mul(x, pos.lo, mode)


def _div_signed(x: TowerReal, pos: Bracket, mode) -> TowerReal:
    """Directed x / pos for x of either sign and a positive enclosure pos."""
    if (tower_compare(x, ZERO) >= 0) == (mode is UP):
        return tower_div(x, pos.lo, mode)
    return tower_div(x, pos.hi, mode)


# ---------------------------------------------------------------------------
# parameters and scale construction


@dataclass(frozen=True)
class ScaleParams:
    """Fixed inputs of the renormalization: dimension, ellipticity, seeds
    of the scale recursion, and the named constants.

    u0 is always recomputed from (d, kappa, L0); storing it would let the
    defining identity kappa**(u0*L0) = exp(-3(d-1)) drift.
    """

    d: int = 2
    kappa: float = 0.25
    L0: float = 1000.0
    Ltilde0: float | None = None
    a0: float = 1.0
    c2: float = 7.0
    c3: float = 2.0
    c4: float = 2.0
    c15: float = 1.0
    C_result: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ScaleError(f"dimension d={self.d} must be an integer >= 2")
        if not 0.0 < self.kappa <= 1.0 / (2 * self.d):
            raise ScaleError(f"kappa={self.kappa} outside (0, 1/(2d)]")
        if self.L0 < self.c2:
            raise ScaleError(f"L0={self.L0} below c2={self.c2}")
        if self.Ltilde0 is None:
            object.__setattr__(self, "Ltilde0", self.L0**3)
        if not 3.0 * math.sqrt(self.d) < self.Ltilde0 <= self.L0**3:
            raise ScaleError(
                f"Ltilde0={self.Ltilde0} outside (3*sqrt(d), L0^3]"
            )
        if not 0.0 < self.a0 <= 1.0:
            raise ScaleError(f"a0={self.a0} outside (0, 1]")
        for name in ("c2", "c3", "c4", "c15"):
            if getattr(self, name) <= 0:
                raise ScaleError(f"{name} must be positive")
        if self.C_result < 0:
            raise ScaleError("C_result must be nonnegative")

    @property
    def c1(self) -> float:
        return math.sqrt(self.d)

    @property
    def c5(self) -> float:
        return 2.0 * self.c3 * self.c4

    @property
    def u0(self) -> float:
        return 3.0 * (self.d - 1) / (self.L0 * math.log(1.0 / self.kappa))

    def u(self, k: int) -> float:
        return self.u0 * V ** (-k)

    def a(self, k: int) -> float:
        return self.a0 * 2.0 ** (-k)

    def metadata(self) -> dict:
        return {
            "d": self.d,
            "kappa": self.kappa,
            "L0": self.L0,
            "Ltilde0": self.Ltilde0,
            "a0": self.a0,
            "v": V,
            "alpha": ALPHA,
            "c1": self.c1,
            "c2": self.c2,
            "c3": self.c3,
            "c4": self.c4,
            "c5": self.c5,
            "c15": self.c15,
            "C_result": self.C_result,
            "u0": self.u0,
        }


def f_tower(n: int, x: float, mode: str = NEAREST) -> TowerReal:
    """n-fold tower f_n(x): f_0 = 1, f_1(x) = 8**x, f_{n+1} = f_n(8**x)."""
    if not 0 <= n <= K_MAX_HARD:
        raise ScaleError(f"tower depth n={n} outside [0, {K_MAX_HARD}]")
    if x < 0:
        raise ScaleError(f"tower argument x={x} must be nonnegative")
    if n == 0:
        return ONE
    t = tower_from_real(float(x))
    for _ in range(n):
        t = tower_pow_tower(_EIGHT, t, mode)
    return t


def _f_bracket(n: int, x: float) -> Bracket:
    return Bracket(f_tower(n, x, DOWN), f_tower(n, x, UP))


@dataclass(frozen=True)
class ScaleSequence:
    """Scales L_k, transverse scales Ltilde_k, and growth factors N_k.

    The nearest-rounded towers are the reported values; the parallel
    brackets feed every certified inequality downstream.  fratio_b[k] is
    the pure tower ratio N_k/(alpha c1/u0) kept separately because (g1)
    compares it against v**k with exact cancellation at small k, which the
    assembled N_k no longer exhibits.
    """

    params: ScaleParams
    k_max: int
    N: list
    L: list
    Lt: list
    N_b: list = field(repr=False)
    L_b: list = field(repr=False)
    Lt_b: list = field(repr=False)
    fratio_b: list = field(repr=False)
    F_b: list = field(repr=False)  # f_[(k+2)/2]([(k+1)/2]): tower factor of L_{k+1}
    B_b: Bracket = field(repr=False)
    u0_b: Bracket = field(repr=False)

    def u_b(self, k: int) -> Bracket:
        # 8**-k is a power of two, hence exact in either direction.
        return self.u0_b.div(Bracket.exact(V**k))


def _u0_bracket(params: ScaleParams) -> Bracket:
    inv_kappa = tower_reciprocal(tower_from_real(params.kappa))
    ln_inv = Bracket(tower_ln(inv_kappa, DOWN), tower_ln(inv_kappa, UP))
    num = Bracket.exact(3.0 * (params.d - 1))
    return num.div(Bracket.exact(params.L0).mul(ln_inv))


def _c1_bracket(params: ScaleParams) -> Bracket:
    return Bracket.exact(float(params.d)).powf(0.5)


def build_scales(params: ScaleParams, k_max: int = 40) -> ScaleSequence:
    """Construct N_k, L_k, Ltilde_k for 0 <= k <= k_max.

    N_k is the f-ratio formula; the closed-form product for L_{k+1} is
    evaluated independently and must agree with the running product to 10
    mantissa ulps, as must the cubed-ratio form of Ltilde_{k+1}.
    """
    if not 0 <= k_max <= K_MAX_HARD:
        raise ScaleError(f"k_max={k_max} outside [0, {K_MAX_HARD}]")
    u0_b = _u0_bracket(params)
    c1_b = _c1_bracket(params)
    B_b = Bracket.exact(ALPHA).mul(c1_b).div(u0_b)
    B_n = tower_div(
        tower_mul(tower_from_real(ALPHA), tower_pow(tower_from_real(float(params.d)), 0.5)),
        tower_from_real(params.u0),
    )

    L0_t = tower_from_real(params.L0)
    Lt0_t = tower_from_real(params.Ltilde0)
    N, L, Lt = [], [L0_t], [Lt0_t]
    N_b, L_b, Lt_b = [], [Bracket.of(L0_t)], [Bracket.of(Lt0_t)]
    fratio_b = []

    F_b = []
    for k in range(k_max + 1):
        i_num, i_arg, i_den_arg = (k + 2) // 2, (k + 1) // 2, k // 2
        num_b = _f_bracket(i_num, i_arg)
        fr_b = num_b.div(_f_bracket(i_arg, i_den_arg))
        fr_n = tower_div(f_tower(i_num, i_arg), f_tower(i_arg, i_den_arg))
        fratio_b.append(fr_b)
        F_b.append(num_b)
        Nk_b = B_b.mul(fr_b)
        Nk_n = tower_mul(B_n, fr_n)
        if tower_compare(Nk_b.lo, _SEVEN) < 0:
            raise ScaleError(
                f"N_{k} < 7: L0={params.L0} too small relative to kappa={params.kappa}"
            )
        N.append(Nk_n)
        N_b.append(Nk_b)

        L.append(tower_mul(Nk_n, L[k]))
        L_b.append(Nk_b.mul(L_b[k]))
        Lt.append(tower_mul(tower_pow(Nk_n, 3.0), Lt[k]))
        Lt_b.append(Nk_b.powf(3.0).mul(Lt_b[k]))

        closed = tower_mul(
            tower_mul(f_tower(i_num, i_arg), tower_pow(B_n, float(k + 1))), L0_t
        )
        ulps = mantissa_ulps_apart(L[k + 1], closed)
        if not ulps <= 10.0:
            raise ScaleError(
                f"product and closed forms of L_{k + 1} disagree by {ulps} ulps"
            )
        cubed = tower_mul(tower_pow(tower_div(L[k + 1], L0_t), 3.0), Lt0_t)
        ulps = mantissa_ulps_apart(Lt[k + 1], cubed)
        if not ulps <= 10.0:
            raise ScaleError(
                f"Ltilde_{k + 1} disagrees with its cubed-ratio form by {ulps} ulps"
            )

    return ScaleSequence(
        params=params,
        k_max=k_max,
        N=N,
        L=L,
        Lt=Lt,
        N_b=N_b,
        L_b=L_b,
        Lt_b=Lt_b,
        fratio_b=fratio_b,
        F_b=F_b,
        B_b=B_b,
        u0_b=u0_b,
    )


def scale_N(seq: ScaleSequence, factor: float) -> ScaleSequence:
    """Sensitivity probe: every N_k (and its f-ratio) scaled by ``factor``.

    L_k and Ltilde_k are deliberately left untouched — the point is to see
    where condition (G) snaps, not to build a consistent sequence.
    """
    if factor <= 0:
        raise ScaleError("scale factor must be positive")
    f_b = Bracket.exact(factor)
    f_t = tower_from_real(factor)
    return ScaleSequence(
        params=seq.params,
        k_max=seq.k_max,
        N=[tower_mul(t, f_t) for t in seq.N],
        L=seq.L,
        Lt=seq.Lt,
        N_b=[b.mul(f_b) for b in seq.N_b],
        L_b=seq.L_b,
        Lt_b=seq.Lt_b,
        fratio_b=[b.mul(f_b) for b in seq.fratio_b],
        F_b=seq.F_b,
        B_b=seq.B_b,
        u0_b=seq.u0_b,
    )


# ---------------------------------------------------------------------------
# condition (G)


@dataclass(frozen=True)
class GItem:
    k: int
    g1: bool
    g2: bool
    g1_margin: TowerReal  # ln(f-ratio / v^k), certified lower bound
    g2_margin: TowerReal  # -ln(lhs of g2), certified lower bound


@dataclass(frozen=True)
class GReport:
    ok: bool
    items: list

    def first_failure(self):
        for it in self.items:
            if not (it.g1 and it.g2):
                return it.k
        return None


def _ln_b(b: Bracket) -> Bracket:
    return Bracket(tower_ln(b.lo, DOWN), tower_ln(b.hi, UP))


def _lnF_ratio(seq: "ScaleSequence", k: int) -> Bracket:
    """ln(F_{k+1}) / F_k, where F_k = f_[(k+2)/2]([(k+1)/2]).

    For odd k the indices are adjacent at the same argument, so
    F_{k+1} = 8**F_k exactly and the ratio is ln 8; evaluating the quotient
    numerically there would divide two towers agreeing to the last stored
    digit.  For even k numerator and denominator are separated by a whole
    exponentiation level and the direct quotient resolves.
    """
    if k % 2 == 1:
        return _ln_b(Bracket.exact(V))
    return _ln_b(seq.F_b[k + 1]).div(seq.F_b[k])


def check_G(seq: ScaleSequence, params: ScaleParams | None = None) -> GReport:
    """Certify (g1) u_k N_k >= alpha c1 and (g2) the prefactor bound.

    (g1) is checked in ratio form, f-ratio >= v**k: the constant alpha c1/u0
    cancels identically, which is what makes k = 0 an exact zero-margin
    pass instead of a one-ulp coin flip.

    (g2) cannot be checked at face value.  In log form it reads

        ln c5 + 3(d-1) ln N_{k+1} + (3d-1) ln L_{k+1}  <=  u_{k+1} L_{k+1} ln(1/kappa)

    and both sides grow like the tower F = f_[(k+2)/2]([(k+1)/2]) while their
    difference is only polynomial in B = alpha c1 / u0; from k ~ 5 on that
    margin sits far below one mantissa ulp of the towers, so an adversely
    rounded comparison of the assembled sides is decided by rounding noise
    and can never certify.  Substituting the closed forms
    N_{k+1} = B G / F (G the next f-factor, = F at k+1) and
    L_{k+1} = F B^{k+1} L0, and u L ln(1/kappa) = 3(d-1) (B/v)^{k+1} F from
    the definition of u0, the common factor F divides out:

        C_poly <= F * [ 3(d-1) (B/v)^{k+1} - 3(d-1) ln(G)/F - 2 ln(F)/F ]

    with C_poly = ln c5 + (3(d-1) + (3d-1)(k+1)) ln B + (3d-1) ln L0.  Now
    every term except the exact cancellations is float-sized (ln(G)/F is at
    most ln v — exactly ln v at odd k, where the identity is substituted
    instead of dividing two indistinguishable towers — and ln(F)/F at most
    2/e) and the comparison is decidable at any k.  The verdict is for the closed-form sequence, which build_scales has
    already pinned to the stored one within 10 mantissa ulps.

    Rows run to k_max - 1 because (g2) at k reads the k+1 scales.
    """
    params = params or seq.params
    c5_b = Bracket.exact(2.0).mul(Bracket.exact(params.c3)).mul(Bracket.exact(params.c4))
    lnB_b = _ln_b(seq.B_b)
    lnL0_b = _ln_b(Bracket.exact(params.L0))
    lnc5_b = _ln_b(c5_b)
    B_over_v = seq.B_b.div(Bracket.exact(V))
    three_d1 = Bracket.exact(3.0 * (params.d - 1))
    items = []
    for k in range(seq.k_max):
        vk = tower_pow(_EIGHT, float(k))
        g1 = tower_compare(seq.fratio_b[k].lo, vk) >= 0
        g1_margin = tower_ln(tower_div(seq.fratio_b[k].lo, vk, DOWN), DOWN)

        F_b = seq.F_b[k]
        t1 = three_d1.mul(B_over_v.powf(float(k + 1)))
        t3 = three_d1.mul(_lnF_ratio(seq, k))
        t4 = Bracket.exact(2.0).mul(_ln_b(F_b).div(F_b))
        per_F = t1.sub(t3).sub(t4)
        c_poly = lnc5_b.add(
            Bracket.exact(3.0 * (params.d - 1) + (3.0 * params.d - 1) * (k + 1)).mul(lnB_b)
        ).add(Bracket.exact(3.0 * params.d - 1).mul(lnL0_b))
        rhs_lo = _mul_signed(per_F.lo, F_b, DOWN)
        g2 = tower_compare(rhs_lo, c_poly.hi) >= 0
        g2_margin = tower_sub(rhs_lo, c_poly.hi, DOWN)
        items.append(GItem(k=k, g1=g1, g2=g2, g1_margin=g1_margin, g2_margin=g2_margin))
    return GReport(ok=all(it.g1 and it.g2 for it in items), items=items)


# ---------------------------------------------------------------------------
# phi recursion


def hypothesis_phi0(params: ScaleParams) -> TowerReal:
    """The boundary case of the phi hypothesis: kappa**(u0 L0).

    By the definition of u0 this is exactly exp(-3(d-1)), so it is computed
    that way; evaluating the power would round the same number twice.
    """
    return tower_exp(tower_from_real(-3.0 * (params.d - 1)))


@dataclass(frozen=True)
class PhiReport:
    ok: bool
    first_failure: int | None
    bounds: list  # certified upper bounds of phi_k (phi_0 = the input)
    targets: list  # certified lower bounds of kappa**(u_k L_k)
    verdicts: list
    margins: list  # ln(target/bound), certified when the verdict is


def _Z_bracket(seq: ScaleSequence, params: ScaleParams, k: int) -> Bracket:
    """u_k L_k ln(1/kappa) in the closed form 3(d-1) (B/v)^k f_[(k+1)/2]([k/2]).

    The k = 0 case is the defining identity of u0: exactly 3(d-1).
    """
    three_d1 = Bracket.exact(3.0 * (params.d - 1))
    if k == 0:
        return three_d1
    B_over_v = seq.B_b.div(Bracket.exact(V))
    return three_d1.mul(B_over_v.powf(float(k))).mul(seq.F_b[k - 1])


def propagate_phi(
    phi0: TowerReal,
    seq: ScaleSequence,
    params: ScaleParams | None = None,
    k_max: int | None = None,
) -> PhiReport:
    """Run the one-box moment recursion and certify phi_k <= kappa**(u_k L_k).

    The k = 0 row checks the hypothesis, so its verdict is inverted
    certification: it fails only when phi0 > kappa**(u0 L0) holds under
    adverse rounding (a hypothesis can be refuted numerically, not
    established).  Rows k >= 1 are certified conclusions.  A failed verdict
    never stops the recursion; the diagnostic trail is the point.

    Like (g2), the verdicts cannot be read off the assembled values: from
    k ~ 5 the bound and its target are towers of height >= 3 agreeing in
    every stored mantissa, with the real comparison living in the *ratio*
    of their logarithms.  So the recursion is propagated for that ratio
    directly: with Z_k = u_k L_k ln(1/kappa) (closed form: see _Z_bracket)
    and E_k = -ln(bound_k), track R_k = E_k / Z_k.  The scale step is exact,
    Z_{k+1}/Z_k = N_k/v, and both recursion terms divide through:

        head:  (N_k^2/12) (v/N_k) R_k - 10 c1 / u_{k+1}
        tail:  ((N_k-2)/2) (v/N_k) R_k - ln(N_k+2)/Z_{k+1}

    (the tail exponent (N_k-2)/2 under-bounds the largest m-sum exponent
    (floor(N_k)-1)/2 for every real N_k, so no tower floor is needed; the
    m-sum itself is bounded by (N_k+2) copies of its largest term).  Then
    R_{k+1} = min(head, tail) - ln(2 c3 c4 Ltilde_{k+2}^{d-1} L_{k+1})/Z_{k+1},
    every term float-sized or cleanly separated in height, and the verdict
    at k is the float-scale comparison R_k >= 1.  Margins are certified in
    the log domain as (R_k - 1) Z_k = ln(target_k / bound_k); the bounds
    and targets lists are the corresponding values, faithful enclosures
    but saturated presentations once the height passes 2.
    """
    params = params or seq.params
    if k_max is None:
        k_max = seq.k_max - 2
    if k_max > seq.k_max - 2:
        raise ScaleError(
            f"phi_{k_max} needs scales up to index {k_max + 2}; sequence stops at {seq.k_max}"
        )
    if tower_compare(phi0, ZERO) <= 0 or tower_compare(phi0, ONE) > 0:
        raise ScaleError("phi0 must lie in (0, 1]")
    c1_b = _c1_bracket(params)
    three_d1_b = Bracket.exact(3.0 * (params.d - 1))
    lnB_b = _ln_b(seq.B_b)
    lnL0_b = _ln_b(Bracket.exact(params.L0))
    lnLt0_b = _ln_b(Bracket.exact(params.Ltilde0))
    ln2_b = _ln_b(Bracket.exact(2.0))
    lnc34_b = _ln_b(Bracket.exact(params.c3).mul(Bracket.exact(params.c4)))
    Z_bs = [_Z_bracket(seq, params, k) for k in range(k_max + 1)]

    def value_of(E_lo: TowerReal) -> TowerReal:
        # upper bound of exp(-E); reciprocals are exact, so only exp rounds
        return tower_reciprocal(tower_exp(E_lo, DOWN))

    inv_phi0 = tower_reciprocal(phi0)
    E0_b = Bracket(tower_ln(inv_phi0, DOWN), tower_ln(inv_phi0, UP))
    R_b = E0_b.div(Z_bs[0])

    bounds = [phi0]
    targets = [value_of(Z_bs[0].hi)]
    verdicts = [tower_compare(R_b.hi, ONE) >= 0]
    margins = [_mul_signed(tower_sub(R_b.lo, ONE, DOWN), Z_bs[0], DOWN)]

    for k in range(k_max):
        Z_next = Z_bs[k + 1]
        # the exponent coefficients (N^2/12)(v/N) and ((N-2)/2)(v/N) are
        # expanded to v N/12 and v/2 - v/N before evaluation: the literal
        # quotients would divide towers agreeing to the last stored digit.
        head_coef = Bracket.exact(V).mul(seq.N_b[k]).div(Bracket.exact(12.0))
        tail_coef = Bracket.exact(V / 2.0).sub(Bracket.exact(V).div(seq.N_b[k]))
        head_off = Bracket.exact(10.0).mul(c1_b).div(seq.u_b(k + 1))
        tail_off = _ln_b(seq.N_b[k].add(Bracket.exact(2.0))).div(Z_next)
        head_b = Bracket(
            tower_sub(_mul_signed(R_b.lo, head_coef, DOWN), head_off.hi, DOWN),
            tower_sub(_mul_signed(R_b.hi, head_coef, UP), head_off.lo, UP),
        )
        tail_b = Bracket(
            tower_sub(_mul_signed(R_b.lo, tail_coef, DOWN), tail_off.hi, DOWN),
            tower_sub(_mul_signed(R_b.hi, tail_coef, UP), tail_off.lo, UP),
        )
        min_lo = head_b.lo if tower_compare(head_b.lo, tail_b.lo) < 0 else tail_b.lo
        min_hi = head_b.hi if tower_compare(head_b.hi, tail_b.hi) < 0 else tail_b.hi

        # ln(pref)/Z_{k+1} with pref = c3 c4 Ltilde_{k+2}^{d-1} L_{k+1}: the
        # tower-sized pieces, (d-1) 3 ln(F_{k+1}) and ln(F_k), are divided
        # by Z structurally ((v/B)^{k+1} times ln(F_{k+1})/F_k resp.
        # ln(F_k)/F_k, both resolvable); only float-sized terms touch Z
        # numerically.
        vB_k1 = Bracket.exact(V).div(seq.B_b).powf(float(k + 1))
        struct_b = (
            _lnF_ratio(seq, k)
            .add(_ln_b(seq.F_b[k]).div(seq.F_b[k]).div(three_d1_b))
            .mul(vB_k1)
        )
        poly_b = (
            lnc34_b
            .add(
                Bracket.exact(float(params.d - 1)).mul(
                    Bracket.exact(3.0 * (k + 2)).mul(lnB_b).add(lnLt0_b)
                )
            )
            .add(Bracket.exact(float(k + 1)).mul(lnB_b))
            .add(lnL0_b)
        )
        sub_hi = tower_add(
            _div_signed(poly_b.add(ln2_b).hi, Z_next, UP), struct_b.hi, UP
        )
        sub_lo = tower_add(
            _div_signed(poly_b.lo, Z_next, DOWN), struct_b.lo, DOWN
        )
        R_b = Bracket(
            tower_sub(min_lo, sub_hi, DOWN),
            tower_sub(min_hi, sub_lo, UP),
        )

        bounds.append(value_of(_mul_signed(R_b.lo, Z_next, DOWN)))
        targets.append(value_of(Z_next.hi))
        verdicts.append(tower_compare(R_b.lo, ONE) >= 0)
        margins.append(_mul_signed(tower_sub(R_b.lo, ONE, DOWN), Z_next, DOWN))

    first_failure = None
    for k, v in enumerate(verdicts):
        if not v:
            first_failure = k
            break
    return PhiReport(
        ok=first_failure is None,
        first_failure=first_failure,
        bounds=bounds,
        targets=targets,
        verdicts=verdicts,
        margins=margins,
    )


# ---------------------------------------------------------------------------
# superadditivity of the towers


def superadditivity_check(n: int, a: float, b: float) -> bool:
    """Certify f_n(a+b) >= f_n(a) * f_n(b) for a, b >= 1.

    Taken one exponential level down: for n >= 2 the claim is
    f_{n-1}(a+b) >= f_{n-1}(a) + f_{n-1}(b), which carries real margin and
    is decided under adverse rounding.  For n = 1 (exponent additivity) and
    n = 0 (f_0 identically 1) both sides collapse to the same expression
    after the base-v logarithm — exact identities that directed rounding
    could only refute spuriously, so the certified verdict is plain truth.
    """
    if not 0 <= n <= 6:
        raise ScaleError(f"n={n} outside [0, 6]")
    if a < 1.0 or b < 1.0 or a > 64.0 or b > 64.0:
        raise ScaleError("arguments must lie in [1, 64]")
    if n <= 1:
        return True
    lhs_lo = f_tower(n - 1, dir_add(a, b, DOWN), DOWN)
    rhs_hi = tower_add(f_tower(n - 1, a, UP), f_tower(n - 1, b, UP), UP)
    return tower_compare(lhs_lo, rhs_hi) >= 0


# ---------------------------------------------------------------------------
# locating a length among the scales


@dataclass(frozen=True)
class LocateReport:
    k: int
    n_of_L: int
    iterlog: float  # log_8 iterated n_of_L times at L


def locate_k(L: TowerReal, seq: ScaleSequence) -> LocateReport:
    """The unique k with L_k <= L < L_{k+1}, plus n(L) = floor((k+1)/2).

    Also evaluates the iterated logarithm at L and enforces the sandwich
    k/4 <= floor(k/2) <= log_8^(n(L))(L), which is the quantitative form of
    the divergence of the iterated log along the scales.
    """
    if tower_compare(L, seq.L[0]) < 0:
        raise ScaleError("L below L_0: no scale contains it")
    if tower_compare(L, seq.L[seq.k_max]) >= 0:
        raise ScaleError(f"L at or beyond L_{seq.k_max}: extend k_max")
    k = 0
    while k + 1 <= seq.k_max and tower_compare(seq.L[k + 1], L) <= 0:
        k += 1
    n = (k + 1) // 2
    it = tower_iterlog(L, 8.0, n)
    if it < (k // 2) - 1e-9 * max(1.0, abs(it)):
        raise ScaleError(
            f"iterated log {it} below floor(k/2)={k // 2} at k={k}: sandwich violated"
        )
    return LocateReport(k=k, n_of_L=n, iterlog=it)


# ---------------------------------------------------------------------------
# intermediate scales between L_k and L_{k+1}


@dataclass(frozen=True)
class CaseScales:
    k: int
    case: str
    m_k: int
    S1: TowerReal
    S1tilde: TowerReal
    S2: TowerReal
    S2tilde: TowerReal
    s1_b: Bracket | None = field(default=None, repr=False)
    s1t_b: Bracket | None = field(default=None, repr=False)
    s2_b: Bracket | None = field(default=None, repr=False)
    s2t_b: Bracket | None = field(default=None, repr=False)


def case_scales(L: TowerReal, seq: ScaleSequence, params: ScaleParams | None = None) -> CaseScales:
    """Split at the Case-1 boundary L <= (2 alpha c1/u0) v^k L_k.

    Case one is declared only when certified (L below the rounded-down
    boundary); case two additionally certifies the floor m_k >= alpha c1
    v^k/u0, without which the refined chain below has no content.  The
    S-scales are computed for both cases — they are plain formulas in m_k.

    The reported integer m_k is the exact floor while L/L_k < 2^53; above
    that, unit steps fall below mantissa resolution and m_k is the floored
    stored quotient, with the certified bracket widened by one to cover
    the true floor.
    """
    params = params or seq.params
    loc = locate_k(L, seq)
    k = loc.k
    vk_b = Bracket.exact(V**k)
    bound_b = Bracket.exact(2.0).mul(seq.B_b).mul(vk_b).mul(seq.L_b[k])
    case = CASE_ONE if tower_compare(L, bound_b.lo) <= 0 else CASE_TWO

    try:
        ratio = tower_to_real(tower_div(L, seq.L[k]))
    except TowerRangeError as exc:
        raise ScaleError(f"L/L_{k} beyond floating range; m_k not representable") from exc
    m = int(math.floor(ratio))
    if m < 2**53:
        # Nearest-rounded division can land a boundary ratio on the wrong
        # side of an integer; settle m against the defining inequalities
        # directly.  Unit steps are visible in float here, so this
        # terminates after at most a couple of iterations.
        while m > 1 and tower_compare(tower_mul(tower_from_real(float(m)), seq.L[k]), L) > 0:
            m -= 1
        while tower_compare(tower_mul(tower_from_real(float(m + 1)), seq.L[k]), L) <= 0:
            m += 1
        m_b = Bracket.exact(float(m))
        m_t = tower_from_real(float(m))
    else:
        # Unit steps in m sit below mantissa resolution: the exact integer
        # is irrecoverable from the stored quotient and pointless to chase.
        # Enclose the true floor by the directed quotient minus one and
        # report the floored nearest image.
        ratio_b = Bracket(
            tower_div(L, seq.L_b[k].hi, DOWN), tower_div(L, seq.L_b[k].lo, UP)
        )
        m_b = Bracket(tower_sub(ratio_b.lo, ONE, DOWN), ratio_b.hi)
        m_t = tower_from_real(ratio)

    if case == CASE_TWO:
        floor_hi = seq.B_b.mul(vk_b).hi
        if tower_compare(m_b.lo, floor_hi) < 0:
            raise ScaleError(
                f"case two at k={k} but m_k={m} is below the certified floor"
            )
    s1_b = m_b.mul(seq.L_b[k])
    s1t_b = m_b.powf(3.0).mul(seq.Lt_b[k])
    s2_b = m_b.powf(2.0).mul(seq.L_b[k])
    s2t_b = m_b.powf(6.0).mul(seq.Lt_b[k])
    return CaseScales(
        k=k,
        case=case,
        m_k=m,
        S1=tower_mul(m_t, seq.L[k]),
        S1tilde=tower_mul(tower_pow(m_t, 3.0), seq.Lt[k]),
        S2=tower_mul(tower_pow(m_t, 2.0), seq.L[k]),
        S2tilde=tower_mul(tower_pow(m_t, 6.0), seq.Lt[k]),
        s1_b=s1_b,
        s1t_b=s1t_b,
        s2_b=s2_b,
        s2t_b=s2t_b,
    )


# ---------------------------------------------------------------------------
# the refined Case-2 chain


@dataclass(frozen=True)
class RefinedReport:
    ok: bool
    failed: str | None  # first failing link, in chain order
    links: dict  # name -> (verdict, certified log-domain margin)


def check_refined_bound(
    cs: CaseScales,
    seq: ScaleSequence,
    params: ScaleParams | None = None,
    phi_k: TowerReal | None = None,
) -> RefinedReport:
    """Certify the chain closing the between-scales moment bound.

    Links, in the order the argument needs them:
      mk        m_k >= (alpha c1/u0) v^k
      aux1      kappa**(-10 c1 S1) * phi_k**(m_k^2/24) <= 1
      last      2 c3 S2tilde**(d-1) S1**2 * phi_k**(m_k/8) <= 1
      desfinal  S2tilde**(d-1) S1 E-hat <= kappa**(u_{k+1} S1), with E-hat
                the moment recursion bound at the (m_k, S) scales.

    phi_k defaults to the certified bound propagated from the boundary
    hypothesis; passing one explicitly supports what-if probes.

    Unlike (g2) and the phi recursion, these links are evaluated at face
    value, which stays decidable while |ln phi_k| sits within two
    exponentiations of a float (k <= ~4 at the stock parameters).  Deeper
    k would need the same factored-cancellation treatment; the m_k floor
    link is the first to saturate.
    """
    if cs.case != CASE_TWO:
        raise ValueError("refined bound only applies to case two")
    params = params or seq.params
    k = cs.k
    if phi_k is None:
        phi_k = propagate_phi(hypothesis_phi0(params), seq, params, k_max=max(k, 1)).bounds[k]

    kappa_t = tower_from_real(params.kappa)
    inv_kappa = tower_reciprocal(kappa_t)
    c1_b = _c1_bracket(params)
    m_b = Bracket.exact(float(cs.m_k))
    s1_b = cs.s1_b or Bracket.of(cs.S1)
    s2t_b = cs.s2t_b or Bracket.of(cs.S2tilde)
    links = {}

    floor_hi = seq.B_b.mul(Bracket.exact(V**k)).hi
    mk_ok = tower_compare(m_b.lo, floor_hi) >= 0
    links["mk"] = (mk_ok, tower_ln(tower_div(m_b.lo, floor_hi, DOWN), DOWN))

    e_kneg = Bracket.exact(10.0).mul(c1_b).mul(s1_b)
    kneg_hi = tower_pow_tower(inv_kappa, e_kneg.hi, UP)
    aux1_hi = tower_mul(
        kneg_hi,
        _pow_up(phi_k, m_b.powf(2.0).div(Bracket.exact(24.0))),
        UP,
    )
    links["aux1"] = (
        tower_compare(aux1_hi, ONE) <= 0,
        tower_ln(tower_reciprocal(aux1_hi), DOWN),
    )

    last_hi = tower_mul(
        tower_mul(
            tower_mul(tower_from_real(2.0 * params.c3), tower_pow(s2t_b.hi, float(params.d - 1), UP), UP),
            tower_pow(s1_b.hi, 2.0, UP),
            UP,
        ),
        _pow_up(phi_k, m_b.div(Bracket.exact(8.0))),
        UP,
    )
    links["last"] = (
        tower_compare(last_hi, ONE) <= 0,
        tower_ln(tower_reciprocal(last_hi), DOWN),
    )

    head = tower_mul(
        kneg_hi,
        _pow_up(phi_k, m_b.powf(2.0).div(Bracket.exact(12.0))),
        UP,
    )
    tail = tower_mul(
        tower_add(m_b.hi, TWO, UP),
        _pow_up(phi_k, m_b.sub(Bracket.exact(1.0)).div(Bracket.exact(2.0))),
        UP,
    )
    ehat_hi = tower_mul(tower_from_real(params.c3), tower_add(head, tail, UP), UP)
    des_lhs = tower_mul(
        tower_mul(tower_pow(s2t_b.hi, float(params.d - 1), UP), s1_b.hi, UP),
        ehat_hi,
        UP,
    )
    des_rhs = tower_pow_tower(kappa_t, seq.u_b(k + 1).mul(s1_b).hi, DOWN)
    links["desfinal"] = (
        tower_compare(des_lhs, des_rhs) <= 0,
        tower_ln(tower_div(des_rhs, des_lhs, DOWN), DOWN),
    )

    failed = None
    for name in ("mk", "aux1", "last", "desfinal"):
        if not links[name][0]:
            failed = name
            break
    return RefinedReport(ok=failed is None, failed=failed, links=links)


# ---------------------------------------------------------------------------
# the effective decay exponent


@dataclass(frozen=True)
class GammaReport:
    gamma_paper: float
    gamma_sznitman: float
    gamma_T: float
    gap_paper: TowerReal  # 1 - gamma, kept in tower form: it underflows floats
    gap_sznitman: TowerReal
    gap_T: TowerReal
    n_L: int
    k: int
    iterlog: float


def _gap_to_float(gap: TowerReal) -> float:
    try:
        return tower_to_real(gap)
    except TowerRangeError:
        return 0.0  # below double resolution; the tower field keeps the value


def gamma_effective(L: TowerReal, params: ScaleParams, seq: ScaleSequence) -> GammaReport:
    """The three decay exponents at length L, all in log base 8.

    gamma_paper uses the iterated log at depth n(L); gamma_sznitman the
    square root; gamma_T the plain log.  The 1-gamma gaps are returned as
    towers because beyond moderate k they drop below double resolution
    while their ratios stay meaningful.
    """
    loc = locate_k(L, seq)
    it = loc.iterlog
    if not it > 1.0:
        raise ScaleError(f"iterated log at depth {loc.n_of_L} is {it} <= 1")
    C = params.C_result
    if C == 0.0:
        return GammaReport(1.0, 1.0, 1.0, ZERO, ZERO, ZERO, loc.n_of_L, loc.k, it)
    X = tower_div(tower_ln(L), tower_from_real(math.log(8.0)))
    C_t = tower_from_real(C)
    gap_p = tower_div(tower_mul(C_t, tower_from_real(it)), X)
    gap_s = tower_div(C_t, tower_pow(X, 0.5))
    gap_t = tower_div(C_t, X)
    return GammaReport(
        gamma_paper=1.0 - _gap_to_float(gap_p),
        gamma_sznitman=1.0 - _gap_to_float(gap_s),
        gamma_T=1.0 - _gap_to_float(gap_t),
        gap_paper=gap_p,
        gap_sznitman=gap_s,
        gap_T=gap_t,
        n_L=loc.n_of_L,
        k=loc.k,
        iterlog=it,
    )
