"""Iterated-exponential ("tower") arithmetic with directed rounding.

Quantities in the multiscale analysis grow like exp(exp(...exp(x))) and are
far beyond double range after two or three levels, but every certified
inequality ultimately compares two such quantities.  A ``TowerReal`` stores

    sign * magnitude          with   magnitude = exp^(height)(mantissa)

and magnitudes below one are stored as the tower of the *reciprocal* plus a
``recip`` flag, so tiny probabilities and huge prefactors share one code
path.  Canonical form (threshold T = 1e12):

    height == 0:  0 <= mantissa < T
    height >= 1:  ln T <= mantissa < T

which makes magnitude order equal to lexicographic (height, mantissa) order,
so comparison never evaluates an exponential.

All arithmetic runs on float64 mantissas in the log domain.  Directed
rounding ("up" = toward +inf on the represented value, "down" = toward
-inf) is implemented by a one-ulp ``math.nextafter`` nudge after each
inexact elementary operation; float operations that are exact (checked via
``fractions.Fraction``) are left untouched, so small integer arithmetic
stays exact.  libm exp/log/log1p are faithfully rounded, hence a one-ulp
nudge yields a true directed bound there as well.

General addition is exact float arithmetic whenever both operands demote to
doubles; otherwise it is dominant absorption with a log1p correction,
accurate to about one mantissa ulp and always directionally sound.
Near-total cancellation of two non-demotable values keeps direction but can
lose relative accuracy; the certificates in this package only ever subtract
values that are exactly equal or far apart.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

THRESHOLD = 1.0e12
LN_THRESHOLD = math.log(THRESHOLD)  # 27.631021115928547
MAX_HEIGHT = 64

# exp(mantissa) of a height-1 chain is trusted as a float only when it stays
# clear of the overflow boundary, so one-ulp nudges can never produce inf.
_DEMOTE_MAX_EXP = 709.0

UP = "up"
DOWN = "down"
NEAREST = "nearest"


class TowerRangeError(ArithmeticError):
    """Raised when a value leaves the representable tower range."""


class TowerDomainError(ValueError):
    """Raised on domain violations (non-finite input, log of <= 1, ...)."""


def _flip(mode: str) -> str:
    if mode == UP:
        return DOWN
    if mode == DOWN:
        return UP
    return NEAREST


def _nudge(x: float, mode: str) -> float:
    if mode == UP:
        return math.nextafter(x, math.inf)
    if mode == DOWN:
        return math.nextafter(x, -math.inf)
    return x


# ---------------------------------------------------------------------------
# Directed float primitives
# ---------------------------------------------------------------------------


def dir_add(a: float, b: float, mode: str) -> float:
    c = a + b
    if not math.isfinite(c):
        raise TowerRangeError(f"float sum overflow: {a!r} + {b!r}")
    if mode == NEAREST or Fraction(a) + Fraction(b) == Fraction(c):
        return c
    return _nudge(c, mode)


def dir_sub(a: float, b: float, mode: str) -> float:
    c = a - b
    if not math.isfinite(c):
        raise TowerRangeError(f"float difference overflow: {a!r} - {b!r}")
    if mode == NEAREST or Fraction(a) - Fraction(b) == Fraction(c):
        return c
    return _nudge(c, mode)


def dir_mul(a: float, b: float, mode: str) -> float:
    c = a * b
    if not math.isfinite(c):
        raise TowerRangeError(f"float product overflow: {a!r} * {b!r}")
    if mode == NEAREST or Fraction(a) * Fraction(b) == Fraction(c):
        return c
    return _nudge(c, mode)


def dir_div(a: float, b: float, mode: str) -> float:
    c = a / b
    if not math.isfinite(c):
        raise TowerRangeError(f"float quotient overflow: {a!r} / {b!r}")
    if mode == NEAREST or Fraction(a) / Fraction(b) == Fraction(c):
        return c
    return _nudge(c, mode)


def dir_exp(x: float, mode: str) -> float:
    if x == 0.0:
        return 1.0
    r = math.exp(x)
    if mode == NEAREST:
        return r
    r = _nudge(r, mode)
    if r == math.inf:
        raise TowerRangeError(f"exp overflow: exp({x!r})")
    return max(r, 0.0)  # round-down of an underflowed exp stays at +0.0


def dir_ln(x: float, mode: str) -> float:
    if x <= 0.0:
        raise TowerDomainError(f"log of non-positive value {x!r}")
    if x == 1.0:
        return 0.0
    r = math.log(x)
    return r if mode == NEAREST else _nudge(r, mode)


def dir_log1p(x: float, mode: str) -> float:
    if x == 0.0:
        return 0.0
    r = math.log1p(x)
    return r if mode == NEAREST else _nudge(r, mode)


# ---------------------------------------------------------------------------
# Magnitude chains.
#
# A chain (h, y) stands for exp^h(y) >= 0.  Height-0 chains hold any
# nonnegative float; heights >= 1 keep the canonical band ln T <= y < T.
# Negative height-0 mantissas appear only transiently as log-level
# intermediates that are immediately re-exponentiated.
# ---------------------------------------------------------------------------

_ZERO_CHAIN = (0, 0.0)


def _chain_norm(h: int, y: float, mode: str) -> tuple[int, float]:
    while y >= THRESHOLD:
        y = dir_ln(y, mode)
        h += 1
    while h >= 1 and y < LN_THRESHOLD:
        y = dir_exp(y, mode)
        h -= 1
    if h > MAX_HEIGHT:
        raise TowerRangeError(f"tower height {h} exceeds the supported maximum {MAX_HEIGHT}")
    return (h, y)


def _chain_cmp(a: tuple[int, float], b: tuple[int, float]) -> int:
    """Value comparison of canonical chains; exact, no arithmetic."""
    if a[0] != b[0]:
        return -1 if a[0] < b[0] else 1
    if a[1] == b[1]:
        return 0
    return -1 if a[1] < b[1] else 1


def _chain_demote(ch: tuple[int, float], mode: str):
    """Chain value as a float, or None when it exceeds double range."""
    h, y = ch
    if h == 0:
        return y
    if h == 1 and y <= _DEMOTE_MAX_EXP:
        return dir_exp(y, mode)
    return None


def _chain_nudge(ch: tuple[int, float], mode: str) -> tuple[int, float]:
    return _chain_norm(ch[0], _nudge(ch[1], mode), mode)


def _chain_ln(ch: tuple[int, float], mode: str) -> tuple[int, float]:
    """ln of a chain with value >= 1.  Exact for heights >= 1."""
    h, y = ch
    if h >= 1:
        return (h - 1, y)
    if y < 1.0:
        raise TowerDomainError(f"chain log of value below one: {ch!r}")
    return (0, dir_ln(y, mode))


def _chain_exp(ch: tuple[int, float], mode: str) -> tuple[int, float]:
    return _chain_norm(ch[0] + 1, ch[1], mode)


def _chain_add_float(ch: tuple[int, float], c: float, mode: str) -> tuple[int, float]:
    """chain + c for a signed float addend; |c| << value whenever h >= 1."""
    if c == 0.0:
        return ch
    h, y = ch
    if h == 0:
        return (0, dir_add(y, c, mode))
    # value = exp(W), W = (h-1, y); ln(value + c) = W + log1p(c * exp(-W))
    w_mode = (UP if c < 0 else DOWN) if mode == UP else (DOWN if c < 0 else UP)
    wf = _chain_demote((h - 1, y), w_mode if mode != NEAREST else NEAREST)
    if wf is None or wf > _DEMOTE_MAX_EXP:
        # dropped correction is far below one mantissa ulp; nudge only when
        # the rounding direction points with the dropped term
        if (mode == UP and c > 0) or (mode == DOWN and c < 0):
            return _chain_nudge(ch, mode)
        return ch
    t = dir_mul(c, dir_exp(-wf, _flip(w_mode)), mode)
    if t <= -1.0:
        t = math.nextafter(-1.0, 0.0)  # caller guarantees value + c > 0
    corr = dir_log1p(t, mode)
    return _chain_exp(_chain_add_float((h - 1, y), corr, mode), mode)


def _chain_diff_float(small: tuple[int, float], big: tuple[int, float], mode: str):
    """value(small) - value(big) <= 0 as a directed float; None when the gap
    leaves double range (the ratio exp(diff) is then certainly negligible)."""
    if _chain_cmp(small, big) == 0:
        return 0.0
    sf = _chain_demote(small, mode)
    bf = _chain_demote(big, _flip(mode))
    if sf is None or bf is None:
        return None
    return dir_sub(sf, bf, mode)


def _chain_add(a: tuple[int, float], b: tuple[int, float], mode: str) -> tuple[int, float]:
    """Sum of two nonnegative chains."""
    if _chain_cmp(a, b) < 0:
        a, b = b, a
    if a[0] == 0:
        return _chain_norm(0, dir_add(a[1], b[1], mode), mode)
    if b[0] == 0:
        return _chain_norm(*_chain_add_float(a, b[1], mode), mode)
    d = _chain_diff_float((b[0] - 1, b[1]), (a[0] - 1, a[1]), mode)
    if d is None:
        return _chain_nudge(a, UP) if mode == UP else a
    t = dir_exp(d, mode)
    corr = dir_log1p(t, mode)
    return _chain_exp(_chain_add_float((a[0] - 1, a[1]), corr, mode), mode)


def _chain_sub(big: tuple[int, float], small: tuple[int, float], mode: str) -> tuple[int, float]:
    """big - small for chains with big > small >= 0."""
    if small == _ZERO_CHAIN:
        return big
    bf = _chain_demote(big, mode)
    sf = _chain_demote(small, _flip(mode))
    if bf is not None and sf is not None:
        return _chain_norm(0, dir_sub(bf, sf, mode), mode)
    # big is beyond double range; big * (1 - t) with t = small/big
    d = _chain_diff_float(small, big, _flip(mode))
    if d is None:
        return big if mode == UP else _chain_nudge(big, DOWN)
    t = dir_exp(d, _flip(mode))
    if t >= 1.0:
        t = math.nextafter(1.0, 0.0)  # caller guarantees big > small
    corr = dir_log1p(-t, mode)
    return _chain_exp(_chain_add_float((big[0] - 1, big[1]), corr, mode), mode)


def _chain_mul(a: tuple[int, float], b: tuple[int, float], mode: str) -> tuple[int, float]:
    """Product of two nonnegative chains."""
    if a == _ZERO_CHAIN or b == _ZERO_CHAIN:
        return _ZERO_CHAIN
    if a[0] == 0 and b[0] == 0:
        return _chain_norm(0, dir_mul(a[1], b[1], mode), mode)
    lna = (a[0] - 1, a[1]) if a[0] >= 1 else (0, dir_ln(a[1], mode))
    lnb = (b[0] - 1, b[1]) if b[0] >= 1 else (0, dir_ln(b[1], mode))
    if lna[0] == 0 and lnb[0] == 0:
        return _chain_exp((0, dir_add(lna[1], lnb[1], mode)), mode)
    if lnb[0] == 0:
        return _chain_exp(_chain_add_float(lna, lnb[1], mode), mode)
    if lna[0] == 0:
        return _chain_exp(_chain_add_float(lnb, lna[1], mode), mode)
    return _chain_exp(_chain_add(lna, lnb, mode), mode)


def _chain_scale(ch: tuple[int, float], q: float, mode: str) -> tuple[int, float]:
    """chain * q for a positive float scalar."""
    if q <= 0.0 or not math.isfinite(q):
        raise TowerDomainError(f"scale factor must be positive finite, got {q!r}")
    if q == 1.0:
        return ch
    if ch[0] == 0:
        return _chain_norm(0, dir_mul(ch[1], q, mode), mode)
    lnq = dir_ln(q, mode)
    return _chain_exp(_chain_add_float((ch[0] - 1, ch[1]), lnq, mode), mode)


# ---------------------------------------------------------------------------
# Signed chains: (sign, chain) for a signed real with magnitude >= 0
# ---------------------------------------------------------------------------


def _chain_slog(ch: tuple[int, float], mode: str):
    """Signed log of a positive chain value: (sign of ln, chain of |ln|)."""
    h, y = ch
    if h >= 1:
        return (1, (h - 1, y))
    if y == 1.0:
        return (0, _ZERO_CHAIN)
    if y <= 0.0:
        raise TowerDomainError(f"slog of non-positive chain {ch!r}")
    if y > 1.0:
        return (1, (0, dir_ln(y, mode)))
    # ln y < 0: signed value toward mode means |ln y| toward the flip, and
    # negating a directed ln y delivers exactly that
    return (-1, (0, -dir_ln(y, mode)))


def _signed_add(a, b, mode: str):
    """Add signed chains; mode applies to the signed result value."""
    s1, c1 = a
    s2, c2 = b
    if s1 == 0:
        return b
    if s2 == 0:
        return a
    if s1 == s2:
        return (s1, _chain_add(c1, c2, mode if s1 > 0 else _flip(mode)))
    cmp = _chain_cmp(c1, c2)
    if cmp == 0:
        return (0, _ZERO_CHAIN)
    s, big, small = (s1, c1, c2) if cmp > 0 else (s2, c2, c1)
    return (s, _chain_sub(big, small, mode if s > 0 else _flip(mode)))


def _signed_demote(a, mode: str):
    s, c = a
    if s == 0:
        return 0.0
    f = _chain_demote(c, mode if s > 0 else _flip(mode))
    return None if f is None else (f if s > 0 else -f)


def _exp_signed(a, mode: str) -> tuple[int, float]:
    """exp of a signed chain, as a nonnegative chain."""
    s, c = a
    if s == 0:
        return (0, 1.0)
    if s > 0:
        return _chain_exp(c, mode)
    f = _chain_demote(c, _flip(mode))
    if f is None:
        return (0, _nudge(0.0, UP)) if mode == UP else _ZERO_CHAIN
    return (0, dir_exp(-f, mode))


# ---------------------------------------------------------------------------
# TowerReal
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TowerReal:
    """Canonical signed tower number: sign * exp^height(mantissa)^(+-1).

    ``recip`` set means the stored tower belongs to the reciprocal, i.e.
    the represented magnitude is 1 / exp^height(mantissa).  Construction
    canonicalizes (round-to-nearest on representation changes), so
    comparisons never evaluate exponentials.
    """

    sign: int
    recip: bool
    height: int
    mantissa: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise TowerDomainError(f"sign must be -1, 0 or 1, got {self.sign!r}")
        if not math.isfinite(self.mantissa):
            raise TowerDomainError(f"non-finite mantissa {self.mantissa!r}")
        if self.mantissa < 0.0:
            raise TowerDomainError("mantissa must be nonnegative; use sign")
        if self.mantissa == 0.0 or self.sign == 0:
            if self.recip and self.mantissa == 0.0 and self.sign != 0:
                raise TowerRangeError("reciprocal of zero")
            object.__setattr__(self, "sign", 0)
            object.__setattr__(self, "recip", False)
            object.__setattr__(self, "height", 0)
            object.__setattr__(self, "mantissa", 0.0)
            return
        h, y = _chain_norm(self.height, self.mantissa, NEAREST)
        recip = self.recip
        if h == 0 and y < 1.0:
            recip = not recip
            if y >= 1e-290:
                h, y = _chain_norm(0, 1.0 / y, NEAREST)
            else:
                h, y = _chain_norm(1, -math.log(y), NEAREST)
        if h == 0 and y == 1.0:
            recip = False
        object.__setattr__(self, "recip", recip)
        object.__setattr__(self, "height", h)
        object.__setattr__(self, "mantissa", y)

    @property
    def _chain(self) -> tuple[int, float]:
        return (self.height, self.mantissa)

    def _ln_sign(self) -> int:
        """Sign of ln|value|; exact."""
        if self.sign == 0:
            raise TowerDomainError("log of zero")
        if self.height == 0 and self.mantissa == 1.0:
            return 0
        return -1 if self.recip else 1

    def _slog(self, mode: str = NEAREST):
        """Signed chain of ln|value|; exact for heights >= 1."""
        s = self._ln_sign()
        if s == 0:
            return (0, _ZERO_CHAIN)
        _, c = _chain_slog(self._chain, mode if not self.recip else _flip(mode))
        return (s, c)

    def __repr__(self) -> str:
        return tower_to_string(self)

    def __neg__(self) -> "TowerReal":
        return TowerReal(-self.sign, self.recip, self.height, self.mantissa)

    def __lt__(self, other):
        return tower_compare(self, other) < 0

    def __le__(self, other):
        return tower_compare(self, other) <= 0

    def __gt__(self, other):
        return tower_compare(self, other) > 0

    def __ge__(self, other):
        return tower_compare(self, other) >= 0


ZERO = TowerReal(0, False, 0, 0.0)
ONE = TowerReal(1, False, 0, 1.0)
TWO = TowerReal(1, False, 0, 2.0)


def _from_chain(sign: int, recip: bool, ch: tuple[int, float], cmode: str = NEAREST) -> TowerReal:
    """Tower from a magnitude chain rounded toward ``cmode``.

    A height-0 chain value in (0, 1) flips the recip flag here, with the
    reciprocal rounded toward the flipped direction, so the constructor's
    nearest-normalization never touches a directed result.
    """
    h, y = ch
    if h == 0 and y == 0.0:
        if recip:
            raise TowerRangeError("reciprocal of zero chain")
        return ZERO
    if h == 0 and y < 1.0:
        recip = not recip
        fmode = _flip(cmode)
        if y >= 1e-290:
            h, y = _chain_norm(0, dir_div(1.0, y, fmode), fmode)
        else:
            h, y = _chain_norm(1, -dir_ln(y, cmode), fmode)
    return TowerReal(sign, recip, h, y)


def _from_float_directed(x: float, mode: str) -> TowerReal:
    """Directed tower construction from a float (nearest when mode says so)."""
    if x == 0.0:
        return ZERO
    sign = 1 if x > 0 else -1
    m = abs(x)
    vmode = mode if sign > 0 else _flip(mode)
    if m >= 1.0:
        return _from_chain(sign, False, _chain_norm(0, m, vmode), vmode)
    cmode = _flip(vmode)
    if m >= 1e-290:
        return _from_chain(sign, True, _chain_norm(0, dir_div(1.0, m, cmode), cmode), cmode)
    return _from_chain(sign, True, _chain_norm(1, -dir_ln(m, _flip(cmode)), cmode), cmode)


def _from_signed_chain(sign: int, slog, mode: str) -> TowerReal:
    """Tower with the given sign whose magnitude is exp(signed ln chain)."""
    s_ln, c_ln = slog
    if s_ln == 0:
        return TowerReal(sign, False, 0, 1.0)
    recip = s_ln < 0
    vmode = mode if sign > 0 else _flip(mode)
    cmode = vmode if not recip else _flip(vmode)
    return _from_chain(sign, recip, _chain_exp(c_ln, cmode), cmode)


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------


def tower_from_real(x: float) -> TowerReal:
    """Canonical TowerReal for a finite double (nearest, <= 1 mantissa ulp)."""
    if not math.isfinite(x):
        raise TowerDomainError(f"non-finite input {x!r}")
    return _from_float_directed(x, NEAREST)


def tower_to_real(a: TowerReal, mode: str = NEAREST) -> float:
    """Demote to a double; TowerRangeError outside double range."""
    if a.sign == 0:
        return 0.0
    vmode = mode if a.sign > 0 else _flip(mode)
    if not a.recip:
        f = _chain_demote(a._chain, vmode)
        if f is None:
            raise TowerRangeError(f"{a!r} exceeds double range")
        return f if a.sign > 0 else -f
    h, y = a._chain
    if h == 0:
        f = dir_div(1.0, y, vmode)
    elif h == 1 and y <= 745.0:
        f = dir_exp(-y, vmode)
    else:
        raise TowerRangeError(f"{a!r} underflows double range")
    return f if a.sign > 0 else -f


def tower_reciprocal(a: TowerReal) -> TowerReal:
    """Exact reciprocal: flips the recip flag."""
    if a.sign == 0:
        raise TowerDomainError("reciprocal of zero")
    if a.height == 0 and a.mantissa == 1.0:
        return a
    return TowerReal(a.sign, not a.recip, a.height, a.mantissa)


def tower_compare(a: TowerReal, b: TowerReal) -> int:
    """Three-way value comparison; exact on canonical forms."""
    if a.sign != b.sign:
        return -1 if a.sign < b.sign else 1
    if a.sign == 0:
        return 0
    if a.recip != b.recip:
        mag = 1 if b.recip else -1  # plain magnitudes (>= 1) beat reciprocals
    elif a.recip:
        mag = -_chain_cmp(a._chain, b._chain)
    else:
        mag = _chain_cmp(a._chain, b._chain)
    return mag if a.sign > 0 else -mag


def tower_mul(a: TowerReal, b: TowerReal, mode: str = NEAREST) -> TowerReal:
    if a.sign == 0 or b.sign == 0:
        return ZERO
    sign = a.sign * b.sign
    vmode = mode if sign > 0 else _flip(mode)
    if a.height == 0 and b.height == 0:
        # float fast path keeps small products/quotients exact
        ya, yb = a.mantissa, b.mantissa
        if a.recip == b.recip:
            cmode = vmode if not a.recip else _flip(vmode)
            return _from_chain(sign, a.recip, _chain_norm(0, dir_mul(ya, yb, cmode), cmode), cmode)
        plain, recu = (ya, yb) if not a.recip else (yb, ya)
        if plain >= recu:
            return _from_chain(sign, False, _chain_norm(0, dir_div(plain, recu, vmode), vmode), vmode)
        cmode = _flip(vmode)
        return _from_chain(sign, True, _chain_norm(0, dir_div(recu, plain, cmode), cmode), cmode)
    if a._ln_sign() == 0:
        return TowerReal(sign, b.recip, b.height, b.mantissa)
    if b._ln_sign() == 0:
        return TowerReal(sign, a.recip, a.height, a.mantissa)
    res = _signed_add(a._slog(vmode), b._slog(vmode), vmode)
    return _from_signed_chain(sign, res, mode)


def tower_div(a: TowerReal, b: TowerReal, mode: str = NEAREST) -> TowerReal:
    return tower_mul(a, tower_reciprocal(b), mode)


def _abs(a: TowerReal) -> TowerReal:
    return a if a.sign >= 0 else -a


def tower_add(a: TowerReal, b: TowerReal, mode: str = NEAREST) -> TowerReal:
    """General signed addition.

    Exact float arithmetic when both operands demote to doubles; dominant
    absorption with a log1p correction otherwise (documented accuracy about
    one mantissa ulp, always directionally sound).
    """
    if a.sign == 0:
        return b
    if b.sign == 0:
        return a
    try:
        fa = tower_to_real(a, mode)
        fb = tower_to_real(b, mode)
        if abs(fa) < 8e307 and abs(fb) < 8e307:
            return _from_float_directed(dir_add(fa, fb, mode), mode)
    except TowerRangeError:
        pass
    mag_cmp = tower_compare(_abs(a), _abs(b))
    if mag_cmp == 0:
        if a.sign == b.sign:
            return tower_mul(a, TWO, mode)
        return ZERO
    dom, small = (a, b) if mag_cmp > 0 else (b, a)
    sign = dom.sign
    same = dom.sign == small.sign
    vmode = mode if sign > 0 else _flip(mode)
    tdir = vmode if same else _flip(vmode)  # |result| grows with t iff signs agree
    sd, cd = dom._slog(_flip(tdir))
    d = _signed_demote(_signed_add(small._slog(tdir), (-sd, cd), tdir), tdir)
    t = None if d is None else dir_exp(d, tdir)
    if t is None or t == 0.0:
        # |small/dom| is below float resolution: absorb, nudging only when
        # rounding points with the dropped term
        if mode == NEAREST:
            return dom
        need_grow = same and ((mode == UP and sign > 0) or (mode == DOWN and sign < 0))
        need_shrink = (not same) and ((mode == UP and sign < 0) or (mode == DOWN and sign > 0))
        if not (need_grow or need_shrink):
            return dom
        mag_dir = UP if need_grow else DOWN
        if dom.recip:
            mag_dir = _flip(mag_dir)
        return _from_chain(sign, dom.recip, _chain_nudge(dom._chain, mag_dir), mag_dir)
    if t >= 1.0:
        t = math.nextafter(1.0, 0.0)
    corr = dir_log1p(t if same else -t, vmode)
    res = _signed_add(
        dom._slog(vmode), (1 if corr > 0 else -1, (0, abs(corr))), vmode
    )
    return _from_signed_chain(sign, res, mode)


def tower_sub(a: TowerReal, b: TowerReal, mode: str = NEAREST) -> TowerReal:
    return tower_add(a, -b, mode)


def tower_pow(a: TowerReal, p: float, mode: str = NEAREST) -> TowerReal:
    """a**p for positive a and a finite double exponent."""
    if not math.isfinite(p):
        raise TowerDomainError(f"non-finite exponent {p!r}")
    if a.sign == 0:
        if p <= 0:
            raise TowerDomainError("zero base requires a positive exponent")
        return ZERO
    if a.sign < 0:
        raise TowerDomainError("negative base not supported")
    if p == 0.0:
        return ONE
    if p == 1.0:
        return a
    s_ln = a._ln_sign()
    if s_ln == 0:
        return ONE
    res_recip = (s_ln > 0) == (p < 0)
    cmode = mode if not res_recip else _flip(mode)
    q = abs(p)
    if a.height == 0 and q == int(q) and 1 <= q <= 64:
        try:
            v = a.mantissa ** int(q)
        except OverflowError:  # float ** raises instead of returning inf
            v = math.inf
        if math.isfinite(v) and Fraction(a.mantissa) ** int(q) == Fraction(v):
            return _from_chain(1, res_recip, _chain_norm(0, v, cmode), cmode)
    # stored magnitude of the result is exp(q * |ln a|) whatever the flags
    c_ln = _chain_slog(a._chain, cmode)[1]
    return _from_chain(1, res_recip, _chain_exp(_chain_scale(c_ln, q, cmode), cmode), cmode)


def tower_pow_tower(a: TowerReal, p: TowerReal, mode: str = NEAREST) -> TowerReal:
    """a**p with a positive TowerReal exponent (for p beyond double range)."""
    if p.sign == 0:
        return ONE
    if p.sign < 0:
        raise TowerDomainError("tower exponent must be positive; combine with tower_reciprocal")
    if a.sign <= 0:
        raise TowerDomainError("base must be positive")
    try:
        return tower_pow(a, tower_to_real(p, NEAREST), mode)
    except TowerRangeError:
        pass
    s_ln = a._ln_sign()
    if s_ln == 0:
        return ONE
    res_recip = s_ln < 0
    cmode = mode if not res_recip else _flip(mode)
    c_ln = _chain_slog(a._chain, cmode)[1]
    if not p.recip:
        ln_mag = _chain_mul(p._chain, c_ln, cmode)
    else:
        # ln|ln result| = ln p + ln|ln a| with ln p far negative
        z = _signed_add(p._slog(cmode), _chain_slog(c_ln, cmode), cmode)
        ln_mag = _exp_signed(z, cmode)
    return _from_chain(1, res_recip, _chain_exp(ln_mag, cmode), cmode)


def tower_ln(a: TowerReal, mode: str = NEAREST) -> TowerReal:
    """Natural log as a signed TowerReal (negative for magnitudes < 1)."""
    if a.sign <= 0:
        raise TowerDomainError("log requires a positive value")
    s_ln = a._ln_sign()
    if s_ln == 0:
        return ZERO
    _, c_ln = a._slog(mode)
    return _from_chain(s_ln, False, c_ln, mode if s_ln > 0 else _flip(mode))


def tower_exp(x: TowerReal, mode: str = NEAREST) -> TowerReal:
    """exp of a signed TowerReal."""
    if x.sign == 0:
        return ONE
    recip = x.sign < 0
    cmode = mode if not recip else _flip(mode)
    if x.recip:
        f = abs(tower_to_real(x, cmode if x.sign > 0 else _flip(cmode)))
        return _from_chain(1, recip, _chain_norm(0, dir_exp(f, cmode), cmode), cmode)
    return _from_chain(1, recip, _chain_exp(x._chain, cmode), cmode)


def tower_iterlog(a: TowerReal, base: float, count: int) -> float:
    """Apply log_base ``count`` times, then demote to a double.

    The running value must stay strictly above one before each
    application; a violation raises TowerDomainError naming the iteration.
    """
    if base <= 1.0:
        raise TowerDomainError(f"base must exceed one, got {base!r}")
    if count < 0:
        raise TowerDomainError("count must be nonnegative")
    if a.sign <= 0:
        raise TowerDomainError("iterated log requires a positive value")
    if count == 0:
        return tower_to_real(a)
    if a.recip:
        raise TowerDomainError("iterated log at iteration 1: value does not exceed one")
    lnb = math.log(base)
    ch = a._chain
    for i in range(1, count + 1):
        if ch[0] == 0 and ch[1] <= 1.0:
            raise TowerDomainError(f"iterated log at iteration {i}: value does not exceed one")
        lnc = _chain_ln(ch, NEAREST)
        if lnc[0] == 0:
            # plain division keeps log_b(b^n) exact for float-exact ratios
            ch = _chain_norm(0, lnc[1] / lnb, NEAREST)
        else:
            ch = _chain_scale(lnc, 1.0 / lnb, NEAREST)
    f = _chain_demote(ch, NEAREST)
    if f is None:
        raise TowerRangeError(f"iterated log result still exceeds double range (chain {ch!r})")
    return f


# ---------------------------------------------------------------------------
# Serialization: [-][1/]T(<height>;<mantissa>), 17 significant digits.
# ---------------------------------------------------------------------------

_TOWER_RE = re.compile(r"^(-)?(1/)?T\((\d+);([^)]+)\)$")


def tower_to_string(a: TowerReal) -> str:
    neg = "-" if a.sign < 0 else ""
    rec = "1/" if a.recip else ""
    return f"{neg}{rec}T({a.height};{a.mantissa:.17g})"


def tower_from_string(s: str) -> TowerReal:
    m = _TOWER_RE.match(s.strip())
    if not m:
        raise TowerDomainError(f"malformed tower literal {s!r}")
    neg, rec, h, y = m.groups()
    mant = float(y)
    if mant == 0.0:
        if rec:
            raise TowerDomainError("reciprocal of zero")
        return ZERO
    return TowerReal(-1 if neg else 1, bool(rec), int(h), mant)


def mantissa_ulps_apart(a: TowerReal, b: TowerReal) -> float:
    """Distance in mantissa ulps when representations align, else inf."""
    if (a.sign, a.recip, a.height) != (b.sign, b.recip, b.height):
        return math.inf
    lo, hi = sorted((a.mantissa, b.mantissa))
    n = 0
    while lo < hi and n <= 4096:
        lo = math.nextafter(lo, math.inf)
        n += 1
    return float(n) if lo >= hi else math.inf
