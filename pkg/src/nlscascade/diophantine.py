"""Continued fractions and approximability classes for the frequency ratio.

The torus aspect ratio enters every estimate through how well it is
approximated by rationals.  This module fixes the three admissible input
forms (exact quadratic surd, exact rational as a degenerate surd, certified
decimal), expands continued fractions with no rounding, and decides
psi-approximability questions with certified arithmetic: every boolean
returned here is backed either by integer/fraction comparisons or by
outward-rounded interval evaluation that is escalated until it separates.

Conventions:

* logarithms are natural throughout;
* approximants are continued-fraction convergents only - the returned
  margins document any slack;
* decimal inputs use truncation semantics: the true value lies in
  ``[digits, digits + 10**-precision]``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

import mpmath

from .errors import ConfigError, PrecisionExhaustedError, SearchError
from .exactnum import QuadExact, RationalInterval, is_perfect_square

_IV_DPS_LADDER = (60, 140, 340, 800)


# ---------------------------------------------------------------------------
# frequency-ratio specifications
# ---------------------------------------------------------------------------


class OmegaSpec:
    """Base class for exact or certified specifications of the aspect ratio."""

    def exact_value(self):
        raise NotImplementedError

    def value_interval(self, scale: int = 10**40) -> RationalInterval:
        raise NotImplementedError

    def squared(self):
        """omega**2 in the tightest exact form available."""
        raise NotImplementedError

    def serialize(self) -> str:
        raise NotImplementedError

    def is_exact(self) -> bool:
        raise NotImplementedError

    def __float__(self):
        return float(self.value_interval(10**40).midpoint())


@dataclass(frozen=True)
class QuadraticSurd(OmegaSpec):
    """Exact value (a + b*sqrt(d))/c with integers a, b, c and non-square d.

    b = 0 degenerates to the rational a/c, which is accepted everywhere
    except where a construction is meaningless for rationals (and says so).
    """

    a: int
    b: int
    d: int
    c: int

    def __post_init__(self):
        if self.c == 0:
            raise ConfigError("surd denominator must be nonzero")
        if self.d <= 0 or is_perfect_square(self.d):
            raise ConfigError("surd radicand must be positive and non-square")
        if self.exact_value() < 1:
            raise ConfigError("frequency ratio must lie in [1, infinity)")

    def exact_value(self) -> Union[Fraction, QuadExact]:
        if self.b == 0:
            return Fraction(self.a, self.c)
        return QuadExact(Fraction(self.a, self.c), Fraction(self.b, self.c), self.d)

    def value_interval(self, scale: int = 10**40) -> RationalInterval:
        v = self.exact_value()
        if isinstance(v, Fraction):
            return RationalInterval.point(v)
        lo, hi = v.bracket(scale)
        return RationalInterval(lo, hi)

    def squared(self) -> Union[Fraction, QuadExact]:
        v = self.exact_value()
        sq = v * v
        if isinstance(sq, QuadExact) and sq.is_rational():
            return sq.as_fraction()
        return sq

    def is_exact(self) -> bool:
        return True

    def is_rational(self) -> bool:
        return self.b == 0

    def serialize(self) -> str:
        if self.a == 0 and self.b == 1 and self.c == 1:
            return f"sqrt:{self.d}"
        return f"surd:{self.a},{self.b},{self.d},{self.c}"


@dataclass(frozen=True)
class HighPrecisionDecimal(OmegaSpec):
    """A decimal string of certified leading digits (truncation semantics)."""

    digits: str
    precision: int = field(default=-1)  # decimal places certified; -1 = all given

    def __post_init__(self):
        if not re.fullmatch(r"\d+\.\d+", self.digits):
            raise ConfigError("decimal digits must look like '1.4142...'")
        frac_places = len(self.digits.split(".")[1])
        if self.precision == -1:
            object.__setattr__(self, "precision", frac_places)
        if self.precision > frac_places:
            raise ConfigError("claimed precision exceeds digits given")
        if self.value_interval().lo < 1:
            raise ConfigError("frequency ratio must lie in [1, infinity)")

    def exact_value(self):
        raise ConfigError("a decimal specification has no exact value")

    def value_interval(self, scale: int = 0) -> RationalInterval:
        whole, frac = self.digits.split(".")
        frac = frac[: self.precision]
        lo = Fraction(int(whole + frac), 10 ** len(frac))
        return RationalInterval(lo, lo + Fraction(1, 10 ** self.precision))

    def squared(self) -> RationalInterval:
        v = self.value_interval()
        return v * v

    def is_exact(self) -> bool:
        return False

    def serialize(self) -> str:
        return f"dec:{self.digits}"


def parse_omega(text: str) -> OmegaSpec:
    """Parse 'p/q', 'sqrt:d', 'surd:a,b,d,c' or 'dec:<digits>'."""
    if ":" not in text:
        try:
            ratio = Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"unknown omega spec {text!r}") from exc
        return QuadraticSurd(ratio.numerator, 0, 2, ratio.denominator)
    kind, _, rest = text.partition(":")
    if kind == "sqrt":
        return QuadraticSurd(0, 1, int(rest), 1)
    if kind == "surd":
        parts = [int(x) for x in rest.split(",")]
        if len(parts) != 4:
            raise ConfigError("surd spec needs exactly a,b,d,c")
        return QuadraticSurd(*parts)
    if kind == "dec":
        return HighPrecisionDecimal(rest)
    raise ConfigError(f"unknown omega spec {text!r}")


# ---------------------------------------------------------------------------
# continued fractions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CFExpansion:
    quotients: tuple[int, ...]
    terminated: bool
    depth_requested: int


@dataclass(frozen=True)
class Convergent:
    """A continued-fraction convergent p/q with certified |omega - p/q| bounds."""

    p: int
    q: int
    index: int
    abs_error_bounds: RationalInterval

    def as_fraction(self) -> Fraction:
        return Fraction(self.p, self.q)


def expand_continued_fraction(omega: OmegaSpec, depth: int) -> CFExpansion:
    """First `depth` partial quotients; stops early (terminated) for rationals.

    Exact inputs use field arithmetic in Q(sqrt(d)); decimal inputs use
    interval arithmetic and raise PrecisionExhaustedError once the interval
    can no longer certify the next quotient.
    """
    if depth < 1:
        raise ConfigError("depth must be >= 1")
    if omega.is_exact():
        return _expand_exact(omega.exact_value(), depth)
    return _expand_interval(omega.value_interval(), depth)


def _expand_exact(x, depth: int) -> CFExpansion:
    quotients = []
    for _ in range(depth):
        if isinstance(x, Fraction):
            a = x.numerator // x.denominator
        else:
            a = x.floor()
        quotients.append(a)
        rem = x - a
        if (isinstance(rem, Fraction) and rem == 0) or (
            isinstance(rem, QuadExact) and rem.sign() == 0
        ):
            return CFExpansion(tuple(quotients), True, depth)
        x = 1 / rem
    return CFExpansion(tuple(quotients), False, depth)


def _expand_interval(x: RationalInterval, depth: int) -> CFExpansion:
    quotients = []
    for _ in range(depth):
        try:
            a = x.floor_certified()
        except PrecisionExhaustedError:
            raise PrecisionExhaustedError(
                f"decimal precision exhausted after {len(quotients)} quotients"
            ) from None
        quotients.append(a)
        rem = x - a
        if rem.lo <= 0:
            # cannot tell a rational stop from a continuation
            raise PrecisionExhaustedError(
                f"decimal precision exhausted after {len(quotients)} quotients"
            )
        x = rem.inverse()
    return CFExpansion(tuple(quotients), False, depth)


def _convergent_pq(quotients: Sequence[int]) -> list[tuple[int, int]]:
    out = []
    p_prev, q_prev, p, q = 1, 0, None, None
    for i, a in enumerate(quotients):
        if i == 0:
            p, q = a, 1
        else:
            p, q, p_prev, q_prev = a * p + p_prev, a * q + q_prev, p, q
        out.append((p, q))
    return out


def convergent_bracket(q: int, q_next: int) -> RationalInterval:
    """Two-sided bracket 1/(q(q_next+q)) <= |omega - p/q| <= 1/(q q_next)."""
    return RationalInterval(Fraction(1, q * (q_next + q)), Fraction(1, q * q_next))


def _exact_error(omega: OmegaSpec, p: int, q: int):
    """|omega - p/q| as Fraction, QuadExact or RationalInterval."""
    target = Fraction(p, q)
    if omega.is_exact():
        v = omega.exact_value()
        diff = v - target
        if isinstance(diff, Fraction):
            return abs(diff)
        return abs(diff)
    return abs(omega.value_interval() - target)


def _error_bounds(err, scale: int = 10**40) -> RationalInterval:
    if isinstance(err, Fraction):
        return RationalInterval.point(err)
    if isinstance(err, QuadExact):
        lo, hi = err.bracket(scale)
        return RationalInterval(max(lo, Fraction(0)), hi)
    return err


def convergents(omega: OmegaSpec, depth: int) -> list[Convergent]:
    """The first `depth` convergents with certified absolute-error intervals.

    When the next denominator is known the stored bounds are intersected
    with the classical bracket [1/(q(q+q')), 1/(qq')]; the final convergent
    of a rational gets the exact point interval {0}.
    """
    try:
        exp = expand_continued_fraction(omega, depth + 1)
    except PrecisionExhaustedError:
        exp = expand_continued_fraction(omega, depth)
    pq = _convergent_pq(exp.quotients)
    out = []
    for i in range(min(depth, len(pq))):
        p, q = pq[i]
        err = _exact_error(omega, p, q)
        bounds = _error_bounds(err)
        if exp.terminated and i == len(pq) - 1:
            bounds = RationalInterval.point(Fraction(0))
        else:
            if i + 1 < len(pq):
                cb = convergent_bracket(q, pq[i + 1][1])
                lo = max(bounds.lo, cb.lo)
                hi = min(bounds.hi, cb.hi)
            else:
                lo, hi = bounds.lo, min(bounds.hi, Fraction(1, q * q))
            if lo > hi:
                raise PrecisionExhaustedError(
                    f"error bounds inconsistent at convergent {p}/{q}"
                )
            bounds = RationalInterval(lo, hi)
        out.append(Convergent(p, q, i, bounds))
    return out


# ---------------------------------------------------------------------------
# approximation profiles
# ---------------------------------------------------------------------------


class ApproxProfile:
    """A decay profile psi(q); approximability means |omega - p/q| <= psi(q)/q."""

    def psi(self, q: int):
        raise NotImplementedError

    def describe(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class LogProfile(ApproxProfile):
    """psi(q) = c / (q log q), natural log, c >= 1."""

    c: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "c", Fraction(self.c))
        if self.c < 1:
            raise ConfigError("profile constant must satisfy c >= 1")

    def psi(self, q: int) -> float:
        if q < 2:
            raise ConfigError("log profile needs q >= 2")
        return float(self.c) / (q * math.log(q))

    def describe(self) -> str:
        return f"log(c={self.c})"


@dataclass(frozen=True)
class PowerProfile(ApproxProfile):
    """psi(q) = c / q**(1+tau) with rational tau > 0, c >= 1."""

    c: Fraction = Fraction(1)
    tau: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "c", Fraction(self.c))
        object.__setattr__(self, "tau", Fraction(self.tau))
        if self.c < 1:
            raise ConfigError("profile constant must satisfy c >= 1")
        if self.tau <= 0:
            raise ConfigError("power profile needs tau > 0")

    def psi(self, q: int) -> Union[Fraction, float]:
        if q < 1:
            raise ConfigError("power profile needs q >= 1")
        expo = 1 + self.tau
        if expo.denominator == 1:
            return self.c / Fraction(q) ** expo.numerator
        return float(self.c) * q ** (-float(expo))

    def describe(self) -> str:
        return f"power(c={self.c},tau={self.tau})"


def psi_value(profile: ApproxProfile, q: int):
    """psi(q); exact Fraction when the profile allows, else float."""
    return profile.psi(q)


# ---------------------------------------------------------------------------
# certified comparisons
# ---------------------------------------------------------------------------


def _frac_to_iv(fr: Fraction):
    return mpmath.iv.mpf(fr.numerator) / mpmath.iv.mpf(fr.denominator)


def _compare_err_le(
    err_bounds: Callable[[int], RationalInterval],
    rhs_iv: Callable[[], "mpmath.iv.mpf"],
    context: str,
) -> tuple[bool, float]:
    """Certified decision err <= rhs; returns (verdict, signed float margin)."""
    old_dps = mpmath.iv.dps
    try:
        for dps in _IV_DPS_LADDER:
            mpmath.iv.dps = dps
            rhs = rhs_iv()
            lhs = err_bounds(10 ** (dps + 10))
            lhs_lo, lhs_hi = _frac_to_iv(lhs.lo).a, _frac_to_iv(lhs.hi).b
            margin = float(mpmath.mpf(rhs.mid) - (mpmath.mpf(lhs_lo) + mpmath.mpf(lhs_hi)) / 2)
            if lhs_hi <= rhs.a:
                return True, margin
            if lhs_lo > rhs.b:
                return False, margin
        raise PrecisionExhaustedError(f"cannot certify comparison: {context}")
    finally:
        mpmath.iv.dps = old_dps


def _psi_check_at(omega: OmegaSpec, p: int, q: int, profile: ApproxProfile):
    """Certified |omega - p/q| <= psi(q)/q for a known convergent (p, q)."""
    err = _exact_error(omega, p, q)

    if isinstance(profile, PowerProfile):
        # exact route: err**v * q**(2v+u) <= c**v with tau = u/v
        u, v = profile.tau.numerator, profile.tau.denominator
        rhs = profile.c**v
        scalepow = Fraction(q) ** (2 * v + u)
        if isinstance(err, (Fraction, QuadExact)):
            lhs = err
            for _ in range(v - 1):
                lhs = lhs * err
            lhs = lhs * scalepow
            ok = not (lhs > rhs)
            margin = float(profile.psi(q)) / q - float(err)
            return ok, margin
        lhs = err
        for _ in range(v - 1):
            lhs = lhs * err
        lhs = lhs * scalepow
        if lhs.hi <= rhs:
            return True, float(profile.psi(q)) / q - float(err)
        if lhs.lo > rhs:
            return False, float(profile.psi(q)) / q - float(err)
        raise PrecisionExhaustedError("decimal too coarse for psi comparison")

    if isinstance(profile, LogProfile):
        if q < 2:
            raise ConfigError("log profile needs q >= 2")
        c = profile.c

        def rhs_iv():
            qv = mpmath.iv.mpf(q)
            return _frac_to_iv(c) / (qv * qv * mpmath.iv.log(qv))

        return _compare_err_le(
            lambda scale: _error_bounds(err, scale), rhs_iv, f"psi check at q={q}"
        )

    raise ConfigError(f"unknown profile {profile!r}")


@dataclass(frozen=True)
class PsiCheck:
    is_psi_convergent: bool
    margin: float
    p: int
    q: int


def is_psi_convergent(
    omega: OmegaSpec, p: int, q: int, profile: ApproxProfile, max_depth: int = 64
) -> PsiCheck:
    """Decide whether the convergent p/q approximates omega at profile quality.

    The pair must be an actual continued-fraction convergent of omega
    (checked, ConfigError otherwise); the margin reports psi(q)/q - error.
    """
    found = False
    for conv in convergents(omega, max_depth):
        if (conv.p, conv.q) == (p, q):
            found = True
            break
        if conv.q > q:
            break
    if not found:
        raise ConfigError(f"{p}/{q} is not a continued-fraction convergent")
    ok, margin = _psi_check_at(omega, p, q, profile)
    return PsiCheck(ok, margin, p, q)


def select_convergent(
    omega: OmegaSpec,
    profile: ApproxProfile,
    constraint: Optional[Callable[[int, float], bool]] = None,
    max_depth: int = 64,
) -> Convergent:
    """First convergent that is psi-good and satisfies the (q, psi(q)) predicate."""
    for conv in convergents(omega, max_depth):
        if isinstance(profile, LogProfile) and conv.q < 2:
            continue
        ok, _ = _psi_check_at(omega, conv.p, conv.q, profile)
        if not ok:
            continue
        if constraint is not None and not constraint(conv.q, float(profile.psi(conv.q))):
            continue
        return conv
    raise SearchError(
        f"no qualifying convergent of {omega.serialize()} within depth {max_depth}"
    )


# ---------------------------------------------------------------------------
# Liouville guard
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GuardReport:
    """Finite-depth evidence that |omega - p/q| >= q**-(1+log q) on convergents."""

    passed: bool
    depth: int
    q_min: int
    witness: Optional[Convergent]


def liouville_guard(omega: OmegaSpec, depth: int, q_min: int = 10) -> GuardReport:
    """Check the anti-Liouville floor on all convergents up to `depth`.

    Only denominators q >= q_min are tested (the floor is vacuous or false
    for every number at tiny q); rational inputs are rejected because their
    expansion terminates and the guard is undefined.  The report is evidence
    at finite depth, never a proof about the full expansion.
    """
    if depth < 1:
        raise ConfigError("depth must be >= 1")
    if isinstance(omega, QuadraticSurd) and omega.is_rational():
        raise ConfigError("liouville guard undefined for rational input")
    exp = expand_continued_fraction(omega, depth)
    if exp.terminated:
        raise ConfigError("liouville guard undefined for rational input")
    convs = convergents(omega, depth)
    for conv in convs:
        if conv.q < q_min:
            continue
        err = _exact_error(omega, conv.p, conv.q)
        q = conv.q

        def rhs_iv():
            lq = mpmath.iv.log(mpmath.iv.mpf(q))
            return mpmath.iv.exp(-(1 + lq) * lq)

        # True means err <= q**-(1+log q) certified: the floor fails at q.
        # (Exact equality cannot occur: the floor is transcendental while the
        # error is algebraic, so the certified comparison always separates.)
        below, _ = _compare_err_le(
            lambda scale: _error_bounds(err, scale), rhs_iv, f"liouville floor at q={q}"
        )
        if below:
            return GuardReport(False, depth, q_min, conv)
    return GuardReport(True, depth, q_min, None)
