"""Exact arithmetic in real quadratic fields, plus certified rational intervals.

Two small number types back every exactness claim in the package:

* ``QuadExact`` — an element ``x + y*sqrt(d)`` of Q(sqrt(d)) with ``x, y``
  rational and ``d`` a fixed positive non-square integer.  Field operations,
  exact sign/comparisons and exact floor; no rounding anywhere.
* ``RationalInterval`` — a closed interval with Fraction endpoints, used for
  quantities only known to finite precision (decimal frequency ratios,
  transcendental bounds).  Comparisons either certify or raise
  ``PrecisionExhaustedError``; they never guess.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .errors import ConfigError, PrecisionExhaustedError

RationalLike = Union[int, Fraction]


def _as_fraction(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    raise TypeError(f"expected an exact rational, got {type(v).__name__}")


def is_perfect_square(n: int) -> bool:
    if n < 0:
        return False
    r = math.isqrt(n)
    return r * r == n


def sqrt_bracket(d: int, scale: int = 10**30) -> tuple[Fraction, Fraction]:
    """Certified rational bracket lo <= sqrt(d) <= hi with hi-lo <= 1/scale."""
    if d < 0:
        raise ConfigError("sqrt_bracket needs a nonnegative radicand")
    r = math.isqrt(d * scale * scale)
    lo = Fraction(r, scale)
    hi = Fraction(r + 1, scale)
    if lo * lo == d:  # perfect square at this scale: collapse
        hi = lo
    return lo, hi


def _cmp_rational_sqrt(y: Fraction, r: Fraction, d: int) -> int:
    """Exact sign of y*sqrt(d) - r for rational y, r and non-square d > 0."""
    if y == 0:
        return -_sign_fraction(r)
    if y > 0:
        if r <= 0:
            return 1
        # compare y^2 d vs r^2
        lhs, rhs = y * y * d, r * r
        return (lhs > rhs) - (lhs < rhs)
    # y < 0: y*sqrt(d) < 0
    if r >= 0:
        return -1
    lhs, rhs = y * y * d, r * r  # both sides negative; flip
    return (rhs > lhs) - (rhs < lhs)


def _sign_fraction(r: Fraction) -> int:
    return (r > 0) - (r < 0)


@dataclass(frozen=True)
class QuadExact:
    """Exact element x + y*sqrt(d) of the real quadratic field Q(sqrt(d))."""

    x: Fraction
    y: Fraction
    d: int

    def __post_init__(self):
        object.__setattr__(self, "x", _as_fraction(self.x))
        object.__setattr__(self, "y", _as_fraction(self.y))
        if self.d <= 0 or is_perfect_square(self.d):
            raise ConfigError("QuadExact needs a positive non-square radicand d")

    # -- construction helpers ------------------------------------------------
    @classmethod
    def rational(cls, v, d: int) -> "QuadExact":
        return cls(_as_fraction(v), Fraction(0), d)

    def _coerce(self, other) -> "QuadExact":
        if isinstance(other, QuadExact):
            if other.d != self.d:
                if other.y == 0:
                    return QuadExact(other.x, Fraction(0), self.d)
                if self.y == 0:
                    raise TypeError("mixing different quadratic fields")
                raise TypeError("mixing different quadratic fields")
            return other
        return QuadExact.rational(other, self.d)

    # -- ring/field operations ------------------------------------------------
    def __add__(self, other):
        o = self._coerce(other)
        return QuadExact(self.x + o.x, self.y + o.y, self.d)

    __radd__ = __add__

    def __neg__(self):
        return QuadExact(-self.x, -self.y, self.d)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        return QuadExact(
            self.x * o.x + self.y * o.y * self.d,
            self.x * o.y + self.y * o.x,
            self.d,
        )

    __rmul__ = __mul__

    def inverse(self) -> "QuadExact":
        norm = self.x * self.x - self.y * self.y * self.d
        if norm == 0:
            raise ZeroDivisionError("QuadExact division by zero")
        return QuadExact(self.x / norm, -self.y / norm, self.d)

    def __truediv__(self, other):
        return self * self._coerce(other).inverse()

    def __rtruediv__(self, other):
        return self.inverse() * other

    # -- exact order structure --------------------------------------------------
    def sign(self) -> int:
        if self.y == 0:
            return _sign_fraction(self.x)
        return _cmp_rational_sqrt(self.y, -self.x, self.d)

    def __eq__(self, other):
        try:
            o = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self.x == o.x and self.y == o.y

    def __hash__(self):
        return hash((self.x, self.y, self.d))

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __gt__(self, other):
        return (self - other).sign() > 0

    def __ge__(self, other):
        return (self - other).sign() >= 0

    def __abs__(self):
        return self if self.sign() >= 0 else -self

    def is_rational(self) -> bool:
        return self.y == 0

    def as_fraction(self) -> Fraction:
        if self.y != 0:
            raise ValueError("not a rational element")
        return self.x

    def floor(self) -> int:
        """Exact floor, via a float estimate corrected by exact comparisons."""
        est = math.floor(float(self.x) + float(self.y) * math.sqrt(self.d))
        while self < est:
            est -= 1
        while self >= est + 1:
            est += 1
        return est

    def bracket(self, scale: int = 10**30) -> tuple[Fraction, Fraction]:
        """Certified rational bracket around the exact value."""
        lo, hi = sqrt_bracket(self.d, scale)
        if self.y >= 0:
            return self.x + self.y * lo, self.x + self.y * hi
        return self.x + self.y * hi, self.x + self.y * lo

    def __float__(self):
        lo, hi = self.bracket(10**40)
        return float((lo + hi) / 2)

    def __repr__(self):
        return f"({self.x} + {self.y}*sqrt({self.d}))"


@dataclass(frozen=True)
class RationalInterval:
    """Closed interval [lo, hi] with Fraction endpoints; all ops outward-safe."""

    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", _as_fraction(self.lo))
        object.__setattr__(self, "hi", _as_fraction(self.hi))
        if self.lo > self.hi:
            raise ConfigError("interval endpoints out of order")

    @classmethod
    def point(cls, v) -> "RationalInterval":
        f = _as_fraction(v)
        return cls(f, f)

    def __add__(self, other):
        o = other if isinstance(other, RationalInterval) else RationalInterval.point(other)
        return RationalInterval(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self):
        return RationalInterval(-self.hi, -self.lo)

    def __sub__(self, other):
        o = other if isinstance(other, RationalInterval) else RationalInterval.point(other)
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = other if isinstance(other, RationalInterval) else RationalInterval.point(other)
        cands = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi]
        return RationalInterval(min(cands), max(cands))

    __rmul__ = __mul__

    def inverse(self) -> "RationalInterval":
        if self.lo <= 0 <= self.hi:
            raise PrecisionExhaustedError("interval inverse across zero")
        return RationalInterval(1 / self.hi, 1 / self.lo)

    def __truediv__(self, other):
        o = other if isinstance(other, RationalInterval) else RationalInterval.point(other)
        return self * o.inverse()

    def __abs__(self):
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return RationalInterval(Fraction(0), max(-self.lo, self.hi))

    def width(self) -> Fraction:
        return self.hi - self.lo

    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, v) -> bool:
        f = _as_fraction(v)
        return self.lo <= f <= self.hi

    def strictly_below(self, other) -> bool:
        o = other if isinstance(other, RationalInterval) else RationalInterval.point(other)
        return self.hi < o.lo

    def strictly_above(self, other) -> bool:
        o = other if isinstance(other, RationalInterval) else RationalInterval.point(other)
        return self.lo > o.hi

    def certified_le(self, other) -> bool:
        """True/False when provable either way; raises if the intervals overlap."""
        o = other if isinstance(other, RationalInterval) else RationalInterval.point(other)
        if self.hi <= o.lo:
            return True
        if self.lo > o.hi:
            return False
        raise PrecisionExhaustedError(
            f"cannot certify <= between overlapping intervals {self} and {o}"
        )

    def floor_certified(self) -> int:
        fl, fh = math.floor(self.lo), math.floor(self.hi)
        if fl != fh:
            raise PrecisionExhaustedError("interval straddles an integer; floor uncertain")
        return fl

    def __float__(self):
        return float(self.midpoint())

    def __repr__(self):
        return f"[{self.lo}, {self.hi}]"


ExactReal = Union[Fraction, QuadExact, RationalInterval]


def exact_sign(v: ExactReal) -> int:
    """Sign of an exact quantity; certified or PrecisionExhaustedError."""
    if isinstance(v, QuadExact):
        return v.sign()
    if isinstance(v, RationalInterval):
        if v.lo > 0:
            return 1
        if v.hi < 0:
            return -1
        if v.lo == 0 and v.hi == 0:
            return 0
        raise PrecisionExhaustedError("sign of interval straddling zero")
    return _sign_fraction(_as_fraction(v))
