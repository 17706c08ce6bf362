"""Certified arithmetic building blocks: quadratic-field numbers, intervals."""

import math
from fractions import Fraction

import mpmath
import pytest

from nlscascade.errors import ConfigError, PrecisionExhaustedError
from nlscascade.exactnum import (
    QuadExact,
    RationalInterval,
    exact_sign,
    is_perfect_square,
    sqrt_bracket,
)


def sqrt2() -> QuadExact:
    return QuadExact(Fraction(0), Fraction(1), 2)


def golden() -> QuadExact:
    return QuadExact(Fraction(1, 2), Fraction(1, 2), 5)


class TestQuadExact:
    def test_field_arithmetic(self):
        s = sqrt2()
        assert (1 + s) * (1 + s) == QuadExact(Fraction(3), Fraction(2), 2)
        assert (1 + s) * (1 - s) == QuadExact(Fraction(-1), Fraction(0), 2)
        assert s * s == QuadExact(Fraction(2), Fraction(0), 2)
        assert s.inverse() == QuadExact(Fraction(0), Fraction(1, 2), 2)
        assert s / s == QuadExact(Fraction(1), Fraction(0), 2)

    def test_golden_satisfies_its_polynomial(self):
        g = golden()
        assert g * g == g + 1

    def test_sign_and_order(self):
        s = sqrt2()
        assert (s - Fraction(141421356, 100000000)).sign() == 1
        assert (s - Fraction(3, 2)).sign() == -1
        assert (s - s).sign() == 0
        assert Fraction(1) < s < Fraction(3, 2)
        assert golden() > Fraction(8, 5)

    def test_floor(self):
        s = sqrt2()
        assert s.floor() == 1
        assert (3 + 2 * s).floor() == 5
        assert (-s).floor() == -2
        assert golden().floor() == 1
        assert QuadExact.rational(Fraction(7, 2), 2).floor() == 3

    def test_bracket_encloses_true_value(self):
        for v in [sqrt2(), golden(), 3 + 2 * sqrt2(), -5 * sqrt2() + 1]:
            lo, hi = v.bracket()
            with mpmath.workdps(60):
                truth = mpmath.mpf(v.x.numerator) / v.x.denominator + (
                    mpmath.mpf(v.y.numerator) / v.y.denominator
                ) * mpmath.sqrt(v.d)
                assert mpmath.mpf(lo.numerator) / lo.denominator <= truth
                assert truth <= mpmath.mpf(hi.numerator) / hi.denominator
            assert hi - lo < Fraction(1, 10**25)

    def test_rational_degenerate(self):
        r = QuadExact.rational(Fraction(7, 5), 3)
        assert r.is_rational() and r.as_fraction() == Fraction(7, 5)
        assert not sqrt2().is_rational()
        with pytest.raises(ValueError):
            sqrt2().as_fraction()

    def test_mixing_fields_rejected(self):
        s2 = sqrt2()
        s3 = QuadExact(Fraction(0), Fraction(1), 3)
        with pytest.raises(TypeError):
            _ = s2 + s3
        # rational-valued elements of another field are fine
        assert s2 + QuadExact.rational(1, 3) == 1 + s2

    def test_float_conversion(self):
        assert math.isclose(float(sqrt2()), math.sqrt(2), rel_tol=1e-15)


class TestSqrtBracket:
    def test_brackets_squares_correctly(self):
        for d in [2, 3, 5, 7, 2026]:
            lo, hi = sqrt_bracket(d)
            assert lo * lo <= d <= hi * hi
            assert hi - lo <= Fraction(2, 10**30)

    def test_perfect_square_detection(self):
        assert is_perfect_square(49) and is_perfect_square(0)
        assert not is_perfect_square(48) and not is_perfect_square(-4)


class TestRationalInterval:
    def test_outward_arithmetic(self):
        a = RationalInterval(1, 2)
        b = RationalInterval(3, 4)
        assert (a + b) == RationalInterval(4, 6)
        assert (a - b) == RationalInterval(-3, -1)
        c = RationalInterval(-3, 4)
        assert a * c == RationalInterval(-6, 8)
        assert abs(c) == RationalInterval(0, 4)
        assert abs(RationalInterval(-5, -2)) == RationalInterval(2, 5)

    def test_inverse_and_division(self):
        assert RationalInterval(2, 4).inverse() == RationalInterval(
            Fraction(1, 4), Fraction(1, 2)
        )
        with pytest.raises(PrecisionExhaustedError):
            RationalInterval(-1, 1).inverse()
        assert RationalInterval(1, 2) / RationalInterval(2, 2) == RationalInterval(
            Fraction(1, 2), 1
        )

    def test_certified_comparisons(self):
        assert RationalInterval(1, 2).certified_le(RationalInterval(2, 3))
        assert not RationalInterval(3, 4).certified_le(RationalInterval(1, 2))
        with pytest.raises(PrecisionExhaustedError):
            RationalInterval(1, 3).certified_le(RationalInterval(2, 4))
        assert RationalInterval(1, 2).strictly_below(RationalInterval(3, 4))
        assert not RationalInterval(1, 3).strictly_below(RationalInterval(3, 4))

    def test_floor_certified(self):
        assert RationalInterval(Fraction(23, 10), Fraction(24, 10)).floor_certified() == 2
        assert RationalInterval(2, Fraction(21, 10)).floor_certified() == 2
        with pytest.raises(PrecisionExhaustedError):
            RationalInterval(Fraction(19, 10), 2).floor_certified()

    def test_ordering_validation(self):
        with pytest.raises(ConfigError):
            RationalInterval(2, 1)

    def test_exact_sign(self):
        assert exact_sign(Fraction(-3, 7)) == -1
        assert exact_sign(sqrt2() - 1) == 1
        assert exact_sign(RationalInterval(1, 2)) == 1
        assert exact_sign(RationalInterval.point(0)) == 0
        with pytest.raises(PrecisionExhaustedError):
            exact_sign(RationalInterval(-1, 1))
