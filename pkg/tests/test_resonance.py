"""Quartet arithmetic, classification, and extremal resonance bounds.

Enumeration counts and extremal values were frozen from the bounding-box
sweep in oracles.py (slots 1-3 range over the whole box there, versus
solved-slot enumeration in the package).
"""

import random
from fractions import Fraction

import pytest

from nlscascade.diophantine import parse_omega
from nlscascade.errors import ConfigError, SearchError
from nlscascade.resonance import (
    Mode,
    Quartet,
    canonical_quartet,
    classify_quartet,
    compute_L1,
    compute_U0,
    enumerate_A0,
    enumerate_A1,
    is_trivial_quartet,
    momentum_sum,
    omega_pq,
    omega_r,
    quartet_multiplicity,
    rectangle_pairing,
)

from oracles import brute_force_inside, brute_force_one_outside, min_abs_omega

UNIT_SQUARE = [(0, 0), (1, 0), (0, 1), (1, 1)]
SCALED_32 = [(0, 0), (3, 0), (0, 2), (3, 2)]
# image of the tilted rectangle (0,0),(2,1),(1,3),(-1,2) under (j,k)->(3j,2k)
TILTED_32 = [(0, 0), (6, 2), (3, 6), (-3, 4)]


def monomial_key(q: Quartet):
    odd = tuple(sorted((tuple(q.n1), tuple(q.n3))))
    even = tuple(sorted((tuple(q.n2), tuple(q.n4))))
    return (odd[0], even[0], odd[1], even[1])


class StubSet:
    """Minimal frequency-set stand-in until the real builder exists."""

    def __init__(self, modes, p, q, families):
        self._modes = {Mode(*m) for m in modes}
        self.p, self.q = p, q
        self._families = families

    def mode_set(self):
        return set(self._modes)

    def family_monomial_keys(self):
        keys = set()
        for parents, children in self._families:
            par = tuple(sorted(Mode(*m) for m in parents))
            chi = tuple(sorted(Mode(*m) for m in children))
            keys.add((par, chi))
            keys.add((chi, par))
        return keys


class TestOmegaR:
    def test_axis_aligned_rectangle_always_resonant(self):
        q = Quartet(Mode(0, 0), Mode(1, 0), Mode(1, 2), Mode(0, 2))
        for r2 in [Fraction(7, 3), Fraction(2), Fraction(1)]:
            assert omega_r(q, r2) == 0

    def test_worked_example(self):
        q = Quartet(Mode(0, 0), Mode(1, 1), Mode(2, 0), Mode(1, -1))
        assert omega_r(q, Fraction(2)) == -2

    def test_degenerate_identity(self):
        n = Mode(3, -2)
        assert omega_r(Quartet(n, n, n, n), Fraction(5, 7)) == 0

    def test_slot_symmetries(self):
        rng = random.Random(7)
        r2 = Fraction(5, 3)
        for _ in range(200):
            ns = [Mode(rng.randint(-9, 9), rng.randint(-9, 9)) for _ in range(4)]
            q = Quartet(*ns)
            assert omega_r(Quartet(ns[2], ns[1], ns[0], ns[3]), r2) == omega_r(q, r2)
            assert omega_r(Quartet(ns[1], ns[0], ns[3], ns[2]), r2) == -omega_r(q, r2)

    def test_rectangle_identity_on_closed_quartets(self):
        rng = random.Random(11)
        for _ in range(200):
            n1, n2, n3 = (Mode(rng.randint(-9, 9), rng.randint(-9, 9)) for _ in range(3))
            n4 = Mode(n1.j - n2.j + n3.j, n1.k - n2.k + n3.k)
            q = Quartet(n1, n2, n3, n4)
            assert omega_r(q, Fraction(1)) == rectangle_pairing(q)

    def test_anisotropic_scaling_covariance(self):
        rng = random.Random(13)
        for _ in range(200):
            p, q = rng.randint(1, 9), rng.randint(1, 9)
            ns = [Mode(rng.randint(-9, 9), rng.randint(-9, 9)) for _ in range(4)]
            scaled = Quartet(*[Mode(p * n.j, q * n.k) for n in ns])
            assert omega_pq(scaled, p, q) == p * p * omega_r(Quartet(*ns), Fraction(1))


class TestClassification:
    def test_outside_counts(self):
        lam = [Mode(0, 0), Mode(1, 0), Mode(0, 1)]
        q_all_in = Quartet(Mode(0, 0), Mode(1, 0), Mode(1, 0), Mode(0, 0))
        assert classify_quartet(q_all_in, lam) == 0
        q_one_out = Quartet(Mode(1, 0), Mode(0, 0), Mode(0, 1), Mode(1, 1))
        assert classify_quartet(q_one_out, lam) == 1
        assert momentum_sum(q_one_out) == Mode(0, 0)

    def test_momentum_violation_rejected(self):
        q = Quartet(Mode(0, 0), Mode(1, 0), Mode(0, 0), Mode(0, 0))
        assert classify_quartet(q, [Mode(0, 0)]) is None

    def test_canonicalization_and_multiplicity(self):
        q = Quartet(Mode(1, 1), Mode(0, 1), Mode(0, 0), Mode(1, 0))
        canon = canonical_quartet(q)
        assert canon == Quartet(Mode(0, 0), Mode(0, 1), Mode(1, 1), Mode(1, 0))
        assert quartet_multiplicity(canon) == 4
        doubled = Quartet(Mode(1, 0), Mode(0, 0), Mode(1, 0), Mode(2, 0))
        assert quartet_multiplicity(doubled) == 2
        assert is_trivial_quartet(Quartet(Mode(1, 0), Mode(1, 0), Mode(2, 2), Mode(2, 2)))


class TestEnumeration:
    @pytest.mark.parametrize(
        "modes,expected",
        [(UNIT_SQUARE, 40), (SCALED_32, 40), (TILTED_32, 40), ([(0, 0)], 0), ([], 0),
         ([(0, 0), (2, 1), (-1, 3)], 18)],
    )
    def test_A1_counts_frozen(self, modes, expected):
        assert len(enumerate_A1(modes)) == expected

    @pytest.mark.parametrize(
        "modes", [UNIT_SQUARE, SCALED_32, TILTED_32, [(0, 0), (2, 1), (-1, 3)], [(0, 0)]]
    )
    def test_A1_matches_bounding_box_sweep(self, modes):
        mine = {monomial_key(q) for q in enumerate_A1(modes)}
        assert mine == brute_force_one_outside(modes)

    @pytest.mark.parametrize(
        "modes,expected", [(UNIT_SQUARE, 12), (SCALED_32, 12), (TILTED_32, 12)]
    )
    def test_A0_matches_oracle(self, modes, expected):
        mine = enumerate_A0(modes)
        assert len(mine) == expected
        assert {monomial_key(q) for q in mine} == brute_force_inside(modes)

    def test_all_A1_members_classify_as_one_outside(self):
        for q in enumerate_A1(SCALED_32):
            assert classify_quartet(q, SCALED_32) == 1


class TestExtremalBounds:
    def test_L1_rational_ratio_exact(self):
        res = compute_L1(SCALED_32, parse_omega("3/2"))
        assert res.exact == Fraction(18)
        assert res.exact.denominator in (1, 2, 4)
        # independent sweep minimum
        val, _ = min_abs_omega(brute_force_one_outside(SCALED_32), Fraction(9, 4))
        assert val == res.exact

    def test_L1_sqrt2_certified(self):
        res = compute_L1(SCALED_32, parse_omega("sqrt:2"))
        assert res.exact == 16  # exact: the minimizer has no j-content
        assert res.value >= 3 * 3 / 2  # Lemma floor p^2/2
        assert res.quartets_examined == 40

    def test_L1_tilted(self):
        assert compute_L1(TILTED_32, parse_omega("sqrt:2")).exact == 78

    def test_L1_empty_raises(self):
        with pytest.raises(SearchError):
            compute_L1([(0, 0)], parse_omega("sqrt:2"))

    def test_U0_rational_ratio_is_zero(self):
        stub = StubSet(
            SCALED_32, 3, 2, [(((0, 0), (3, 2)), ((3, 0), (0, 2)))]
        )
        assert compute_U0(stub, parse_omega("3/2")).exact == 0

    def test_U0_axis_aligned_family_degenerate(self):
        # both alternating sums vanish for the scaled unit square, so the
        # width is 0 even away from the rational ratio
        stub = StubSet(SCALED_32, 3, 2, [(((0, 0), (3, 2)), ((3, 0), (0, 2)))])
        assert compute_U0(stub, parse_omega("sqrt:2")).exact == 0

    def test_U0_tilted_family(self):
        stub = StubSet(TILTED_32, 3, 2, [(((0, 0), (3, 6)), ((6, 2), (-3, 4)))])
        res = compute_U0(stub, parse_omega("sqrt:2"))
        # |omega^2 - p^2/q^2| * |alternating k-sum| = 1/4 * 16
        assert res.exact == 4
        assert res.quartets_examined == 12

    def test_U0_asserts_faithfulness(self):
        stub = StubSet(
            [(0, 0), (1, 0), (2, 0), (3, 0)],
            3, 2,
            [(((0, 0), (3, 0)), ((1, 0), (2, 0)))],
        )
        with pytest.raises(ConfigError):
            compute_U0(stub, parse_omega("3/2"))

    def test_U0_no_families_raises(self):
        stub = StubSet(SCALED_32, 3, 2, [])
        with pytest.raises(SearchError):
            compute_U0(stub, parse_omega("3/2"))
