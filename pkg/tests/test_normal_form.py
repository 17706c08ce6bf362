"""Generating function, cancellation identity, and coordinate-change flow."""

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import pytest

from nlscascade.diophantine import LogProfile, PowerProfile, parse_omega
from nlscascade.errors import (
    BallEscapeError,
    ConfigError,
    PrecisionExhaustedError,
    ResonantQuartetError,
)
from nlscascade.exactnum import QuadExact
from nlscascade.lambda_set import build_base_set, scale_set, unit_square_base
from nlscascade.normal_form import (
    build_F,
    default_eta,
    evaluate_F,
    export_f_csv,
    f_is_real,
    flow_amplitudes,
    gamma_apply,
    homological_residual,
    make_birkhoff,
    momentum_vector,
    perturb_term,
    wbnf_smallness,
)
from nlscascade.resonance import Mode

SQRT2 = QuadExact(Fraction(0), Fraction(1), 2)
# forty certified decimal places of sqrt(2)
SQRT2_DEC40 = "dec:1.4142135623730950488016887242096980785696"


class ModeBag:
    """Hand-picked mode collections for divisor edge cases."""

    def __init__(self, modes):
        self._modes = {Mode(*m) for m in modes}

    def mode_set(self):
        return set(self._modes)

    def modes(self):
        return sorted(self._modes)


@dataclass
class FakeState:
    amplitudes: dict
    support: frozenset = field(default_factory=frozenset)


@pytest.fixture(scope="module")
def square32():
    return scale_set(unit_square_base(), 3, 2)


@pytest.fixture(scope="module")
def f_square32(square32):
    return build_F(square32, Fraction(3, 2))


@pytest.fixture(scope="module")
def deep_set():
    return scale_set(build_base_set(3, seed=0), 17, 12)


def _random_ball_state(F, rng, radius):
    raw = {m: complex(rng.normal(), rng.normal()) for m in F.support}
    total = sum(abs(v) for v in raw.values())
    return {m: radius * v / total for m, v in raw.items()}


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def test_square_generating_function_shape(f_square32):
    F = f_square32
    assert len(F.terms) == 40
    assert len(F.support) == 16
    assert F.l1_floor == 18.0
    # small-divisor floor respects the p**2/2 lower bound
    assert F.l1_floor >= 3**2 / 2
    for t in F.terms:
        assert t.multiplicity in (1, 2, 4)
        assert t.coefficient == 1j * t.multiplicity / (2.0 * t.omega_value)
        # q**2 * Omega is an integer for a rational ratio p/q
        assert (4 * t.exact_omega).denominator == 1
    assert f_is_real(F)


def test_deep_set_generating_function(deep_set):
    F = build_F(deep_set, SQRT2)
    assert len(F.terms) == 1552
    assert len(F.support) == 596
    assert F.l1_floor == 2168.0
    assert F.l1_floor >= 17**2 / 2
    assert f_is_real(F)
    # at omega = sqrt(2) every divisor is an exact even integer
    for t in F.terms:
        assert t.exact_omega is not None
        assert float(t.exact_omega) == t.omega_value
        assert t.omega_value == int(t.omega_value)
        assert int(t.omega_value) % 2 == 0


def test_support_contains_set_and_outsiders(square32, f_square32):
    inside = square32.mode_set()
    support = set(f_square32.support)
    assert inside <= support
    assert len(support) > len(inside)
    for t in f_square32.terms:
        outsiders = [n for n in t.quartet if n not in inside]
        assert len(outsiders) == 1
        assert outsiders[0] in support


# ---------------------------------------------------------------------------
# cancellation identity
# ---------------------------------------------------------------------------


def test_residual_exactly_zero_rational(square32, f_square32):
    assert homological_residual(f_square32, square32, Fraction(3, 2)) == 0.0


def test_residual_exactly_zero_sqrt2(deep_set):
    F = build_F(deep_set, SQRT2)
    assert homological_residual(F, deep_set, SQRT2) == 0.0


def test_perturbed_coefficient_is_detected(square32, f_square32):
    idx = 5
    eps = 1e-6
    pert = perturb_term(f_square32, idx, eps)
    r = homological_residual(pert, square32, Fraction(3, 2))
    expected = eps * abs(f_square32.terms[idx].omega_value)
    assert math.isclose(r, expected, rel_tol=1e-9)
    # a real shift also breaks closure under monomial conjugation
    assert not f_is_real(pert)


def test_perturbation_scales_linearly(square32, f_square32):
    r1 = homological_residual(perturb_term(f_square32, 0, 1e-8), square32, Fraction(3, 2))
    r2 = homological_residual(perturb_term(f_square32, 0, 2e-8), square32, Fraction(3, 2))
    assert math.isclose(r2, 2 * r1, rel_tol=1e-9)


def test_empty_interaction_table():
    lone = ModeBag([(1, 0)])
    F = build_F(lone, Fraction(1))
    assert F.terms == ()
    assert F.l1_floor == math.inf
    assert default_eta(F) == math.inf
    assert homological_residual(F, lone, Fraction(1)) == 0.0
    out = flow_amplitudes(make_birkhoff(F, eta=1.0), {Mode(1, 0): 0.5 + 0j})
    assert out == {Mode(1, 0): 0.5 + 0j}


# ---------------------------------------------------------------------------
# exactly resonant and undecidable divisors
# ---------------------------------------------------------------------------


def test_exact_resonance_rational_ratio():
    # (4,1) - (2,2) + (1,0) = (3,-1) is outside and the alternating square
    # sums are (4, -4): the divisor vanishes at ratio 1
    bag = ModeBag([(4, 1), (2, 2), (1, 0)])
    with pytest.raises(ResonantQuartetError):
        build_F(bag, Fraction(1))


def test_exact_resonance_sqrt2():
    # alternating square sums (-4, 2): resonant exactly at ratio sqrt(2)
    bag = ModeBag([(-5, -5), (-3, -4), (-4, -3)])
    with pytest.raises(ResonantQuartetError):
        build_F(bag, SQRT2)
    # the same collection is fine away from the resonant ratio
    F = build_F(bag, Fraction(3, 2))
    assert F.l1_floor > 0


def test_truncated_decimal_interval_route(square32):
    F = build_F(square32, parse_omega(SQRT2_DEC40))
    assert all(t.exact_omega is None for t in F.terms)
    assert f_is_real(F)
    # the residual is limited by the double rounding of the stored
    # coefficients, not by the (much narrower) certified interval
    r = homological_residual(F, square32, parse_omega(SQRT2_DEC40))
    assert 0 < r < 1e-13


def test_truncated_decimal_cannot_exclude_resonance():
    bag = ModeBag([(-5, -5), (-3, -4), (-4, -3)])
    with pytest.raises(PrecisionExhaustedError):
        build_F(bag, parse_omega("dec:1.41421356"))


# ---------------------------------------------------------------------------
# smallness hypothesis
# ---------------------------------------------------------------------------


def test_smallness_certified_log_profiles():
    s1 = scale_set(unit_square_base(), 41, 29)
    assert wbnf_smallness(s1, LogProfile(Fraction(1))) == pytest.approx(
        0.08577423176615911
    )
    s2 = scale_set(unit_square_base(), 239, 169)
    assert wbnf_smallness(s2, LogProfile(Fraction(2))) == pytest.approx(
        0.0033170269566018154
    )


def test_smallness_violated_at_shallow_convergent():
    s = scale_set(unit_square_base(), 7, 5)
    with pytest.raises(ConfigError, match="smallness"):
        wbnf_smallness(s, LogProfile(Fraction(1)))
    with pytest.raises(ConfigError):
        build_F(s, Fraction(7, 5), profile=LogProfile(Fraction(1)))


def test_smallness_exact_power_route():
    s = scale_set(unit_square_base(), 41, 29)
    val = wbnf_smallness(s, PowerProfile(Fraction(1), Fraction(1)))
    assert val == pytest.approx(0.009959559067120033)
    with pytest.raises(ConfigError):
        wbnf_smallness(s, PowerProfile(Fraction(1), Fraction(1)), Fraction(1, 1000))


# ---------------------------------------------------------------------------
# the flow
# ---------------------------------------------------------------------------


def test_flow_round_trip(f_square32):
    rng = np.random.default_rng(11)
    eta = default_eta(f_square32)
    a = _random_ball_state(f_square32, rng, 0.5 * eta)
    fwd = make_birkhoff(f_square32, "forward")
    inv = make_birkhoff(f_square32, "inverse")
    there = flow_amplitudes(fwd, a)
    back = flow_amplitudes(inv, there)
    # the map must actually move the state before we trust the round trip
    assert max(abs(there[m] - a[m]) for m in a) > 1e-8
    assert max(abs(back[m] - a[m]) for m in a) < 1e-12


def test_flow_conserves_mass_momentum_and_F(f_square32):
    rng = np.random.default_rng(12)
    a = _random_ball_state(f_square32, rng, 0.4 * default_eta(f_square32))
    out = flow_amplitudes(make_birkhoff(f_square32, "forward"), a)

    def mass(state):
        return math.fsum(abs(v) ** 2 for v in state.values())

    assert math.isclose(mass(out), mass(a), rel_tol=1e-12)
    mx0, my0 = momentum_vector(a)
    mx1, my1 = momentum_vector(out)
    assert abs(mx1 - mx0) < 1e-10 and abs(my1 - my0) < 1e-10
    f0 = evaluate_F(f_square32, a)
    f1 = evaluate_F(f_square32, out)
    assert f0 != 0.0
    assert abs(f1 - f0) < 1e-15


def test_F_vanishes_on_pure_set_states(square32, f_square32):
    # every retained monomial carries exactly one factor outside the set
    rng = np.random.default_rng(13)
    a = {m: complex(rng.normal(), rng.normal()) for m in square32.mode_set()}
    assert evaluate_F(f_square32, a) == 0.0


def test_ball_guard_rejects_large_input(f_square32):
    eta = default_eta(f_square32)
    rng = np.random.default_rng(14)
    a = _random_ball_state(f_square32, rng, 1.5 * eta)
    with pytest.raises(BallEscapeError):
        gamma_apply(make_birkhoff(f_square32, "forward"), FakeState(a, frozenset(a)))
    with pytest.raises(BallEscapeError):
        gamma_apply(make_birkhoff(f_square32, "inverse"), FakeState(a, frozenset(a)))


def test_gamma_apply_replaces_state_fields(f_square32):
    rng = np.random.default_rng(15)
    a = _random_ball_state(f_square32, rng, 0.3 * default_eta(f_square32))
    state = FakeState(a, frozenset(a))
    out = gamma_apply(make_birkhoff(f_square32, "forward"), state)
    assert isinstance(out, FakeState)
    assert out.support == frozenset(out.amplitudes)
    assert out.amplitudes != a


def test_displacement_is_cubic_in_the_radius(f_square32):
    rng = np.random.default_rng(16)
    shape = _random_ball_state(f_square32, rng, 1.0)
    radii = [0.02, 0.04, 0.08, 0.16]
    sizes = []
    for r in radii:
        a = {m: r * v for m, v in shape.items()}
        out = flow_amplitudes(make_birkhoff(f_square32, eta=1.0), a)
        sizes.append(sum(abs(out.get(m, 0) - a.get(m, 0)) for m in set(out) | set(a)))
    slope = np.polyfit(np.log(radii), np.log(sizes), 1)[0]
    assert abs(slope - 3.0) < 0.2


def test_displacement_prefactor_shrinks_with_q():
    rng = np.random.default_rng(17)
    prefactors = []
    for p, q in ((3, 2), (7, 5), (17, 12)):
        F = build_F(scale_set(unit_square_base(), p, q), Fraction(p, q))
        shape = _random_ball_state(F, rng, 1.0)
        eps = 0.05 * math.sqrt(F.l1_floor)
        a = {m: eps * v for m, v in shape.items()}
        out = flow_amplitudes(make_birkhoff(F, eta=10 * eps), a)
        diff = sum(abs(out.get(m, 0) - a.get(m, 0)) for m in set(out) | set(a))
        prefactors.append(diff / eps**3)
    assert prefactors[0] > prefactors[1] > prefactors[2]


def test_make_birkhoff_rejects_unknown_direction(f_square32):
    with pytest.raises(ConfigError):
        make_birkhoff(f_square32, direction="sideways")


def test_csv_export_round_trips(tmp_path, f_square32):
    path = tmp_path / "terms.csv"
    export_f_csv(f_square32, path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == len(f_square32.terms)
    first = f_square32.terms[0]
    assert int(rows[0]["multiplicity"]) == first.multiplicity
    assert float(rows[0]["coeff_imag"]) == first.coefficient.imag
    assert int(rows[0]["j1"]) == first.quartet[0].j
