"""Degree-four generating Hamiltonian and its time-one flow.

The generating function F carries one term per canonical quartet with
exactly one mode outside the given set (ordered-arrangement multiplicity
folded into the coefficient).  Cancelling the corresponding quartic terms
of the full Hamiltonian is a coefficient-level identity, checked exactly in
``homological_residual`` against a slot-by-slot re-expansion that never
touches the quartet enumerator used by ``build_F``.  The change of
coordinates itself is realized as the time +/-1 flow of the Hamiltonian
vector field of F, which lives on the finite support of the term table.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import mpmath
import numpy as np
from scipy.integrate import solve_ivp

from .diophantine import ApproxProfile, PowerProfile
from .errors import (
    BallEscapeError,
    ConfigError,
    PrecisionExhaustedError,
    ResonantQuartetError,
    ToleranceUnmetError,
)
from .exactnum import QuadExact, RationalInterval
from .lambda_set import LambdaSet
from .resonance import (
    Mode,
    Quartet,
    _monomial_key,
    alternating_square_sums,
    enumerate_A1,
    quartet_multiplicity,
    r_squared_of,
)

ExactScalar = Union[Fraction, QuadExact]


@dataclass(frozen=True)
class FTerm:
    """One canonical monomial of the generating function.

    ``coefficient`` is i*multiplicity/(2*Omega); its exact imaginary part is
    kept alongside so the cancellation identity can be evaluated without
    rounding whenever the aspect ratio is exact.
    """

    quartet: Quartet
    multiplicity: int
    omega_value: float
    coefficient: complex
    exact_omega: Optional[ExactScalar] = None


@dataclass(frozen=True)
class GeneratingFunction:
    terms: tuple[FTerm, ...]
    support: tuple[Mode, ...]
    l1_floor: float
    r_squared: object

    def term_map(self) -> dict:
        return {_monomial_key(t.quartet): t for t in self.terms}


@dataclass(frozen=True)
class BirkhoffMap:
    generating: GeneratingFunction
    direction: int  # +1 forward, -1 inverse
    eta: float
    rtol: float = 1e-12
    atol: float = 1e-14


# ---------------------------------------------------------------------------
# hypothesis check
# ---------------------------------------------------------------------------


def wbnf_smallness(
    lset: LambdaSet,
    profile: ApproxProfile,
    threshold: Fraction = Fraction(1, 2),
) -> float:
    """Certified check of 3^(2N) * R^2 * psi(q)/q <= threshold.

    R^2 is the exact squared radius max |n|^2 / q^2 of the scaled set.
    Returns the (float) value of the left side; raises ConfigError when the
    certified comparison fails, PrecisionExhaustedError when it cannot be
    decided.
    """
    q = lset.q
    max_norm = max(m.norm_sq() for m in lset.mode_set())
    base = Fraction(3 ** (2 * lset.N) * max_norm, q * q) / q
    if isinstance(profile, PowerProfile) and (1 + profile.tau).denominator == 1:
        lhs = base * profile.psi(q)
        if lhs > threshold:
            raise ConfigError(
                f"smallness hypothesis violated: {float(lhs):.3g} > {float(threshold)}"
            )
        return float(lhs)
    old_dps = mpmath.iv.dps
    try:
        for dps in (60, 140, 340, 800):
            mpmath.iv.dps = dps
            psi = _psi_interval(profile, q)
            lhs = (
                mpmath.iv.mpf(base.numerator) / mpmath.iv.mpf(base.denominator)
            ) * psi
            rhs = mpmath.iv.mpf(threshold.numerator) / mpmath.iv.mpf(
                threshold.denominator
            )
            if lhs.b <= rhs.a:
                return float(mpmath.mpf(lhs.mid))
            if lhs.a > rhs.b:
                raise ConfigError(
                    f"smallness hypothesis violated: "
                    f"{float(mpmath.mpf(lhs.mid)):.3g} > {float(threshold)}"
                )
        raise PrecisionExhaustedError("cannot certify the smallness hypothesis")
    finally:
        mpmath.iv.dps = old_dps


def _psi_interval(profile: ApproxProfile, q: int):
    c = Fraction(profile.c)
    c_iv = mpmath.iv.mpf(c.numerator) / mpmath.iv.mpf(c.denominator)
    if isinstance(profile, PowerProfile):
        expo = 1 + profile.tau
        return c_iv * mpmath.iv.mpf(q) ** (
            -mpmath.iv.mpf(expo.numerator) / mpmath.iv.mpf(expo.denominator)
        )
    return c_iv / (mpmath.iv.mpf(q) * mpmath.iv.log(mpmath.iv.mpf(q)))


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def _exact_omega(quartet: Quartet, r2):
    sj, sk = alternating_square_sums(quartet)
    return r2 * sk + sj


def build_F(
    lset: LambdaSet,
    omega,
    profile: Optional[ApproxProfile] = None,
    smallness_threshold: Fraction = Fraction(1, 2),
) -> GeneratingFunction:
    """One term per canonical one-outside quartet: i*mult/(2*Omega).

    When a decay profile is supplied, the smallness hypothesis is certified
    first.  Raises ResonantQuartetError if any divisor vanishes exactly,
    PrecisionExhaustedError if a truncated-decimal ratio cannot exclude
    zero.
    """
    if profile is not None:
        wbnf_smallness(lset, profile, smallness_threshold)
    r2 = r_squared_of(omega)
    terms = []
    support: set[Mode] = set(lset.mode_set())
    floor = math.inf
    for quartet in enumerate_A1(lset):
        om = _exact_omega(quartet, r2)
        mult = quartet_multiplicity(quartet)
        if isinstance(om, RationalInterval):
            if om.contains(0):
                raise PrecisionExhaustedError(
                    f"cannot exclude a vanishing divisor on {quartet}"
                )
            om_f = float(om.midpoint())
        else:
            if om == 0:
                raise ResonantQuartetError(f"exactly resonant combination: {quartet}")
            om_f = float(om)
        coeff = 1j * mult / (2.0 * om_f)
        terms.append(
            FTerm(
                quartet=quartet,
                multiplicity=mult,
                omega_value=om_f,
                coefficient=coeff,
                exact_omega=None if isinstance(om, RationalInterval) else om,
            )
        )
        support.update(quartet)
        floor = min(floor, abs(om_f))
    return GeneratingFunction(
        terms=tuple(terms),
        support=tuple(sorted(support)),
        l1_floor=floor,
        r_squared=r2,
    )


def f_is_real(F: GeneratingFunction, tol: float = 0.0) -> bool:
    """True when the term table is closed under monomial conjugation.

    Conjugating a monomial swaps the odd and even slot pairs; realness of F
    requires the swapped key to carry the conjugate coefficient.
    """
    table = {_monomial_key(t.quartet): t.coefficient for t in F.terms}
    for key, coeff in table.items():
        partner = table.get((key[1], key[0]))
        if partner is None or abs(partner - coeff.conjugate()) > tol:
            return False
    return True


# ---------------------------------------------------------------------------
# homological identity
# ---------------------------------------------------------------------------


def _expand_one_outside(lset: LambdaSet) -> dict:
    """Coefficients of the quartic terms with exactly one outside mode.

    Slot-by-slot re-expansion of the interaction sum: for each position of
    the outside mode, the three inside slots range over the whole set, the
    fourth is solved from momentum closure and must land outside, and
    ordered tuples sharing a mode between odd and even slots are excluded.
    Each ordered tuple contributes 1/2; the result is keyed by canonical
    monomial.
    """
    modes = lset.modes()
    mode_set = lset.mode_set()
    out: dict = {}
    half = Fraction(1, 2)

    def ordered(n1, n2, n3, n4):
        if n2 in (n1, n3) or n4 in (n1, n3):
            return
        key = _monomial_key(Quartet(n1, n2, n3, n4))
        out[key] = out.get(key, Fraction(0)) + half

    # every one-outside ordered tuple has its outside mode solved from the
    # three inside ones as a - b + c for some assignment of the inside slots
    for a in modes:
        for b in modes:
            for c in modes:
                v = Mode(a.j - b.j + c.j, a.k - b.k + c.k)
                if v in mode_set:
                    continue
                ordered(v, a, b, c)  # outside in slot 1, inside (n2,n3,n4)
                ordered(a, v, c, b)  # outside in slot 2, inside (n1,n3,n4)
                ordered(b, a, v, c)  # outside in slot 3, inside (n1,n2,n4)
                ordered(a, b, c, v)  # outside in slot 4, inside (n1,n2,n3)
    return out


def homological_residual(F: GeneratingFunction, lset: LambdaSet, omega) -> float:
    """Max residual coefficient of bracket-with-quadratic plus quartic part.

    Terms whose stored complex coefficient is bit-identical to the canonical
    value are cancelled in exact arithmetic (0.0 for exact ratios); anything
    else - e.g. a deliberately perturbed coefficient - falls back to
    floating point, where the residual of a perturbation eps is eps*|Omega|.
    """
    r2 = r_squared_of(omega)
    h4 = _expand_one_outside(lset)
    f_terms = F.term_map()
    worst = 0.0
    for key in set(h4) | set(f_terms):
        h_coeff = h4.get(key, Fraction(0))
        term = f_terms.get(key)
        if term is None:
            worst = max(worst, abs(float(h_coeff)))
            continue
        om = _exact_omega(term.quartet, r2)
        if isinstance(om, RationalInterval):
            lo, hi = _interval_residual(term, om, h_coeff)
            worst = max(worst, abs(lo), abs(hi))
            continue
        canonical = 1j * term.multiplicity / (2.0 * float(om))
        if term.coefficient == canonical:
            # symbolic route: i*Omega * (i*m/(2*Omega)) + h = h - m/2
            residual = h_coeff - Fraction(term.multiplicity, 2)
            worst = max(worst, abs(float(residual)))
        else:
            residual = 1j * float(om) * term.coefficient + float(h_coeff)
            worst = max(worst, abs(residual))
    return worst


def _interval_residual(term: FTerm, om: RationalInterval, h_coeff: Fraction):
    # the stored coefficient is i*s with s = m/(2*mid(Omega)); the residual
    # i*Omega*(i*s) + h = h - Omega*s is enclosed by the interval endpoints
    s = Fraction(term.coefficient.imag)
    a = h_coeff - s * om.lo
    b = h_coeff - s * om.hi
    return float(min(a, b)), float(max(a, b))


def perturb_term(F: GeneratingFunction, index: int, eps: complex) -> GeneratingFunction:
    """Copy of F with terms[index].coefficient shifted by eps (for tests)."""
    terms = list(F.terms)
    t = terms[index]
    terms[index] = dataclasses.replace(t, coefficient=t.coefficient + eps)
    return dataclasses.replace(F, terms=tuple(terms))


# ---------------------------------------------------------------------------
# the coordinate change as a flow
# ---------------------------------------------------------------------------


def default_eta(F: GeneratingFunction, smallness: float = 1e-2) -> float:
    """Largest ball radius with eta^2 / l1_floor <= smallness."""
    if not F.terms:
        return math.inf
    return math.sqrt(smallness * F.l1_floor)


def make_birkhoff(
    F: GeneratingFunction,
    direction: str = "forward",
    eta: Optional[float] = None,
    rtol: float = 1e-12,
    atol: float = 1e-14,
) -> BirkhoffMap:
    if direction not in ("forward", "inverse"):
        raise ConfigError("direction must be 'forward' or 'inverse'")
    return BirkhoffMap(
        generating=F,
        direction=+1 if direction == "forward" else -1,
        eta=default_eta(F) if eta is None else float(eta),
        rtol=rtol,
        atol=atol,
    )


class _FlowKernel:
    """Vectorized Hamiltonian field of F on its support."""

    def __init__(self, F: GeneratingFunction):
        self.index = {m: i for i, m in enumerate(F.support)}
        self.n = len(F.support)
        o1 = np.empty(len(F.terms), dtype=np.intp)
        e1 = np.empty_like(o1)
        o2 = np.empty_like(o1)
        e2 = np.empty_like(o1)
        for i, t in enumerate(F.terms):
            n1, n2, n3, n4 = t.quartet
            o1[i], e1[i], o2[i], e2[i] = (
                self.index[n1],
                self.index[n2],
                self.index[n3],
                self.index[n4],
            )
        self.o1, self.e1, self.o2, self.e2 = o1, e1, o2, e2
        self.coeff = np.array([t.coefficient for t in F.terms], dtype=complex)

    def field(self, z: np.ndarray) -> np.ndarray:
        """i * dF/d(conj z); repeated even slots pick up their factor 2 via
        the two scatter adds."""
        grad = np.zeros(self.n, dtype=complex)
        t = self.coeff * z[self.o1] * z[self.o2]
        np.add.at(grad, self.e1, t * np.conj(z[self.e2]))
        np.add.at(grad, self.e2, t * np.conj(z[self.e1]))
        return 1j * grad

    def hamiltonian(self, z: np.ndarray) -> complex:
        return np.sum(
            self.coeff
            * z[self.o1]
            * np.conj(z[self.e1])
            * z[self.o2]
            * np.conj(z[self.e2])
        )


def gamma_apply(bmap: BirkhoffMap, state):
    """Flow `state` for time +/-1 under the generating field.

    `state` must be a dataclass with an `amplitudes: dict[Mode, complex]`
    field (and optionally `support`); modes outside the generating
    function's support pass through unchanged.  Raises BallEscapeError when
    the input lies outside B(eta) or the flow leaves B(2*eta),
    ToleranceUnmetError when the integrator fails.
    """
    amplitudes = dict(state.amplitudes)
    ell1 = sum(abs(v) for v in amplitudes.values())
    if ell1 >= bmap.eta:
        raise BallEscapeError(
            f"input ell^1 norm {ell1:.3g} is not below eta = {bmap.eta:.3g}"
        )
    new_amps = flow_amplitudes(bmap, amplitudes)
    fields = {f.name for f in dataclasses.fields(state)}
    updates = {"amplitudes": new_amps}
    if "support" in fields:
        updates["support"] = frozenset(new_amps)
    return dataclasses.replace(state, **updates)


def flow_amplitudes(bmap: BirkhoffMap, amplitudes: dict) -> dict:
    """Core of gamma_apply on a bare mode -> amplitude mapping."""
    F = bmap.generating
    if not F.terms:
        return dict(amplitudes)
    kernel = _FlowKernel(F)
    z0 = np.zeros(kernel.n, dtype=complex)
    untouched = {}
    for mode, amp in amplitudes.items():
        i = kernel.index.get(mode)
        if i is None:
            untouched[mode] = amp
        else:
            z0[i] = amp
    sign = bmap.direction
    base_mass = sum(abs(v) for v in untouched.values())
    cap = 2.0 * bmap.eta

    def rhs(_t, y):
        z = y.view(complex)
        return (sign * kernel.field(z)).view(float)

    def escape(_t, y):
        return cap - base_mass - np.sum(np.abs(y.view(complex)))

    escape.terminal = True
    sol = solve_ivp(
        rhs,
        (0.0, 1.0),
        z0.view(float).copy(),
        method="DOP853",
        rtol=bmap.rtol,
        atol=bmap.atol,
        events=escape,
        dense_output=False,
    )
    if sol.status == 1:
        raise BallEscapeError(
            f"flow left the ball of radius 2*eta = {cap:.3g} "
            f"at t = {sol.t_events[0][0]:.3g}"
        )
    if not sol.success:
        raise ToleranceUnmetError(f"generating flow failed: {sol.message}")
    z1 = sol.y[:, -1].view(complex)
    out = dict(untouched)
    for mode, i in kernel.index.items():
        if z1[i] != 0:
            out[mode] = complex(z1[i])
    return out


def evaluate_F(F: GeneratingFunction, amplitudes: dict) -> float:
    """Value of the generating Hamiltonian on a mode -> amplitude mapping.

    Real by construction (term table closed under conjugation); conserved
    along its own flow, which makes it a cheap integration diagnostic.
    """
    total = 0j
    for t in F.terms:
        n1, n2, n3, n4 = t.quartet
        z1 = amplitudes.get(n1, 0j)
        z3 = amplitudes.get(n3, 0j)
        if z1 == 0 or z3 == 0:
            continue
        z2 = amplitudes.get(n2, 0j)
        z4 = amplitudes.get(n4, 0j)
        total += t.coefficient * z1 * z2.conjugate() * z3 * z4.conjugate()
    return total.real


def momentum_vector(amplitudes: dict) -> tuple[float, float]:
    """Sum of n * |amplitude|^2, preserved by the generating flow."""
    mj = sum(m.j * abs(a) ** 2 for m, a in amplitudes.items())
    mk = sum(m.k * abs(a) ** 2 for m, a in amplitudes.items())
    return (mj, mk)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def export_f_csv(F: GeneratingFunction, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "j1", "k1", "j2", "k2", "j3", "k3", "j4", "k4",
                "multiplicity", "omega_value", "coeff_real", "coeff_imag",
            ]
        )
        for t in F.terms:
            row = [c for m in t.quartet for c in (m.j, m.k)]
            row += [
                t.multiplicity,
                repr(t.omega_value),
                repr(t.coefficient.real),
                repr(t.coefficient.imag),
            ]
            writer.writerow(row)
