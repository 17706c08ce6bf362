"""Resonance arithmetic for four-wave interactions on a rectangular torus.

A quartet of Fourier modes interacts through the alternating eigenvalue sum

    Omega_r(n1, n2, n3, n4) = sum_i (-1)**(i+1) j_i**2 + r**2 * sum_i (-1)**(i+1) k_i**2

evaluated with r**2 kept exact (Fraction for rational ratios, Q(sqrt(d))
elements for quadratic surds, certified intervals for decimals).  Quartets
are classified by how many slots leave a distinguished mode set, the
near-resonance floor over one-outside quartets and the resonance width over
inside quartets are computed with exact comparisons, and everything can be
dumped to CSV for inspection.

Slot symmetry: the monomial behind a quartet is unchanged when the two
non-conjugated slots (1,3) or the two conjugated slots (2,4) swap, so
canonical quartets sort each pair; conjugation (swapping the pairs) is NOT
quotiented out.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional, Sequence, Union

from .diophantine import OmegaSpec
from .errors import ConfigError, SearchError
from .exactnum import QuadExact, RationalInterval, exact_sign


class Mode(NamedTuple):
    j: int
    k: int

    def __add__(self, other):
        return Mode(self.j + other[0], self.k + other[1])

    def __sub__(self, other):
        return Mode(self.j - other[0], self.k - other[1])

    def norm_sq(self) -> int:
        return self.j * self.j + self.k * self.k


class Quartet(NamedTuple):
    n1: Mode
    n2: Mode
    n3: Mode
    n4: Mode


ExactScalar = Union[Fraction, QuadExact, RationalInterval]


def as_mode(m) -> Mode:
    return m if isinstance(m, Mode) else Mode(int(m[0]), int(m[1]))


def as_quartet(q) -> Quartet:
    return Quartet(*(as_mode(m) for m in q))


def r_squared_of(omega: Union[OmegaSpec, Fraction, int, QuadExact]) -> ExactScalar:
    """Normalize an aspect-ratio spec (or raw exact number) to exact omega**2."""
    if isinstance(omega, OmegaSpec):
        return omega.squared()
    if isinstance(omega, (Fraction, int)):
        return Fraction(omega) ** 2
    if isinstance(omega, QuadExact):
        return omega * omega
    raise ConfigError(f"cannot interpret {omega!r} as a frequency ratio")


def _modes_of(obj) -> frozenset[Mode]:
    """Accept either a frequency-set object exposing mode_set() or raw modes."""
    if hasattr(obj, "mode_set"):
        return frozenset(obj.mode_set())
    return frozenset(as_mode(m) for m in obj)


def momentum_sum(quartet: Quartet) -> Mode:
    n1, n2, n3, n4 = quartet
    return Mode(n1.j - n2.j + n3.j - n4.j, n1.k - n2.k + n3.k - n4.k)


def alternating_square_sums(quartet: Quartet) -> tuple[int, int]:
    """(sum_i (-1)**(i+1) j_i**2, sum_i (-1)**(i+1) k_i**2) as exact integers."""
    n1, n2, n3, n4 = quartet
    sj = n1.j**2 - n2.j**2 + n3.j**2 - n4.j**2
    sk = n1.k**2 - n2.k**2 + n3.k**2 - n4.k**2
    return sj, sk


def omega_r(quartet: Quartet, r_squared: ExactScalar) -> ExactScalar:
    """Alternating eigenvalue sum with exact r**2 (the square of the ratio)."""
    sj, sk = alternating_square_sums(as_quartet(quartet))
    return sj + r_squared * sk


def omega_pq(quartet: Quartet, p: int, q: int) -> Fraction:
    """omega_r at the rational ratio p/q, always an exact Fraction."""
    sj, sk = alternating_square_sums(as_quartet(quartet))
    return Fraction(sj) + Fraction(p * p, q * q) * sk


def rectangle_pairing(quartet: Quartet) -> int:
    """2 <n1-n2, n2-n3>; equals omega_1 on momentum-closed quartets."""
    n1, n2, n3, _ = as_quartet(quartet)
    ax, ay = n1.j - n2.j, n1.k - n2.k
    bx, by = n2.j - n3.j, n2.k - n3.k
    return 2 * (ax * bx + ay * by)


def is_trivial_quartet(quartet: Quartet) -> bool:
    """True when the momentum relation is a tautology: {n1,n3} == {n2,n4}."""
    n1, n2, n3, n4 = quartet
    return sorted((n1, n3)) == sorted((n2, n4))


def is_degenerate_parallelogram(quartet: Quartet) -> bool:
    """Zero-area completion: adjacent vertices coincide or are collinear."""
    n1, n2, n3, _ = quartet
    ax, ay = n2.j - n1.j, n2.k - n1.k
    bx, by = n3.j - n2.j, n3.k - n2.k
    return ax * by - ay * bx == 0


def canonical_quartet(quartet: Quartet) -> Quartet:
    """Sort the non-conjugated pair and the conjugated pair lexicographically."""
    n1, n2, n3, n4 = as_quartet(quartet)
    a, c = sorted((n1, n3))
    b, d = sorted((n2, n4))
    return Quartet(a, b, c, d)


def quartet_multiplicity(quartet: Quartet) -> int:
    """Number of ordered slot arrangements carrying the same monomial."""
    n1, n2, n3, n4 = quartet
    return (1 if n1 == n3 else 2) * (1 if n2 == n4 else 2)


def classify_quartet(quartet: Quartet, modes: Iterable[Mode]) -> Optional[int]:
    """Outside-slot count d in {0,..,4}, or None when momentum is not closed."""
    quartet = as_quartet(quartet)
    if momentum_sum(quartet) != Mode(0, 0):
        return None
    mode_set = modes if isinstance(modes, (set, frozenset)) else set(modes)
    return sum(1 for n in quartet if n not in mode_set)


def enumerate_A1(modes: Iterable[Mode]) -> list[Quartet]:
    """All canonical momentum-closed quartets with exactly one slot outside.

    Three slots run over the set; the fourth is solved from momentum closure
    and kept only if it lands outside.  Deduplication is up to the symmetry
    of the monomial (order within slots {1,3} and within {2,4}).
    """
    mode_set = _modes_of(modes)
    mlist = sorted(mode_set)
    seen: set[Quartet] = set()
    out: list[Quartet] = []
    for a in mlist:
        for b in mlist:
            for c in mlist:
                # outsider in slot 4: n4 = n1 + n3 - n2  (slots (a,b,c,?))
                cand = Mode(a.j + c.j - b.j, a.k + c.k - b.k)
                if cand not in mode_set:
                    quartet = canonical_quartet(Quartet(a, b, c, cand))
                    if quartet not in seen:
                        seen.add(quartet)
                        out.append(quartet)
                # outsider in slot 3: n3 = n2 + n4 - n1  (slots (a,b,?,c))
                cand = Mode(b.j + c.j - a.j, b.k + c.k - a.k)
                if cand not in mode_set:
                    quartet = canonical_quartet(Quartet(a, b, cand, c))
                    if quartet not in seen:
                        seen.add(quartet)
                        out.append(quartet)
    out.sort()
    return out


def enumerate_A0(modes: Iterable[Mode]) -> list[Quartet]:
    """All canonical momentum-closed quartets entirely inside the set."""
    mode_set = sorted(_modes_of(modes))
    by_sum: dict[tuple[int, int], list[tuple[Mode, Mode]]] = {}
    for i, a in enumerate(mode_set):
        for c in mode_set[i:]:
            by_sum.setdefault((a.j + c.j, a.k + c.k), []).append((a, c))
    out = []
    for pairs in by_sum.values():
        for a, c in pairs:
            for b, d in pairs:
                out.append(Quartet(a, b, c, d))
    return sorted(set(map(canonical_quartet, out)))


@dataclass(frozen=True)
class ExtremeResonance:
    """An extremal |Omega| value with its witness quartet."""

    value: float
    exact: ExactScalar
    witness: Quartet
    quartets_examined: int


def _abs_exact(v: ExactScalar) -> ExactScalar:
    return abs(v)


def _less(a: ExactScalar, b: ExactScalar) -> bool:
    return exact_sign_diff(a, b) < 0


def exact_sign_diff(a: ExactScalar, b: ExactScalar) -> int:
    if isinstance(a, RationalInterval) or isinstance(b, RationalInterval):
        ia = a if isinstance(a, RationalInterval) else RationalInterval.point(a)
        ib = b if isinstance(b, RationalInterval) else RationalInterval.point(b)
        return exact_sign(ia - ib)
    return exact_sign(a - b)


def compute_L1(modes: Iterable[Mode], omega) -> ExtremeResonance:
    """Near-resonance floor: min |Omega_omega| over one-outside quartets."""
    r2 = r_squared_of(omega)
    quartets = enumerate_A1(modes)
    if not quartets:
        raise SearchError("no one-outside quartets: the floor is vacuous")
    best = None
    best_q = None
    for quartet in quartets:
        val = _abs_exact(omega_r(quartet, r2))
        if best is None or _less(val, best):
            best, best_q = val, quartet
    return ExtremeResonance(float(best), best, best_q, len(quartets))


def compute_U0(lambda_set, omega) -> ExtremeResonance:
    """Resonance width: max |Omega_omega| over inside quartets that are exactly
    resonant at the rational ratio.

    Consistency is asserted, not assumed: every nontrivial momentum-closed
    quartet inside the set must be exactly resonant at p/q and must coincide
    with one of the set's stored nuclear families (in either orientation);
    any other relation is a faithfulness violation and raises ConfigError.
    """
    r2 = r_squared_of(omega)
    p, q = lambda_set.p, lambda_set.q
    family_keys = lambda_set.family_monomial_keys()
    if not family_keys:
        raise SearchError("the set stores no nuclear families")
    best = Fraction(0)
    if isinstance(r2, QuadExact):
        best = QuadExact.rational(0, r2.d)
    elif isinstance(r2, RationalInterval):
        best = RationalInterval.point(0)
    best_q = None
    count = 0
    for quartet in enumerate_A0(lambda_set.mode_set()):
        count += 1
        if is_trivial_quartet(quartet):
            continue
        if omega_pq(quartet, p, q) != 0:
            raise ConfigError(
                f"faithfulness violation: inside quartet {quartet} is "
                f"momentum-closed but not resonant at {p}/{q}"
            )
        key = _monomial_key(quartet)
        if key not in family_keys:
            raise ConfigError(
                f"faithfulness violation: resonant inside quartet {quartet} "
                "is not a stored nuclear family"
            )
        val = _abs_exact(omega_r(quartet, r2))
        if best_q is None or _less(best, val):
            best, best_q = val, quartet
    if best_q is None:
        raise ConfigError("stored nuclear families never appeared inside the set")
    return ExtremeResonance(float(best), best, best_q, count)


def _monomial_key(quartet: Quartet):
    n1, n2, n3, n4 = quartet
    return (tuple(sorted((n1, n3))), tuple(sorted((n2, n4))))


def export_quartets_csv(
    path,
    quartets: Sequence[Quartet],
    omega,
    modes: Iterable[Mode],
) -> None:
    """Write one row per quartet: coordinates, Omega_omega, outside count."""
    r2 = r_squared_of(omega)
    mode_set = frozenset(as_mode(m) for m in modes)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["j1", "k1", "j2", "k2", "j3", "k3", "j4", "k4", "omega_value", "class_d"]
        )
        for quartet in quartets:
            quartet = as_quartet(quartet)
            val = float(omega_r(quartet, r2))
            d = classify_quartet(quartet, mode_set)
            row = []
            for m in quartet:
                row.extend([m.j, m.k])
            row.append(repr(val))
            row.append("rejected" if d is None else d)
            writer.writerow(row)
