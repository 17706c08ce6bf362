"""Independent reference implementations used to freeze expected test values.

Everything here is deliberately written with different machinery than the
package (mpmath floating floors instead of exact field arithmetic, dumb
bounding-box sweeps instead of solved-slot enumeration, fixed-step RK4
instead of adaptive solvers) so agreement is evidence, not tautology.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import mpmath
import numpy as np


def cf_quotients_mpmath(value_expr: str, depth: int, dps: int = 120) -> list[int]:
    """Continued-fraction quotients via high-precision floating floor/invert.

    value_expr is an mpmath-evaluable expression, e.g. "sqrt(2)" or
    "(1+sqrt(5))/2" or a decimal literal string.
    """
    with mpmath.workdps(dps):
        x = mpmath.mpf(value_expr) if value_expr[0].isdigit() else eval(
            value_expr, {"sqrt": mpmath.sqrt, "mpf": mpmath.mpf}
        )
        out = []
        for _ in range(depth):
            a = int(mpmath.floor(x))
            out.append(a)
            frac = x - a
            if frac < mpmath.mpf(10) ** (-(dps - 20)):
                break
            x = 1 / frac
        return out


def convergents_from_quotients(quotients: list[int]) -> list[tuple[int, int]]:
    """Standard p/q recurrence, independent of the package's implementation."""
    ps, qs = [], []
    p_prev, p_cur = 1, quotients[0]
    q_prev, q_cur = 0, 1
    ps.append(p_cur)
    qs.append(q_cur)
    for a in quotients[1:]:
        p_prev, p_cur = p_cur, a * p_cur + p_prev
        q_prev, q_cur = q_cur, a * q_cur + q_prev
        ps.append(p_cur)
        qs.append(q_cur)
    return list(zip(ps, qs))


def brute_force_one_outside(modes, margin: int | None = None) -> set[tuple]:
    """Bounding-box sweep for momentum-closed quartets with one slot outside.

    Slots 1-3 range over the whole box (not just the set), slot 4 is forced
    by momentum closure; quartets are reduced to the monomial key
    (sorted odd pair, sorted even pair).  Box width is chosen so every mode
    combination a - b + c of set members lies inside.
    """
    S = {(int(j), int(k)) for j, k in modes}
    if not S:
        return set()
    js = [j for j, _ in S]
    ks = [k for _, k in S]
    if margin is None:
        margin_j = (max(js) - min(js)) + 1
        margin_k = (max(ks) - min(ks)) + 1
    else:
        margin_j = margin_k = margin
    box = [
        (j, k)
        for j in range(min(js) - margin_j, max(js) + margin_j + 1)
        for k in range(min(ks) - margin_k, max(ks) + margin_k + 1)
    ]
    box_arr = np.array(box, dtype=np.int64)
    in_set = np.array([m in S for m in box], dtype=bool)
    # integer-packed membership test for the solved slot
    pack = lambda j, k: j * (10**6) + k
    set_packed = np.array(sorted(pack(j, k) for j, k in S), dtype=np.int64)
    found: set[tuple] = set()
    n_box = len(box)
    # n1 loops in Python; (n2, n3) are vectorized; n4 = n1 - n2 + n3.
    j2 = np.repeat(box_arr[:, 0], n_box)
    k2 = np.repeat(box_arr[:, 1], n_box)
    j3 = np.tile(box_arr[:, 0], n_box)
    k3 = np.tile(box_arr[:, 1], n_box)
    in2 = np.repeat(in_set, n_box)
    in3 = np.tile(in_set, n_box)
    for idx1, (j1, k1) in enumerate(box):
        j4 = j1 - j2 + j3
        k4 = k1 - k2 + k3
        in1 = in_set[idx1]
        in4 = np.isin(pack(j4, k4), set_packed)
        outside = (
            (0 if in1 else 1) + (~in2).astype(int) + (~in3).astype(int)
            + (~in4).astype(int)
        )
        hits = np.nonzero(outside == 1)[0]
        for h in hits:
            n1 = (j1, k1)
            n2 = (int(j2[h]), int(k2[h]))
            n3 = (int(j3[h]), int(k3[h]))
            n4 = (int(j4[h]), int(k4[h]))
            odd = tuple(sorted((n1, n3)))
            even = tuple(sorted((n2, n4)))
            found.add((odd[0], even[0], odd[1], even[1]))
    return found


def brute_force_inside(modes) -> set[tuple]:
    """All momentum-closed quartets with every slot in the set, O(n^4)."""
    S = sorted({(int(j), int(k)) for j, k in modes})
    found = set()
    for n1, n2, n3, n4 in itertools.product(S, repeat=4):
        if (
            n1[0] - n2[0] + n3[0] - n4[0] == 0
            and n1[1] - n2[1] + n3[1] - n4[1] == 0
        ):
            odd = tuple(sorted((n1, n3)))
            even = tuple(sorted((n2, n4)))
            found.add((odd[0], even[0], odd[1], even[1]))
    return found


def min_abs_omega(quartets, r2: Fraction) -> tuple[Fraction, tuple]:
    """Exact minimum of |Omega| over quartet keys, rational r2 only."""
    best, best_q = None, None
    for n1, n2, n3, n4 in quartets:
        sj = n1[0] ** 2 - n2[0] ** 2 + n3[0] ** 2 - n4[0] ** 2
        sk = n1[1] ** 2 - n2[1] ** 2 + n3[1] ** 2 - n4[1] ** 2
        val = abs(Fraction(sj) + r2 * sk)
        if best is None or val < best:
            best, best_q = val, (n1, n2, n3, n4)
    return best, best_q


def rk4_fixed_step(field, y0: np.ndarray, t_span: tuple[float, float], n_steps: int):
    """Classical fixed-step RK4; deliberately not scipy."""
    t0, t1 = t_span
    h = (t1 - t0) / n_steps
    y = np.array(y0, dtype=complex)
    t = t0
    for _ in range(n_steps):
        k1 = field(t, y)
        k2 = field(t + h / 2, y + h / 2 * k1)
        k3 = field(t + h / 2, y + h / 2 * k2)
        k4 = field(t + h, y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def naive_property_check(lset) -> dict:
    """Quadruple-loop re-verification of a scaled mode set's combinatorics.

    Deliberately independent of the library's incremental verifier: plain
    generator loops over the public generations/families/relations tables.
    Returns {"p1": bool, "structure": bool, "p4": bool, "p5": bool,
    "p6": bool}.
    """
    gens = [list(g) for g in lset.generations]
    modes = [m for g in gens for m in g]
    mset = set(modes)
    p, q = lset.p, lset.q
    fam_pairs = set()
    for fam in lset.families:
        par = frozenset(fam.parents)
        chi = frozenset(fam.children)
        fam_pairs.add((par, chi))
        fam_pairs.add((chi, par))

    def resonant(n1, n2, n3, n4):
        sj = n1[0] ** 2 - n2[0] ** 2 + n3[0] ** 2 - n4[0] ** 2
        sk = n1[1] ** 2 - n2[1] ** 2 + n3[1] ** 2 - n4[1] ** 2
        return q * q * sj + p * p * sk == 0

    def degenerate(n1, n2, n3):
        return (n2[0] - n1[0]) * (n3[1] - n2[1]) == (n2[1] - n1[1]) * (
            n3[0] - n2[0]
        )

    p1_ok = True
    p5_ok = True
    p6_ok = True
    for n1, n2, n3 in itertools.product(modes, repeat=3):
        n4 = (n1[0] - n2[0] + n3[0], n1[1] - n2[1] + n3[1])
        if n4 in mset:
            if sorted((n1, n3)) == sorted((n2, n4)):
                continue
            if (frozenset((n1, n3)), frozenset((n2, n4))) in fam_pairs:
                continue
            p6_ok = False
            if resonant(n1, n2, n3, n4) and not degenerate(n1, n2, n3):
                p5_ok = False
        else:
            if resonant(n1, n2, n3, n4) and not degenerate(n1, n2, n3):
                p1_ok = False

    # stored families must themselves be resonant non-degenerate
    # parallelograms across adjacent generations
    for fam in lset.families:
        (a, b), (c1, c2) = fam.parents, fam.children
        quartet = (a, c1, b, c2)
        if (
            any(m not in mset for m in quartet)
            or (a[0] + b[0], a[1] + b[1]) != (c1[0] + c2[0], c1[1] + c2[1])
            or degenerate(a, c1, b)
            or not resonant(*quartet)
            or not (a in gens[fam.gen] and b in gens[fam.gen])
            or not (c1 in gens[fam.gen + 1] and c2 in gens[fam.gen + 1])
        ):
            p5_ok = False

    # relation table recomputed from scratch out of the family list
    structure_ok = all(len(g) % 2 == 0 for g in gens)
    parent_count = {m: 0 for m in modes}
    child_count = {m: 0 for m in modes}
    spouse_of = {}
    sibling_of = {}
    for fam in lset.families:
        (a, b), (c1, c2) = fam.parents, fam.children
        for m in (a, b):
            parent_count[m] = parent_count.get(m, 0) + 1
        for m in (c1, c2):
            child_count[m] = child_count.get(m, 0) + 1
        spouse_of[a], spouse_of[b] = b, a
        sibling_of[c1], sibling_of[c2] = c2, c1
    last = len(gens) - 1
    for gi, gen in enumerate(gens):
        for m in gen:
            if gi < last and parent_count.get(m, 0) != 1:
                structure_ok = False
            if gi > 0 and child_count.get(m, 0) != 1:
                structure_ok = False

    p4_ok = all(
        sibling_of.get(m) is None or sibling_of.get(m) != spouse_of.get(m)
        for m in modes
    )
    return {
        "p1": p1_ok,
        "structure": structure_ok,
        "p4": p4_ok,
        "p5": p5_ok,
        "p6": p6_ok,
    }


def wirtinger_conj_gradient(f, z: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """d f / d conj(z_i) of a real-valued f by central differences."""
    z = np.asarray(z, dtype=complex)
    grad = np.zeros_like(z)
    for i in range(len(z)):
        e = np.zeros_like(z)
        e[i] = 1.0
        d_re = (f(z + step * e) - f(z - step * e)) / (2 * step)
        d_im = (f(z + 1j * step * e) - f(z - 1j * step * e)) / (2 * step)
        grad[i] = 0.5 * (d_re + 1j * d_im)
    return grad
