"""Galerkin truncations of the gauged cubic flow in sparse Fourier space.

The physical Fourier coefficients a_n of the cubic equation on the
(1, omega)-torus satisfy

    -i da_n/dt = lam(n) a_n + sum_{n1-n2+n3=n} a_{n1} conj(a_{n2}) a_{n3},

with lam(n) = j^2 + omega^2 k^2.  Multiplying by the mass phase
rho_n = a_n exp(-iGt), G = 2 sum |a|^2, removes the pair interactions and
leaves

    -i drho_n/dt = lam(n) rho_n - |rho_n|^2 rho_n + C(n),
    C(n) = sum_{n1-n2+n3=n, n2 not in {n1,n3}} rho_{n1} conj(rho_{n2}) rho_{n3}.

The exclusion set is the one produced by expanding the quartic Hamiltonian
symbolically; the two index conditions floating around informal displays
("n1 != n2" vs "n1 != n2, n4") both collapse to it.  Everything here works
on a finite mode region: either a full box (its truncated flow conserves
mass, momentum and its own Hamiltonian exactly) or the resonant set plus
the shell of modes reachable by one retained convolution.  Time stepping
happens in rotating coordinates rho_n = r_n exp(i lam(n) t), which removes
the stiff linear rotation exactly.

The shadowing experiment integrates the truncated flow next to the lifted,
lambda-scaled chain solution and reports the sup over sampled times of the
l1 distance after undoing the near-identity normalizing map, together with
the decomposition of the error derivative into its defect parts (Z0..Z4).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field, replace
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    ConfigError,
    SupportEscapeError,
    ToleranceUnmetError,
)
from .exactnum import RationalInterval
from .lambda_set import LambdaSet
from .normal_form import (
    BirkhoffMap,
    GeneratingFunction,
    build_F,
    gamma_apply,
    make_birkhoff,
)
from .resonance import Mode, as_mode, r_squared_of
from .toy_model import (
    IntegratorConfig,
    SpouseTrajectory,
    ToyState,
    ToyTrajectory,
    _SpouseKernel,
    integrate_toy,
    scale_solution,
    toy_vector_field,
)

PHYSICAL = "physical"
GAUGED = "gauged"
ROTATING = "rotating"
_FRAMES = (PHYSICAL, GAUGED, ROTATING)

SHADOW_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# states, eigenvalues, norms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SparseFourierState:
    """Finitely supported Fourier data tagged with its frame and time.

    The three frames are the physical coefficients ``a``, the gauged
    coefficients ``rho = a exp(-iGt)`` and the rotating coefficients
    ``r = rho exp(-i lam(n) t)``; conversions are pure phases, hence
    bijective and norm preserving at any fixed time.
    """

    amplitudes: Mapping
    frame: str = GAUGED
    time: float = 0.0
    omega: object = None
    support: frozenset = None

    def __post_init__(self):
        if self.frame not in _FRAMES:
            raise ConfigError(f"unknown frame {self.frame!r}")
        amps = {as_mode(m): complex(v) for m, v in dict(self.amplitudes).items()}
        object.__setattr__(self, "amplitudes", amps)
        sup = frozenset(amps)
        if self.support is not None and frozenset(self.support) != sup:
            raise ConfigError("support does not match the amplitude keys")
        object.__setattr__(self, "support", sup)

    def mass(self) -> float:
        return math.fsum(abs(v) ** 2 for v in self.amplitudes.values())


def eigenvalue(n, omega) -> float:
    """lam(n) = j^2 + omega^2 k^2, evaluated through the exact square.

    For truncated-decimal ratios the square is a certified interval and the
    midpoint is returned; its width is k^2 * O(10^-precision), far below
    integration tolerances.
    """
    n = as_mode(n)
    lam = r_squared_of(omega) * (n.k * n.k) + n.j * n.j
    if isinstance(lam, RationalInterval):
        return float(lam.midpoint())
    return float(lam)


def _amplitude_items(state) -> dict:
    if isinstance(state, SparseFourierState):
        return dict(state.amplitudes)
    return {as_mode(m): complex(v) for m, v in dict(state).items()}


def ell1_norm(state) -> float:
    """Sum of amplitude moduli."""
    return math.fsum(abs(v) for v in _amplitude_items(state).values())


def sobolev_norm(state, s: float) -> float:
    """(sum |a_n|^2 <n>^(2s))^(1/2) with <n> = max(1, |n|)."""
    if s < 0:
        raise ConfigError("the smoothness index must be nonnegative")
    total = math.fsum(
        abs(v) ** 2 * max(1.0, float(m.norm_sq())) ** s
        for m, v in _amplitude_items(state).items()
    )
    return math.sqrt(total)


def _omega_text(omega) -> str:
    """Canonical round-trippable text of an aspect-ratio value."""
    if hasattr(omega, "serialize"):
        return omega.serialize()
    if isinstance(omega, Fraction):
        return f"{omega.numerator}/{omega.denominator}"
    return repr(omega)


# ---------------------------------------------------------------------------
# frame changes
# ---------------------------------------------------------------------------


def gauge_transform(state: SparseFourierState, direction: str) -> SparseFourierState:
    """Multiply by exp(-+ iGt), G = 2 sum |a_n|^2, between physical and gauged.

    G is the doubled mass, a constant of motion, so the factor is well
    defined along a trajectory.
    """
    if direction == "a_to_rho":
        source, target, sign = PHYSICAL, GAUGED, -1.0
    elif direction == "rho_to_a":
        source, target, sign = GAUGED, PHYSICAL, +1.0
    else:
        raise ConfigError("direction must be 'a_to_rho' or 'rho_to_a'")
    if state.frame != source:
        raise ConfigError(f"state is in frame {state.frame!r}, expected {source!r}")
    g = 2.0 * state.mass()
    factor = complex(np.exp(1j * sign * g * state.time))
    amps = {m: v * factor for m, v in state.amplitudes.items()}
    return replace(state, amplitudes=amps, frame=target, support=None)


def rotate_frame(
    state: SparseFourierState, direction: str, omega=None
) -> SparseFourierState:
    """Per-mode phase exp(-+ i lam(n) t) between gauged and rotating frames."""
    if direction == "rho_to_r":
        source, target, sign = GAUGED, ROTATING, -1.0
    elif direction == "r_to_rho":
        source, target, sign = ROTATING, GAUGED, +1.0
    else:
        raise ConfigError("direction must be 'rho_to_r' or 'r_to_rho'")
    if state.frame != source:
        raise ConfigError(f"state is in frame {state.frame!r}, expected {source!r}")
    om = state.omega if omega is None else omega
    if om is None:
        raise ConfigError("rotating the frame needs the torus ratio")
    amps = {
        m: v * complex(np.exp(1j * sign * eigenvalue(m, om) * state.time))
        for m, v in state.amplitudes.items()
    }
    return replace(state, amplitudes=amps, frame=target, support=None)


# ---------------------------------------------------------------------------
# truncation regions
# ---------------------------------------------------------------------------


class TruncationRegion:
    """Finite mode set together with its retained cubic interactions.

    Subclasses fill ``modes`` (fixed order), ``index``, ``lam`` (float
    eigenvalues) and implement the exclusion sum.  The retained interactions
    always form a conjugation-closed monomial family, so mass and momentum
    are exact invariants of the truncated flow.
    """

    descriptor = "abstract"

    modes: tuple
    index: dict
    lam: np.ndarray
    omega: object

    def __contains__(self, mode) -> bool:
        return as_mode(mode) in self.index

    def __len__(self) -> int:
        return len(self.modes)

    def vector(self, amplitudes) -> np.ndarray:
        """Embed a mode -> amplitude mapping; reject outside support."""
        amps = _amplitude_items(amplitudes)
        out = np.zeros(len(self.modes), dtype=complex)
        for m, v in amps.items():
            i = self.index.get(m)
            if i is None:
                raise SupportEscapeError(
                    f"mode {tuple(m)} lies outside the {self.descriptor} region"
                )
            out[i] = v
        return out

    def exclusion_sum(self, rho: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def interaction(self, rho: np.ndarray) -> float:
        raise NotImplementedError

    def nonlinear(self, rho: np.ndarray) -> np.ndarray:
        """N(rho) = |rho_n|^2 rho_n - exclusion sum: the whole cubic part."""
        return np.abs(rho) ** 2 * rho - self.exclusion_sum(rho)

    def hamiltonian(self, rho: np.ndarray) -> float:
        """Energy whose conjugate gradient gives the field via -i d/d(conj)."""
        mass_part = float(np.dot(self.lam, np.abs(rho) ** 2))
        quartic = 0.5 * float(np.sum(np.abs(rho) ** 4))
        return -mass_part + quartic - self.interaction(rho)


class BoxRegion(TruncationRegion):
    """All modes with |j|, |k| <= M; every convolution landing inside is kept.

    The exclusion sum is evaluated by two direct grid convolutions (shifted
    block accumulation; the cost is fine for the desk-scale boxes this is
    meant for) through the identity

        N(rho) = 2 * mass * rho - C_full(rho),

    where C_full is the unrestricted convolution over the box.
    """

    def __init__(self, half_width: int, omega):
        m = int(half_width)
        if m < 1:
            raise ConfigError("the box half-width must be at least 1")
        if m > 64:
            raise ConfigError(
                "box regions beyond half-width 64 are not sensible here; "
                "use a shell region"
            )
        self._m = m
        self._r = 2 * m + 1
        self.omega = omega
        self.modes = tuple(
            Mode(j, k) for j in range(-m, m + 1) for k in range(-m, m + 1)
        )
        self.index = {mode: i for i, mode in enumerate(self.modes)}
        self.lam = np.array([eigenvalue(mode, omega) for mode in self.modes])
        self.descriptor = f"box({m})"

    def _full_convolution(self, rho: np.ndarray) -> np.ndarray:
        r = self._r
        a = rho.reshape(r, r)
        pair = np.zeros((2 * r - 1, 2 * r - 1), dtype=complex)
        for i in range(r):
            row = a[i]
            if not row.any():
                continue
            for j in range(r):
                v = row[j]
                if v != 0:
                    pair[i : i + r, j : j + r] += v * a
        full = np.zeros((r, r), dtype=complex)
        for i in range(r):
            row = a[i]
            if not row.any():
                continue
            for j in range(r):
                v = row[j]
                if v != 0:
                    full += np.conj(v) * pair[i : i + r, j : j + r]
        return full.reshape(-1)

    def exclusion_sum(self, rho: np.ndarray) -> np.ndarray:
        mass = float(np.sum(np.abs(rho) ** 2))
        return self._full_convolution(rho) - 2.0 * mass * rho + np.abs(rho) ** 2 * rho

    def interaction(self, rho: np.ndarray) -> float:
        return 0.5 * float(
            np.sum(np.conj(rho) * self.exclusion_sum(rho)).real
        )


class ShellRegion(TruncationRegion):
    """The resonant set plus every mode one retained convolution away.

    Retained monomials are the ordered closed tuples (n1, n2, n3, n4) with
    n2, n4 not in {n1, n3} and at least ``min_legs`` slots inside the
    resonant set; the criterion is symmetric under monomial conjugation, so
    mass and momentum stay exact while the energy defect against the full
    box is reported by the experiments rather than asserted.

    ``max_detuning`` optionally drops rows whose resonance combination
    lam(n1) - lam(n2) + lam(n3) - lam(n4) exceeds the cut in modulus.  Far
    off-resonant rows contribute only O(amplitude/detuning) slaved wiggles
    yet force an explicit integrator to resolve their phase, so the ladder
    experiment runs on a windowed table; the cut keeps both conjugation
    symmetries (the combination flips sign or is preserved), hence exact
    mass and momentum conservation survive.
    """

    def __init__(
        self,
        lset: LambdaSet,
        omega,
        min_legs: int = 2,
        max_detuning: Optional[float] = None,
        max_candidates: int = 5 * 10**6,
    ):
        if min_legs not in (2, 3, 4):
            raise ConfigError("min_legs must be 2, 3 or 4")
        if max_detuning is not None and max_detuning <= 0:
            raise ConfigError("the detuning window must be positive")
        self.omega = omega
        self.min_legs = min_legs
        self.max_detuning = max_detuning
        self.lset = lset
        inner = list(lset.modes())
        self.n_lambda = len(inner)
        inner_arr = np.array(inner, dtype=np.int64)

        shell = self._closure(inner_arr, set(inner))
        self.modes = tuple(inner) + shell
        self.index = {mode: i for i, mode in enumerate(self.modes)}
        self.lam = np.array([eigenvalue(mode, omega) for mode in self.modes])
        window = "" if max_detuning is None else f", window={max_detuning:g}"
        self.descriptor = f"lambda-plus-shell(min_legs={min_legs}{window})"

        per_pattern = self.n_lambda**2 * len(self.modes)
        if 6 * per_pattern > max_candidates:
            raise ConfigError(
                f"shell table would scan {6 * per_pattern} candidate rows "
                f"(cap {max_candidates}); this region is meant for small sets"
            )
        self._build_table()

    @staticmethod
    def _closure(inner_arr: np.ndarray, inner_set) -> tuple:
        n = len(inner_arr)
        i1, i2, i3 = np.meshgrid(np.arange(n), np.arange(n), np.arange(n),
                                 indexing="ij")
        i1, i2, i3 = i1.ravel(), i2.ravel(), i3.ravel()
        keep = (i2 != i1) & (i2 != i3)
        pts = inner_arr[i1[keep]] - inner_arr[i2[keep]] + inner_arr[i3[keep]]
        outside = sorted(
            {Mode(int(j), int(k)) for j, k in pts} - inner_set
        )
        return tuple(outside)

    def _pack(self, coords: np.ndarray) -> np.ndarray:
        return coords[:, 0] * self._stride + coords[:, 1]

    def _build_table(self):
        coords = np.array(self.modes, dtype=np.int64)
        span = int(np.abs(coords).max()) * 4 + 1
        self._stride = 2 * span + 1
        keys = self._pack(coords)
        order = np.argsort(keys)
        sorted_keys, sorted_pos = keys[order], order

        def lookup(pts: np.ndarray):
            """Indices of lattice points in the region; -1 when absent."""
            pk = pts[:, 0] * self._stride + pts[:, 1]
            loc = np.searchsorted(sorted_keys, pk)
            loc = np.clip(loc, 0, len(sorted_keys) - 1)
            hit = sorted_keys[loc] == pk
            out = np.where(hit, sorted_pos[loc], -1)
            return out

        n_all = len(self.modes)
        lam_ids = np.arange(self.n_lambda)
        all_ids = np.arange(n_all)
        rows = []
        # anchor two of the four slots (n1, n2, n3, n4 = n1 - n2 + n3) on the
        # resonant set and let one remaining slot range over the region
        for pattern in ("12", "13", "23", "14", "24", "34"):
            a = np.repeat(np.repeat(lam_ids, self.n_lambda), n_all)
            b = np.repeat(np.tile(lam_ids, self.n_lambda), n_all)
            free = np.tile(all_ids, self.n_lambda * self.n_lambda)
            if pattern == "12":
                i1, i2, i3 = a, b, free
                solved = coords[i1] - coords[i2] + coords[i3]
                i4 = lookup(solved)
                ok = i4 >= 0
            elif pattern == "13":
                i1, i3, i2 = a, b, free
                solved = coords[i1] - coords[i2] + coords[i3]
                i4 = lookup(solved)
                ok = i4 >= 0
            elif pattern == "23":
                i2, i3, i1 = a, b, free
                solved = coords[i1] - coords[i2] + coords[i3]
                i4 = lookup(solved)
                ok = i4 >= 0
            elif pattern == "14":
                i1, i4, i2 = a, b, free
                solved = coords[i4] - coords[i1] + coords[i2]
                i3 = lookup(solved)
                ok = i3 >= 0
            elif pattern == "24":
                i2, i4, i1 = a, b, free
                solved = coords[i4] + coords[i2] - coords[i1]
                i3 = lookup(solved)
                ok = i3 >= 0
            else:  # "34"
                i3, i4, i2 = a, b, free
                solved = coords[i4] + coords[i2] - coords[i3]
                i1 = lookup(solved)
                ok = i1 >= 0
            i1, i2, i3, i4 = i1[ok], i2[ok], i3[ok], i4[ok]
            keep = (i2 != i1) & (i2 != i3) & (i4 != i1) & (i4 != i3)
            rows.append(np.stack(
                [i1[keep], i2[keep], i3[keep], i4[keep]], axis=1))
        table = np.concatenate(rows, axis=0)
        if self.min_legs > 2:
            in_lambda = table < self.n_lambda
            table = table[in_lambda.sum(axis=1) >= self.min_legs]
        if self.max_detuning is not None:
            det = (self.lam[table[:, 0]] - self.lam[table[:, 1]]
                   + self.lam[table[:, 2]] - self.lam[table[:, 3]])
            table = table[np.abs(det) <= self.max_detuning]
        packed = ((table[:, 3] * n_all + table[:, 0]) * n_all
                  + table[:, 1]) * n_all + table[:, 2]
        packed = np.unique(packed)
        i3 = packed % n_all
        rest = packed // n_all
        i2 = rest % n_all
        rest //= n_all
        i1 = rest % n_all
        i4 = rest // n_all
        self._t1 = i1.astype(np.int32)
        self._t2 = i2.astype(np.int32)
        self._t3 = i3.astype(np.int32)
        self._t4 = i4.astype(np.int32)
        self._seg_starts = np.flatnonzero(
            np.diff(self._t4, prepend=-1)
        )
        self._seg_out = self._t4[self._seg_starts]
        self.table_size = len(self._t1)

    def _products(self, rho: np.ndarray) -> np.ndarray:
        return rho[self._t1] * np.conj(rho[self._t2]) * rho[self._t3]

    def exclusion_sum(self, rho: np.ndarray) -> np.ndarray:
        out = np.zeros(len(self.modes), dtype=complex)
        if self.table_size:
            sums = np.add.reduceat(self._products(rho), self._seg_starts)
            out[self._seg_out] = sums
        return out

    def interaction(self, rho: np.ndarray) -> float:
        if not self.table_size:
            return 0.0
        return 0.5 * float(
            np.sum(self._products(rho) * np.conj(rho[self._t4])).real
        )


def box_region(lset: LambdaSet, omega, half_width: Optional[int] = None) -> BoxRegion:
    """Default box: M = 3 * max coordinate of the resonant set."""
    if half_width is None:
        half_width = 3 * max(
            max(abs(m.j), abs(m.k)) for m in lset.mode_set()
        )
    return BoxRegion(half_width, omega)


def shell_region(lset: LambdaSet, omega, min_legs: int = 2,
                 max_detuning: Optional[float] = None) -> ShellRegion:
    return ShellRegion(lset, omega, min_legs=min_legs,
                       max_detuning=max_detuning)


# ---------------------------------------------------------------------------
# truncated field and integration
# ---------------------------------------------------------------------------


def nls_truncated_field(state, region: TruncationRegion) -> dict:
    """Gauged-frame time derivative drho/dt on the region.

    Implements -i drho_n/dt = lam(n) rho_n - |rho_n|^2 rho_n + C(n) with the
    convolution restricted to the region.
    """
    if isinstance(state, SparseFourierState) and state.frame != GAUGED:
        raise ConfigError(f"the field acts on gauged states, got {state.frame!r}")
    rho = region.vector(state.amplitudes if isinstance(state, SparseFourierState)
                        else state)
    deriv = 1j * (region.lam * rho - region.nonlinear(rho))
    return dict(zip(region.modes, deriv))


def rotating_rhs(region: TruncationRegion) -> Callable:
    """Right side for the rotating coordinates r_n = rho_n exp(-i lam(n) t)."""
    lam = region.lam

    def rhs(t, r):
        phase = np.exp(1j * (lam * t))
        return -1j * np.conj(phase) * region.nonlinear(phase * r)

    return rhs


def _real_view_rhs(field):
    """solve_ivp adapter for a time-dependent complex field."""

    def rhs(t, y):
        return field(t, y.view(complex)).view(float)

    return rhs


@dataclass
class NLSTrajectory:
    """Rotating-frame samples of one truncated integration."""

    region: TruncationRegion
    times: np.ndarray
    values: np.ndarray  # (len(times), len(region)) rotating-frame samples
    t_span: tuple
    mass_drift: float
    energy_drift: float
    momentum_drift: float
    n_evals: int

    def rho_at(self, i: int) -> np.ndarray:
        """Gauged-frame vector at sample i."""
        return self.values[i] * np.exp(1j * self.region.lam * self.times[i])

    def state_at(self, i: int, frame: str = ROTATING) -> SparseFourierState:
        vec = self.values[i] if frame == ROTATING else self.rho_at(i)
        if frame not in (ROTATING, GAUGED):
            raise ConfigError("samples exist in the rotating or gauged frame")
        amps = {m: vec[k] for k, m in enumerate(self.region.modes) if vec[k] != 0}
        return SparseFourierState(amps, frame=frame, time=float(self.times[i]),
                                  omega=self.region.omega)


def _momentum(region: TruncationRegion, r: np.ndarray) -> tuple:
    w = np.abs(r) ** 2
    coords = np.array(region.modes, dtype=float)
    return float(coords[:, 0] @ w), float(coords[:, 1] @ w)


def integrate_nls(
    state0,
    t_end: float,
    region: TruncationRegion,
    config: Optional[IntegratorConfig] = None,
    n_samples: int = 129,
) -> NLSTrajectory:
    """Adaptive integration of the truncated flow in rotating coordinates.

    ``state0`` is taken at time 0 (gauged and rotating frames agree there);
    drifts of mass, energy and momentum over the samples are recorded.
    """
    config = config or IntegratorConfig()
    if t_end < 0:
        raise ConfigError("integration time must be nonnegative")
    if isinstance(state0, SparseFourierState):
        if state0.time != 0.0:
            raise ConfigError("truncated integrations start at time 0")
        if state0.frame == PHYSICAL:
            raise ConfigError("gauge the state before integrating")
    r0 = region.vector(
        state0.amplitudes if isinstance(state0, SparseFourierState) else state0
    )
    if t_end == 0.0:
        times = np.array([0.0])
        values = r0[None, :].copy()
        return NLSTrajectory(region, times, values, (0.0, 0.0), 0.0, 0.0, 0.0, 0)

    rhs = rotating_rhs(region)
    times = np.linspace(0.0, t_end, int(n_samples))
    sol = solve_ivp(
        _real_view_rhs(rhs),
        (0.0, t_end),
        r0.view(float).copy(),
        method=config.method,
        rtol=config.rtol,
        atol=config.atol,
        max_step=config.max_step,
        t_eval=times,
        dense_output=False,
    )
    if not sol.success:
        raise ToleranceUnmetError(f"truncated integration failed: {sol.message}")
    values = sol.y.T.copy().view(complex)

    mass = np.abs(values) ** 2 @ np.ones(len(region.modes))
    coords = np.array(region.modes, dtype=float)
    px = np.abs(values) ** 2 @ coords[:, 0]
    py = np.abs(values) ** 2 @ coords[:, 1]
    energy = np.array([
        region.hamiltonian(values[i] * np.exp(1j * region.lam * times[i]))
        for i in range(len(times))
    ])
    return NLSTrajectory(
        region=region,
        times=times,
        values=values,
        t_span=(0.0, float(t_end)),
        mass_drift=float(np.max(np.abs(mass - mass[0]))),
        energy_drift=float(np.max(np.abs(energy - energy[0]))),
        momentum_drift=float(max(np.max(np.abs(px - px[0])),
                                 np.max(np.abs(py - py[0])))),
        n_evals=int(sol.nfev),
    )


# ---------------------------------------------------------------------------
# lifting chain data onto the resonant set
# ---------------------------------------------------------------------------


def lift_chain(lset: LambdaSet, b: Sequence[complex]) -> dict:
    """Generation-constant amplitudes: every mode of generation i carries b_i."""
    if len(b) != lset.N:
        raise ConfigError("need one chain amplitude per generation")
    return {
        m: complex(v) for v, gen in zip(b, lset.generations) for m in gen
    }


# ---------------------------------------------------------------------------
# normalizing map on a region (flow of the generating function, with tangent)
# ---------------------------------------------------------------------------


class _GammaKernel:
    """Generating-function flow embedded in a region's index space.

    Reproduces the package's normalizing time-one map but vectorized against
    a fixed region, and optionally carries a tangent vector through the
    variational equation, which the error-split diagnostics need.
    """

    def __init__(self, region: TruncationRegion, bmap: BirkhoffMap):
        self.region = region
        self.eta = bmap.eta
        self.rtol = bmap.rtol
        self.atol = bmap.atol
        terms = bmap.generating.terms
        idx = []
        for t in terms:
            try:
                idx.append([region.index[m] for m in t.quartet])
            except KeyError as missing:
                raise ConfigError(
                    f"generating-function mode {missing} outside the region"
                ) from None
        arr = np.array(idx, dtype=np.intp).reshape(-1, 4)
        self.o1, self.e1, self.o2, self.e2 = arr.T
        self.coeff = np.array([t.coefficient for t in terms], dtype=complex)
        self.n = len(region.modes)

    def field(self, z: np.ndarray) -> np.ndarray:
        grad = np.zeros(self.n, dtype=complex)
        t = self.coeff * z[self.o1] * z[self.o2]
        np.add.at(grad, self.e1, t * np.conj(z[self.e2]))
        np.add.at(grad, self.e2, t * np.conj(z[self.e1]))
        return 1j * grad

    def tangent_field(self, z: np.ndarray, v: np.ndarray) -> np.ndarray:
        grad = np.zeros(self.n, dtype=complex)
        dt = self.coeff * (v[self.o1] * z[self.o2] + z[self.o1] * v[self.o2])
        t = self.coeff * z[self.o1] * z[self.o2]
        np.add.at(grad, self.e1,
                  dt * np.conj(z[self.e2]) + t * np.conj(v[self.e2]))
        np.add.at(grad, self.e2,
                  dt * np.conj(z[self.e1]) + t * np.conj(v[self.e1]))
        return 1j * grad

    def flow(self, z0: np.ndarray, direction: int,
             v0: Optional[np.ndarray] = None):
        """Time-one flow of z (and optionally its tangent v)."""
        n = self.n
        if v0 is None:
            y0 = z0.astype(complex)

            def rhs(_t, y):
                return direction * self.field(y)
        else:
            y0 = np.concatenate([z0.astype(complex), v0.astype(complex)])

            def rhs(_t, y):
                z, v = y[:n], y[n:]
                return direction * np.concatenate(
                    [self.field(z), self.tangent_field(z, v)]
                )

        sol = solve_ivp(
            _real_view_rhs(rhs), (0.0, 1.0), y0.view(float).copy(),
            method="RK45", rtol=self.rtol, atol=self.atol,
        )
        if not sol.success:
            raise ToleranceUnmetError(
                f"normalizing flow failed: {sol.message}"
            )
        out = sol.y[:, -1].copy().view(complex)
        if v0 is None:
            return out, None
        return out[:n], out[n:]


# ---------------------------------------------------------------------------
# the error-split diagnostics
# ---------------------------------------------------------------------------


class _ErrorSplit:
    """Exact pieces Z1..Z4 of the tracking-error derivative on the set.

    Z1 is the linearization of the resonant field at the reference, Z2 the
    quadratic remainder of that Taylor split, Z3 the oscillating family
    corrections evaluated on the reference, Z4 their increment at the
    perturbed point; the residual Z0 = dxi/dt - (Z1+Z2+Z3+Z4) collects the
    leftover couplings (removed one-outside terms, shell feedback and the
    conjugation defect) and is the quantity the tracking argument must beat.
    """

    def __init__(self, lset: LambdaSet, omega, region: TruncationRegion):
        self.kernel = _SpouseKernel(lset)
        self.order = self.kernel.order
        self.cols = np.array([region.index[m] for m in self.order], dtype=np.intp)
        r2 = r_squared_of(omega)

        def lam_exact(m):
            val = r2 * (m.k * m.k) + m.j * m.j
            return float(val.midpoint()) if isinstance(val, RationalInterval) \
                else float(val)

        index = {m: i for i, m in enumerate(self.order)}
        rows = []
        for f in lset.families:
            p1, p2 = f.parents
            c1, c2 = f.children
            om = (lam_exact(c1) + lam_exact(c2)
                  - lam_exact(p1) - lam_exact(p2))
            rows.append((index[c1], index[p1], index[p2], index[c2], -om))
            rows.append((index[c2], index[p1], index[p2], index[c1], -om))
            rows.append((index[p1], index[c1], index[c2], index[p2], +om))
            rows.append((index[p2], index[c1], index[c2], index[p1], +om))
        arr = np.array(rows, dtype=float).reshape(-1, 5)
        self._tgt = arr[:, 0].astype(np.intp)
        self._fa = arr[:, 1].astype(np.intp)
        self._fb = arr[:, 2].astype(np.intp)
        self._fbar = arr[:, 3].astype(np.intp)
        self._om = arr[:, 4]

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return full[self.cols]

    def resonant_field(self, r: np.ndarray) -> np.ndarray:
        return self.kernel.field(r)

    def jacobian_action(self, r: np.ndarray, xi: np.ndarray) -> np.ndarray:
        out = -1j * (2.0 * np.abs(r) ** 2 * xi + r * r * np.conj(xi))
        ch, pa = self.kernel._child, self.kernel._parent
        if len(ch):
            i, c1, c2, sp = ch.T
            np.add.at(out, i, 2j * (
                (xi[c1] * r[c2] + r[c1] * xi[c2]) * np.conj(r[sp])
                + r[c1] * r[c2] * np.conj(xi[sp])
            ))
        if len(pa):
            i, p1, p2, sb = pa.T
            np.add.at(out, i, 2j * (
                (xi[p1] * r[p2] + r[p1] * xi[p2]) * np.conj(r[sb])
                + r[p1] * r[p2] * np.conj(xi[sb])
            ))
        return out

    def family_defect_field(self, t: float, r: np.ndarray) -> np.ndarray:
        """Field of the family terms weighted by exp(i Omega t) - 1."""
        out = np.zeros(len(self.order), dtype=complex)
        if len(self._tgt):
            w = np.exp(1j * self._om * t) - 1.0
            np.add.at(out, self._tgt,
                      2j * w * r[self._fa] * r[self._fb]
                      * np.conj(r[self._fbar]))
        return out

    def split(self, t: float, xi: np.ndarray, reference: np.ndarray,
              xi_dot: np.ndarray) -> tuple:
        """l1 magnitudes (z0..z4) at one sample."""
        z1 = self.jacobian_action(reference, xi)
        z2 = (self.resonant_field(reference + xi)
              - self.resonant_field(reference) - z1)
        z3 = self.family_defect_field(t, reference)
        z4 = self.family_defect_field(t, reference + xi) - z3
        z0 = xi_dot - (z1 + z2 + z3 + z4)
        return tuple(
            float(np.sum(np.abs(z))) for z in (z0, z1, z2, z3, z4)
        )


# ---------------------------------------------------------------------------
# shadowing experiment
# ---------------------------------------------------------------------------


@dataclass
class LadderEntry:
    """Per-lambda outcome of the shadowing run."""

    lam: float
    t_end: float
    sup_l1: float
    raw_sup_l1: float
    leak: float
    mass_drift: float
    energy_drift: float
    n_steps: int
    n_gamma_samples: int
    z_times: Optional[np.ndarray] = dc_field(default=None, repr=False)
    z_mags: Optional[np.ndarray] = dc_field(default=None, repr=False)


@dataclass
class ShadowReport:
    """Ladder summary: sup-distances, fitted decay rate, defect series."""

    schema_version: int
    n_generations: int
    p: int
    q: int
    omega_text: str
    region_descriptor: str
    t0: float
    ladder: list
    entries: list
    slope: Optional[float]
    prefactor: Optional[float]
    monotone: bool
    strictly_decreasing: bool
    conjugate_initial: bool
    nonlinearity_disabled: bool
    samples: int
    gamma_stride: int
    z_stride: int
    rtol: float
    atol: float
    shell_atol: float

    def sup_values(self) -> list:
        return [e.sup_l1 for e in self.entries]

    def to_json(self) -> str:
        payload = {
            "schema_version": self.schema_version,
            "n_generations": self.n_generations,
            "p": self.p,
            "q": self.q,
            "omega_text": self.omega_text,
            "region_descriptor": self.region_descriptor,
            "t0": self.t0,
            "ladder": list(self.ladder),
            "slope": self.slope,
            "prefactor": self.prefactor,
            "monotone": self.monotone,
            "strictly_decreasing": self.strictly_decreasing,
            "conjugate_initial": self.conjugate_initial,
            "nonlinearity_disabled": self.nonlinearity_disabled,
            "samples": self.samples,
            "gamma_stride": self.gamma_stride,
            "z_stride": self.z_stride,
            "rtol": self.rtol,
            "atol": self.atol,
            "shell_atol": self.shell_atol,
            "entries": [
                {
                    "lambda": e.lam,
                    "t_end": e.t_end,
                    "sup_l1": e.sup_l1,
                    "raw_sup_l1": e.raw_sup_l1,
                    "leak": e.leak,
                    "mass_drift": e.mass_drift,
                    "energy_drift": e.energy_drift,
                    "n_steps": e.n_steps,
                    "n_gamma_samples": e.n_gamma_samples,
                    "z_times": None if e.z_times is None else list(e.z_times),
                    "z_mags": None if e.z_mags is None
                    else [list(row) for row in e.z_mags],
                }
                for e in self.entries
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)


def _default_reference(n: int) -> np.ndarray:
    """A fixed, mildly concentrated chain datum of unit mass."""
    mid = (n - 1) // 2
    b = np.array([
        0.2 ** abs(i - mid) * np.exp(1j * (i - mid) * np.pi / 3)
        for i in range(n)
    ])
    return b / math.sqrt(float(np.sum(np.abs(b) ** 2)))


def shadowing_experiment(
    lset: LambdaSet,
    omega,
    lambda_ladder: Sequence[float],
    region: Optional[TruncationRegion] = None,
    config: Optional[IntegratorConfig] = None,
    toy_traj: Optional[ToyTrajectory] = None,
    t0: float = 0.01,
    samples: int = 1024,
    gamma_stride: int = 4,
    z_stride: int = 16,
    shell_atol: float = 1e-12,
    conjugate_initial: bool = True,
    disable_nonlinearity: bool = False,
    generating: Optional[GeneratingFunction] = None,
) -> ShadowReport:
    """Integrate the truncated flow next to the scaled chain solution.

    For each ladder value the reference is ``r^lam(t) = b(t/lam^2)/lam``
    lifted generation-constant onto the set; the truncated run starts from
    the normalized image of that datum (or the raw datum when
    ``conjugate_initial`` is off) and the distance is measured after undoing
    the normalizing map and the rotating phases.  The raw rotating-frame
    distance is tracked on every accepted step plus the uniform grid; the
    normalized distance and the defect split are sampled on grid strides.
    Shell modes carry their own absolute tolerance ``shell_atol``; their
    slaved response sits orders of magnitude below the tracked set, so the
    global tolerance pair says nothing about how well the leak is resolved.
    1e-12 keeps the leak accurate to a few percent up to the largest ladder
    values used in the bundled experiments; loosening it to 1e-10 roughly
    halves the step count but can overstate small leaks several-fold.

    Large eigenvalue differences among shell rows make the slaved response
    stiff: pass a ``region`` built with ``max_detuning`` to drop rows that
    oscillate too fast to integrate (they average out; dropping them keeps
    the conservation symmetries intact).
    """
    ladder = [float(v) for v in lambda_ladder]
    if len(ladder) < 1 or any(v <= 0 for v in ladder):
        raise ConfigError("the ladder needs positive scaling values")
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ConfigError("the ladder must increase strictly")
    if t0 <= 0:
        raise ConfigError("the chain time horizon must be positive")
    if samples < 2 or gamma_stride < 1 or z_stride < 1:
        raise ConfigError("invalid sampling parameters")
    if shell_atol <= 0:
        raise ConfigError("the shell tolerance must be positive")
    config = config or IntegratorConfig(rtol=1e-9, atol=1e-11)
    region = region or shell_region(lset, omega)

    if toy_traj is None:
        toy_traj = integrate_toy(ToyState(_default_reference(lset.N)), t0)
    if toy_traj.t_span[0] != 0.0 or toy_traj.t_span[1] < t0:
        raise ConfigError("the reference chain orbit must cover [0, t0]")

    generating = generating or build_F(lset, omega)
    fwd = make_birkhoff(generating, "forward", rtol=1e-11, atol=1e-13)
    kernel = _GammaKernel(region, fwd)
    split = _ErrorSplit(lset, omega, region)
    gen_col = np.full(len(region.modes), -1, dtype=np.intp)
    gen_of = lset.generation_of()
    for m, g in gen_of.items():
        gen_col[region.index[m]] = g
    on_lambda = gen_col >= 0

    def lift_vec(b: np.ndarray) -> np.ndarray:
        out = np.zeros(len(region.modes), dtype=complex)
        out[on_lambda] = b[gen_col[on_lambda]]
        return out

    rhs = rotating_rhs(region)
    if disable_nonlinearity:
        def rhs(_t, r):  # noqa: F811 - deliberate replacement
            return np.zeros_like(r)

    atol_vec = np.full(len(region.modes), config.atol)
    atol_vec[~on_lambda] = shell_atol
    atol_vec = np.repeat(atol_vec, 2)  # real view interleaves re/im

    entries = []
    for lam in ladder:
        scaled = scale_solution(toy_traj, lam)
        t_end = lam * lam * t0
        b0 = scaled.eval(0.0)
        start = lift_vec(b0)
        if conjugate_initial and not disable_nonlinearity:
            rho0, _ = kernel.flow(start, +1)
        else:
            rho0 = start.copy()

        grid = np.linspace(0.0, t_end, samples + 1)
        grid_vals = np.empty((samples + 1, len(region.modes)), dtype=complex)
        grid_vals[0] = rho0
        raw_sup = float(np.sum(np.abs(rho0 - start)))
        n_steps = 0
        r = rho0.copy()
        for w in range(samples):
            sol = solve_ivp(
                _real_view_rhs(rhs), (grid[w], grid[w + 1]),
                r.view(float).copy(), method=config.method,
                rtol=config.rtol, atol=atol_vec, max_step=config.max_step,
            )
            if not sol.success:
                raise ToleranceUnmetError(
                    f"ladder value {lam}: integration failed ({sol.message})"
                )
            n_steps += len(sol.t) - 1
            cols = sol.y.T.copy().view(complex)
            refs = np.atleast_2d(scaled.eval(sol.t))
            for k_i in range(cols.shape[0]):
                dist = float(np.sum(np.abs(cols[k_i] - lift_vec(refs[k_i]))))
                if dist > raw_sup:
                    raw_sup = dist
            r = cols[-1]
            grid_vals[w + 1] = r

        leak = float(np.max(np.sum(np.abs(grid_vals[:, ~on_lambda]), axis=1))) \
            if (~on_lambda).any() else 0.0
        mass = np.sum(np.abs(grid_vals) ** 2, axis=1)
        energies = np.array([
            region.hamiltonian(grid_vals[i] * np.exp(1j * region.lam * grid[i]))
            for i in range(0, samples + 1, max(1, samples // 64))
        ])
        mass_drift = float(np.max(np.abs(mass - mass[0])))
        energy_drift = float(np.max(np.abs(energies - energies[0])))

        if disable_nonlinearity:
            sup_l1 = float(
                np.max(np.sum(np.abs(grid_vals - grid_vals[0]), axis=1))
            )
            entries.append(LadderEntry(
                lam=lam, t_end=t_end, sup_l1=sup_l1, raw_sup_l1=raw_sup,
                leak=leak, mass_drift=mass_drift, energy_drift=energy_drift,
                n_steps=n_steps, n_gamma_samples=0,
            ))
            continue

        sup_l1 = 0.0
        z_times, z_rows = [], []
        n_gamma = 0
        for idx in range(0, samples + 1, gamma_stride):
            t = float(grid[idx])
            phase = np.exp(1j * region.lam * t)
            rho = phase * grid_vals[idx]
            want_z = (idx % (gamma_stride * z_stride)) == 0
            if want_z:
                rho_dot = 1j * (region.lam * rho - region.nonlinear(rho))
                beta, dbeta = kernel.flow(rho, -1, rho_dot)
            else:
                beta, dbeta = kernel.flow(rho, -1)
            n_gamma += 1
            pulled = np.conj(phase) * beta
            b_t = scaled.eval(t)
            ref_full = lift_vec(b_t)
            xi_full = pulled - ref_full
            dist = float(np.sum(np.abs(xi_full)))
            if dist > sup_l1:
                sup_l1 = dist
            if want_z:
                # d/dt of the pulled-back state, with the tangent carried
                # exactly through the normalizing flow
                pulled_dot = np.conj(phase) * (
                    dbeta - 1j * region.lam * beta
                )
                # the scaled chain solves the chain equation itself, so its
                # derivative is just the chain field at the current value
                bdot = toy_vector_field(b_t)
                ref_dot = lift_vec(bdot)
                xi_dot = split.restrict(pulled_dot - ref_dot)
                mags = split.split(
                    t, split.restrict(xi_full), split.restrict(ref_full),
                    xi_dot,
                )
                z_times.append(t)
                z_rows.append(mags)

        entries.append(LadderEntry(
            lam=lam, t_end=t_end, sup_l1=sup_l1, raw_sup_l1=raw_sup,
            leak=leak, mass_drift=mass_drift, energy_drift=energy_drift,
            n_steps=n_steps, n_gamma_samples=n_gamma,
            z_times=np.array(z_times),
            z_mags=np.array(z_rows).reshape(-1, 5),
        ))

    sups = [e.sup_l1 for e in entries]
    slope = prefactor = None
    if len(ladder) >= 2 and all(v > 0 for v in sups):
        logx = np.log(np.array(ladder))
        logy = np.log(np.array(sups))
        coeffs = np.polyfit(logx, logy, 1)
        slope = float(coeffs[0])
        prefactor = float(np.exp(coeffs[1]))
    monotone = all(b <= a * (1.0 + 1e-12) for a, b in zip(sups, sups[1:]))
    strict = all(b < a for a, b in zip(sups, sups[1:]))

    return ShadowReport(
        schema_version=SHADOW_SCHEMA_VERSION,
        n_generations=lset.N,
        p=lset.p,
        q=lset.q,
        omega_text=_omega_text(omega),
        region_descriptor=region.descriptor,
        t0=t0,
        ladder=ladder,
        entries=entries,
        slope=slope,
        prefactor=prefactor,
        monotone=monotone,
        strictly_decreasing=strict,
        conjugate_initial=conjugate_initial,
        nonlinearity_disabled=disable_nonlinearity,
        samples=samples,
        gamma_stride=gamma_stride,
        z_stride=z_stride,
        rtol=config.rtol,
        atol=config.atol,
        shell_atol=shell_atol,
    )


# ---------------------------------------------------------------------------
# Sobolev growth diagnostic
# ---------------------------------------------------------------------------


@dataclass
class GrowthReport:
    """H^s history of a lifted orbit against the generation weight ratio."""

    s: float
    times: np.ndarray
    sobolev: np.ndarray
    generation_mass: np.ndarray  # (len(times), N)
    start_generation: int
    target_generation: int
    realized_ratio: float
    weight_ratio: float
    weights: list

    def to_json(self) -> str:
        return json.dumps({
            "s": self.s,
            "start_generation": self.start_generation,
            "target_generation": self.target_generation,
            "realized_ratio": self.realized_ratio,
            "weight_ratio": self.weight_ratio,
            "weights": list(self.weights),
            "times": list(self.times),
            "sobolev": list(self.sobolev),
        }, indent=2, sort_keys=True)


def _sobolev_generation_weights(lset: LambdaSet, s: float) -> np.ndarray:
    """Sum of <n>^(2s) over each generation; <n> = max(1, |n|) keeps the
    origin mode (present in some desk-scale sets) at weight one."""
    return np.array([
        math.fsum(max(1.0, float(m.norm_sq())) ** s for m in gen)
        for gen in lset.generations
    ])


def growth_diagnostic(trajectory, lset: LambdaSet, s: float) -> GrowthReport:
    """Norm history and realized growth ratio of a lifted orbit.

    Chain trajectories are lifted generation-constant; spouse trajectories
    are measured mode by mode.  The realized ratio ||u(T)||_s^2/||u(0)||_s^2
    is compared against W_target/W_start, the generation-weight ratio the
    transfer mechanism aims for; the scaling b -> b/lam cancels in both.
    """
    if s < 0:
        raise ConfigError("the smoothness index must be nonnegative")
    weights = _sobolev_generation_weights(lset, s)
    counts = np.array([len(g) for g in lset.generations], dtype=float)
    if isinstance(trajectory, ToyTrajectory):
        if trajectory.values.shape[1] != lset.N:
            raise ConfigError("chain width does not match the set")
        sq = np.abs(trajectory.values) ** 2
        gen_mass = sq * counts
        norm_sq = sq @ weights
    elif isinstance(trajectory, SpouseTrajectory):
        cols = {m: i for i, m in enumerate(trajectory.order)}
        w_mode = np.empty(len(trajectory.order))
        gen_of = lset.generation_of()
        gen_idx = np.empty(len(trajectory.order), dtype=np.intp)
        for m, i in cols.items():
            w_mode[i] = max(1.0, float(m.norm_sq())) ** s
            gen_idx[i] = gen_of[m]
        sq = np.abs(trajectory.values) ** 2
        norm_sq = sq @ w_mode
        gen_mass = np.zeros((sq.shape[0], lset.N))
        for g in range(lset.N):
            gen_mass[:, g] = sq[:, gen_idx == g].sum(axis=1)
    else:
        raise ConfigError(
            "growth diagnostics accept chain or spouse trajectories"
        )
    if norm_sq[0] == 0:
        raise ConfigError("the initial state is empty")
    start = int(np.argmax(gen_mass[0]))
    target = int(np.argmax(gen_mass[-1]))
    return GrowthReport(
        s=float(s),
        times=np.asarray(trajectory.times, dtype=float),
        sobolev=np.sqrt(norm_sq),
        generation_mass=gen_mass,
        start_generation=start,
        target_generation=target,
        realized_ratio=float(norm_sq[-1] / norm_sq[0]),
        weight_ratio=float(weights[target] / weights[start]),
        weights=[float(w) for w in weights],
    )


# ---------------------------------------------------------------------------
# delimited exports
# ---------------------------------------------------------------------------


def export_norm_csv(traj: NLSTrajectory, path, s_values=(0.0, 1.0, 2.0),
                    stride: int = 1) -> None:
    """t, mass, energy, l1 and requested H^s columns of a truncated run."""
    if stride < 1:
        raise ConfigError("stride must be positive")
    norms = np.array(traj.region.modes, dtype=float)
    norm_sq = norms[:, 0] ** 2 + norms[:, 1] ** 2
    weights = [np.maximum(1.0, norm_sq) ** s for s in s_values]
    with open(path, "w") as fh:
        heads = ["t", "mass", "energy", "ell1"]
        heads += [f"h{s:g}" for s in s_values]
        fh.write(",".join(heads) + "\n")
        for i in range(0, len(traj.times), stride):
            rho = traj.rho_at(i)
            sq = np.abs(rho) ** 2
            row = [
                repr(float(traj.times[i])),
                repr(float(np.sum(sq))),
                repr(float(traj.region.hamiltonian(rho))),
                repr(float(np.sum(np.abs(rho)))),
            ]
            row += [repr(float(np.sqrt(sq @ w))) for w in weights]
            fh.write(",".join(row) + "\n")


def export_shadow_csv(report: ShadowReport, path) -> None:
    """One summary row per ladder value."""
    cols = ("lambda", "t_end", "sup_l1", "raw_sup_l1", "leak",
            "mass_drift", "energy_drift", "n_steps")
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for e in report.entries:
            fh.write(",".join(repr(float(v)) for v in (
                e.lam, e.t_end, e.sup_l1, e.raw_sup_l1, e.leak,
                e.mass_drift, e.energy_drift, e.n_steps)) + "\n")


def export_z_csv(report: ShadowReport, path) -> None:
    """Defect magnitude series: lambda, t, z0..z4."""
    with open(path, "w") as fh:
        fh.write("lambda,t,z0,z1,z2,z3,z4\n")
        for e in report.entries:
            if e.z_times is None:
                continue
            for t, row in zip(e.z_times, e.z_mags):
                cells = [repr(float(e.lam)), repr(float(t))]
                cells += [repr(float(v)) for v in row]
                fh.write(",".join(cells) + "\n")


def export_growth_csv(report: GrowthReport, path, stride: int = 1) -> None:
    """t, H^s norm and per-generation mass columns."""
    if stride < 1:
        raise ConfigError("stride must be positive")
    n = report.generation_mass.shape[1]
    with open(path, "w") as fh:
        heads = ["t", "sobolev"] + [f"gen{i + 1}_mass" for i in range(n)]
        fh.write(",".join(heads) + "\n")
        for i in range(0, len(report.times), stride):
            row = [repr(float(report.times[i])), repr(float(report.sobolev[i]))]
            row += [repr(float(v)) for v in report.generation_mass[i]]
            fh.write(",".join(row) + "\n")
