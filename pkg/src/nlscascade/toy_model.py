"""Finite-dimensional cascade dynamics.

Two layers of the same dynamics live here: the N-amplitude chain system
(one complex amplitude per generation) and the full per-mode system on a
frequency set, whose right side is assembled from the stored family
relations.  Intragenerational initial data makes the second reduce exactly
to the first, and both are integrated with the same adaptive scheme.  The
module also hosts the numerical search for energy-transfer orbits along
the heteroclinic slider chain.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConfigError, SearchError, ToleranceUnmetError
from .lambda_set import LambdaSet
from .resonance import Mode


@dataclass
class ToyState:
    """Chain amplitudes, one complex value per generation."""

    b: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.b, dtype=complex))
        if b.ndim != 1:
            raise ConfigError("chain amplitudes must form a one-dimensional vector")
        self.b = b

    def mass(self) -> float:
        return float(np.sum(np.abs(self.b) ** 2))


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive embedded Runge-Kutta settings shared by both systems."""

    method: str = "RK45"
    rtol: float = 1e-10
    atol: float = 1e-10
    max_step: float = math.inf
    dense: bool = True

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ConfigError("integration tolerances must be positive")
        if self.max_step <= 0:
            raise ConfigError("max_step must be positive")


def toy_vector_field(b: np.ndarray) -> np.ndarray:
    """db_i/dt = -i|b_i|^2 b_i + 2i conj(b_i) (b_{i-1}^2 + b_{i+1}^2).

    Missing neighbours at the two ends of the chain count as zero.
    """
    b = np.asarray(b, dtype=complex)
    sq = b * b
    neighbours = np.zeros_like(b)
    neighbours[1:] += sq[:-1]
    neighbours[:-1] += sq[1:]
    return -1j * np.abs(b) ** 2 * b + 2j * np.conj(b) * neighbours


def toy_invariants(b: np.ndarray) -> tuple[float, float]:
    """(mass, energy) of a chain state.

    The energy generates the chain field through db/dt = -i dh/d(conj b),
    which pins both the quartic self-term and the factor-2 coupling.
    """
    b = np.asarray(b, dtype=complex)
    mass = math.fsum(np.abs(b) ** 2)
    quartic = 0.5 * math.fsum(np.abs(b) ** 4)
    coupling = 2.0 * math.fsum((np.conj(b[:-1]) ** 2 * b[1:] ** 2).real)
    return mass, quartic - coupling


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------


@dataclass
class ToyTrajectory:
    times: np.ndarray
    values: np.ndarray  # (len(times), n) complex samples
    t_span: tuple[float, float]
    mass_drift: float
    energy_drift: float
    _dense: Optional[Callable] = dc_field(default=None, repr=False)

    def eval(self, t):
        """Dense evaluation at scalar or array times inside t_span."""
        if self._dense is None:
            raise ConfigError("trajectory was integrated without dense output")
        return self._dense(t)


def _complex_rhs(field):
    def rhs(t, y):
        return field(y.view(complex)).view(float)

    return rhs


def _dense_evaluator(sol, n: int):
    def evaluate(t):
        arr = sol(t)
        if arr.ndim == 1:
            return np.ascontiguousarray(arr).view(complex)
        return np.ascontiguousarray(arr.T).view(complex).reshape(-1, n)

    return evaluate


def _integrate(field, y0: np.ndarray, t0: float, t_end: float,
               config: IntegratorConfig, n_samples: int,
               invariants) -> ToyTrajectory:
    if t_end < 0:
        raise ConfigError("integration time must be nonnegative")
    n = len(y0)
    times = np.linspace(t0, t0 + t_end, n_samples)
    if t_end == 0:
        values = np.tile(y0, (n_samples, 1))
        frozen = y0.copy()
        return ToyTrajectory(times, values, (t0, t0), 0.0, 0.0,
                             _dense=lambda t: _constant(frozen, t))
    sol = solve_ivp(
        _complex_rhs(field),
        (t0, t0 + t_end),
        np.ascontiguousarray(y0, dtype=complex).view(float),
        method=config.method,
        rtol=config.rtol,
        atol=config.atol,
        max_step=config.max_step,
        dense_output=config.dense,
    )
    if not sol.success:
        raise ToleranceUnmetError(f"integrator stopped early: {sol.message}")
    dense = _dense_evaluator(sol.sol, n) if config.dense else None
    if dense is not None:
        values = dense(times)
    else:
        values = np.tile(y0, (n_samples, 1))
        values[-1] = np.ascontiguousarray(sol.y[:, -1]).view(complex)
    m0, h0 = invariants(y0)
    drifts = np.array([invariants(row) for row in values])
    mass_drift = float(np.max(np.abs(drifts[:, 0] - m0)))
    energy_drift = float(np.max(np.abs(drifts[:, 1] - h0)))
    return ToyTrajectory(times, values, (t0, t0 + t_end),
                         mass_drift, energy_drift, _dense=dense)


def _constant(y0, t):
    t = np.asarray(t, dtype=float)
    if t.ndim == 0:
        return y0.copy()
    return np.tile(y0, (len(t), 1))


def integrate_toy(state0: ToyState, t_end: float,
                  config: Optional[IntegratorConfig] = None,
                  n_samples: int = 201) -> ToyTrajectory:
    config = config or IntegratorConfig()
    return _integrate(toy_vector_field, state0.b, state0.time, t_end,
                      config, n_samples, toy_invariants)


def scale_solution(traj: ToyTrajectory, lam: float,
                   times: Optional[np.ndarray] = None) -> ToyTrajectory:
    """Scaled solution  b_lam(t) = b(t / lam^2) / lam,  resampled.

    Degree-3 homogeneity of the field makes this another solution; the
    trajectory must be based at time zero.
    """
    if lam <= 0:
        raise ConfigError("scaling parameter must be positive")
    if traj.t_span[0] != 0:
        raise ConfigError("scaling assumes a trajectory based at time zero")
    if traj._dense is None:
        raise ConfigError("scaling needs dense output")
    lam2 = lam * lam
    span = (0.0, traj.t_span[1] * lam2)
    if times is None:
        times = traj.times * lam2
    times = np.asarray(times, dtype=float)
    if np.any(times < span[0]) or np.any(times > span[1] * (1 + 1e-12)):
        raise ConfigError("requested grid leaves the scaled time span")

    def dense(t):
        return traj.eval(np.asarray(t, dtype=float) / lam2) / lam

    values = dense(times)
    m0, h0 = toy_invariants(values[0])
    inv = np.array([toy_invariants(row) for row in values])
    return ToyTrajectory(times, values, span,
                         float(np.max(np.abs(inv[:, 0] - m0))),
                         float(np.max(np.abs(inv[:, 1] - h0))),
                         _dense=dense)


# ---------------------------------------------------------------------------
# energy-transfer orbit search
# ---------------------------------------------------------------------------


def _slider_seed(n: int, start: int, eps: float) -> np.ndarray:
    """Geometric ladder about the start generation with slider phases."""
    j = np.arange(1, n + 1)
    b = eps ** np.abs(j - start) * np.exp(1j * (j - start) * math.pi / 3)
    return b / math.sqrt(np.sum(np.abs(b) ** 2))


def _target_peak(traj: ToyTrajectory, target: int) -> tuple[float, float]:
    conc = np.abs(traj.values[:, target - 1]) ** 2
    i = int(np.argmax(conc))
    return float(conc[i]), float(traj.times[i])


def find_transfer_orbit(
    n_generations: int,
    delta: float,
    start: Optional[int] = None,
    target: Optional[int] = None,
    threshold: float = 0.7,
    config: Optional[IntegratorConfig] = None,
    t_max: Optional[float] = None,
    grid_points: int = 21,
    refine_rounds: int = 2,
):
    """Shooting search for a mass-1 orbit moving concentration along the chain.

    The initial state concentrates at least 1 - delta of the mass at the
    start generation; candidates are geometric slider ladders whose decay
    rate is scanned on a log grid and refined around the best bracket.
    Returns (initial state, transfer time, diagnostics); the transfer time
    is where the target generation's concentration peaks.
    """
    if not 0 < delta < 1:
        raise ConfigError("concentration defect delta must lie in (0, 1)")
    if start is None:
        start = 2
    if target is None:
        target = n_generations - 1
    if n_generations < 3:
        raise ConfigError("need at least three generations")
    if not (1 <= start <= n_generations and 1 <= target <= n_generations):
        raise ConfigError("start and target generations must exist")
    config = config or IntegratorConfig()

    if start == target:
        b0 = np.zeros(n_generations, dtype=complex)
        b0[start - 1] = 1.0
        state = ToyState(b0)
        diagnostics = {
            "eps": 0.0,
            "peak_target": 1.0,
            "per_generation_peaks": [float(abs(v) ** 2) for v in b0],
            "threshold": threshold,
            "evaluations": 0,
            "t_max": 0.0,
        }
        return state, 0.0, diagnostics

    if n_generations < 4:
        raise ConfigError("distinct start and target generations need >= 4 of them")
    if t_max is None:
        t_max = 10.0 + 5.0 * n_generations * math.log(1.0 / delta)

    # keep the off-start mass of the seed below delta: the two nearest
    # neighbours dominate the geometric tail
    eps_hi = math.sqrt(0.4 * delta)
    eps_lo = max(delta / 30.0, 1e-6)
    n_samples = max(600, int(20 * t_max))

    evaluations = 0
    best = None  # (peak, eps, t_peak, trajectory)

    def assess(eps: float):
        nonlocal evaluations, best
        b0 = _slider_seed(n_generations, start, eps)
        if abs(b0[start - 1]) ** 2 < 1 - delta:
            return
        traj = _integrate(toy_vector_field, b0, 0.0, t_max, config,
                          n_samples, toy_invariants)
        evaluations += 1
        peak, t_peak = _target_peak(traj, target)
        if best is None or peak > best[0]:
            best = (peak, eps, t_peak, traj)

    grid = np.geomspace(eps_lo, eps_hi, grid_points)
    for eps in grid:
        assess(float(eps))
    for _ in range(refine_rounds):
        if best is None:
            break
        center = best[1]
        lo = max(eps_lo, center / 2.5)
        hi = min(eps_hi, center * 2.5)
        for eps in np.geomspace(lo, hi, grid_points):
            assess(float(eps))

    if best is None or best[0] < threshold:
        achieved = 0.0 if best is None else best[0]
        raise SearchError(
            f"no slider ladder reached concentration {threshold} at generation "
            f"{target} within t <= {t_max:.1f} (best {achieved:.3f}, "
            f"{evaluations} trajectories)"
        )
    peak, eps, t_peak, traj = best
    per_gen = [float(np.max(np.abs(traj.values[:, i]) ** 2))
               for i in range(n_generations)]
    diagnostics = {
        "eps": eps,
        "peak_target": peak,
        "per_generation_peaks": per_gen,
        "threshold": threshold,
        "evaluations": evaluations,
        "t_max": t_max,
    }
    return ToyState(_slider_seed(n_generations, start, eps)), t_peak, diagnostics


def transfer_time_fit(n_values: Sequence[int], delta: float, **kwargs):
    """Least-squares constant K in  T0 ~ K * N * log(1/delta)  through the origin."""
    xs, ts = [], []
    for n in n_values:
        _, t0, _ = find_transfer_orbit(n, delta, **kwargs)
        xs.append(n * math.log(1.0 / delta))
        ts.append(t0)
    xs_arr = np.asarray(xs)
    ts_arr = np.asarray(ts)
    k = float(xs_arr @ ts_arr / (xs_arr @ xs_arr))
    return k, list(zip(n_values, ts))


# ---------------------------------------------------------------------------
# the full per-mode system on a frequency set
# ---------------------------------------------------------------------------


@dataclass
class SpouseState:
    """Amplitudes supported on a frequency set, with its relation tables."""

    amplitudes: dict
    lset: LambdaSet
    time: float = 0.0

    def __post_init__(self):
        extra = set(self.amplitudes) - self.lset.mode_set()
        if extra:
            raise ConfigError(f"amplitudes outside the set: {sorted(extra)[:4]}")

    def vector(self, order: Sequence[Mode]) -> np.ndarray:
        return np.array([self.amplitudes.get(m, 0j) for m in order], dtype=complex)


class _SpouseKernel:
    """Vectorized right side assembled from the family relations."""

    def __init__(self, lset: LambdaSet):
        self.order = tuple(lset.modes())
        index = {m: i for i, m in enumerate(self.order)}
        child_rows = []
        parent_rows = []
        for m in self.order:
            rel = lset.relations.get(m)
            if rel is None:
                raise ConfigError(f"no relations recorded for {m}")
            if rel.children is not None:
                if rel.spouse is None:
                    raise ConfigError(f"{m} has children but no spouse recorded")
                c1, c2 = rel.children
                child_rows.append((index[m], index[c1], index[c2],
                                   index[rel.spouse]))
            if rel.parents is not None:
                if rel.sibling is None:
                    raise ConfigError(f"{m} has parents but no sibling recorded")
                p1, p2 = rel.parents
                parent_rows.append((index[m], index[p1], index[p2],
                                    index[rel.sibling]))
        self._child = np.array(child_rows, dtype=np.intp).reshape(-1, 4)
        self._parent = np.array(parent_rows, dtype=np.intp).reshape(-1, 4)
        fam_rows = [
            (index[f.parents[0]], index[f.parents[1]],
             index[f.children[0]], index[f.children[1]])
            for f in lset.families
        ]
        self._fam = np.array(fam_rows, dtype=np.intp).reshape(-1, 4)

    def field(self, r: np.ndarray) -> np.ndarray:
        out = -1j * np.abs(r) ** 2 * r
        if len(self._child):
            i, c1, c2, sp = self._child.T
            out[i] += 2j * r[c1] * r[c2] * np.conj(r[sp])
        if len(self._parent):
            i, p1, p2, sb = self._parent.T
            out[i] += 2j * r[p1] * r[p2] * np.conj(r[sb])
        return out

    def invariants(self, r: np.ndarray) -> tuple[float, float]:
        mass = math.fsum(np.abs(r) ** 2)
        h = 0.5 * math.fsum(np.abs(r) ** 4)
        if len(self._fam):
            p1, p2, c1, c2 = self._fam.T
            h -= 4.0 * math.fsum(
                (r[c1] * r[c2] * np.conj(r[p1]) * np.conj(r[p2])).real
            )
        return mass, h


def spouse_vector_field(state: SpouseState) -> dict:
    """Per-mode time derivative from self, child-couple and parent-couple terms."""
    kernel = _SpouseKernel(state.lset)
    deriv = kernel.field(state.vector(kernel.order))
    return dict(zip(kernel.order, deriv))


def spouse_invariants(state: SpouseState) -> tuple[float, float]:
    kernel = _SpouseKernel(state.lset)
    return kernel.invariants(state.vector(kernel.order))


def intragenerational_state(lset: LambdaSet, b: Sequence[complex]) -> SpouseState:
    """Assign the chain value b_i to every mode of generation i."""
    if len(b) != lset.N:
        raise ConfigError("need one chain value per generation")
    amps = {}
    for value, gen in zip(b, lset.generations):
        for m in gen:
            amps[m] = complex(value)
    return SpouseState(amps, lset)


@dataclass
class SpouseTrajectory:
    order: tuple
    times: np.ndarray
    values: np.ndarray
    t_span: tuple[float, float]
    mass_drift: float
    energy_drift: float
    lset: LambdaSet = dc_field(repr=False, default=None)
    _dense: Optional[Callable] = dc_field(default=None, repr=False)

    def eval(self, t):
        if self._dense is None:
            raise ConfigError("trajectory was integrated without dense output")
        return self._dense(t)

    def generation_means(self) -> np.ndarray:
        """Per-sample mean amplitude of each generation."""
        gens = self.lset.generations
        cols = {m: i for i, m in enumerate(self.order)}
        out = np.empty((len(self.times), len(gens)), dtype=complex)
        for gi, gen in enumerate(gens):
            idx = [cols[m] for m in gen]
            out[:, gi] = self.values[:, idx].mean(axis=1)
        return out

    def generation_spread(self) -> float:
        """Largest deviation of any mode from its generation mean."""
        gens = self.lset.generations
        cols = {m: i for i, m in enumerate(self.order)}
        worst = 0.0
        for gi, gen in enumerate(gens):
            idx = [cols[m] for m in gen]
            block = self.values[:, idx]
            mean = block.mean(axis=1, keepdims=True)
            worst = max(worst, float(np.max(np.abs(block - mean))))
        return worst


def integrate_spouse(state0: SpouseState, t_end: float,
                     config: Optional[IntegratorConfig] = None,
                     n_samples: int = 201) -> SpouseTrajectory:
    config = config or IntegratorConfig()
    kernel = _SpouseKernel(state0.lset)
    base = _integrate(kernel.field, state0.vector(kernel.order), state0.time,
                      t_end, config, n_samples, kernel.invariants)
    return SpouseTrajectory(kernel.order, base.times, base.values, base.t_span,
                            base.mass_drift, base.energy_drift,
                            lset=state0.lset, _dense=base._dense)


# ---------------------------------------------------------------------------
# trajectory output
# ---------------------------------------------------------------------------


def export_toy_csv(traj: ToyTrajectory, path, stride: int = 1) -> None:
    """Columns t, re_b1, im_b1, ..., mass, energy."""
    if stride < 1:
        raise ConfigError("stride must be at least 1")
    n = traj.values.shape[1]
    header = ["t"]
    for i in range(1, n + 1):
        header += [f"re_b{i}", f"im_b{i}"]
    header += ["mass", "energy"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, row in zip(traj.times[::stride], traj.values[::stride]):
            mass, energy = toy_invariants(row)
            flat = [repr(float(t))]
            for z in row:
                flat += [repr(float(z.real)), repr(float(z.imag))]
            writer.writerow(flat + [repr(mass), repr(energy)])


def export_spouse_csv(traj: SpouseTrajectory, path, stride: int = 1) -> None:
    """Columns t, re_<j>_<k>, im_<j>_<k> per mode, mass."""
    if stride < 1:
        raise ConfigError("stride must be at least 1")
    header = ["t"]
    for m in traj.order:
        header += [f"re_{m.j}_{m.k}", f"im_{m.j}_{m.k}"]
    header.append("mass")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t, row in zip(traj.times[::stride], traj.values[::stride]):
            flat = [repr(float(t))]
            for z in row:
                flat += [repr(float(z.real)), repr(float(z.imag))]
            flat.append(repr(math.fsum(np.abs(row) ** 2)))
            writer.writerow(flat)
