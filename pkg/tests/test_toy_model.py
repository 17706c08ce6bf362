"""Chain dynamics, scaling, orbit search, and the per-mode system."""

import csv
import math

import numpy as np
import pytest

from nlscascade.errors import ConfigError, SearchError
from nlscascade.lambda_set import build_base_set, scale_set
from nlscascade.toy_model import (
    IntegratorConfig,
    SpouseState,
    ToyState,
    export_spouse_csv,
    export_toy_csv,
    find_transfer_orbit,
    integrate_spouse,
    integrate_toy,
    intragenerational_state,
    scale_solution,
    spouse_invariants,
    spouse_vector_field,
    toy_invariants,
    toy_vector_field,
)

from oracles import rk4_fixed_step, wirtinger_conj_gradient


def _unit_random_chain(n, seed):
    rng = np.random.default_rng(seed)
    b = rng.normal(size=n) + 1j * rng.normal(size=n)
    return b / math.sqrt(np.sum(np.abs(b) ** 2))


# ---------------------------------------------------------------------------
# vector field and invariants
# ---------------------------------------------------------------------------


def test_single_mode_field():
    b = np.array([0, 1, 0, 0], dtype=complex)
    db = toy_vector_field(b)
    assert db[1] == -1j
    assert np.all(db[[0, 2, 3]] == 0)


def test_zero_field():
    assert np.all(toy_vector_field(np.zeros(5, complex)) == 0)


def test_field_is_energy_gradient():
    # db/dt = -i dh/d(conj b), checked by central differences
    b = _unit_random_chain(5, 2) * 1.3

    def h(z):
        return toy_invariants(z)[1]

    grad = wirtinger_conj_gradient(h, b, step=1e-5)
    assert np.max(np.abs(toy_vector_field(b) + 1j * grad)) < 1e-6


def test_two_mode_symmetric_field_against_gradient():
    b = np.array([1 / math.sqrt(2), 1 / math.sqrt(2)], dtype=complex)

    def h(z):
        return toy_invariants(z)[1]

    grad = wirtinger_conj_gradient(h, b)
    assert np.max(np.abs(toy_vector_field(b) + 1j * grad)) < 1e-6


def test_invariants_closed_forms():
    e2 = np.array([0, 1, 0], dtype=complex)
    assert toy_invariants(e2) == (1.0, 0.5)
    assert toy_invariants(np.zeros(4, complex)) == (0.0, 0.0)


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------


def test_single_mode_is_phase_rotation():
    traj = integrate_toy(ToyState(np.array([1.0 + 0j])), 5.0)
    assert np.max(np.abs(traj.values[:, 0] - np.exp(-1j * traj.times))) < 1e-9


def test_conservation_over_long_run():
    traj = integrate_toy(ToyState(_unit_random_chain(4, 5)), 100.0)
    assert traj.mass_drift <= 1e-8
    assert traj.energy_drift <= 1e-8


def test_matches_fixed_step_oracle():
    b0 = np.array([1 / math.sqrt(2), 1 / math.sqrt(2)], dtype=complex)
    traj = integrate_toy(ToyState(b0), 5.0)
    ref = rk4_fixed_step(lambda t, y: toy_vector_field(y), b0, (0.0, 5.0), 20000)
    assert np.max(np.abs(traj.values[-1] - ref)) < 1e-8


def test_time_reversal_by_conjugation():
    b0 = _unit_random_chain(4, 0)
    fwd = integrate_toy(ToyState(b0), 10.0)
    back = integrate_toy(ToyState(np.conj(fwd.values[-1])), 10.0)
    assert np.max(np.abs(np.conj(back.values[-1]) - b0)) < 1e-7


def test_dense_output_matches_samples():
    traj = integrate_toy(ToyState(_unit_random_chain(3, 1)), 4.0, n_samples=9)
    assert np.allclose(traj.eval(traj.times), traj.values, atol=1e-12)
    mid = traj.eval(2.345)
    assert mid.shape == (3,)


def test_integration_validation():
    with pytest.raises(ConfigError):
        IntegratorConfig(rtol=-1.0)
    with pytest.raises(ConfigError):
        IntegratorConfig(max_step=0.0)
    with pytest.raises(ConfigError):
        integrate_toy(ToyState(np.ones(2, complex)), -1.0)


# ---------------------------------------------------------------------------
# scaling
# ---------------------------------------------------------------------------


def test_scale_identity():
    traj = integrate_toy(ToyState(_unit_random_chain(3, 3)), 6.0)
    same = scale_solution(traj, 1.0)
    assert np.allclose(same.values, traj.values, atol=1e-14)


def test_scale_single_mode_explicit():
    traj = integrate_toy(ToyState(np.array([1.0 + 0j])), 8.0)
    scaled = scale_solution(traj, 2.0)
    expect = 0.5 * np.exp(-1j * scaled.times / 4)
    assert np.max(np.abs(scaled.values[:, 0] - expect)) < 1e-9


@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0])
def test_scaling_dual_path(lam):
    b0 = _unit_random_chain(4, 0)
    base = integrate_toy(ToyState(b0), 10.0)
    scaled = scale_solution(base, lam)
    direct = integrate_toy(ToyState(b0 / lam), 10.0 * lam * lam,
                           n_samples=len(scaled.times))
    assert np.max(np.abs(scaled.values - direct.values)) <= 1e-8


def test_scale_validation():
    traj = integrate_toy(ToyState(np.ones(2, complex) / 2), 1.0)
    with pytest.raises(ConfigError):
        scale_solution(traj, 0.0)
    with pytest.raises(ConfigError):
        scale_solution(traj, 2.0, times=np.array([99.0]))


# ---------------------------------------------------------------------------
# transfer orbit search
# ---------------------------------------------------------------------------


def test_transfer_orbit_n5(transfer_n5):
    state, t0, diag = transfer_n5
    assert diag["peak_target"] >= 0.7
    assert t0 > 0
    assert math.isclose(state.mass(), 1.0, rel_tol=1e-12)
    # the seed really concentrates at the start generation
    assert abs(state.b[1]) ** 2 >= 1 - 1e-2
    assert len(diag["per_generation_peaks"]) == 5


def test_transfer_trivial_when_start_is_target():
    state, t0, diag = find_transfer_orbit(3, 1e-2)
    assert t0 == 0.0
    assert diag["peak_target"] == 1.0
    assert abs(state.b[1]) == 1.0


def test_transfer_validation():
    with pytest.raises(ConfigError):
        find_transfer_orbit(2, 1e-2)
    with pytest.raises(ConfigError):
        find_transfer_orbit(5, 1.5)
    with pytest.raises(ConfigError):
        find_transfer_orbit(3, 1e-2, start=1, target=3)
    with pytest.raises(ConfigError):
        find_transfer_orbit(5, 1e-2, target=9)


def test_transfer_search_failure_is_reported():
    with pytest.raises(SearchError):
        find_transfer_orbit(5, 1e-2, t_max=0.5, grid_points=4, refine_rounds=0)


# ---------------------------------------------------------------------------
# the per-mode system
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def small_set():
    return scale_set(build_base_set(2, seed=0), 3, 2)


def test_spouse_single_mode_is_self_term_only(small_set):
    mode = small_set.generations[0][0]
    state = SpouseState({mode: 0.7 + 0.1j}, small_set)
    deriv = spouse_vector_field(state)
    z = 0.7 + 0.1j
    assert deriv[mode] == pytest.approx(-1j * abs(z) ** 2 * z)
    others = [v for m, v in deriv.items() if m != mode]
    assert np.max(np.abs(others)) == 0.0


def test_spouse_reduces_to_chain_field(small_set):
    b = np.array([0.8, 0.5 + 0.2j])
    state = intragenerational_state(small_set, b)
    deriv = spouse_vector_field(state)
    chain = toy_vector_field(b)
    for gi, gen in enumerate(small_set.generations):
        for m in gen:
            assert abs(deriv[m] - chain[gi]) < 1e-12


def test_spouse_field_is_energy_gradient(small_set):
    from nlscascade.toy_model import _SpouseKernel

    kernel = _SpouseKernel(small_set)
    rng = np.random.default_rng(7)
    r = rng.normal(size=len(kernel.order)) + 1j * rng.normal(size=len(kernel.order))

    def h(z):
        return kernel.invariants(z)[1]

    grad = wirtinger_conj_gradient(h, r, step=1e-5)
    assert np.max(np.abs(kernel.field(r) + 1j * grad)) < 1e-6


def test_intragenerational_data_stays_intragenerational(small_set):
    b = np.array([0.8, 0.5 + 0.2j])
    traj = integrate_spouse(intragenerational_state(small_set, b), 10.0)
    assert traj.generation_spread() <= 1e-10
    chain = integrate_toy(ToyState(b), 10.0, n_samples=len(traj.times))
    assert np.max(np.abs(traj.generation_means() - chain.values)) <= 1e-8
    assert traj.mass_drift <= 1e-8


def test_spouse_zero_state_stays_zero(small_set):
    zero = intragenerational_state(small_set, np.zeros(2, complex))
    traj = integrate_spouse(zero, 5.0)
    assert np.all(traj.values == 0)


def test_spouse_state_validation(small_set):
    from nlscascade.resonance import Mode

    with pytest.raises(ConfigError):
        SpouseState({Mode(99, 99): 1.0 + 0j}, small_set)
    with pytest.raises(ConfigError):
        intragenerational_state(small_set, np.ones(5, complex))


def test_spouse_invariants_conserved(small_set):
    rng = np.random.default_rng(9)
    amps = {m: 0.5 * complex(rng.normal(), rng.normal())
            for m in small_set.modes()}
    state = SpouseState(amps, small_set)
    m0, h0 = spouse_invariants(state)
    traj = integrate_spouse(state, 20.0)
    assert traj.mass_drift <= 1e-8
    assert traj.energy_drift <= 1e-8
    assert m0 == pytest.approx(sum(abs(v) ** 2 for v in amps.values()))
    assert h0 != 0.0


# ---------------------------------------------------------------------------
# trajectory output
# ---------------------------------------------------------------------------


def test_toy_csv_round_trip(tmp_path):
    traj = integrate_toy(ToyState(_unit_random_chain(3, 4)), 2.0, n_samples=11)
    path = tmp_path / "toy.csv"
    export_toy_csv(traj, path, stride=2)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    assert float(rows[0]["t"]) == 0.0
    got = complex(float(rows[3]["re_b2"]), float(rows[3]["im_b2"]))
    assert got == traj.values[6, 1]
    assert float(rows[0]["mass"]) == pytest.approx(1.0)


def test_spouse_csv_round_trip(tmp_path, small_set):
    b = np.array([0.6, 0.3 + 0.1j])
    traj = integrate_spouse(intragenerational_state(small_set, b), 1.0,
                            n_samples=5)
    path = tmp_path / "spouse.csv"
    export_spouse_csv(traj, path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5
    m = traj.order[0]
    col = f"re_{m.j}_{m.k}"
    assert float(rows[0][col]) == traj.values[0, 0].real
