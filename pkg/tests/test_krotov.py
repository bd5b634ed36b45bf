import numpy as np
import pytest
import qutip
from scipy.linalg import expm

from core.errors import ConfigurationError, MonotonicityError
from dynamics.propagator import ChebyshevPropagator, TwoSurfaceState, propagate_forward
from functionals import ASSEMBLY, FunctionalConfig
from optimization import krotov_optimizer
from optimization.krotov_optimizer import (
    ChebyshevKrotovPropagator, KrotovOptimizer, KrotovOptions, control_operators, optimize, state_norm,
    update_step,
)
from pulses.pulse import Pulse, ShapeFunction, TimeGrid, gaussian_guess

from conftest import random_ensemble


def _coupling_matrix(hamiltonian):
    m = np.zeros((hamiltonian.dim, hamiltonian.dim))
    m[hamiltonian.n_ground:, :hamiltonian.n_ground] = hamiltonian.eta
    return m


def test_update_step_matches_dense_derivatives(toy_hamiltonian):
    rng = np.random.default_rng(21)
    chi = random_ensemble(rng, toy_hamiltonian.dim, 3)
    psi = random_ensemble(rng, toy_hamiltonian.dim, 3)
    m = _coupling_matrix(toy_hamiltonian)
    d_re = 0.5 * (m + m.T)
    d_im = 0.5j * (m - m.T)
    scale = 0.8 / 50.0
    expected = (0.01 + 0.002j
                + scale * np.imag(np.sum(np.conj(chi) * (d_re @ psi)))
                + 1j * scale * np.imag(np.sum(np.conj(chi) * (d_im @ psi))))
    new = update_step(chi, psi, 0.8, 50.0, 0.01 + 0.002j, toy_hamiltonian)
    assert new == pytest.approx(expected, rel=1e-12)

    real_only = update_step(chi, psi, 0.8, 50.0, 0.01 + 0.002j, toy_hamiltonian, complex_update=False)
    assert real_only.imag == 0.002
    assert real_only.real == pytest.approx(expected.real, rel=1e-12)


def test_update_step_for_aligned_costate(toy_hamiltonian):
    rng = np.random.default_rng(22)
    psi = random_ensemble(rng, toy_hamiltonian.dim, 1)[:, 0]
    m = _coupling_matrix(toy_hamiltonian)
    symmetric = (m + m.T) @ psi
    chi = -1j * symmetric
    new = update_step(chi, psi, 1.0, 10.0, 0.0, toy_hamiltonian, complex_update=False)
    assert new.real == pytest.approx(0.5 / 10.0 * np.vdot(symmetric, symmetric).real, rel=1e-12)


def test_update_step_without_signal(toy_hamiltonian):
    rng = np.random.default_rng(23)
    psi = random_ensemble(rng, toy_hamiltonian.dim, 2)
    chi = random_ensemble(rng, toy_hamiltonian.dim, 2)
    assert update_step(np.zeros_like(psi), psi, 1.0, 1.0, 0.3 - 0.1j, toy_hamiltonian) == 0.3 - 0.1j
    assert update_step(chi, psi, 0.0, 1.0, 0.3 - 0.1j, toy_hamiltonian) == 0.3 - 0.1j


def test_options_validation():
    with pytest.raises(ConfigurationError):
        KrotovOptions(step_lambda=0.0)
    with pytest.raises(ConfigurationError):
        KrotovOptions(use_nonlinear_sigma=True)
    with pytest.raises(ConfigurationError):
        KrotovOptions(tol_mono=-1.0)


def test_control_operators_rebuild_the_hamiltonian(toy_hamiltonian):
    h0, h_re, h_im = control_operators(toy_hamiltonian)
    eps = 0.02 - 0.01j
    combined = h0.full() + eps.real * h_re.full() + eps.imag * h_im.full()
    np.testing.assert_allclose(combined, toy_hamiltonian.matrix(eps), atol=1e-15)
    assert h_re.isherm and h_im.isherm


def test_krotov_propagator_wraps_chebyshev_step(toy_hamiltonian):
    rng = np.random.default_rng(24)
    h0, h_re, h_im = control_operators(toy_hamiltonian)
    propagator = ChebyshevKrotovPropagator(ChebyshevPropagator(toy_hamiltonian))
    state = qutip.Qobj(random_ensemble(rng, toy_hamiltonian.dim, 1))
    H = [h0, [h_re, 0.02], [h_im, -0.01]]

    forward = propagator(H, state, 2.0, None)
    expected = expm(-1j * toy_hamiltonian.matrix(0.02 - 0.01j) * 2.0) @ state.full()
    np.testing.assert_allclose(forward.full(), expected, atol=1e-12)
    assert forward.dims == state.dims

    back = propagator(H, forward, 2.0, None, backwards=True)
    np.testing.assert_allclose(back.full(), state.full(), atol=1e-12)


def test_zero_costate_keeps_unit_norm():
    assert state_norm(qutip.Qobj(np.zeros((3, 1)))) == 1.0
    assert state_norm(qutip.Qobj(np.array([[3.0], [4.0]]))) == pytest.approx(5.0)


def test_stable_target_is_a_fixed_point(toy_hamiltonian):
    grid = TimeGrid(500.0, 200)
    guess = Pulse(grid, np.zeros(grid.n_points), 0.1)
    cfg = FunctionalConfig(ASSEMBLY, 0, weights={"lambda_ss": 1.0})
    result = optimize(toy_hamiltonian, guess, cfg, KrotovOptions(step_lambda=1.0, max_iterations=3))
    np.testing.assert_array_equal(result.pulse.envelope, guess.envelope)
    assert result.converged
    assert result.iterations == 1
    assert result.final["J_T"] == pytest.approx(0.0, abs=1e-12)


def test_huge_lambda_leaves_pulse_unchanged(toy_hamiltonian):
    grid = TimeGrid(2000.0, 200)
    guess = gaussian_guess(grid, 1000.0, 500.0, 0.01, omega_L=0.1)
    cfg = FunctionalConfig.with_defaults(ASSEMBLY, 2)
    result = optimize(toy_hamiltonian, guess, cfg,
                      KrotovOptions(step_lambda=1e14, max_iterations=2, tolerance=0.0))
    np.testing.assert_allclose(result.pulse.envelope, guess.envelope, atol=1e-12)
    assert result.records[2]["J_T"] == pytest.approx(result.records[0]["J_T"], abs=1e-10)


def test_sequential_update_uses_new_states_and_old_costates(toy_hamiltonian):
    grid = TimeGrid(1000.0, 60)
    guess = gaussian_guess(grid, 500.0, 300.0, 0.01, omega_L=0.1)
    cfg = FunctionalConfig.with_defaults(ASSEMBLY, 2)
    opts = KrotovOptions(step_lambda=5.0, max_iterations=2, tolerance=0.0, shape=ShapeFunction(100.0),
                         keep_trajectories=True, check_monotonicity=False)
    result = optimize(toy_hamiltonian, guess, cfg, opts)
    assert len(result.trajectories) == 2
    for record in result.trajectories:
        assert record["backward"].shape == (grid.n_points, toy_hamiltonian.dim, cfg.n_members)
        for k in (0, 5, 13, 30, 59):
            expected = update_step(record["backward"][k], record["forward"][k], record["shape"][k], 5.0,
                                   record["steps_before"][k], toy_hamiltonian)
            assert record["steps_after"][k] == pytest.approx(expected, rel=1e-9, abs=1e-15)

    first = result.trajectories[0]
    np.testing.assert_allclose(first["steps_before"], guess.step_values, atol=1e-14)
    change = np.abs(first["steps_after"] - first["steps_before"]) ** 2
    active = first["shape"] > 0
    expected_cost = 5.0 * np.sum(change[active] / first["shape"][active]) * grid.dt
    assert result.records[1]["J_t"] == pytest.approx(expected_cost, rel=1e-10)

    # 网格上的优化脉冲换回区间值后就是最后一次迭代的场强
    np.testing.assert_allclose(result.pulse.step_values, result.trajectories[-1]["steps_after"], atol=1e-12)


def test_population_transfer_in_two_level_model(two_level):
    grid = TimeGrid(100.0, 500)
    guess = gaussian_guess(grid, 50.0, 30.0, 0.005)
    cfg = FunctionalConfig(ASSEMBLY, 1, n_star=1, weights={"lambda_yield": 1.0})
    opts = KrotovOptions(step_lambda=10.0, max_iterations=100, tolerance=1e-7, tol_mono=1e-6)
    result = optimize(two_level, guess, cfg, opts)

    assert result.final["J_yield"] <= 0.01
    assert result.final["J_T"] < result.records[0]["J_T"]
    steps = np.diff([record["J_T"] for record in result.records])
    assert np.all(steps <= 1e-6)

    final = propagate_forward(two_level, TwoSurfaceState.ground_level(two_level, 1), result.pulse).final
    assert final.excited_populations().sum() >= 0.99

    frame = result.convergence_frame()
    assert len(frame) == result.iterations + 1
    for column in ("iteration", "J_T", "J_ss", "J_leak", "J_yield", "J_ass", "J_t", "fluence",
                   "stability", "excitation_yield"):
        assert column in frame.columns
    assert "sigma" not in frame.columns
    assert frame["J_t"].iloc[0] == 0.0


def _gradient_ascent(monkeypatch):
    descent = krotov_optimizer.EnsembleChiConstructor.__call__

    def ascent(self, fw_states_T, objectives, tau_vals=None, **kwargs):
        return [-chi for chi in descent(self, fw_states_T, objectives, tau_vals, **kwargs)]

    monkeypatch.setattr(krotov_optimizer.EnsembleChiConstructor, "__call__", ascent)


def test_monotonicity_violation_aborts_with_partial_result(two_level, monkeypatch):
    grid = TimeGrid(100.0, 500)
    guess = gaussian_guess(grid, 50.0, 30.0, 0.005)
    cfg = FunctionalConfig(ASSEMBLY, 1, n_star=1, weights={"lambda_yield": 1.0})
    _gradient_ascent(monkeypatch)

    optimizer = KrotovOptimizer(two_level, cfg, KrotovOptions(step_lambda=10.0, max_iterations=5, tol_mono=0.0))
    with pytest.raises(MonotonicityError) as info:
        optimizer.optimize(guess)
    assert info.value.iteration == 1
    assert info.value.increase > 0.0
    partial = info.value.result
    assert partial.iterations == 1
    assert partial.final["J_T"] > partial.records[0]["J_T"]
    assert np.abs(partial.pulse.envelope - guess.envelope).max() > 0.0


def test_increase_within_tol_mono_is_tolerated(two_level, monkeypatch):
    grid = TimeGrid(100.0, 500)
    guess = gaussian_guess(grid, 50.0, 30.0, 0.005)
    cfg = FunctionalConfig(ASSEMBLY, 1, n_star=1, weights={"lambda_yield": 1.0})
    _gradient_ascent(monkeypatch)

    result = optimize(two_level, guess, cfg,
                      KrotovOptions(step_lambda=10.0, max_iterations=2, tolerance=0.0, tol_mono=1.0))
    assert result.iterations == 2
    assert not result.converged
    assert result.final["J_T"] > result.records[0]["J_T"]


def test_molecular_system_uses_pulse_carrier(harmonic_system):
    grid = TimeGrid(2000.0, 200)
    guess = gaussian_guess(grid, 1000.0, 400.0, 0.01, omega_L=0.105)
    cfg = FunctionalConfig.with_defaults(ASSEMBLY, 2)
    result = optimize(harmonic_system, guess, cfg,
                      KrotovOptions(step_lambda=100.0, max_iterations=1, tolerance=0.0, check_monotonicity=False))
    assert result.iterations == 1
    assert result.pulse.omega_L == 0.105
    assert result.peak_memory_mb > 0.0
    assert result.wall_time >= 0.0
    assert result.message
