"""内置预设体系上的整体验收: sigma 近似、单调收敛、暗态、泄漏对比与冷却/加热"""

import numpy as np
import pytest

from cooling.cooling_cycle import NOT_ACHIEVED, build_cycle_map, simulate_cooling
from core.config_manager import parse_text
from dynamics.propagator import TwoSurfaceState, propagate_forward
from functionals import ASSEMBLY, SYMMETRIZED, target_operators
from functionals.terms import sigma_approx, sigma_exact
from molecule.system import build_system
from optimization.krotov_optimizer import optimize

pytestmark = pytest.mark.slow

ITERATIONS = 30


def _config(preset: str, variant: str = ASSEMBLY, iterations: int = ITERATIONS, functional: str = ""):
    return parse_text(
        f"[system]\npreset = {preset}\n"
        "[pulse]\nn_steps = 2048\n"
        f"[functional]\nvariant = {variant}\nn_max = 5\n{functional}"
        f"[krotov]\nmax_iterations = {iterations}\ntolerance = 0\n"
    )


@pytest.fixture(scope="module")
def systems():
    cache = {}

    def get(preset):
        if preset not in cache:
            cache[preset] = build_system(_config(preset).system_definition())
        return cache[preset]

    return get


@pytest.fixture(scope="module")
def optimized(systems):
    cache = {}

    def get(preset, variant):
        if (preset, variant) not in cache:
            config = _config(preset, variant)
            cache[preset, variant] = (config, optimize(systems(preset), config.guess_pulse(),
                                                       config.functional_config(), config.krotov_options()))
        return cache[preset, variant]

    return get


def test_diagonal_sigma_error_falls_off_with_lifetime(systems):
    config = _config("compact-parabola")
    system = systems("compact-parabola")
    guess = config.guess_pulse()
    hamiltonian = system.hamiltonian(carrier=guess.omega_L)
    ops = target_operators(system.fc.eta, 5)
    final = propagate_forward(hamiltonian, TwoSurfaceState.ground_level(hamiltonian, 1), guess).final

    approx = float(sigma_approx(final, ops))
    assert approx > 0.0
    weighted = system.fc.eta[:, 0] * final.amplitudes[system.n_ground:]
    gaps = np.abs(np.subtract.outer(system.excited.energies, system.excited.energies))
    off_diagonal = ~np.eye(len(gaps), dtype=bool)
    # |sigma_exact - sigma_approx| <= sum_{n != m} |a_n a_m| 2 / (|dE_nm| T_e)
    bound_times_lifetime = np.sum(np.outer(np.abs(weighted), np.abs(weighted))[off_diagonal]
                                  * 2.0 / gaps[off_diagonal])

    T = guess.grid.t_final
    for ratio in (1e4, 1e5, 1e6):
        lifetime = ratio * T
        exact = sigma_exact(final.amplitudes, system.fc.eta, system.excited.energies, lifetime,
                            n_ground=system.n_ground)
        error = abs(exact - approx)
        assert error <= bound_times_lifetime / lifetime * (1.0 + 1e-9) + 1e-15
        if ratio == 1e4:
            assert error / approx <= 1e-3


@pytest.mark.parametrize("preset", ["compact-parabola", "diffuse"])
@pytest.mark.parametrize("variant", [ASSEMBLY, SYMMETRIZED])
def test_krotov_is_monotonic_on_presets(optimized, preset, variant):
    _, result = optimized(preset, variant)
    J_T = np.array([record["J_T"] for record in result.records])
    assert result.iterations == ITERATIONS
    assert np.all(np.diff(J_T) <= 1e-10)
    assert J_T[-1] < J_T[0]


def test_assembly_keeps_target_dark_on_compact_parabola(systems):
    config = _config("compact-parabola", iterations=60, functional="lambda_ss = 10\n")
    result = optimize(systems("compact-parabola"), config.guess_pulse(), config.functional_config(),
                      config.krotov_options())
    assert result.final["J_ss"] <= 1e-4


def test_assembly_leaks_less_than_symmetrized_on_diffuse(optimized):
    _, assembly = optimized("diffuse", ASSEMBLY)
    _, symmetrized = optimized("diffuse", SYMMETRIZED)
    assert assembly.final["J_leak"] < symmetrized.final["J_leak"]


def test_optimized_pulse_cools_compact_parabola(systems, optimized):
    config, result = optimized("compact-parabola", ASSEMBLY)
    system = systems("compact-parabola")
    initial = config.cooling_initial(system.n_ground)

    cooled = simulate_cooling(initial, build_cycle_map(result.pulse, system), 200).summary
    assert cooled["cycles_to_90pct"] != NOT_ACHIEVED
    assert cooled["cycles_to_90pct"] <= 200
    assert cooled["max_target_population"] >= 0.95

    guess = simulate_cooling(initial, build_cycle_map(result.guess, system), 200).summary
    assert cooled["max_target_population"] > guess["max_target_population"]


def test_guess_heats_but_optimized_pulse_cools_diffuse(systems, optimized):
    config, result = optimized("diffuse", ASSEMBLY)
    system = systems("diffuse")
    initial = config.cooling_initial(system.n_ground)

    guess_run = simulate_cooling(initial, build_cycle_map(result.guess, system), 200)
    guess_p0 = [state.populations[0] for state in guess_run.history]
    assert guess_run.history[-1].lost > guess_run.history[0].lost or guess_p0[-1] < guess_p0[0]

    optimized_run = simulate_cooling(initial, build_cycle_map(result.pulse, system), 200)
    optimized_p0 = [state.populations[0] for state in optimized_run.history]
    assert optimized_p0[-1] > optimized_p0[0] + 0.05
