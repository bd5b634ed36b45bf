import numpy as np
import pytest

from core.errors import ConfigurationError, ResolutionError
from data.potentials import HarmonicPotential, MorsePotential, load_tabulated
from molecule.grid import build_grid
from molecule.vibrational import solve_vibrational


def test_grid_rejects_non_power_of_two():
    with pytest.raises(ConfigurationError):
        build_grid(1.0, 5.0, 100)
    with pytest.raises(ConfigurationError):
        build_grid(5.0, 1.0, 64)


def test_grid_spacing_and_refinement():
    grid = build_grid(2.0, 8.0, 64)
    assert grid.spacing == pytest.approx(6.0 / 63)
    assert grid.refined().n_points == 128
    assert grid.same_as(build_grid(2.0, 8.0, 64))
    assert not grid.same_as(grid.refined())


def test_morse_levels_match_analytic_formula():
    morse = MorsePotential(D_e=0.02, a=0.7, r_e=6.0)
    grid = build_grid(4.0, 16.0, 256)
    basis = solve_vibrational(morse, grid, mass=1e4, n_levels=15)
    expected = morse.analytic_levels(1e4, 15)
    np.testing.assert_allclose(basis.energies, expected, rtol=1e-6)


def test_harmonic_levels(harmonic_system):
    omega = 0.01
    v = np.arange(harmonic_system.n_ground)
    np.testing.assert_allclose(harmonic_system.ground.energies, omega * (v + 0.5), rtol=1e-6)


def test_wavefunctions_orthonormal_and_sign_fixed(harmonic_system):
    basis = harmonic_system.ground
    np.testing.assert_allclose(basis.gram_matrix(), np.eye(basis.n_levels), atol=1e-10)
    for column in basis.wavefunctions.T:
        first = np.argmax(np.abs(column) > 1e-2 * np.abs(column).max())
        assert column[first] > 0


def test_too_many_levels_raise_resolution_error():
    morse = MorsePotential(D_e=0.02, a=0.7, r_e=6.0)
    grid = build_grid(4.0, 16.0, 128)
    with pytest.raises(ResolutionError):
        solve_vibrational(morse, grid, mass=1e4, n_levels=200)


def test_convergence_check_flags_coarse_grid():
    potential = HarmonicPotential(omega=0.01, r_e=5.0, mass=1000.0)
    coarse = build_grid(2.0, 8.0, 16)
    with pytest.raises(ResolutionError):
        solve_vibrational(potential, coarse, mass=1000.0, n_levels=6, check_convergence=True)


def test_tabulated_potential_with_unit_header(tmp_path):
    path = tmp_path / "curve.dat"
    r = np.linspace(1.0, 6.0, 80)
    energies = 0.5 * (r - 3.5) ** 2
    lines = ["# r_unit: angstrom", "# energy_unit: ev"] + [f"{x:.12f} {e:.12f}" for x, e in zip(r, energies)]
    path.write_text("\n".join(lines) + "\n")

    potential = load_tabulated(str(path))
    assert potential.r[0] == pytest.approx(1.0 / 0.529177210903, rel=1e-9)
    grid = build_grid(3.0, 10.0, 64)
    values = potential.values(grid)
    assert values.min() >= -1e-6

    with pytest.raises(ConfigurationError):
        potential.values(build_grid(0.5, 20.0, 64))
