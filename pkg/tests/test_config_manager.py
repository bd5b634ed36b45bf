from pathlib import Path

import pytest

from config.settings import FUNCTIONAL_WEIGHTS
from core.config_manager import parse_config, parse_text
from core.errors import ConfigurationError
from core.units import fs_to_au, wavenumber_to_hartree
from data.presets import PRESETS
from functionals import SYMMETRIZED

EXAMPLE = Path(__file__).resolve().parent.parent / "config" / "example_run.ini"


def test_minimal_preset_config_gets_defaults():
    config = parse_text("[system]\npreset = compact-parabola\n")
    assert config.get("system", "mass") == PRESETS["compact-parabola"]["mass"]
    assert config.get("system", "ground_kind") == "morse"
    assert config.get("pulse", "fwhm") == pytest.approx(fs_to_au(104.0))
    assert config.get("pulse", "center") == pytest.approx(0.5 * config.get("pulse", "t_final"))
    assert config.get("pulse", "t_ramp") == pytest.approx(config.get("pulse", "t_final") / 20.0)
    assert config.get("functional", "variant") == "assembly"
    assert config.get("functional", "lambda_ass") == FUNCTIONAL_WEIGHTS["assembly"]["lambda_ass"]
    assert config.get("functional", "lambda_sym") == 0.0
    assert config.get("cooling", "initial_levels") == list(range(1, 11))
    assert config.get("krotov", "check_monotonicity") is True


def test_units_are_converted():
    config = parse_text(
        "[system]\npreset = harmonic\ncarrier = 15000 cm-1\n"
        "[pulse]\nt_final = 2 ps\nfwhm = 50 fs\n"
        "[cooling]\ninitial_levels = 1, 3, 5-7\n"
    )
    assert config.get("system", "carrier") == pytest.approx(wavenumber_to_hartree(15000.0))
    assert config.get("pulse", "t_final") == pytest.approx(fs_to_au(2000.0))
    assert config.get("pulse", "fwhm") == pytest.approx(fs_to_au(50.0))
    assert config.get("cooling", "initial_levels") == [1, 3, 5, 6, 7]
    # 显式给出的键不被预设覆盖
    assert config.get("system", "mass") == PRESETS["harmonic"]["mass"]


def test_negative_weight_reports_key_and_line():
    text = "[system]\npreset = harmonic\n\n[functional]\nvariant = assembly\nlambda_ss = -1\n"
    with pytest.raises(ConfigurationError) as info:
        parse_text(text)
    assert info.value.key == "functional.lambda_ss"
    assert info.value.line == 6
    assert info.value.exit_code == 2


def test_unknown_key_reports_line():
    with pytest.raises(ConfigurationError) as info:
        parse_text("[system]\npreset = harmonic\n[pulse]\nfwhm = 30 fs\nchirp = 2\n")
    assert info.value.key == "pulse.chirp"
    assert info.value.line == 5


def test_unit_of_wrong_dimension_rejected():
    with pytest.raises(ConfigurationError) as info:
        parse_text("[system]\npreset = harmonic\n[pulse]\nt_final = 30 cm-1\n")
    assert info.value.key == "pulse.t_final"
    assert info.value.line == 4


def test_missing_system_fields_without_preset():
    with pytest.raises(ConfigurationError) as info:
        parse_text("[system]\nmass = 1000\n")
    assert info.value.key.startswith("system.")


def test_unknown_section_and_bad_values():
    with pytest.raises(ConfigurationError):
        parse_text("[laser]\npower = 1\n")
    with pytest.raises(ConfigurationError):
        parse_text("[system]\npreset = harmonic\n[krotov]\ncomplex_update = maybe\n")
    with pytest.raises(ConfigurationError):
        parse_text("[system]\npreset = harmonic\n[pulse]\nn_steps = many\n")
    with pytest.raises(ConfigurationError):
        parse_text("[system]\npreset = argon\n")


def test_serialize_round_trip():
    config = parse_config(str(EXAMPLE))
    again = parse_text(config.serialize())
    assert again.values == config.values
    assert again.config_hash() == config.config_hash()
    assert len(config.config_hash()) == 64


def test_overrides_reset_implicit_weights():
    config = parse_text("[system]\npreset = harmonic\n[functional]\nlambda_ss = 3\n")
    switched = config.with_overrides(variant=SYMMETRIZED, max_iterations=7, output_dir="elsewhere")
    functional = switched.values["functional"]
    assert functional["variant"] == SYMMETRIZED
    assert functional["lambda_ss"] == 3.0
    assert functional["lambda_yield"] == FUNCTIONAL_WEIGHTS[SYMMETRIZED]["lambda_yield"]
    assert functional["lambda_ass"] == 0.0
    assert switched.get("krotov", "max_iterations") == 7
    assert switched.output_dir == "elsewhere"
    assert config.get("functional", "variant") == "assembly"
    with pytest.raises(ConfigurationError):
        config.with_overrides(max_iterations=-1)


def test_builders():
    config = parse_text(
        "[system]\npreset = harmonic\n"
        "[pulse]\nt_final = 2000\nn_steps = 400\nfwhm = 300\npeak = 0.01\nspectral_cut = 0.1\n"
        "[functional]\nn_max = 2\n"
        "[krotov]\nlambda = 50\ncomplex_update = false\n"
    )
    guess = config.guess_pulse()
    assert guess.grid.n_steps == 400
    assert guess.envelope[0] == 0.0 and guess.envelope[-1] == 0.0
    assert abs(guess.envelope[200]) == pytest.approx(0.01)
    assert guess.omega_L == PRESETS["harmonic"]["carrier"]
    assert config.cut_pulse(guess) is not None

    cfg = config.functional_config()
    assert cfg.n_max == 2 and cfg.variant == "assembly"
    opts = config.krotov_options()
    assert opts.step_lambda == 50.0 and not opts.complex_update
    assert opts.shape.t_ramp == pytest.approx(100.0)
    assert config.cooling_initial(20).populations[1:11].sum() == pytest.approx(1.0)
    definition = config.system_definition()
    assert definition["name"] == "harmonic"
    assert definition["ground"].kind == "harmonic"


def test_tabulated_surface_from_file(tmp_path):
    curve = tmp_path / "ground.dat"
    lines = [f"{r:.6f} {0.5 * 1000 * 0.01 ** 2 * (r - 5.0) ** 2:.12e}" for r in [1.5 + 0.05 * i for i in range(151)]]
    curve.write_text("\n".join(lines) + "\n")
    config = parse_text(
        "[system]\npreset = harmonic\n"
        f"ground_kind = tabulated\nground_file = {curve}\n"
    )
    definition = config.system_definition()
    assert definition["ground"].kind == "tabulated"
    assert definition["excited"].kind == "harmonic"


def test_round_trip_keeps_default_weights_implicit():
    config = parse_text("[system]\npreset = harmonic\n[functional]\nvariant = assembly\nlambda_ss = 3\n")
    again = parse_text(config.serialize())
    assert again == config
    assert again.config_hash() == config.config_hash()
    assert ("functional", "lambda_ss") in again.explicit
    assert ("functional", "lambda_ass") not in again.explicit
    assert "# lambda_ass = " in config.serialize()

    switched = again.with_overrides(variant=SYMMETRIZED)
    functional = switched.values["functional"]
    assert functional["lambda_ss"] == 3.0
    assert functional["lambda_sym"] == FUNCTIONAL_WEIGHTS[SYMMETRIZED]["lambda_sym"]
    assert functional["lambda_yield"] == FUNCTIONAL_WEIGHTS[SYMMETRIZED]["lambda_yield"]
    assert functional["lambda_ass"] == 0.0
    assert switched.values == config.with_overrides(variant=SYMMETRIZED).values


def test_equality_ignores_source_path():
    text = EXAMPLE.read_text()
    assert parse_text(text, "a.ini") == parse_text(text, "b.ini")
