"""
配置管理模块 - 负责解析、校验和序列化运行配置文件

主要功能:
1. 从分节的 key = value 文本文件加载运行配置 (configparser)
2. 按 CONFIG_SCHEMA 校验键名、量纲和取值, 填充默认值
3. 以原子单位序列化, 保证 parse -> serialize -> parse 不变
4. 由配置构造体系定义、脉冲、泛函配置、Krotov 参数和冷却初态

配置文件示例:

    [system]
    preset = compact-parabola

    [pulse]
    fwhm = 104 fs
    peak = 3e-4

    [functional]
    variant = assembly
    n_max = 5

错误信息包含节名、键名和行号。
"""

from dataclasses import dataclass, field
import configparser
import hashlib
import logging
import re
from typing import Dict, Any, List, Optional, Set, Tuple

from config.settings import FUNCTIONAL_WEIGHTS, SYSTEM_CONFIG
from core.errors import ConfigurationError
from core.units import UNIT_TABLE, format_quantity, fs_to_au, hartree_to_wavenumber, parse_quantity
from cooling.cooling_cycle import CoolingState, equipartition
from data.potentials import load_tabulated
from data.presets import PRESETS, make_potential
from functionals.terms import FunctionalConfig
from optimization.krotov_optimizer import KrotovOptions
from pulses.pulse import Pulse, ShapeFunction, TimeGrid, apply_shape, gaussian_guess, spectral_cut

logger = logging.getLogger(__name__)

INT = "int"
BOOL = "bool"
TEXT = "text"
LEVELS = "levels"

_POTENTIAL_KEYS = {
    "kind": (TEXT, None),
    "depth": ("energy", None),
    "width": ("inverse_length", None),
    "re": ("length", None),
    "omega": ("energy", None),
    "offset": ("energy", 0.0),
    "file": (TEXT, None),
}

# 节 -> 键 -> (量纲, 默认值); 默认值为 None 表示可选或由其他键推导
CONFIG_SCHEMA: Dict[str, Dict[str, Tuple[str, Any]]] = {
    "system": {
        "preset": (TEXT, None),
        "mass": ("mass", None),
        "r_min": ("length", None),
        "r_max": ("length", None),
        "n_points": (INT, None),
        "n_ground": (INT, None),
        "n_excited": (INT, None),
        "electronic_gap": ("energy", None),
        "dipole": ("dipole", None),
        "carrier": ("energy", None),
        "lifetime": ("time", None),
        **{f"ground_{key}": spec for key, spec in _POTENTIAL_KEYS.items()},
        **{f"excited_{key}": spec for key, spec in _POTENTIAL_KEYS.items()},
    },
    "pulse": {
        "t_final": ("time", fs_to_au(3000.0)),
        "n_steps": (INT, 4096),
        "center": ("time", None),
        "fwhm": ("time", fs_to_au(104.0)),
        "peak": ("field", 3e-4),
        "detuning": ("energy", 0.0),
        "t_ramp": ("time", None),
        "spectral_cut": ("energy", None),
        "cut_keep": (TEXT, "below"),
        "beam_area": ("area", UNIT_TABLE["area"]["um2"] * 100.0),
    },
    "functional": {
        "variant": (TEXT, "assembly"),
        "n_max": (INT, 5),
        "n_star": (INT, 1),
        "target": (INT, 0),
        "lambda_ss": ("dimensionless", None),
        "lambda_leak": ("dimensionless", None),
        "lambda_yield": ("dimensionless", None),
        "lambda_sym": ("dimensionless", None),
        "lambda_ass": ("dimensionless", None),
        "ss_form": (TEXT, "modulus"),
        "ass_form": (TEXT, "real"),
    },
    "krotov": {
        "lambda": ("dimensionless", 1e4),
        "max_iterations": (INT, 1000),
        "tolerance": ("dimensionless", 1e-10),
        "tol_mono": ("dimensionless", 1e-10),
        "complex_update": (BOOL, True),
        "check_monotonicity": (BOOL, True),
    },
    "cooling": {
        "initial_levels": (LEVELS, list(range(1, 11))),
        "n_cycles": (INT, 200),
        "compare_guess": (BOOL, True),
    },
    "output": {
        "directory": (TEXT, SYSTEM_CONFIG["output_dir"]),
        "dump_trajectories": (BOOL, False),
    },
}

_REQUIRED_WITHOUT_PRESET = ("mass", "r_min", "r_max", "n_points", "electronic_gap", "dipole", "carrier",
                            "ground_kind", "excited_kind")
_SECTION_LINE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_LINE = re.compile(r"^\s*([^=:#;\s\[][^=:]*?)\s*[=:]")
_WEIGHT_KEYS = ("lambda_ss", "lambda_leak", "lambda_yield", "lambda_sym", "lambda_ass")


def _line_numbers(text: str) -> Dict[Tuple[str, str], int]:
    """扫描原始文本, 记录每个 (节, 键) 所在行号"""
    lines = {}
    section = None
    for number, raw in enumerate(text.splitlines(), start=1):
        section_match = _SECTION_LINE.match(raw)
        if section_match:
            section = section_match.group(1).strip().lower()
            lines[(section, "")] = number
            continue
        key_match = _KEY_LINE.match(raw)
        if key_match and section is not None:
            lines.setdefault((section, key_match.group(1).strip().lower()), number)
    return lines


def _parse_levels(text: str, key: str, line: int) -> List[int]:
    # "1-10" 或 "1, 2, 5"
    levels = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part:
                low, high = (int(x) for x in part.split("-", 1))
                levels.extend(range(low, high + 1))
            else:
                levels.append(int(part))
    except ValueError:
        raise ConfigurationError(f"无法解析能级列表 '{text}'", key, line)
    if not levels:
        raise ConfigurationError("能级列表为空", key, line)
    return levels


def _parse_value(text: str, dimension: str, key: str, line: int) -> Any:
    text = text.strip()
    if dimension == TEXT:
        return text
    if dimension == LEVELS:
        return _parse_levels(text, key, line)
    if dimension == BOOL:
        lowered = text.lower()
        if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
            raise ConfigurationError(f"无法解析布尔值 '{text}'", key, line)
        return configparser.ConfigParser.BOOLEAN_STATES[lowered]
    if dimension == INT:
        try:
            return int(text)
        except ValueError:
            raise ConfigurationError(f"需要整数, 实际为 '{text}'", key, line)
    return parse_quantity(text, dimension, key, line)


def _format_value(value: Any, dimension: str) -> str:
    if dimension == LEVELS:
        return ", ".join(str(v) for v in value)
    if dimension == BOOL:
        return "true" if value else "false"
    if dimension in (TEXT, INT):
        return str(value)
    number, suffix = format_quantity(float(value), dimension)
    return f"{number} {suffix}".strip()


@dataclass
class RunConfig:
    """
    运行配置

    Attributes:
        values: 节 -> 键 -> 值 (物理量均为原子单位)
        explicit: 配置文件中显式给出的 (节, 键)
        path: 配置文件路径
    """

    values: Dict[str, Dict[str, Any]]
    explicit: Set[Tuple[str, str]] = field(default_factory=set, compare=False)
    path: str = field(default="", compare=False)

    def get(self, section: str, key: str) -> Any:
        return self.values[section][key]

    @property
    def output_dir(self) -> str:
        return self.values["output"]["directory"]

    def serialize(self) -> str:
        """
        以原子单位和 17 位有效数字写出完整配置

        未显式给出的泛函权重写成注释行: 数值仍进入 hash, 重新解析后仍随泛函类型取默认值
        """
        lines = []
        for section, schema in CONFIG_SCHEMA.items():
            lines.append(f"[{section}]")
            for key, (dimension, _) in schema.items():
                value = self.values[section].get(key)
                if value is None:
                    continue
                entry = f"{key} = {_format_value(value, dimension)}"
                if key in _WEIGHT_KEYS and (section, key) not in self.explicit:
                    entry = f"# {entry} (默认)"
                lines.append(entry)
            lines.append("")
        return "\n".join(lines)

    def config_hash(self) -> str:
        """序列化文本的 SHA-256"""
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    def with_overrides(self, max_iterations: int = None, variant: str = None,
                       output_dir: str = None) -> "RunConfig":
        """
        命令行覆盖; 更换泛函类型时, 未显式给出的权重改用新类型的默认值
        """
        values = {section: dict(entries) for section, entries in self.values.items()}
        if max_iterations is not None:
            if max_iterations < 0:
                raise ConfigurationError(f"最大迭代次数不能为负: {max_iterations}", "max_iterations")
            values["krotov"]["max_iterations"] = int(max_iterations)
        if output_dir is not None:
            values["output"]["directory"] = output_dir
        if variant is not None and variant != values["functional"]["variant"]:
            values["functional"]["variant"] = variant
            _fill_weights(values["functional"], self.explicit)
        return RunConfig(values=values, explicit=set(self.explicit), path=self.path)

    # ---- 由配置构造计算对象 ----

    def system_definition(self) -> Dict[str, Any]:
        """体系定义, 可直接传给 molecule.system.build_system"""
        system = self.values["system"]
        definition = {key: system[key] for key in
                      ("mass", "r_min", "r_max", "n_points", "n_ground", "n_excited",
                       "electronic_gap", "dipole", "carrier", "lifetime")}
        definition["name"] = system["preset"] or "custom"
        for surface in ("ground", "excited"):
            definition[surface] = self._potential(surface)
        return definition

    def _potential(self, surface: str):
        system = self.values["system"]
        kind = system[f"{surface}_kind"]
        if kind == "tabulated":
            if not system[f"{surface}_file"]:
                raise ConfigurationError(f"表格势能需要 {surface}_file", f"{surface}_file")
            return load_tabulated(system[f"{surface}_file"])
        if kind == "morse":
            params = {"D_e": system[f"{surface}_depth"], "a": system[f"{surface}_width"],
                      "r_e": system[f"{surface}_re"], "offset": system[f"{surface}_offset"]}
        elif kind == "harmonic":
            params = {"omega": system[f"{surface}_omega"], "r_e": system[f"{surface}_re"],
                      "offset": system[f"{surface}_offset"]}
        else:
            raise ConfigurationError(f"未知的势能类型 '{kind}'", f"{surface}_kind")
        missing = [name for name, value in params.items() if value is None]
        if missing:
            raise ConfigurationError(f"{surface} 势能缺少参数 {missing}", f"{surface}_kind")
        return make_potential(kind, params, system["mass"])

    def time_grid(self) -> TimeGrid:
        pulse = self.values["pulse"]
        return TimeGrid(pulse["t_final"], pulse["n_steps"])

    def shape(self) -> ShapeFunction:
        return ShapeFunction(self.values["pulse"]["t_ramp"])

    def guess_pulse(self) -> Pulse:
        """经形状函数调制的高斯猜测脉冲"""
        pulse = self.values["pulse"]
        guess = gaussian_guess(self.time_grid(), pulse["center"], pulse["fwhm"], pulse["peak"],
                               pulse["detuning"], self.values["system"]["carrier"])
        return apply_shape(guess, self.shape())

    def cut_pulse(self, guess: Pulse) -> Optional[Pulse]:
        """频谱截断的猜测脉冲 (未配置截止时为 None)"""
        pulse = self.values["pulse"]
        if pulse["spectral_cut"] is None:
            return None
        return spectral_cut(guess, hartree_to_wavenumber(pulse["spectral_cut"]), pulse["cut_keep"])

    def functional_config(self) -> FunctionalConfig:
        functional = self.values["functional"]
        weights = {key: functional[key] for key in _WEIGHT_KEYS}
        return FunctionalConfig(
            variant=functional["variant"],
            n_max=functional["n_max"],
            n_star=functional["n_star"],
            weights=weights,
            ss_form=functional["ss_form"],
            ass_form=functional["ass_form"],
            target=functional["target"],
        )

    def krotov_options(self) -> KrotovOptions:
        krotov = self.values["krotov"]
        return KrotovOptions(
            step_lambda=krotov["lambda"],
            max_iterations=krotov["max_iterations"],
            tolerance=krotov["tolerance"],
            tol_mono=krotov["tol_mono"],
            shape=self.shape(),
            complex_update=krotov["complex_update"],
            check_monotonicity=krotov["check_monotonicity"],
        )

    def cooling_initial(self, n_ground: int) -> CoolingState:
        return equipartition(n_ground, self.values["cooling"]["initial_levels"])


def _fill_weights(functional: Dict[str, Any], explicit: Set[Tuple[str, str]]):
    defaults = FUNCTIONAL_WEIGHTS.get(functional["variant"])
    if defaults is None:
        raise ConfigurationError(f"未知的泛函类型 '{functional['variant']}'", "variant")
    for key in _WEIGHT_KEYS:
        if ("functional", key) not in explicit:
            functional[key] = defaults.get(key, 0.0)


def _fill_preset(system: Dict[str, Any], explicit: Set[Tuple[str, str]], line: int):
    name = system["preset"]
    if name not in PRESETS:
        raise ConfigurationError(f"未知的预设 '{name}', 可选: {sorted(PRESETS)}", "preset", line)
    preset = PRESETS[name]
    for key in ("mass", "r_min", "r_max", "n_points", "n_ground", "n_excited",
                "electronic_gap", "dipole", "carrier"):
        if ("system", key) not in explicit:
            system[key] = preset[key]
    for surface in ("ground", "excited"):
        if any(("system", f"{surface}_{key}") in explicit for key in _POTENTIAL_KEYS):
            continue
        kind, params = preset[surface]
        system[f"{surface}_kind"] = kind
        if kind == "morse":
            system[f"{surface}_depth"] = params["D_e"]
            system[f"{surface}_width"] = params["a"]
        else:
            system[f"{surface}_omega"] = params["omega"]
        system[f"{surface}_re"] = params["r_e"]
        system[f"{surface}_offset"] = params.get("offset", 0.0)


def _validate(values: Dict[str, Dict[str, Any]], lines: Dict[Tuple[str, str], int]):
    def fail(message, section, key):
        raise ConfigurationError(message, f"{section}.{key}", lines.get((section, key)))

    system = values["system"]
    for key in _REQUIRED_WITHOUT_PRESET:
        if system[key] is None:
            fail(f"缺少必需的字段 (未指定 preset 时)", "system", key)
    for key in ("mass", "dipole"):
        if system[key] <= 0:
            fail(f"{key} 必须为正: {system[key]}", "system", key)

    pulse = values["pulse"]
    for key in ("t_final", "fwhm"):
        if pulse[key] <= 0:
            fail(f"{key} 必须为正: {pulse[key]}", "pulse", key)
    if pulse["n_steps"] < 2:
        fail(f"n_steps 至少为 2: {pulse['n_steps']}", "pulse", "n_steps")
    if pulse["cut_keep"] not in ("below", "above"):
        fail(f"cut_keep 只能是 below 或 above: {pulse['cut_keep']}", "pulse", "cut_keep")

    functional = values["functional"]
    if functional["variant"] not in FUNCTIONAL_WEIGHTS:
        fail(f"未知的泛函类型 '{functional['variant']}'", "functional", "variant")
    for key in _WEIGHT_KEYS:
        if functional[key] < 0:
            fail(f"权重不能为负: {functional[key]}", "functional", key)
    if functional["n_max"] < 0:
        fail(f"n_max 不能为负: {functional['n_max']}", "functional", "n_max")
    if functional["n_max"] >= 1 and not 1 <= functional["n_star"] <= functional["n_max"]:
        fail(f"n_star 必须在 1..{functional['n_max']} 内", "functional", "n_star")

    krotov = values["krotov"]
    if krotov["lambda"] <= 0:
        fail(f"lambda 必须为正: {krotov['lambda']}", "krotov", "lambda")
    if krotov["tol_mono"] < 0:
        fail(f"tol_mono 不能为负: {krotov['tol_mono']}", "krotov", "tol_mono")
    if values["cooling"]["n_cycles"] < 0:
        fail("n_cycles 不能为负", "cooling", "n_cycles")


def parse_text(text: str, path: str = "<string>") -> RunConfig:
    """
    解析配置文本

    Args:
        text: 配置文件内容
        path: 来源 (仅用于日志)

    Returns:
        RunConfig: 已校验并填充默认值的配置
    """
    lines = _line_numbers(text)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=path)
    except configparser.Error as e:
        raise ConfigurationError(f"配置文件格式错误: {e}", None, getattr(e, "lineno", None))

    values = {section: {key: default for key, (_, default) in schema.items()}
              for section, schema in CONFIG_SCHEMA.items()}
    values["cooling"]["initial_levels"] = list(values["cooling"]["initial_levels"])
    explicit = set()

    for section in parser.sections():
        name = section.lower()
        if name not in CONFIG_SCHEMA:
            raise ConfigurationError(f"未知的配置节 [{section}]", section, lines.get((name, "")))
        for key, raw in parser.items(section):
            line = lines.get((name, key))
            if key not in CONFIG_SCHEMA[name]:
                raise ConfigurationError(f"未知的配置键 '{key}'", f"{name}.{key}", line)
            dimension, _ = CONFIG_SCHEMA[name][key]
            values[name][key] = _parse_value(raw, dimension, f"{name}.{key}", line)
            explicit.add((name, key))

    if values["system"]["preset"]:
        _fill_preset(values["system"], explicit, lines.get(("system", "preset")))
    _fill_weights(values["functional"], explicit)
    pulse = values["pulse"]
    if pulse["center"] is None:
        pulse["center"] = 0.5 * pulse["t_final"]
    if pulse["t_ramp"] is None:
        pulse["t_ramp"] = pulse["t_final"] / 20.0

    _validate(values, lines)
    return RunConfig(values=values, explicit=explicit, path=path)


def parse_config(path: str) -> RunConfig:
    """
    从文件解析运行配置

    Args:
        path: 配置文件路径

    Returns:
        RunConfig: 配置对象
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigurationError(f"无法读取配置文件 {path}: {e}")

    config = parse_text(text, path)
    logger.info(f"已加载运行配置: {path} (hash {config.config_hash()[:12]})")
    logger.debug("完整配置 (已填充默认值):\n" + config.serialize())
    return config
