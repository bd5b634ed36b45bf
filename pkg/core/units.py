"""
单位换算模块 - 原子单位与实验常用单位之间的转换

内部计算统一使用原子单位 (hbar = e = m_e = 1)。
配置文件中的数值可以带单位后缀, 例如 "30 fs", "1200 cm-1", "2.5 A", "1 D"。

所有换算常数取自 scipy.constants 的 CODATA 值:
- 长度: a0, bohr, A(埃), nm, um
- 能量/频率: hartree, cm-1, eV
- 时间: fs, ps, ns
- 电场: V/m, V/cm
- 偶极矩: D(德拜)
- 质量: me, amu
- 面积: um2, m2
"""

import re
from typing import Tuple

from scipy import constants

from core.errors import ConfigurationError

_BOHR = constants.physical_constants["Bohr radius"][0]
_AU_TIME = constants.physical_constants["atomic unit of time"][0]
_AU_FIELD = constants.physical_constants["atomic unit of electric field"][0]
_AU_DIPOLE = constants.physical_constants["atomic unit of electric dipole mom."][0]
_HARTREE_PER_INV_METER = constants.physical_constants["inverse meter-hartree relationship"][0]
_HARTREE_PER_EV = constants.physical_constants["electron volt-hartree relationship"][0]
_DEBYE = 1e-21 / constants.c

HARTREE_PER_WAVENUMBER = 100.0 * _HARTREE_PER_INV_METER
FS_PER_AU = _AU_TIME / 1e-15
FINE_STRUCTURE = constants.fine_structure

# 量纲 -> {单位后缀: 乘以该系数得到原子单位}
UNIT_TABLE = {
    "length": {
        "au": 1.0, "a0": 1.0, "bohr": 1.0,
        "a": 1e-10 / _BOHR, "angstrom": 1e-10 / _BOHR,
        "nm": 1e-9 / _BOHR, "um": 1e-6 / _BOHR,
    },
    "inverse_length": {
        "au": 1.0, "a0-1": 1.0, "bohr-1": 1.0,
        "a-1": _BOHR / 1e-10, "angstrom-1": _BOHR / 1e-10,
    },
    "energy": {
        "au": 1.0, "hartree": 1.0, "eh": 1.0,
        "cm-1": HARTREE_PER_WAVENUMBER,
        "ev": _HARTREE_PER_EV,
    },
    "time": {
        "au": 1.0,
        "fs": 1e-15 / _AU_TIME, "ps": 1e-12 / _AU_TIME, "ns": 1e-9 / _AU_TIME,
    },
    "field": {
        "au": 1.0,
        "v/m": 1.0 / _AU_FIELD, "v/cm": 100.0 / _AU_FIELD,
    },
    "dipole": {
        "au": 1.0, "ea0": 1.0,
        "d": _DEBYE / _AU_DIPOLE, "debye": _DEBYE / _AU_DIPOLE,
    },
    "mass": {
        "au": 1.0, "me": 1.0,
        "amu": constants.physical_constants["atomic mass constant"][0] / constants.m_e,
        "u": constants.physical_constants["atomic mass constant"][0] / constants.m_e,
    },
    "area": {
        "au": 1.0,
        "um2": (1e-6 / _BOHR) ** 2, "m2": (1.0 / _BOHR) ** 2,
    },
    "dimensionless": {"": 1.0},
}

_QUANTITY_PATTERN = re.compile(
    r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z][A-Za-z0-9/\-]*)?\s*$"
)


def parse_quantity(text: str, dimension: str, key: str = None, line: int = None) -> float:
    """
    把带单位的字符串转换为原子单位数值

    Args:
        text: 例如 "30 fs" 或 "0.02"
        dimension: 量纲名称(UNIT_TABLE 的键)
        key: 配置键名(用于错误信息)
        line: 配置文件行号(用于错误信息)

    Returns:
        float: 原子单位下的数值
    """
    match = _QUANTITY_PATTERN.match(text)
    if match is None:
        raise ConfigurationError(f"无法解析数值 '{text}'", key, line)

    value = float(match.group(1))
    unit = (match.group(2) or "").lower()
    units = UNIT_TABLE[dimension]

    # 无单位时按原子单位处理
    if unit == "" and dimension != "dimensionless":
        return value
    if unit not in units:
        raise ConfigurationError(
            f"单位 '{unit}' 与量纲 '{dimension}' 不匹配, 可用单位: {sorted(units)}", key, line
        )
    return value * units[unit]


def format_quantity(value: float, dimension: str) -> Tuple[str, str]:
    """
    以原子单位和 17 位有效数字格式化数值, 保证解析后逐位一致

    Returns:
        Tuple[str, str]: (数值文本, 单位后缀)
    """
    suffix = "" if dimension == "dimensionless" else "au"
    return f"{value:.17g}", suffix


def wavenumber_to_hartree(wavenumber: float) -> float:
    return wavenumber * HARTREE_PER_WAVENUMBER


def hartree_to_wavenumber(energy: float) -> float:
    return energy / HARTREE_PER_WAVENUMBER


def au_to_fs(t: float) -> float:
    return t * FS_PER_AU


def fs_to_au(t: float) -> float:
    return t / FS_PER_AU
