"""
预设分子模块 - 内置的玩具双势能面体系

预设说明:
- compact-parabola: 两个势能面平衡位置相差很小, Franck-Condon 矩阵集中在对角线附近,
  对冷却有利 (类似 Cs2)
- diffuse: 激发态较浅且平衡位置外移, Franck-Condon 矩阵弥散, 宽带激发会导致加热
  (类似 LiCs)
- harmonic: 两个等频率的位移谐振子, 用于解析检验

所有数值均为原子单位。实际分子的势能曲线可以通过表格文件提供。
"""

import logging
from typing import Dict, Any

from core.errors import ConfigurationError
from core.units import wavenumber_to_hartree
from data.potentials import MorsePotential, HarmonicPotential

logger = logging.getLogger(__name__)

# 共用的基态 Morse 势: w_e 约 60 cm-1, 约 40 个束缚态
_GROUND_MORSE = {"D_e": 5.5e-3, "a": 0.58, "r_e": 7.0}

PRESETS = {
    "compact-parabola": {
        "description": "激发态与基态几乎平行, 有利的 Franck-Condon 矩阵",
        "mass": 50000.0,
        "r_min": 4.0,
        "r_max": 22.0,
        "n_points": 256,
        "ground": ("morse", _GROUND_MORSE),
        "excited": ("morse", {"D_e": 7.0e-3, "a": 0.50, "r_e": 7.2}),
        "n_ground": 30,
        "n_excited": 24,
        "electronic_gap": 0.07,
        "dipole": 1.0,
        "carrier": wavenumber_to_hartree(15200.0),
    },
    "diffuse": {
        "description": "浅而外移的激发态, 不利的 Franck-Condon 矩阵",
        "mass": 50000.0,
        "r_min": 4.0,
        "r_max": 22.0,
        "n_points": 256,
        "ground": ("morse", _GROUND_MORSE),
        "excited": ("morse", {"D_e": 3.0e-3, "a": 0.42, "r_e": 7.8}),
        "n_ground": 30,
        "n_excited": 24,
        "electronic_gap": 0.07,
        "dipole": 1.0,
        "carrier": wavenumber_to_hartree(15200.0),
    },
    "harmonic": {
        "description": "等频率位移谐振子, 解析检验用",
        "mass": 1000.0,
        "r_min": 2.0,
        "r_max": 8.0,
        "n_points": 128,
        "ground": ("harmonic", {"omega": 0.01, "r_e": 5.0}),
        "excited": ("harmonic", {"omega": 0.01, "r_e": 5.3}),
        "n_ground": 20,
        "n_excited": 20,
        "electronic_gap": 0.1,
        "dipole": 1.0,
        "carrier": 0.1,
    },
}


def make_potential(kind: str, params: Dict[str, float], mass: float):
    """
    根据类型和参数构造势能对象

    Args:
        kind: "morse" 或 "harmonic"
        params: 势能参数
        mass: 约化质量 (谐振子需要)

    Returns:
        势能对象
    """
    if kind == "morse":
        return MorsePotential(params["D_e"], params["a"], params["r_e"], params.get("offset", 0.0))
    if kind == "harmonic":
        return HarmonicPotential(params["omega"], params["r_e"], mass, params.get("offset", 0.0))
    raise ConfigurationError(f"未知的势能类型 '{kind}'", "kind")


def preset_definition(name: str) -> Dict[str, Any]:
    """
    获取预设体系的完整定义 (势能已实例化)

    Args:
        name: 预设名称

    Returns:
        Dict[str, Any]: 体系定义, 可直接传给 molecule.system.build_system
    """
    if name not in PRESETS:
        raise ConfigurationError(f"未知的预设 '{name}', 可选: {sorted(PRESETS)}", "preset")

    preset = PRESETS[name]
    definition = {key: value for key, value in preset.items() if key not in ("ground", "excited", "description")}
    definition["name"] = name
    definition["ground"] = make_potential(*preset["ground"], preset["mass"])
    definition["excited"] = make_potential(*preset["excited"], preset["mass"])
    logger.debug(f"加载预设体系: {name} ({preset['description']})")
    return definition
