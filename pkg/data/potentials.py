"""
势能曲线模块 - 电子基态和激发态的模型势能

支持的势能类型:
1. Morse 势: V(R) = D_e (1 - exp(-a (R - r_e)))^2 + offset
2. 谐振子势: V(R) = 0.5 m w^2 (R - r_e)^2 + offset
3. 表格势: 从两列文本文件读取, 三次样条插值到网格

表格文件格式:
- 第一列 R, 第二列能量, '#' 开头为注释
- 头部可用 "# r_unit: angstrom" 和 "# energy_unit: cm-1" 声明单位
  (默认 a0 和 hartree)

所有势能对象都实现相同接口: values(grid), asymptote(grid), describe()
"""

import logging
import re
from typing import Dict, Any

import numpy as np
from scipy.interpolate import CubicSpline

from core.errors import ConfigurationError
from core.units import UNIT_TABLE
from molecule.grid import SpatialGrid

logger = logging.getLogger(__name__)

_HEADER_FLAG = re.compile(r"^\s*#\s*(r_unit|energy_unit)\s*[:=]\s*(\S+)", re.IGNORECASE)


class MorsePotential:
    """
    Morse 势能

    Args:
        D_e: 解离能 (hartree)
        a: 范围参数 (1/a0)
        r_e: 平衡核间距 (a0)
        offset: 势能最小值 (hartree)
    """

    kind = "morse"

    def __init__(self, D_e: float, a: float, r_e: float, offset: float = 0.0):
        if D_e <= 0 or a <= 0:
            raise ConfigurationError(f"Morse 参数必须为正: D_e={D_e}, a={a}", "D_e")
        self.D_e = float(D_e)
        self.a = float(a)
        self.r_e = float(r_e)
        self.offset = float(offset)

    def values(self, grid: SpatialGrid) -> np.ndarray:
        if not grid.r_min < self.r_e < grid.r_max:
            raise ConfigurationError(
                f"Morse 平衡位置 r_e={self.r_e} 不在网格 ({grid.r_min}, {grid.r_max}) 内", "r_e"
            )
        return self.D_e * (1.0 - np.exp(-self.a * (grid.points - self.r_e))) ** 2 + self.offset

    def asymptote(self, grid: SpatialGrid) -> float:
        return self.D_e + self.offset

    def harmonic_frequency(self, mass: float) -> float:
        """谐振频率 w_e = a sqrt(2 D_e / m)"""
        return self.a * np.sqrt(2.0 * self.D_e / mass)

    def analytic_levels(self, mass: float, n_levels: int) -> np.ndarray:
        """解析 Morse 能级 w_e (v+1/2) - w_e x_e (v+1/2)^2 (相对 offset)"""
        omega = self.harmonic_frequency(mass)
        omega_x = omega ** 2 / (4.0 * self.D_e)
        v = np.arange(n_levels) + 0.5
        return self.offset + omega * v - omega_x * v ** 2

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "D_e": self.D_e, "a": self.a, "r_e": self.r_e, "offset": self.offset}


class HarmonicPotential:
    """
    谐振子势能

    Args:
        omega: 振动角频率 (hartree)
        r_e: 平衡核间距 (a0)
        mass: 约化质量 (m_e)
        offset: 势能最小值 (hartree)
    """

    kind = "harmonic"

    def __init__(self, omega: float, r_e: float, mass: float, offset: float = 0.0):
        if omega <= 0 or mass <= 0:
            raise ConfigurationError(f"谐振子参数必须为正: omega={omega}, mass={mass}", "omega")
        self.omega = float(omega)
        self.r_e = float(r_e)
        self.mass = float(mass)
        self.offset = float(offset)

    def values(self, grid: SpatialGrid) -> np.ndarray:
        if not grid.r_min < self.r_e < grid.r_max:
            raise ConfigurationError(
                f"谐振子平衡位置 r_e={self.r_e} 不在网格 ({grid.r_min}, {grid.r_max}) 内", "r_e"
            )
        return 0.5 * self.mass * self.omega ** 2 * (grid.points - self.r_e) ** 2 + self.offset

    def asymptote(self, grid: SpatialGrid) -> float:
        # 谐振子没有解离极限, 以网格边缘较低的一侧为准
        values = self.values(grid)
        return float(min(values[0], values[-1]))

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "omega": self.omega, "r_e": self.r_e, "mass": self.mass, "offset": self.offset}


class TabulatedPotential:
    """
    表格势能 (三次样条插值)

    Args:
        r: 采样点 (a0), 严格递增
        energies: 采样能量 (hartree)
        source: 数据来源(文件名), 仅用于日志
    """

    kind = "tabulated"

    def __init__(self, r: np.ndarray, energies: np.ndarray, source: str = ""):
        r = np.asarray(r, dtype=float)
        energies = np.asarray(energies, dtype=float)
        if r.ndim != 1 or r.shape != energies.shape or len(r) < 4:
            raise ConfigurationError("表格势能至少需要4个 (R, E) 采样点", "potential_file")
        order = np.argsort(r)
        r, energies = r[order], energies[order]
        if np.any(np.diff(r) <= 0):
            raise ConfigurationError("表格势能的 R 采样点存在重复", "potential_file")
        if not np.all(np.isfinite(energies)):
            raise ConfigurationError("表格势能包含非有限值", "potential_file")
        self.r = r
        self.energies = energies
        self.source = source
        self._spline = CubicSpline(r, energies)

    def values(self, grid: SpatialGrid) -> np.ndarray:
        tolerance = 1e-9 * max(1.0, abs(grid.r_max))
        if self.r[0] > grid.r_min + tolerance or self.r[-1] < grid.r_max - tolerance:
            raise ConfigurationError(
                f"表格势能覆盖范围 [{self.r[0]}, {self.r[-1]}] 不包含网格 [{grid.r_min}, {grid.r_max}]",
                "potential_file",
            )
        return self._spline(grid.points)

    def asymptote(self, grid: SpatialGrid) -> float:
        return float(self._spline(grid.r_max))

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, "source": self.source, "n_samples": len(self.r)}


def load_tabulated(path: str) -> TabulatedPotential:
    """
    从文本文件读取表格势能

    Args:
        path: 文件路径

    Returns:
        TabulatedPotential: 表格势能 (已转换为原子单位)
    """
    r_unit, energy_unit = "a0", "hartree"
    try:
        with open(path, "r") as f:
            for line in f:
                match = _HEADER_FLAG.match(line)
                if match:
                    if match.group(1).lower() == "r_unit":
                        r_unit = match.group(2).lower()
                    else:
                        energy_unit = match.group(2).lower()
        data = np.loadtxt(path, comments="#", ndmin=2)
    except OSError as e:
        raise ConfigurationError(f"无法读取势能文件 {path}: {e}", "potential_file")
    except ValueError as e:
        raise ConfigurationError(f"势能文件 {path} 格式错误: {e}", "potential_file")

    if data.shape[1] < 2:
        raise ConfigurationError(f"势能文件 {path} 需要两列数据", "potential_file")
    if r_unit not in UNIT_TABLE["length"]:
        raise ConfigurationError(f"未知的长度单位 '{r_unit}'", "r_unit")
    if energy_unit not in UNIT_TABLE["energy"]:
        raise ConfigurationError(f"未知的能量单位 '{energy_unit}'", "energy_unit")

    r = data[:, 0] * UNIT_TABLE["length"][r_unit]
    energies = data[:, 1] * UNIT_TABLE["energy"][energy_unit]
    logger.info(f"已读取表格势能: {path}, {len(r)} 个采样点 (R 单位 {r_unit}, 能量单位 {energy_unit})")
    return TabulatedPotential(r, energies, source=path)
