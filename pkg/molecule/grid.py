"""
空间网格模块 - 核间距 R 的均匀网格

网格约定:
- 点数为 2 的幂且不少于 16 (便于 FFT)
- 包含两个端点, spacing = (r_max - r_min) / (n_points - 1)
- 同时提供对应的 Fourier 动量网格, 用于动能算符
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from core.errors import ConfigurationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpatialGrid:
    """
    均匀空间网格 (原子单位)

    Attributes:
        r_min: 网格起点
        r_max: 网格终点
        n_points: 网格点数
    """

    r_min: float
    r_max: float
    n_points: int
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_points < 16 or self.n_points & (self.n_points - 1) != 0:
            raise ConfigurationError(f"网格点数必须是不小于16的2的幂, 实际为 {self.n_points}", "n_points")
        if not self.r_min < self.r_max:
            raise ConfigurationError(f"网格边界颠倒: r_min={self.r_min}, r_max={self.r_max}", "r_min")
        points = np.linspace(self.r_min, self.r_max, self.n_points)
        points.flags.writeable = False
        object.__setattr__(self, "points", points)

    @property
    def spacing(self) -> float:
        return (self.r_max - self.r_min) / (self.n_points - 1)

    @property
    def momenta(self) -> np.ndarray:
        """Fourier 动量网格 (FFT 顺序)"""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)

    def kinetic_energies(self, mass: float) -> np.ndarray:
        """动量表象下的动能 k^2 / 2m"""
        return self.momenta ** 2 / (2.0 * mass)

    def refined(self) -> "SpatialGrid":
        """同一区间上点数加倍的网格 (用于收敛性检查)"""
        return SpatialGrid(self.r_min, self.r_max, 2 * self.n_points)

    def same_as(self, other: "SpatialGrid") -> bool:
        return (self.n_points == other.n_points
                and np.isclose(self.r_min, other.r_min, rtol=0.0, atol=1e-12)
                and np.isclose(self.r_max, other.r_max, rtol=0.0, atol=1e-12))


def build_grid(r_min: float, r_max: float, n_points: int) -> SpatialGrid:
    """
    构建均匀空间网格

    Args:
        r_min: 起点 (a0)
        r_max: 终点 (a0)
        n_points: 点数, 2 的幂且 >= 16

    Returns:
        SpatialGrid: 网格对象
    """
    grid = SpatialGrid(float(r_min), float(r_max), int(n_points))
    logger.debug(f"空间网格: [{grid.r_min}, {grid.r_max}] a0, {grid.n_points} 点, 间距 {grid.spacing:.6g} a0")
    return grid
