"""
振动本征态模块 - 单个电子态势能面上的振动能级与波函数

求解方法:
1. 在均匀网格上构造 sinc-DVR (Colbert-Miller) 动能矩阵
2. 加上对角势能矩阵得到哈密顿量
3. 对角化, 保留低于网格边缘势能(解离极限)的束缚态

输出约定:
- 能级升序排列
- 波函数在网格上 L2 归一 (sum phi^2 dr = 1)
- 符号固定: 每个波函数第一个波腹为正, 保证 Franck-Condon 矩阵可复现
"""

from dataclasses import dataclass
import logging

import numpy as np
from scipy.linalg import eigh, toeplitz

from core.errors import ResolutionError
from molecule.grid import SpatialGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VibrationalBasis:
    """
    振动本征基

    Attributes:
        energies: 本征能量 E_v (hartree), 升序
        wavefunctions: 网格上的实波函数, 每列一个能级
        mass: 约化质量 (m_e)
        grid: 所在的空间网格
    """

    energies: np.ndarray
    wavefunctions: np.ndarray
    mass: float
    grid: SpatialGrid

    @property
    def n_levels(self) -> int:
        return len(self.energies)

    def gram_matrix(self) -> np.ndarray:
        """波函数的重叠矩阵, 理想情况下为单位矩阵"""
        return self.wavefunctions.T @ self.wavefunctions * self.grid.spacing


def sinc_dvr_kinetic(grid: SpatialGrid, mass: float) -> np.ndarray:
    """
    Colbert-Miller sinc-DVR 动能矩阵

    T_ii = pi^2 / (6 m dx^2), T_ij = (-1)^(i-j) / (m dx^2 (i-j)^2)

    Args:
        grid: 空间网格
        mass: 约化质量

    Returns:
        np.ndarray: n x n 动能矩阵
    """
    dx = grid.spacing
    coeff = 1.0 / (2.0 * mass * dx ** 2)
    offsets = np.arange(1, grid.n_points)
    first_row = np.empty(grid.n_points)
    first_row[0] = coeff * np.pi ** 2 / 3.0
    first_row[1:] = coeff * 2.0 * (-1.0) ** offsets / offsets ** 2
    return toeplitz(first_row)


def _fix_signs(wavefunctions: np.ndarray) -> np.ndarray:
    # 以第一个超过最大振幅 1% 的点(位于第一个波腹的上升沿)的符号为准
    fixed = wavefunctions.copy()
    for j in range(fixed.shape[1]):
        column = fixed[:, j]
        threshold = 1e-2 * np.max(np.abs(column))
        first = np.argmax(np.abs(column) > threshold)
        if column[first] < 0:
            fixed[:, j] = -column
    return fixed


def _diagonalize(potential_values: np.ndarray, grid: SpatialGrid, mass: float):
    hamiltonian = sinc_dvr_kinetic(grid, mass)
    hamiltonian[np.diag_indices_from(hamiltonian)] += potential_values
    return eigh(hamiltonian)


def solve_vibrational(potential, grid: SpatialGrid, mass: float, n_levels: int = None,
                      check_convergence: bool = False, rtol: float = 1e-8) -> VibrationalBasis:
    """
    求解振动本征态

    Args:
        potential: 势能对象 (MorsePotential / HarmonicPotential / TabulatedPotential)
        grid: 空间网格
        mass: 约化质量 (m_e)
        n_levels: 保留能级数, None 表示保留全部束缚态
        check_convergence: 是否在加密网格上复算并检查收敛
        rtol: 收敛检查的相对容差

    Returns:
        VibrationalBasis: 振动本征基
    """
    values = potential.values(grid)
    if not np.all(np.isfinite(values)):
        raise ResolutionError("势能在网格上不是有限值")

    # 束缚态判据: 能量低于网格边缘势能和渐近值
    cutoff = min(float(values[-1]), float(potential.asymptote(grid)))

    energies, vectors = _diagonalize(values, grid, mass)
    n_bound = int(np.count_nonzero(energies < cutoff))
    if n_levels is None:
        n_levels = n_bound
    if n_levels < 1 or n_levels > n_bound:
        raise ResolutionError(
            f"请求 {n_levels} 个能级, 但网格上只有 {n_bound} 个低于解离极限 {cutoff:.6g} hartree 的束缚态"
        )

    energies = energies[:n_levels].copy()
    wavefunctions = _fix_signs(vectors[:, :n_levels] / np.sqrt(grid.spacing))

    if check_convergence:
        fine = grid.refined()
        fine_energies, _ = _diagonalize(potential.values(fine), fine, mass)
        scale = np.maximum(np.abs(energies), np.finfo(float).tiny)
        deviation = np.abs(fine_energies[:n_levels] - energies) / scale
        worst = int(np.argmax(deviation))
        if deviation[worst] > rtol:
            raise ResolutionError(
                f"网格过粗: 能级 v={worst} 在网格加密后相对变化 {deviation[worst]:.2e} > {rtol:.1e}"
            )
        logger.debug(f"网格收敛检查通过, 最大相对变化 {deviation.max():.2e}")

    energies.flags.writeable = False
    wavefunctions.flags.writeable = False
    logger.info(f"振动本征态求解完成: {n_levels} 个能级 (共 {n_bound} 个束缚态), "
                f"E_0 = {energies[0]:.8g}, E_max = {energies[-1]:.8g} hartree")
    return VibrationalBasis(energies=energies, wavefunctions=wavefunctions, mass=float(mass), grid=grid)
