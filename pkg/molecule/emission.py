"""
自发辐射模块 - Einstein 系数、衰变速率与分支比

A_{v',v''} = (4 alpha^3 / 3) * H * dE^3 * eta_{v'v''}^2     (原子单位)
gamma_{v'} = sum_{v''} A_{v',v''}

其中 dE = 电子能隙 + E^e_{v'} - E^g_{v''}, H 为 Hoenl-London 因子。
本系统忽略转动, 只支持 rotationless 模式 (H = 1)。
dE <= 0 的能级对不能向下辐射, 其系数置零并记录。

保留基组之外的辐射 (逃逸) 用同一公式估计, 分支比 A/gamma 乘以 (1 - escape)
即得 A / (gamma + escape_rate), 两部分速率一致。
"""

from dataclasses import dataclass
import logging

import numpy as np

from core.errors import ConfigurationError
from core.units import FINE_STRUCTURE
from molecule.franck_condon import FranckCondonMap
from molecule.vibrational import VibrationalBasis

logger = logging.getLogger(__name__)

P_BRANCH = "P"  # J' = J'' - 1
R_BRANCH = "R"  # J' = J'' + 1


def honl_london(J_prime: int, branch: str) -> float:
    """
    Hoenl-London 因子

    Args:
        J_prime: 激发态转动量子数 J'
        branch: "P" (J'=J''-1) 或 "R" (J'=J''+1)

    Returns:
        float: (J'+1)/(2J'+1) 或 J'/(2J'+1)
    """
    if J_prime < 0:
        raise ConfigurationError(f"J' 不能为负: {J_prime}", "J_prime")
    if branch == P_BRANCH:
        return (J_prime + 1) / (2 * J_prime + 1)
    if branch == R_BRANCH:
        return J_prime / (2 * J_prime + 1)
    raise ConfigurationError(f"未知的转动分支 '{branch}', 可选 P 或 R", "branch")


@dataclass(frozen=True)
class EmissionModel:
    """
    自发辐射模型

    Attributes:
        einstein: A_{v',v''} 矩阵 (1/a.u. 时间)
        gamma: 每个激发态能级的总衰变速率
        lifetime: 激发态寿命 T_e (a.u. 时间)
        forbidden: dE <= 0 而被置零的能级对
        escape: 每个激发态能级辐射到保留基组之外(更高束缚态和连续态)的比例,
            escape_rate / (gamma + escape_rate)
        escape_rate: 辐射到保留基组之外的速率估计
    """

    einstein: np.ndarray
    gamma: np.ndarray
    lifetime: float
    forbidden: np.ndarray
    escape: np.ndarray
    escape_rate: np.ndarray

    def branching(self) -> np.ndarray:
        """分支比 A_{v',v''} / gamma_{v'}; gamma = 0 的行全为零"""
        ratios = np.zeros_like(self.einstein)
        active = self.gamma > 0
        ratios[active] = self.einstein[active] / self.gamma[active, None]
        return ratios


def emission_model(fc: FranckCondonMap, ground: VibrationalBasis, excited: VibrationalBasis,
                   electronic_gap: float, J_mode: str = "rotationless",
                   lifetime: float = None) -> EmissionModel:
    """
    根据 Franck-Condon 矩阵计算 Einstein 系数

    Args:
        fc: Franck-Condon 矩阵
        ground: 基态振动本征基
        excited: 激发态振动本征基
        electronic_gap: 电子能隙 (hartree)
        J_mode: 转动处理方式, 目前只支持 "rotationless"
        lifetime: 用户指定的激发态寿命 (a.u.), None 表示取 1/max(gamma)

    Returns:
        EmissionModel: 辐射模型
    """
    if J_mode != "rotationless":
        raise ConfigurationError(f"不支持的转动模式 '{J_mode}', 只支持 rotationless", "J_mode")
    if fc.eta.shape != (excited.n_levels, ground.n_levels):
        raise ConfigurationError(
            f"Franck-Condon 矩阵形状 {fc.eta.shape} 与能级数 ({excited.n_levels}, {ground.n_levels}) 不符",
            "fc",
        )

    delta = electronic_gap + excited.energies[:, None] - ground.energies[None, :]
    forbidden = delta <= 0.0
    if forbidden.any():
        logger.warning(f"有 {int(forbidden.sum())} 个能级对的跃迁能 <= 0, 无法向下辐射, 系数置零")

    # rotationless: Hoenl-London 因子取 1
    hl_factor = 1.0
    einstein = np.where(
        forbidden, 0.0,
        (4.0 * FINE_STRUCTURE ** 3 / 3.0) * hl_factor * np.clip(delta, 0.0, None) ** 3 * fc.eta ** 2,
    )
    gamma = einstein.sum(axis=1)

    escape_rate = _escape_rate(fc, ground, excited, electronic_gap)
    total = gamma + escape_rate
    escape = np.divide(escape_rate, total, out=np.zeros_like(total), where=total > 0)

    if lifetime is None:
        lifetime = 1.0 / gamma.max() if gamma.max() > 0 else np.inf
    elif lifetime <= 0:
        raise ConfigurationError(f"激发态寿命必须为正: {lifetime}", "lifetime")

    for array in (einstein, gamma, forbidden, escape, escape_rate):
        array.flags.writeable = False
    logger.info(f"Einstein 系数计算完成: gamma 范围 [{gamma.min():.3e}, {gamma.max():.3e}] a.u., "
                f"寿命 T_e = {lifetime:.4e} a.u., 最大逃逸比例 {escape.max():.3e}")
    return EmissionModel(einstein=einstein, gamma=gamma, lifetime=float(lifetime),
                         forbidden=forbidden, escape=escape, escape_rate=escape_rate)


def _escape_rate(fc: FranckCondonMap, ground: VibrationalBasis, excited: VibrationalBasis,
                 electronic_gap: float) -> np.ndarray:
    """
    辐射到保留基组之外的速率

    缺失的 FC 权重 mu^2 (1 - sum_m eta_lm^2 / mu^2) 按同一 A 系数公式计入,
    跃迁能取到最高保留基态能级的值 (基组外的能级都在它之上)。
    """
    if fc.dipole_value == 0.0:
        return np.zeros(excited.n_levels)
    deficit = np.clip(1.0 - fc.row_norms(), 0.0, 1.0) * fc.dipole_value ** 2
    delta = np.clip(electronic_gap + excited.energies - ground.energies[-1], 0.0, None)
    return (4.0 * FINE_STRUCTURE ** 3 / 3.0) * delta ** 3 * deficit
