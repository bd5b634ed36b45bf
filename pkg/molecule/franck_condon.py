"""
Franck-Condon 模块 - 激发态与基态振动能级之间的跃迁偶极矩阵元

eta_nm = <phi^e_n | mu | phi^g_m> = mu * sum_R phi^e_n(R) phi^g_m(R) dR

约定:
- 行索引为激发态能级 v', 列索引为基态能级 v''
- 偶极矩 mu 与核间距无关
- 波函数为实数, 因此 eta 为实矩阵
"""

from dataclasses import dataclass
import logging

import numpy as np
import pandas as pd

from core.errors import ConfigurationError
from molecule.vibrational import VibrationalBasis

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FranckCondonMap:
    """
    Franck-Condon 矩阵

    Attributes:
        eta: 矩阵元 eta_nm (原子单位), 形状 (激发态能级数, 基态能级数)
        dipole_value: 常数跃迁偶极矩 mu (原子单位)
    """

    eta: np.ndarray
    dipole_value: float

    @property
    def factors(self) -> np.ndarray:
        """归一化 Franck-Condon 因子 |eta_nm / mu|^2"""
        if self.dipole_value == 0.0:
            return np.zeros_like(self.eta)
        return (self.eta / self.dipole_value) ** 2

    def row_norms(self) -> np.ndarray:
        """sum_m eta_nm^2 / mu^2, 基组完备时趋于 1"""
        return self.factors.sum(axis=1)

    def to_frame(self) -> pd.DataFrame:
        """以能级编号为行列标签的 DataFrame (热图数据)"""
        n_excited, n_ground = self.eta.shape
        return pd.DataFrame(
            self.eta,
            index=pd.Index(range(n_excited), name="v_excited"),
            columns=pd.Index(range(n_ground), name="v_ground"),
        )


def franck_condon_map(ground: VibrationalBasis, excited: VibrationalBasis, mu: float) -> FranckCondonMap:
    """
    计算 Franck-Condon 矩阵

    Args:
        ground: 基态振动本征基
        excited: 激发态振动本征基
        mu: 跃迁偶极矩 (原子单位)

    Returns:
        FranckCondonMap: eta 矩阵
    """
    if not ground.grid.same_as(excited.grid):
        raise ConfigurationError("基态与激发态的振动本征基不在同一网格上", "grid")

    overlaps = excited.wavefunctions.T @ ground.wavefunctions * ground.grid.spacing
    eta = mu * overlaps
    eta.flags.writeable = False

    norms = (overlaps ** 2).sum(axis=1)
    logger.info(f"Franck-Condon 矩阵: {eta.shape[0]} x {eta.shape[1]}, "
                f"行归一化范围 [{norms.min():.4f}, {norms.max():.4f}]")
    return FranckCondonMap(eta=eta, dipole_value=float(mu))
