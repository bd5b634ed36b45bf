"""
分子体系模块 - 把网格、两个势能面的振动本征基、Franck-Condon 矩阵和辐射模型组合在一起
"""

from dataclasses import dataclass
import logging
from typing import Dict, Any

from core.errors import ConfigurationError
from dynamics.propagator import TwoSurfaceHamiltonian
from molecule.emission import EmissionModel, emission_model
from molecule.franck_condon import FranckCondonMap, franck_condon_map
from molecule.grid import SpatialGrid, build_grid
from molecule.vibrational import VibrationalBasis, solve_vibrational

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MolecularSystem:
    """
    双势能面分子体系

    Attributes:
        name: 体系名称
        grid: 空间网格
        ground: 基态振动本征基
        excited: 激发态振动本征基
        fc: Franck-Condon 矩阵
        emission: 自发辐射模型
        electronic_gap: 电子能隙 (hartree)
        carrier: 激光载频 (hartree)
        dipole: 跃迁偶极矩 (a.u.)
    """

    name: str
    grid: SpatialGrid
    ground: VibrationalBasis
    excited: VibrationalBasis
    fc: FranckCondonMap
    emission: EmissionModel
    electronic_gap: float
    carrier: float
    dipole: float

    @property
    def n_ground(self) -> int:
        return self.ground.n_levels

    @property
    def n_excited(self) -> int:
        return self.excited.n_levels

    def hamiltonian(self, carrier: float = None) -> TwoSurfaceHamiltonian:
        """旋转波近似哈密顿量, 默认使用体系的载频"""
        return TwoSurfaceHamiltonian(
            self.ground.energies, self.excited.energies, self.fc.eta,
            electronic_gap=self.electronic_gap,
            carrier=self.carrier if carrier is None else carrier,
        )


def build_system(definition: Dict[str, Any]) -> MolecularSystem:
    """
    根据体系定义求解本征态并构建分子体系

    Args:
        definition: 体系定义, 包含 name, mass, r_min, r_max, n_points, ground, excited (势能对象),
            n_ground, n_excited, electronic_gap, dipole, carrier, 可选 lifetime

    Returns:
        MolecularSystem: 分子体系
    """
    required = ("mass", "r_min", "r_max", "n_points", "ground", "excited", "electronic_gap", "dipole", "carrier")
    missing = [key for key in required if key not in definition]
    if missing:
        raise ConfigurationError(f"体系定义缺少字段: {', '.join(missing)}", missing[0])
    if definition["mass"] <= 0:
        raise ConfigurationError(f"约化质量必须为正: {definition['mass']}", "mass")

    name = definition.get("name", "custom")
    logger.info(f"构建分子体系: {name}")

    grid = build_grid(definition["r_min"], definition["r_max"], definition["n_points"])
    ground = solve_vibrational(definition["ground"], grid, definition["mass"], definition.get("n_ground"))
    excited = solve_vibrational(definition["excited"], grid, definition["mass"], definition.get("n_excited"))
    fc = franck_condon_map(ground, excited, definition["dipole"])
    emission = emission_model(fc, ground, excited, definition["electronic_gap"],
                              lifetime=definition.get("lifetime"))

    return MolecularSystem(
        name=name,
        grid=grid,
        ground=ground,
        excited=excited,
        fc=fc,
        emission=emission,
        electronic_gap=float(definition["electronic_gap"]),
        carrier=float(definition["carrier"]),
        dipole=float(definition["dipole"]),
    )
