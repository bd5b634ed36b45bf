"""
泛函注册模块 - 管理所有优化泛函

本模块提供:
1. 泛函注册与按名称实例化
2. 代价项计算 eval_terms
3. 协态边界条件 costate_boundary (grad_<psi_n| J_T)
"""

import logging
from typing import Dict, Any

from core.errors import ConfigurationError
from dynamics.propagator import TwoSurfaceState
from functionals.assembly_functional import AssemblyFunctional
from functionals.symmetrized_functional import SymmetrizedFunctional
from functionals.terms import (
    ASSEMBLY, SYMMETRIZED, MODULUS, REAL_PART,
    BaseFunctional, FunctionalConfig, TargetOperators,
    sigma_approx, sigma_exact, target_operators,
)

logger = logging.getLogger(__name__)

FUNCTIONAL_REGISTRY = {
    SYMMETRIZED: SymmetrizedFunctional,
    ASSEMBLY: AssemblyFunctional,
}

# 命令行中的简写
VARIANT_ALIASES = {"sym": SYMMETRIZED, "ass": ASSEMBLY, SYMMETRIZED: SYMMETRIZED, ASSEMBLY: ASSEMBLY}


def register_functionals() -> Dict[str, type]:
    """
    返回所有可用的泛函类

    Returns:
        Dict[str, type]: 名称 -> 泛函类
    """
    logger.debug(f"已注册 {len(FUNCTIONAL_REGISTRY)} 个泛函: {sorted(FUNCTIONAL_REGISTRY)}")
    return dict(FUNCTIONAL_REGISTRY)


def build_functional(cfg: FunctionalConfig, ops: TargetOperators) -> BaseFunctional:
    """按配置中的 variant 实例化泛函"""
    functional_cls = FUNCTIONAL_REGISTRY.get(cfg.variant)
    if functional_cls is None:
        raise ConfigurationError(f"未注册的泛函 '{cfg.variant}'", "variant")
    return functional_cls(cfg, ops)


def eval_terms(final_states, cfg: FunctionalConfig, ops: TargetOperators) -> Dict[str, Any]:
    """
    计算末态系综的所有代价项

    Args:
        final_states: 末态系综 (成员 n = 0..n_max)
        cfg: 泛函配置
        ops: 目标算符

    Returns:
        Dict[str, Any]: J_ss, J_leak, J_yield, J_sym/J_ass, J_T, sigma
    """
    return build_functional(cfg, ops).evaluate(final_states)


def costate_boundary(final_states, cfg: FunctionalConfig, ops: TargetOperators) -> TwoSurfaceState:
    """
    协态在 t = T 的边界值 grad_<psi_n| J_T

    Args:
        final_states: 末态系综
        cfg: 泛函配置
        ops: 目标算符

    Returns:
        TwoSurfaceState: 每个成员一列的协态集合
    """
    return TwoSurfaceState(build_functional(cfg, ops).gradient(final_states), ops.n_ground)


__all__ = [
    "ASSEMBLY", "SYMMETRIZED", "MODULUS", "REAL_PART", "VARIANT_ALIASES",
    "FunctionalConfig", "TargetOperators", "BaseFunctional",
    "SymmetrizedFunctional", "AssemblyFunctional",
    "register_functionals", "build_functional",
    "eval_terms", "costate_boundary",
    "sigma_approx", "sigma_exact", "target_operators",
]
