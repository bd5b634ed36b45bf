"""
泛函公共项模块 - 目标算符、激发概率 sigma 以及两种泛函共用的代价项

记号:
- 系综成员 n = 0..n_max 是从基态能级 |phi^g_n> 出发传播得到的末态, 以状态矩阵的列存储
- D = sum_l |eta_{l,target}|^2 |phi^e_l><phi^e_l|          (衰变到目标能级的加权激发投影)
- L = sum_{m' > n_max} sum_l |eta_{l m'}|^2 |phi^e_l><phi^e_l| (泄漏加权激发算符)
- P_out = sum_{m' > n_max} |phi^g_m'><phi^g_m'|              (系综之外的基态投影)

三个算符在本征基中都是对角的, 这里只存对角元 (长度为总维数 dim)。

梯度约定: <psi| 与 |psi> 视为独立变量, grad_<psi| <psi|X|psi> = X|psi>,
grad_<psi| Re<phi|psi> = 1/2 |phi>。
"""

from dataclasses import dataclass, field
import logging
from typing import Dict, Any

import numpy as np

from config.settings import FUNCTIONAL_WEIGHTS
from core.errors import ConfigurationError
from dynamics.propagator import TwoSurfaceState

logger = logging.getLogger(__name__)

SYMMETRIZED = "symmetrized"
ASSEMBLY = "assembly"
MODULUS = "modulus"
REAL_PART = "real"

_WEIGHT_KEYS = ("lambda_ss", "lambda_leak", "lambda_yield", "lambda_sym", "lambda_ass")


@dataclass(frozen=True)
class FunctionalConfig:
    """
    优化目标配置

    Attributes:
        variant: "symmetrized" 或 "assembly"
        n_max: 初始系综最高能级 (系综为 0..n_max)
        n_star: 参考能级 (对称项的基准或流水线的唯一激发目标)
        weights: 各项权重 lambda_ss, lambda_leak, lambda_yield, lambda_sym, lambda_ass
        ss_form: J_ss 的重叠形式, "modulus" 或 "real"
        ass_form: J_ass 的重叠形式, "modulus" 或 "real"
        target: 冷却目标能级
    """

    variant: str
    n_max: int
    n_star: int = 1
    weights: Dict[str, float] = field(default_factory=dict)
    ss_form: str = MODULUS
    ass_form: str = REAL_PART
    target: int = 0

    def __post_init__(self):
        if self.variant not in (SYMMETRIZED, ASSEMBLY):
            raise ConfigurationError(f"未知的泛函类型 '{self.variant}', 可选 {SYMMETRIZED} 或 {ASSEMBLY}", "variant")
        if self.n_max < 0:
            raise ConfigurationError(f"n_max 不能为负: {self.n_max}", "n_max")
        if self.n_max >= 1 and not 1 <= self.n_star <= self.n_max:
            raise ConfigurationError(f"n_star 必须在 1..{self.n_max} 内, 实际为 {self.n_star}", "n_star")
        if not 0 <= self.target <= self.n_max:
            raise ConfigurationError(f"目标能级 {self.target} 必须属于初始系综 0..{self.n_max}", "target")
        for form_key in ("ss_form", "ass_form"):
            if getattr(self, form_key) not in (MODULUS, REAL_PART):
                raise ConfigurationError(f"未知的重叠形式 '{getattr(self, form_key)}'", form_key)

        weights = {key: 0.0 for key in _WEIGHT_KEYS}
        for key, value in self.weights.items():
            if key not in weights:
                raise ConfigurationError(f"未知的权重 '{key}'", key)
            if value < 0:
                raise ConfigurationError(f"权重 {key} 不能为负: {value}", key)
            weights[key] = float(value)
        if not any(value > 0 for value in weights.values()):
            raise ConfigurationError("至少需要一个正的泛函权重", "weights")
        object.__setattr__(self, "weights", weights)

    @classmethod
    def with_defaults(cls, variant: str, n_max: int, **overrides) -> "FunctionalConfig":
        """使用 FUNCTIONAL_WEIGHTS 中的默认权重, overrides 可覆盖任意权重或字段"""
        if variant not in FUNCTIONAL_WEIGHTS:
            raise ConfigurationError(f"未知的泛函类型 '{variant}'", "variant")
        weights = dict(FUNCTIONAL_WEIGHTS[variant])
        for key in list(overrides):
            if key in _WEIGHT_KEYS:
                weights[key] = overrides.pop(key)
        return cls(variant=variant, n_max=n_max, weights=weights, **overrides)

    @property
    def n_members(self) -> int:
        return self.n_max + 1


@dataclass(frozen=True)
class TargetOperators:
    """
    对角目标算符 (长度 dim 的对角元)

    Attributes:
        decay: D 的对角元, 基态部分为零
        leak: P_out + L 的对角元
        n_ground: 基态能级数
        n_max: 系综最高能级
    """

    decay: np.ndarray
    leak: np.ndarray
    n_ground: int
    n_max: int

    @property
    def outside(self) -> np.ndarray:
        """P_out 的对角元 (基态部分)"""
        return self.leak[:self.n_ground]

    @property
    def leak_excited(self) -> np.ndarray:
        """L 的对角元 (激发态部分)"""
        return self.leak[self.n_ground:]

    @property
    def sigma_ceiling(self) -> float:
        """归一化态上 <D> 的最大值 max_l |eta_{l,target}|^2"""
        return float(self.decay.max()) if self.decay.size else 0.0


def target_operators(eta: np.ndarray, n_max: int, target: int = 0) -> TargetOperators:
    """
    由 Franck-Condon 矩阵构造目标算符

    Args:
        eta: Franck-Condon 矩阵, 形状 (激发态能级数, 基态能级数)
        n_max: 系综最高能级
        target: 冷却目标能级

    Returns:
        TargetOperators: 目标算符
    """
    n_excited, n_ground = eta.shape
    if n_max >= n_ground:
        raise ConfigurationError(f"n_max = {n_max} 超出保留的基态能级数 {n_ground}", "n_max")
    if not 0 <= target < n_ground:
        raise ConfigurationError(f"目标能级 {target} 超出保留的基态能级数 {n_ground}", "target")

    decay = np.concatenate([np.zeros(n_ground), eta[:, target] ** 2])
    outside = np.zeros(n_ground)
    outside[n_max + 1:] = 1.0
    leak = np.concatenate([outside, (eta[:, n_max + 1:] ** 2).sum(axis=1)])
    decay.flags.writeable = False
    leak.flags.writeable = False
    return TargetOperators(decay=decay, leak=leak, n_ground=n_ground, n_max=n_max)


def _amplitudes(state) -> np.ndarray:
    amplitudes = state.amplitudes if isinstance(state, TwoSurfaceState) else state
    return np.asarray(amplitudes, dtype=complex)


def expectation(diagonal: np.ndarray, amplitudes: np.ndarray):
    """对角算符的期望值 <psi|X|psi> (状态矩阵时逐列)"""
    weights = diagonal.reshape((-1,) + (1,) * (amplitudes.ndim - 1))
    return np.real(np.sum(weights * np.abs(amplitudes) ** 2, axis=0))


def sigma_approx(final_state, ops: TargetOperators):
    """
    激发概率的对角近似 sigma = <psi(T)|D|psi(T)>

    Args:
        final_state: 末态 (TwoSurfaceState 或系数数组, 系综时逐列计算)
        ops: 目标算符

    Returns:
        float 或 np.ndarray: sigma (系综时为每个成员的数组)
    """
    return expectation(ops.decay, _amplitudes(final_state))


def sigma_exact(final_state, eta: np.ndarray, excited_energies: np.ndarray, lifetime: float,
                target: int = 0, n_ground: int = None) -> float:
    """
    含非对角干涉项的激发概率 (对激发态自由演化在 [0, T_e] 上做时间平均)

    sigma = Re sum_{n,m} a_n^* a_m (exp(i dE T_e) - 1) / (i T_e dE),  a_n = eta_{n,target} c^e_n

    Args:
        final_state: 单个末态
        eta: Franck-Condon 矩阵
        excited_energies: 激发态振动能级
        lifetime: 激发态寿命 T_e (a.u.)
        target: 冷却目标能级
        n_ground: 基态能级数, 默认取 eta 的列数

    Returns:
        float: sigma
    """
    if lifetime <= 0:
        raise ConfigurationError(f"激发态寿命必须为正: {lifetime}", "lifetime")
    amplitudes = _amplitudes(final_state)
    if amplitudes.ndim != 1:
        raise ConfigurationError("sigma_exact 只接受单个态", "state")
    n_ground = eta.shape[1] if n_ground is None else n_ground

    weighted = eta[:, target] * amplitudes[n_ground:]
    delta = np.subtract.outer(excited_energies, excited_energies)
    phase = delta * lifetime
    degenerate = np.abs(delta) <= 1e-14 * np.max(np.abs(excited_energies))
    off_diagonal_degenerate = degenerate & ~np.eye(len(excited_energies), dtype=bool)
    if off_diagonal_degenerate.any():
        logger.warning(f"激发态存在 {int(off_diagonal_degenerate.sum()) // 2} 对简并能级, 其平均因子取极限值 1")

    safe_phase = np.where(degenerate, 1.0, phase)
    factors = np.where(degenerate, 1.0 + 0.0j, (np.exp(1j * safe_phase) - 1.0) / (1j * safe_phase))
    return float(np.real(np.conj(weighted) @ factors @ weighted))


class BaseFunctional:
    """
    优化泛函基类

    子类实现激发相关的各项 (_excitation_terms / _excitation_gradient),
    这里提供两种泛函共用的稳态项 J_ss 与泄漏项 J_leak。

    Args:
        cfg: 泛函配置
        ops: 目标算符
    """

    name = "base"
    # 激发相关项名 -> 权重名, 子类覆盖
    excitation_weights: Dict[str, str] = {}

    def __init__(self, cfg: FunctionalConfig, ops: TargetOperators):
        if ops.n_max != cfg.n_max:
            raise ConfigurationError(f"目标算符的 n_max = {ops.n_max} 与配置 {cfg.n_max} 不符", "n_max")
        self.cfg = cfg
        self.ops = ops
        self.weights = cfg.weights

    def _check(self, final_states) -> np.ndarray:
        amplitudes = _amplitudes(final_states)
        if amplitudes.ndim != 2 or amplitudes.shape[1] < self.cfg.n_members:
            members = 1 if amplitudes.ndim == 1 else amplitudes.shape[1]
            raise ConfigurationError(
                f"系综需要 {self.cfg.n_members} 个成员 (n = 0..{self.cfg.n_max}), 实际只有 {members} 个",
                "ensemble",
            )
        return amplitudes[:, :self.cfg.n_members]

    def _stability(self, amplitudes: np.ndarray) -> float:
        target = self.cfg.target
        overlap = amplitudes[target, target]
        if self.cfg.ss_form == MODULUS:
            return 1.0 - float(np.abs(overlap) ** 2)
        return 1.0 - float(np.real(overlap))

    def _stability_gradient(self, amplitudes: np.ndarray, gradient: np.ndarray):
        target = self.cfg.target
        if self.cfg.ss_form == MODULUS:
            gradient[target, target] -= self.weights["lambda_ss"] * amplitudes[target, target]
        else:
            gradient[target, target] -= 0.5 * self.weights["lambda_ss"]

    def _leakage(self, amplitudes: np.ndarray) -> float:
        return float(np.sum(expectation(self.ops.leak, amplitudes)))

    def _excitation_terms(self, amplitudes: np.ndarray, sigma: np.ndarray) -> Dict[str, float]:
        raise NotImplementedError

    def _excitation_gradient(self, amplitudes: np.ndarray, sigma: np.ndarray, gradient: np.ndarray):
        raise NotImplementedError

    def evaluate(self, final_states) -> Dict[str, Any]:
        """
        计算各代价项

        Args:
            final_states: 末态系综 (成员 n = 0..n_max)

        Returns:
            Dict[str, Any]: J_ss, J_leak, J_yield, J_sym 或 J_ass, J_T 以及 sigma 数组
        """
        amplitudes = self._check(final_states)
        sigma = sigma_approx(amplitudes, self.ops)
        record = {
            "J_ss": self._stability(amplitudes),
            "J_leak": self._leakage(amplitudes),
        }
        record.update(self._excitation_terms(amplitudes, sigma))
        total = (self.weights["lambda_ss"] * record["J_ss"]
                 + self.weights["lambda_leak"] * record["J_leak"])
        for key, weight_key in self.excitation_weights.items():
            total += self.weights[weight_key] * record[key]
        record["J_T"] = float(total)
        record["sigma"] = sigma
        return record

    def gradient(self, final_states) -> np.ndarray:
        """grad_<psi_n| J_T, 与状态矩阵同形"""
        amplitudes = self._check(final_states)
        sigma = sigma_approx(amplitudes, self.ops)
        gradient = self.weights["lambda_leak"] * self.ops.leak[:, None] * amplitudes
        self._stability_gradient(amplitudes, gradient)
        self._excitation_gradient(amplitudes, sigma, gradient)
        return gradient
