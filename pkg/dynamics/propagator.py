"""
传播模块 - 双势能面波包在旋转波近似下的含时演化

哈密顿量 (振动本征基, 态向量 c = [c_g; c_e]):

    H_gg = diag(E^g)
    H_ee = diag(E^e + 电子能隙 - omega_L)
    H_eg = 1/2 eps(t) eta        (下三角块, 激发 <- 基态)
    H_ge = 1/2 eps(t)^* eta^T    (上三角块)

时间演化采用 Chebyshev 多项式展开, 每一步内场强为常数 (脉冲的区间值 step_values)。
系综中的多个态作为状态矩阵的列一起传播。

主要功能:
1. Chebyshev 单步传播 (dt < 0 即为反向传播)
2. 正向传播系综态, 反向传播协态
3. 轨迹存储: 内存不足时改用检查点 + 分块重算
"""

from dataclasses import dataclass
import logging
import math
from typing import Sequence, Union, Optional

import numpy as np
import pandas as pd
import psutil
from scipy.special import jv

from config.settings import NUMERICS_CONFIG
from core.errors import ConfigurationError, NumericalError, StepSizeError
from pulses.pulse import Pulse

logger = logging.getLogger(__name__)

FORWARD = "forward"
BACKWARD = "backward"


class TwoSurfaceHamiltonian:
    """
    旋转波近似下的双势能面哈密顿量 (振动本征基表象)

    Args:
        ground_energies: 基态振动能级 E^g (hartree)
        excited_energies: 激发态振动能级 E^e (hartree)
        eta: Franck-Condon 矩阵, 形状 (激发态能级数, 基态能级数)
        electronic_gap: 电子能隙 (hartree)
        carrier: 激光载频 omega_L (hartree)
    """

    def __init__(self, ground_energies: np.ndarray, excited_energies: np.ndarray, eta: np.ndarray,
                 electronic_gap: float = 0.0, carrier: float = 0.0):
        ground_energies = np.asarray(ground_energies, dtype=float)
        excited_energies = np.asarray(excited_energies, dtype=float)
        eta = np.asarray(eta, dtype=float)
        if eta.shape != (len(excited_energies), len(ground_energies)):
            raise ConfigurationError(
                f"耦合矩阵形状 {eta.shape} 与能级数 ({len(excited_energies)}, {len(ground_energies)}) 不符",
                "eta",
            )

        self.n_ground = len(ground_energies)
        self.n_excited = len(excited_energies)
        self.eta = eta
        self.electronic_gap = float(electronic_gap)
        self.carrier = float(carrier)
        self.diagonal = np.concatenate([ground_energies, excited_energies + self.electronic_gap - self.carrier])
        self.eta_norm = float(np.linalg.norm(eta, 2)) if eta.size else 0.0

        self.eta.flags.writeable = False
        self.diagonal.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.n_ground + self.n_excited

    @property
    def ground_energies(self) -> np.ndarray:
        return self.diagonal[:self.n_ground]

    def _expand(self, amplitudes: np.ndarray) -> np.ndarray:
        # 对角元按状态矩阵的维数广播
        return self.diagonal.reshape((-1,) + (1,) * (amplitudes.ndim - 1))

    def coupling(self, amplitudes: np.ndarray) -> np.ndarray:
        """下三角耦合块 M 作用于态: 基态分量经 eta 映射到激发态"""
        result = np.zeros_like(amplitudes, dtype=complex)
        result[self.n_ground:] = self.eta @ amplitudes[:self.n_ground]
        return result

    def coupling_adjoint(self, amplitudes: np.ndarray) -> np.ndarray:
        """M^dagger 作用于态: 激发态分量经 eta^T 映射回基态"""
        result = np.zeros_like(amplitudes, dtype=complex)
        result[:self.n_ground] = self.eta.T @ amplitudes[self.n_ground:]
        return result

    def apply(self, amplitudes: np.ndarray, eps: complex) -> np.ndarray:
        """H(eps) 作用于态向量或状态矩阵"""
        result = self._expand(amplitudes) * amplitudes
        ground = amplitudes[:self.n_ground]
        excited = amplitudes[self.n_ground:]
        result[:self.n_ground] += 0.5 * np.conj(eps) * (self.eta.T @ excited)
        result[self.n_ground:] += 0.5 * eps * (self.eta @ ground)
        return result

    def matrix(self, eps: complex) -> np.ndarray:
        """稠密矩阵形式 (检验用, 也用于构造 qutip 控制算符)"""
        h = np.diag(self.diagonal).astype(complex)
        h[self.n_ground:, :self.n_ground] = 0.5 * eps * self.eta
        h[:self.n_ground, self.n_ground:] = 0.5 * np.conj(eps) * self.eta.T
        return h

    def spectral_bounds(self, eps: complex):
        """本征值的上下界: 对角元范围向外扩展 1/2 |eps| ||eta||_2"""
        radius = 0.5 * abs(eps) * self.eta_norm
        return float(self.diagonal.min() - radius), float(self.diagonal.max() + radius)


@dataclass(frozen=True)
class TwoSurfaceState:
    """
    双势能面上的态 (或系综, 每列一个成员)

    Attributes:
        amplitudes: 本征基展开系数, 形状 (dim,) 或 (dim, 成员数)
        n_ground: 基态能级数, 前 n_ground 个分量属于基态
    """

    amplitudes: np.ndarray
    n_ground: int

    def __post_init__(self):
        amplitudes = np.array(self.amplitudes, dtype=complex)
        if amplitudes.ndim not in (1, 2):
            raise ConfigurationError(f"态的维数必须为 1 或 2, 实际为 {amplitudes.ndim}", "state")
        if not 0 <= self.n_ground <= amplitudes.shape[0]:
            raise ConfigurationError(f"基态能级数 {self.n_ground} 超出态的长度 {amplitudes.shape[0]}", "state")
        amplitudes.flags.writeable = False
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def psi_g(self) -> np.ndarray:
        return self.amplitudes[:self.n_ground]

    @property
    def psi_e(self) -> np.ndarray:
        return self.amplitudes[self.n_ground:]

    @property
    def n_members(self) -> int:
        return 1 if self.amplitudes.ndim == 1 else self.amplitudes.shape[1]

    def member(self, index: int) -> "TwoSurfaceState":
        if self.amplitudes.ndim == 1:
            if index != 0:
                raise IndexError(index)
            return self
        return TwoSurfaceState(self.amplitudes[:, index], self.n_ground)

    def norm(self):
        """sum |c_g|^2 + sum |c_e|^2 (系综时返回每个成员的范数)"""
        return np.sum(np.abs(self.amplitudes) ** 2, axis=0)

    def ground_populations(self) -> np.ndarray:
        return np.abs(self.psi_g) ** 2

    def excited_populations(self) -> np.ndarray:
        return np.abs(self.psi_e) ** 2

    @classmethod
    def ground_level(cls, hamiltonian: TwoSurfaceHamiltonian,
                     levels: Union[int, Sequence[int]]) -> "TwoSurfaceState":
        """基态振动本征态 |phi^g_v>; 传入多个能级时构成系综"""
        single = np.isscalar(levels)
        indices = [int(levels)] if single else [int(v) for v in levels]
        amplitudes = np.zeros((hamiltonian.dim, len(indices)), dtype=complex)
        for column, v in enumerate(indices):
            if not 0 <= v < hamiltonian.n_ground:
                raise ConfigurationError(f"基态能级 {v} 超出保留范围 0..{hamiltonian.n_ground - 1}", "level")
            amplitudes[v, column] = 1.0
        return cls(amplitudes[:, 0] if single else amplitudes, hamiltonian.n_ground)

    @classmethod
    def excited_level(cls, hamiltonian: TwoSurfaceHamiltonian, level: int) -> "TwoSurfaceState":
        if not 0 <= level < hamiltonian.n_excited:
            raise ConfigurationError(f"激发态能级 {level} 超出保留范围 0..{hamiltonian.n_excited - 1}", "level")
        amplitudes = np.zeros(hamiltonian.dim, dtype=complex)
        amplitudes[hamiltonian.n_ground + level] = 1.0
        return cls(amplitudes, hamiltonian.n_ground)


class ChebyshevPropagator:
    """
    Chebyshev 展开传播器

    exp(-i H dt) = exp(-i c dt) sum_k (2 - delta_k0) J_k(alpha) (-i)^k T_k(X)

    其中 H = c + h X, X 的谱在 [-1, 1] 内, alpha = h dt。
    展开在 |2 J_k(alpha)| < tolerance 且 k > alpha 处截断。

    Args:
        hamiltonian: 双势能面哈密顿量
        tolerance: 截断误差, 默认取 NUMERICS_CONFIG
        max_terms: 最大展开项数, 超过即报告步长过大
        memory_fraction: 轨迹最多占用的可用内存比例
    """

    def __init__(self, hamiltonian: TwoSurfaceHamiltonian, tolerance: float = None,
                 max_terms: int = None, memory_fraction: float = None):
        self.hamiltonian = hamiltonian
        self.tolerance = tolerance or NUMERICS_CONFIG["cheby_tolerance"]
        self.max_terms = max_terms or NUMERICS_CONFIG["cheby_max_terms"]
        self.memory_fraction = memory_fraction or NUMERICS_CONFIG["memory_fraction"]
        self._orders = np.arange(self.max_terms + 1)

    def coefficients(self, alpha: float, dt: float) -> np.ndarray:
        """展开系数 (2 - delta_k0) J_k(alpha), 已按截断准则裁剪"""
        magnitude = abs(alpha)
        bessel = jv(self._orders, magnitude)
        converged = (np.abs(2.0 * bessel) < self.tolerance) & (self._orders > magnitude)
        if not converged.any():
            suggested = abs(dt) * NUMERICS_CONFIG["max_phase_per_step"] / max(magnitude, np.finfo(float).tiny)
            raise StepSizeError(
                f"Chebyshev 展开在 {self.max_terms} 项内未收敛 (alpha = {magnitude:.3g})", suggested
            )
        n_terms = int(np.argmax(converged))
        coeffs = 2.0 * bessel[:n_terms]
        coeffs[0] = bessel[0]
        if alpha < 0:
            # J_k(-x) = (-1)^k J_k(x)
            coeffs = coeffs * (-1.0) ** self._orders[:n_terms]
        return coeffs

    def step_amplitudes(self, amplitudes: np.ndarray, eps: complex, dt: float) -> np.ndarray:
        """对系数数组传播一步 exp(-i H(eps) dt)"""
        e_min, e_max = self.hamiltonian.spectral_bounds(eps)
        center = 0.5 * (e_max + e_min)
        half_range = 0.5 * (e_max - e_min)
        phase = np.exp(-1j * center * dt)
        if half_range <= 0.0:
            return phase * amplitudes

        coeffs = self.coefficients(half_range * dt, dt)

        def normalized(vector):
            return (self.hamiltonian.apply(vector, eps) - center * vector) / half_range

        previous = np.asarray(amplitudes, dtype=complex)
        result = coeffs[0] * previous
        if len(coeffs) > 1:
            current = -1j * normalized(previous)
            result = result + coeffs[1] * current
            for c in coeffs[2:]:
                previous, current = current, -2j * normalized(current) + previous
                result += c * current
        return phase * result

    def step(self, state: TwoSurfaceState, eps: complex, dt: float) -> TwoSurfaceState:
        """
        传播一步

        Args:
            state: 当前态
            eps: 本步内的场强 eps(t_k)
            dt: 时间步长, 负值表示反向传播

        Returns:
            TwoSurfaceState: 传播后的态
        """
        if state.amplitudes.shape[0] != self.hamiltonian.dim:
            raise ConfigurationError(
                f"态的维数 {state.amplitudes.shape[0]} 与哈密顿量维数 {self.hamiltonian.dim} 不符", "state"
            )
        return TwoSurfaceState(self.step_amplitudes(state.amplitudes, eps, dt), state.n_ground)

    def auto_stride(self, n_points: int, state_bytes: int) -> int:
        """根据可用内存决定检查点间隔, 1 表示完整存储"""
        required = n_points * state_bytes
        budget = self.memory_fraction * psutil.virtual_memory().available
        if required <= budget:
            return 1
        stride = max(math.ceil(required / budget), math.ceil(math.sqrt(n_points)))
        logger.warning(f"完整轨迹需要 {required / 2**20:.1f} MiB, 超过内存预算 {budget / 2**20:.1f} MiB, "
                       f"改用每 {stride} 步一个检查点")
        return stride

    def propagate(self, start: TwoSurfaceState, pulse: Pulse, direction: str = FORWARD,
                  stride: Optional[int] = None) -> "Trajectory":
        """
        在整个脉冲上传播

        Args:
            start: 起始态 (正向为 t=0 的态, 反向为 t=T 的协态)
            pulse: 脉冲
            direction: FORWARD 或 BACKWARD
            stride: 检查点间隔, None 表示按可用内存自动决定

        Returns:
            Trajectory: 轨迹
        """
        if direction not in (FORWARD, BACKWARD):
            raise ConfigurationError(f"未知的传播方向 '{direction}'", "direction")
        if start.amplitudes.shape[0] != self.hamiltonian.dim:
            raise ConfigurationError(
                f"态的维数 {start.amplitudes.shape[0]} 与哈密顿量维数 {self.hamiltonian.dim} 不符", "state"
            )

        n_points = pulse.grid.n_points
        if stride is None:
            stride = self.auto_stride(n_points, start.amplitudes.nbytes)
        elif stride < 1:
            raise ConfigurationError(f"检查点间隔必须 >= 1: {stride}", "stride")

        trajectory = Trajectory(self, pulse, direction, stride, start)
        psi = np.array(start.amplitudes)
        for j in range(n_points - 1):
            psi = trajectory.advance(psi, j)
            if not np.all(np.isfinite(psi)):
                raise NumericalError(f"{direction} 传播出现 NaN/Inf", step=trajectory.time_index(j + 1))
            if (j + 1) % stride == 0 or j + 1 == n_points - 1:
                trajectory.store(j + 1, psi)
        logger.debug(f"{direction} 传播完成: {n_points - 1} 步, 检查点间隔 {stride}")
        return trajectory


class Trajectory:
    """
    传播轨迹

    内部以传播顺序编号 j 存储 (正向 j = k, 反向 j = N - k)。
    检查点之间的态在需要时从最近的检查点重新传播, 并缓存整个分块。

    Args:
        propagator: 生成轨迹的传播器
        pulse: 所用脉冲
        direction: FORWARD 或 BACKWARD
        stride: 检查点间隔
        start: 起始态
    """

    def __init__(self, propagator: ChebyshevPropagator, pulse: Pulse, direction: str, stride: int,
                 start: TwoSurfaceState):
        self.propagator = propagator
        self.pulse = pulse
        self.direction = direction
        self.stride = stride
        self.n_ground = start.n_ground
        self._checkpoints = {0: np.array(start.amplitudes)}
        self._block_start = None
        self._block = None

    @property
    def n_points(self) -> int:
        return self.pulse.grid.n_points

    def time_index(self, j: int) -> int:
        return j if self.direction == FORWARD else self.n_points - 1 - j

    def order_index(self, k: int) -> int:
        return k if self.direction == FORWARD else self.n_points - 1 - k

    def advance(self, amplitudes: np.ndarray, j: int) -> np.ndarray:
        """按传播顺序从 j 走到 j + 1"""
        dt = self.pulse.grid.dt
        if self.direction == FORWARD:
            return self.propagator.step_amplitudes(amplitudes, self.pulse.step_values[j], dt)
        k = self.n_points - 1 - j
        return self.propagator.step_amplitudes(amplitudes, self.pulse.step_values[k - 1], -dt)

    def store(self, j: int, amplitudes: np.ndarray):
        amplitudes = np.array(amplitudes)
        amplitudes.flags.writeable = False
        self._checkpoints[j] = amplitudes

    def amplitudes_at(self, k: int) -> np.ndarray:
        """时间网格点 t_k 上的系数数组"""
        if not 0 <= k < self.n_points:
            raise IndexError(f"时间索引 {k} 超出范围 0..{self.n_points - 1}")
        j = self.order_index(k)
        if j in self._checkpoints:
            return self._checkpoints[j]

        block_start = (j // self.stride) * self.stride
        if self._block_start != block_start:
            block = [self._checkpoints[block_start]]
            last = min(block_start + self.stride, self.n_points - 1)
            for i in range(block_start, last - 1):
                block.append(self.advance(block[-1], i))
            self._block_start = block_start
            self._block = block
        return self._block[j - block_start]

    def state_at(self, k: int) -> TwoSurfaceState:
        return TwoSurfaceState(self.amplitudes_at(k), self.n_ground)

    @property
    def initial(self) -> TwoSurfaceState:
        """传播起点的态"""
        return TwoSurfaceState(self._checkpoints[0], self.n_ground)

    @property
    def final(self) -> TwoSurfaceState:
        """传播终点的态 (正向为 t=T, 反向为 t=0)"""
        return TwoSurfaceState(self._checkpoints[self.n_points - 1], self.n_ground)

    def populations(self, member: int = 0, every: int = 1) -> pd.DataFrame:
        """
        某个系综成员的各能级布居随时间的变化 (调试输出)

        Args:
            member: 系综成员编号
            every: 每隔多少个时间点取一次

        Returns:
            pd.DataFrame: 列为 t_au, g0.., e0..
        """
        rows = []
        for k in range(0, self.n_points, every):
            amplitudes = self.amplitudes_at(k)
            column = amplitudes if amplitudes.ndim == 1 else amplitudes[:, member]
            rows.append(np.abs(column) ** 2)
        n_excited = len(rows[0]) - self.n_ground
        columns = [f"g{v}" for v in range(self.n_ground)] + [f"e{v}" for v in range(n_excited)]
        frame = pd.DataFrame(rows, columns=columns)
        frame.insert(0, "t_au", self.pulse.grid.times[::every])
        return frame


def step(hamiltonian: TwoSurfaceHamiltonian, state: TwoSurfaceState, eps_k: complex, dt: float) -> TwoSurfaceState:
    """单步传播 exp(-i H(eps_k) dt)"""
    return ChebyshevPropagator(hamiltonian).step(state, eps_k, dt)


def propagate_forward(hamiltonian: TwoSurfaceHamiltonian, initial: TwoSurfaceState, pulse: Pulse,
                      stride: Optional[int] = None) -> Trajectory:
    """从 t=0 正向传播到 t=T"""
    return ChebyshevPropagator(hamiltonian).propagate(initial, pulse, FORWARD, stride)


def propagate_backward(hamiltonian: TwoSurfaceHamiltonian, final_costate: TwoSurfaceState, pulse: Pulse,
                       stride: Optional[int] = None) -> Trajectory:
    """从 t=T 反向传播到 t=0 (同一哈密顿量, 负时间步)"""
    return ChebyshevPropagator(hamiltonian).propagate(final_costate, pulse, BACKWARD, stride)
