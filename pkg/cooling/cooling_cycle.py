"""
冷却循环模块 - 用固定脉冲重复进行激发/自发辐射循环

每个循环:
1. 相干步: 对每个基态能级 m 传播 |phi^g_m>, 得到脉冲后的基态/激发态布居
2. 耗散步: 激发态布居按 Einstein 系数的分支比 A_{l,m''}/gamma_l 全部衰变回基态,
   辐射到保留基组之外 (更高束缚态和连续态) 的部分计入损失
3. 基态相干在循环之间被丢弃 (随机相位), 下一个脉冲只看到布居

由于脉冲固定, 整个循环是布居向量上的一个线性映射, 只需计算一次:

    p_{k+1}[m''] = sum_m M[m'', m] p_k[m]
    M[m'', m] = |<phi^g_m''|psi_m(T)>|^2 + sum_l |<phi^e_l|psi_m(T)>|^2 (1 - escape_l) A_{l,m''}/gamma_l

绩效指标:
- 目标能级布居首次达到 90% 所需的循环数
- 目标能级的最大布居及其所在循环
- 纯度 P = sum p^2 / (sum p)^2
"""

from dataclasses import dataclass, field
import logging
from typing import Dict, Any, List, Sequence

import numpy as np
import pandas as pd

from core.errors import ConfigurationError
from dynamics.propagator import FORWARD, ChebyshevPropagator, TwoSurfaceState
from molecule.emission import EmissionModel
from pulses.pulse import Pulse

logger = logging.getLogger(__name__)

NOT_ACHIEVED = "not achieved"


@dataclass(frozen=True)
class CoolingState:
    """
    循环之间的非相干系综

    Attributes:
        populations: 各基态能级的布居
        lost: 累计损失 (保留基组之外以及解离)
        cycle_index: 已完成的循环数
    """

    populations: np.ndarray
    lost: float = 0.0
    cycle_index: int = 0

    def __post_init__(self):
        populations = np.array(self.populations, dtype=float)
        if populations.ndim != 1:
            raise ConfigurationError("布居必须是一维数组", "populations")
        if np.any(populations < -1e-15) or self.lost < -1e-15:
            raise ConfigurationError("布居和损失不能为负", "populations")
        populations.flags.writeable = False
        object.__setattr__(self, "populations", populations)

    @property
    def total(self) -> float:
        return float(self.populations.sum() + self.lost)

    def purity(self) -> float:
        retained = self.populations.sum()
        if retained <= 0:
            return 0.0
        return float(np.sum(self.populations ** 2) / retained ** 2)


@dataclass(frozen=True)
class CycleMap:
    """
    一个冷却循环的布居映射

    Attributes:
        matrix: M[m'', m], 脉冲前基态能级 m 到循环后能级 m'' 的转移概率
        lost: 每一列流失到保留基组之外的概率
    """

    matrix: np.ndarray
    lost: np.ndarray

    @classmethod
    def from_responses(cls, ground_response: np.ndarray, excited_response: np.ndarray,
                       branching: np.ndarray, escape: np.ndarray = None) -> "CycleMap":
        """
        由脉冲响应和分支比组合出循环映射

        Args:
            ground_response: |<phi^g_m'|psi_m(T)>|^2, 形状 (基态能级数, 基态能级数)
            excited_response: |<phi^e_l|psi_m(T)>|^2, 形状 (激发态能级数, 基态能级数)
            branching: A_{l,m''}/gamma_l, 形状 (激发态能级数, 基态能级数)
            escape: 每个激发态能级辐射到保留基组之外的比例

        Returns:
            CycleMap: 循环映射
        """
        n_excited = excited_response.shape[0]
        if branching.shape != (n_excited, ground_response.shape[0]):
            raise ConfigurationError(f"分支比形状 {branching.shape} 与响应矩阵不符", "branching")
        escape = np.zeros(n_excited) if escape is None else np.asarray(escape, dtype=float)

        decayed = (1.0 - escape)[:, None] * excited_response
        matrix = ground_response + branching.T @ decayed
        norms = ground_response.sum(axis=0) + excited_response.sum(axis=0)
        lost = np.clip(norms - matrix.sum(axis=0), 0.0, None)
        matrix.flags.writeable = False
        lost.flags.writeable = False
        return cls(matrix=matrix, lost=lost)

    @classmethod
    def identity(cls, n_levels: int) -> "CycleMap":
        return cls(matrix=np.eye(n_levels), lost=np.zeros(n_levels))

    @property
    def n_levels(self) -> int:
        return self.matrix.shape[0]

    def apply(self, state: CoolingState) -> CoolingState:
        after = self.matrix @ state.populations
        lost = state.lost + float(state.populations.sum() - after.sum())
        return CoolingState(np.clip(after, 0.0, None), max(lost, state.lost), state.cycle_index + 1)


@dataclass
class CoolingRun:
    """
    冷却模拟结果

    Attributes:
        history: 第 0..n_cycles 个循环后的状态
        summary: 统计指标
    """

    history: List[CoolingState]
    summary: Dict[str, Any] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        """历史表: cycle, p_0.., lost, purity"""
        populations = np.array([state.populations for state in self.history])
        frame = pd.DataFrame(populations, columns=[f"p_{v}" for v in range(populations.shape[1])])
        frame.insert(0, "cycle", [state.cycle_index for state in self.history])
        frame["lost"] = [state.lost for state in self.history]
        frame["purity"] = [state.purity() for state in self.history]
        return frame


def equipartition(n_levels: int, levels: Sequence[int] = range(1, 11)) -> CoolingState:
    """
    在指定能级上均分布居的初始态 (默认 v'' = 1..10)

    Args:
        n_levels: 保留的基态能级数
        levels: 均分布居的能级

    Returns:
        CoolingState: 初始态
    """
    levels = list(levels)
    if not levels or max(levels) >= n_levels or min(levels) < 0:
        raise ConfigurationError(f"初始能级 {levels} 超出保留范围 0..{n_levels - 1}", "initial_levels")
    populations = np.zeros(n_levels)
    populations[levels] = 1.0 / len(levels)
    return CoolingState(populations)


def build_cycle_map(pulse: Pulse, system, emission: EmissionModel = None) -> CycleMap:
    """
    用给定脉冲计算冷却循环映射

    Args:
        pulse: 脉冲 (优化脉冲或任意脉冲)
        system: MolecularSystem
        emission: 辐射模型, 默认取体系自带的

    Returns:
        CycleMap: 循环映射
    """
    emission = emission or system.emission
    hamiltonian = system.hamiltonian(carrier=pulse.omega_L)
    initial = TwoSurfaceState.ground_level(hamiltonian, list(range(hamiltonian.n_ground)))
    propagator = ChebyshevPropagator(hamiltonian)
    final = propagator.propagate(initial, pulse, FORWARD, stride=pulse.grid.n_points - 1).final

    cycle_map = CycleMap.from_responses(
        ground_response=np.abs(final.psi_g) ** 2,
        excited_response=np.abs(final.psi_e) ** 2,
        branching=emission.branching(),
        escape=emission.escape,
    )
    logger.info(f"循环映射已计算: {cycle_map.n_levels} 个基态能级, "
                f"单循环最大损失 {cycle_map.lost.max():.3e}")
    return cycle_map


def summarize(history: List[CoolingState], target: int = 0, threshold: float = 0.9) -> Dict[str, Any]:
    """
    统计冷却历史

    Args:
        history: 冷却历史
        target: 目标能级
        threshold: 布居阈值

    Returns:
        Dict[str, Any]: cycles_to_90pct, max_target_population, cycles_at_max, final_purity, final_lost
    """
    target_populations = np.array([state.populations[target] for state in history])
    reached = np.nonzero(target_populations >= threshold)[0]
    best = int(np.argmax(target_populations))
    return {
        "cycles_to_90pct": int(history[reached[0]].cycle_index) if reached.size else NOT_ACHIEVED,
        "max_target_population": float(target_populations[best]),
        "cycles_at_max": int(history[best].cycle_index),
        "final_purity": history[-1].purity(),
        "final_lost": history[-1].lost,
        "purity_trace": [state.purity() for state in history],
    }


def simulate_cooling(initial: CoolingState, cycle_map: CycleMap, n_cycles: int, target: int = 0) -> CoolingRun:
    """
    重复应用循环映射

    Args:
        initial: 初始非相干系综
        cycle_map: 循环映射
        n_cycles: 循环次数
        target: 目标能级

    Returns:
        CoolingRun: 历史与统计
    """
    if n_cycles < 0:
        raise ConfigurationError(f"循环次数不能为负: {n_cycles}", "n_cycles")
    if len(initial.populations) != cycle_map.n_levels:
        raise ConfigurationError(
            f"初始布居长度 {len(initial.populations)} 与映射维数 {cycle_map.n_levels} 不符", "initial"
        )

    history = [initial]
    state = initial
    for _ in range(n_cycles):
        state = cycle_map.apply(state)
        history.append(state)

    run = CoolingRun(history=history, summary=summarize(history, target))
    logger.info(f"冷却模拟完成: {n_cycles} 个循环, 目标能级最大布居 {run.summary['max_target_population']:.4f} "
                f"(第 {run.summary['cycles_at_max']} 个循环), 达到 90% 所需循环: {run.summary['cycles_to_90pct']}")
    return run


def compare_pulses(system, pulses: Dict[str, Pulse], initial: CoolingState, n_cycles: int,
                   target: int = 0) -> Dict[str, CoolingRun]:
    """
    用同一初始系综比较多个脉冲 (猜测脉冲、频谱截断脉冲、优化脉冲)

    Returns:
        Dict[str, CoolingRun]: 脉冲名 -> 冷却结果
    """
    runs = {}
    for name, pulse in pulses.items():
        logger.info(f"冷却模拟: 脉冲 '{name}'")
        runs[name] = simulate_cooling(initial, build_cycle_map(pulse, system), n_cycles, target)
    return runs


def comparison_frame(runs: Dict[str, CoolingRun]) -> pd.DataFrame:
    """每个脉冲一行的统计表"""
    rows = []
    for name, run in runs.items():
        row = {"pulse": name}
        row.update({key: value for key, value in run.summary.items() if key != "purity_trace"})
        rows.append(row)
    return pd.DataFrame(rows)
