"""
Krotov 优化模块 - 用 krotov 包做单调收敛的脉冲优化

复包络 eps = Re eps + i Im eps 拆成两个实控制交给 krotov.optimize_pulses:

    H(t) = H_0 + Re eps(t) H_re + Im eps(t) H_im
    H_re = 1/2 (M + M^dagger),  H_im = i/2 (M - M^dagger)

M 为下三角耦合块 (激发 <- 基态)。系综成员 psi_n (初始为基态能级 n) 各为一个 krotov.Objective,
协态边界值 chi_n(T) = -grad_<psi_n| J_T 由 EnsembleChiConstructor 对整个系综一次算出,
传播由 ChebyshevKrotovPropagator 完成。

krotov 的一阶顺序更新 (sigma(t) = 0) 在区间 k 上使用旧协态 chi(t_k) 和新系综态 psi^{(i+1)}(t_k):

    Delta eps_k = S_k / lambda * Im sum_n <chi_n(t_k)| dH/d eps |psi_n(t_k)>

与 update_step 相同。参考脉冲取上一轮的脉冲, 代价 J_t = lambda sum_k |Delta eps_k|^2 / S_k dt。
"""

from dataclasses import dataclass, field
import logging
import time
from typing import Dict, Any, List, Optional

import krotov
import numpy as np
import pandas as pd
import psutil
import qutip
from krotov.conversions import pulse_onto_tlist

from core.errors import ConfigurationError, MonotonicityError, NumericalError
from dynamics.propagator import ChebyshevPropagator, TwoSurfaceHamiltonian, TwoSurfaceState
from functionals import build_functional, target_operators
from functionals.terms import BaseFunctional, FunctionalConfig
from pulses.pulse import Pulse, ShapeFunction, TimeGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KrotovOptions:
    """
    Krotov 迭代参数

    Attributes:
        step_lambda: 步长参数 lambda (越大更新越小)
        max_iterations: 最大迭代次数
        tolerance: |delta J_T| 低于该值即停止
        tol_mono: 允许 J_T 上升的最大幅度
        shape: 开关形状函数, None 表示默认的 T/20 上升沿
        complex_update: 同时更新场强的实部与虚部
        check_monotonicity: 违反单调性时中止
        use_nonlinear_sigma: 保留选项, 必须为 False
        keep_trajectories: 保留每次迭代的协态/新态轨迹 (调试用)
    """

    step_lambda: float = 1e4
    max_iterations: int = 1000
    tolerance: float = 1e-10
    tol_mono: float = 1e-10
    shape: Optional[ShapeFunction] = None
    complex_update: bool = True
    check_monotonicity: bool = True
    use_nonlinear_sigma: bool = False
    keep_trajectories: bool = False

    def __post_init__(self):
        if not self.step_lambda > 0:
            raise ConfigurationError(f"lambda 必须为正: {self.step_lambda}", "lambda")
        if self.tol_mono < 0:
            raise ConfigurationError(f"tol_mono 不能为负: {self.tol_mono}", "tol_mono")
        if self.max_iterations < 0:
            raise ConfigurationError(f"最大迭代次数不能为负: {self.max_iterations}", "max_iterations")
        if self.use_nonlinear_sigma:
            raise ConfigurationError("二阶 Krotov 更新 (sigma(t) != 0) 未实现", "use_nonlinear_sigma")


@dataclass
class OptimizationResult:
    """
    优化结果

    Attributes:
        pulse: 优化后的脉冲
        guess: 初始猜测脉冲
        records: 每次迭代的代价项记录 (第 0 条为猜测脉冲)
        converged: 是否因 |delta J_T| < tolerance 停止
        wall_time: 总耗时 (s)
        peak_memory_mb: 进程常驻内存峰值估计 (MiB)
        trajectories: keep_trajectories 时每次迭代的区间场强与轨迹
        message: krotov 给出的停止原因
    """

    pulse: Pulse
    guess: Pulse
    records: List[Dict[str, Any]]
    converged: bool = False
    wall_time: float = 0.0
    peak_memory_mb: float = 0.0
    trajectories: List[Dict[str, Any]] = field(default_factory=list)
    message: str = ""

    @property
    def iterations(self) -> int:
        return len(self.records) - 1

    @property
    def final(self) -> Dict[str, Any]:
        return self.records[-1]

    def convergence_frame(self) -> pd.DataFrame:
        """收敛曲线表, 每次迭代一行"""
        columns = [key for key in self.records[0] if key != "sigma"]
        frame = pd.DataFrame([{key: record[key] for key in columns} for record in self.records])
        frame["stability"] = 1.0 - frame["J_ss"]
        frame["excitation_yield"] = 1.0 - frame["J_yield"]
        return frame


def update_step(chi_at_t: np.ndarray, psi_new_at_t: np.ndarray, S_t: float, step_lambda: float,
                prev_eps: complex, hamiltonian: TwoSurfaceHamiltonian, complex_update: bool = True) -> complex:
    """
    单个时间区间的场强更新 (krotov 顺序更新的显式形式)

    Args:
        chi_at_t: 协态 chi_n(t_k), 形状 (dim,) 或 (dim, 成员数)
        psi_new_at_t: 新系综态 psi_n^{(i+1)}(t_k)
        S_t: 形状函数的区间值 S_k
        step_lambda: 步长参数 lambda
        prev_eps: 上一轮的区间场强 eps^{(i)}_k
        hamiltonian: 提供耦合块 M 的哈密顿量
        complex_update: False 时只更新实部

    Returns:
        complex: 新场强 eps^{(i+1)}_k
    """
    if S_t == 0.0:
        return complex(prev_eps)
    conj_chi = np.conj(chi_at_t)
    lower = np.sum(conj_chi * hamiltonian.coupling(psi_new_at_t))
    upper = np.sum(conj_chi * hamiltonian.coupling_adjoint(psi_new_at_t))
    scale = S_t / step_lambda
    delta_re = scale * 0.5 * np.imag(lower + upper)
    delta_im = scale * 0.5 * np.real(lower - upper) if complex_update else 0.0
    return complex(prev_eps) + complex(delta_re, delta_im)


def control_operators(hamiltonian: TwoSurfaceHamiltonian):
    """H_0, H_re = dH/dRe eps, H_im = dH/dIm eps (qutip 算符)"""
    h0 = hamiltonian.matrix(0.0)
    return (qutip.Qobj(h0),
            qutip.Qobj(hamiltonian.matrix(1.0) - h0),
            qutip.Qobj(hamiltonian.matrix(1.0j) - h0))


def stack_states(states) -> np.ndarray:
    """krotov 的态列表 -> 状态矩阵 (每列一个系综成员)"""
    return np.column_stack([state.full()[:, 0] for state in states])


class SampledControl:
    """
    网格采样值给出的控制函数

    krotov 以 control(t, args) 的形式在时间网格上离散化控制, 网格点上返回的就是采样值本身。
    """

    def __init__(self, times: np.ndarray, values: np.ndarray):
        self.times = np.array(times)
        self.values = np.array(values, dtype=float)

    def __call__(self, t, args=None):
        return np.interp(t, self.times, self.values)


class ChebyshevKrotovPropagator(krotov.propagators.Propagator):
    """
    把 ChebyshevPropagator 接到 krotov 的传播器接口上

    krotov 传入的 H 已代入当前区间的控制值: [H_0, [H_re, Re eps_k], [H_im, Im eps_k]]。
    """

    def __init__(self, propagator: ChebyshevPropagator):
        self.propagator = propagator

    def __call__(self, H, state, dt, c_ops=None, backwards=False, initialize=False):
        eps = complex(H[1][1], H[2][1])
        amplitudes = self.propagator.step_amplitudes(state.full()[:, 0], eps, -dt if backwards else dt)
        if not np.all(np.isfinite(amplitudes)):
            direction = "反向" if backwards else "正向"
            raise NumericalError(f"{direction}传播出现 NaN/Inf (eps = {eps:.3e})")
        return qutip.Qobj(amplitudes.reshape(-1, 1), dims=state.dims)


class EnsembleChiConstructor:
    """chi_n(T) = -grad_<psi_n| J_T, 对整个系综一次求梯度"""

    def __init__(self, functional: BaseFunctional):
        self.functional = functional
        self.norms = None

    def __call__(self, fw_states_T, objectives, tau_vals=None, **kwargs):
        boundary = -self.functional.gradient(stack_states(fw_states_T))
        chis = [qutip.Qobj(boundary[:, [n]], dims=state.dims) for n, state in enumerate(fw_states_T)]
        # krotov 反向传播的是 chi / norm(chi)
        self.norms = np.array([state_norm(chi) for chi in chis])
        return chis


def state_norm(state) -> float:
    """krotov 用该范数归一化协态; 零协态 (梯度为零) 保持不变"""
    norm = state.norm()
    return norm if norm > 0 else 1.0


class KrotovOptimizer:
    """
    Krotov 优化器

    Args:
        hamiltonian: 双势能面哈密顿量 (载频需与脉冲一致)
        cfg: 泛函配置
        opts: 迭代参数
    """

    def __init__(self, hamiltonian: TwoSurfaceHamiltonian, cfg: FunctionalConfig, opts: KrotovOptions):
        self.hamiltonian = hamiltonian
        self.cfg = cfg
        self.opts = opts
        self.ops = target_operators(hamiltonian.eta, cfg.n_max, cfg.target)
        self.functional = build_functional(cfg, self.ops)
        self.propagator = ChebyshevPropagator(hamiltonian)
        self._process = psutil.Process()
        self._peak_rss = 0
        self._records: List[Dict[str, Any]] = []
        self._trajectories: List[Dict[str, Any]] = []
        self._grid: Optional[TimeGrid] = None
        self._omega_L = 0.0
        self._chi_constructor = EnsembleChiConstructor(self.functional)
        logger.info(f"Krotov 优化器已初始化: 泛函 {cfg.variant}, n_max = {cfg.n_max}, "
                    f"lambda = {opts.step_lambda:.4g}, 权重 {cfg.weights}")

    def _sample_memory(self):
        self._peak_rss = max(self._peak_rss, self._process.memory_info().rss)

    def _ket(self, level: int) -> qutip.Qobj:
        amplitudes = TwoSurfaceState.ground_level(self.hamiltonian, level).amplitudes
        return qutip.Qobj(amplitudes.reshape(-1, 1))

    def _objectives(self, guess: Pulse):
        """每个系综成员一个 Objective; 两个控制是包络的实部和虚部"""
        times = guess.grid.times
        h0, h_re, h_im = control_operators(self.hamiltonian)
        controls = (SampledControl(times, guess.envelope.real), SampledControl(times, guess.envelope.imag))
        H = [h0, [h_re, controls[0]], [h_im, controls[1]]]
        target = self._ket(self.cfg.target)
        objectives = [krotov.Objective(initial_state=self._ket(n), target=target, H=H)
                      for n in range(self.cfg.n_members)]
        return objectives, controls

    def _pulse_options(self, guess: Pulse, controls) -> Dict[Any, Dict[str, Any]]:
        shape_function = self.opts.shape or ShapeFunction.default(guess.grid)
        update_shape = shape_function.update_shape(guess.grid)
        im_shape = update_shape if self.opts.complex_update else krotov.shapes.zero_shape
        return {
            controls[0]: dict(lambda_a=self.opts.step_lambda, update_shape=update_shape),
            controls[1]: dict(lambda_a=self.opts.step_lambda, update_shape=im_shape),
        }

    def _check_convergence(self):
        checks = [krotov.convergence.delta_below(self.opts.tolerance)]
        if self.opts.check_monotonicity:
            if self.opts.tol_mono == 0.0:
                checks.append(krotov.convergence.check_monotonic_error)
            else:
                checks.append(self._check_tolerant_monotonicity)
        return krotov.convergence.Or(*checks)

    def _check_tolerant_monotonicity(self, result):
        increase = result.info_vals[-1] - result.info_vals[-2]
        if increase > self.opts.tol_mono:
            return f"J_T 上升 {increase:.3e}, 超过 tol_mono = {self.opts.tol_mono:.1e}"
        return None

    def _to_pulse(self, re_steps: np.ndarray, im_steps: np.ndarray) -> Pulse:
        envelope = pulse_onto_tlist(np.asarray(re_steps)) + 1j * pulse_onto_tlist(np.asarray(im_steps))
        return Pulse(self._grid, envelope, self._omega_L)

    def _update_cost(self, guess_pulses, optimized_pulses, shape_arrays) -> float:
        """lambda sum |Delta eps_k|^2 / S_k dt, 只计 S_k > 0 的区间"""
        cost = 0.0
        for old, new, shape in zip(guess_pulses, optimized_pulses, shape_arrays):
            shape = np.asarray(shape, dtype=float)
            active = shape > 0
            change = (np.asarray(new) - np.asarray(old))[active]
            cost += float(np.sum(change ** 2 / shape[active]))
        return self.opts.step_lambda * cost * self._grid.dt

    def _info_hook(self, **kwargs) -> float:
        """krotov 每次迭代后调用: 记录代价项并作为 info_vals 返回 J_T"""
        self._sample_memory()
        iteration = kwargs["iteration"]
        optimized = kwargs["optimized_pulses"]
        record = {"iteration": iteration}
        record.update(self.functional.evaluate(stack_states(kwargs["fw_states_T"])))
        record["J_t"] = self._update_cost(kwargs["guess_pulses"], optimized, kwargs["shape_arrays"])
        record["fluence"] = self._to_pulse(*optimized).fluence()
        delta = record["J_T"] - self._records[-1]["J_T"] if self._records else 0.0
        self._records.append(record)
        self._log_record(record, delta)

        if self.opts.keep_trajectories and iteration > 0:
            self._trajectories.append({
                "iteration": iteration,
                "steps_before": np.asarray(kwargs["guess_pulses"][0]) + 1j * np.asarray(kwargs["guess_pulses"][1]),
                "steps_after": np.asarray(optimized[0]) + 1j * np.asarray(optimized[1]),
                "shape": np.asarray(kwargs["shape_arrays"][0], dtype=float),
                "backward": _trajectory_array(kwargs["backward_states"]) * self._chi_constructor.norms,
                "forward": _trajectory_array(kwargs["forward_states"]),
            })
        return record["J_T"]

    def _log_record(self, record: Dict[str, Any], delta: float):
        excitation_key = "J_sym" if "J_sym" in record else "J_ass"
        logger.info(
            f"迭代 {record['iteration']:4d}: J_T = {record['J_T']:.10e}, J_ss = {record['J_ss']:.4e}, "
            f"J_leak = {record['J_leak']:.4e}, J_yield = {record['J_yield']:.4e}, "
            f"{excitation_key} = {record[excitation_key]:.4e}, J_t = {record['J_t']:.3e}, dJ_T = {delta:.3e}"
        )

    def optimize(self, guess: Pulse) -> OptimizationResult:
        """
        从猜测脉冲开始迭代优化

        Args:
            guess: 猜测脉冲 (第 0 次迭代)

        Returns:
            OptimizationResult: 优化结果

        Raises:
            MonotonicityError: J_T 上升超过 tol_mono, error.result 为截至该次迭代的结果
        """
        started = time.perf_counter()
        self._records, self._trajectories = [], []
        self._grid, self._omega_L = guess.grid, guess.omega_L

        objectives, controls = self._objectives(guess)
        opt_result = krotov.optimize_pulses(
            objectives,
            pulse_options=self._pulse_options(guess, controls),
            tlist=np.array(guess.grid.times),
            propagator=ChebyshevKrotovPropagator(self.propagator),
            chi_constructor=self._chi_constructor,
            info_hook=self._info_hook,
            check_convergence=self._check_convergence(),
            iter_stop=self.opts.max_iterations,
            norm=state_norm,
        )

        re_control, im_control = opt_result.optimized_controls
        result = OptimizationResult(
            pulse=Pulse(guess.grid, np.asarray(re_control) + 1j * np.asarray(im_control), guess.omega_L),
            guess=guess, records=self._records, trajectories=self._trajectories,
            message=opt_result.message or "",
        )
        result = self._finish(result, started)

        if result.iterations:
            delta = result.final["J_T"] - self._records[-2]["J_T"]
            if self.opts.check_monotonicity and delta > self.opts.tol_mono:
                error = MonotonicityError(result.iterations, delta)
                error.result = result
                raise error
            if abs(delta) < self.opts.tolerance:
                result.converged = True
                logger.info(f"第 {result.iterations} 次迭代 |dJ_T| = {abs(delta):.3e} < "
                            f"{self.opts.tolerance:.1e}, 已收敛")
        return result

    def _finish(self, result: OptimizationResult, started: float) -> OptimizationResult:
        self._sample_memory()
        result.wall_time = time.perf_counter() - started
        result.peak_memory_mb = self._peak_rss / 2 ** 20
        final = result.final
        logger.info(f"优化结束: {result.iterations} 次迭代, J_T = {final['J_T']:.6e}, "
                    f"耗时 {result.wall_time:.1f} s, 内存峰值 {result.peak_memory_mb:.0f} MiB")
        return result


def _trajectory_array(states_per_objective) -> np.ndarray:
    """krotov 存储的态 -> 形状 (时间点数, dim, 成员数) 的数组"""
    return np.stack([stack_states(states_at_t) for states_at_t in zip(*states_per_objective)])


def optimize(system, guess: Pulse, cfg: FunctionalConfig, opts: KrotovOptions) -> OptimizationResult:
    """
    Krotov 优化入口

    Args:
        system: MolecularSystem (按脉冲载频构造哈密顿量) 或 TwoSurfaceHamiltonian
        guess: 猜测脉冲
        cfg: 泛函配置
        opts: 迭代参数

    Returns:
        OptimizationResult: 优化结果
    """
    if isinstance(system, TwoSurfaceHamiltonian):
        hamiltonian = system
    else:
        hamiltonian = system.hamiltonian(carrier=guess.omega_L)
    return KrotovOptimizer(hamiltonian, cfg, opts).optimize(guess)
