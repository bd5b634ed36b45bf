"""
激光脉冲模块 - 均匀时间网格上的复包络脉冲

主要功能:
1. 时间网格与开关形状函数 S(t)
2. 高斯变换极限初始猜测脉冲
3. 脉冲频谱 (以 cm-1 为横轴)
4. 脉冲能量/通量
5. 频谱截断 (未整形的实验基准脉冲)

离散约定:
- 时间网格有 n_steps + 1 个点 t_k = k dt
- 包络在所有网格点上采样; 传播时第 k 步 [t_k, t_k+1] 使用区间值 step_values[k] (分段常数),
  区间值与网格值之间用 krotov.conversions 的约定互相转换
- 频谱横轴为 omega_L - omega: 包络含 exp(i delta t) 时有效载频为 omega_L - delta
"""

from dataclasses import dataclass, field
from functools import partial
import logging
from typing import Dict, Any

import numpy as np
import pandas as pd
from krotov.conversions import control_onto_interval
from krotov.shapes import flattop
from scipy import constants

from core.errors import ConfigurationError
from core.units import hartree_to_wavenumber, wavenumber_to_hartree, au_to_fs

logger = logging.getLogger(__name__)

_AU_FIELD = constants.physical_constants["atomic unit of electric field"][0]
_AU_TIME = constants.physical_constants["atomic unit of time"][0]
_BOHR = constants.physical_constants["Bohr radius"][0]

# 脉冲 CSV 的列名 (时间列 t_fs 之后)
PULSE_COLUMNS = ("Re(ε)", "Im(ε)", "|ε|", "φ(t)")


@dataclass(frozen=True)
class TimeGrid:
    """
    均匀时间网格

    Attributes:
        t_final: 脉冲总时长 T (a.u.)
        n_steps: 时间步数
    """

    t_final: float
    n_steps: int
    times: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.t_final > 0:
            raise ConfigurationError(f"脉冲时长必须为正: {self.t_final}", "t_final")
        if self.n_steps < 2:
            raise ConfigurationError(f"时间步数至少为 2: {self.n_steps}", "n_steps")
        times = np.arange(self.n_steps + 1) * self.dt
        times.flags.writeable = False
        object.__setattr__(self, "times", times)

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    @property
    def n_points(self) -> int:
        return self.n_steps + 1


@dataclass(frozen=True)
class ShapeFunction:
    """
    开关形状函数: sin^2 上升/下降沿, 中间平台为 1

    Attributes:
        t_ramp: 上升/下降沿时长 (a.u.)
    """

    t_ramp: float

    def _check(self, grid: TimeGrid):
        if not 0.0 < self.t_ramp <= 0.5 * grid.t_final:
            raise ConfigurationError(
                f"上升沿时长 {self.t_ramp} 必须在 (0, T/2] 内, T = {grid.t_final}", "t_ramp"
            )

    def values(self, grid: TimeGrid) -> np.ndarray:
        self._check(grid)
        t = grid.times
        shape = np.ones_like(t)
        rising = t < self.t_ramp
        falling = t > grid.t_final - self.t_ramp
        shape[rising] = np.sin(0.5 * np.pi * t[rising] / self.t_ramp) ** 2
        shape[falling] = np.sin(0.5 * np.pi * (grid.t_final - t[falling]) / self.t_ramp) ** 2
        # 端点严格为零
        shape[0] = 0.0
        shape[-1] = 0.0
        return shape

    def update_shape(self, grid: TimeGrid):
        """S(t) 的可调用形式, 供 krotov.optimize_pulses 的 update_shape 使用"""
        self._check(grid)
        return partial(flattop, t_start=0.0, t_stop=grid.t_final, t_rise=self.t_ramp, func="sinsq")

    @classmethod
    def default(cls, grid: TimeGrid) -> "ShapeFunction":
        """默认上升沿为 T/20"""
        return cls(grid.t_final / 20.0)


@dataclass(frozen=True)
class Pulse:
    """
    复包络脉冲

    Attributes:
        grid: 时间网格
        envelope: 复包络 eps(t_k) (a.u.), 长度 n_steps + 1
        omega_L: 载频 (hartree)
        step_values: 每个时间步上的分段常数场强, 长度 n_steps
    """

    grid: TimeGrid
    envelope: np.ndarray
    omega_L: float
    step_values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        envelope = np.array(self.envelope, dtype=complex)
        if envelope.shape != (self.grid.n_points,):
            raise ConfigurationError(
                f"包络长度 {envelope.shape} 与时间网格点数 {self.grid.n_points} 不符", "envelope"
            )
        if not np.all(np.isfinite(envelope)):
            raise ConfigurationError("脉冲包络包含非有限值", "envelope")
        envelope.flags.writeable = False
        object.__setattr__(self, "envelope", envelope)
        step_values = control_onto_interval(envelope.real) + 1j * control_onto_interval(envelope.imag)
        step_values.flags.writeable = False
        object.__setattr__(self, "step_values", step_values)

    def with_envelope(self, envelope: np.ndarray) -> "Pulse":
        """复制为一个新包络的脉冲 (载频与网格不变)"""
        return Pulse(self.grid, envelope, self.omega_L)

    @property
    def amplitude(self) -> np.ndarray:
        return np.abs(self.envelope)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.envelope)

    def fluence(self) -> float:
        """sum |eps(t_k)|^2 dt (a.u.)"""
        return float(np.sum(np.abs(self.envelope) ** 2) * self.grid.dt)

    def to_frame(self) -> pd.DataFrame:
        """脉冲表: t_fs, Re(ε), Im(ε), |ε|, φ(t)"""
        re, im, modulus, phase = PULSE_COLUMNS
        return pd.DataFrame({
            "t_fs": au_to_fs(self.grid.times),
            re: self.envelope.real,
            im: self.envelope.imag,
            modulus: self.amplitude,
            phase: self.phase,
        })


@dataclass(frozen=True)
class Spectrum:
    """
    脉冲频谱

    Attributes:
        omega: 相对载频的角频率偏移 (hartree), 升序 (FFT 频率)
        wavenumber: 绝对波数 (cm-1) = (omega_L - omega) / (hc)
        intensity: |eps~(omega)|^2 (a.u.)
        d_omega: 频率间隔
    """

    omega: np.ndarray
    wavenumber: np.ndarray
    intensity: np.ndarray
    d_omega: float

    def to_frame(self, normalize: bool = True) -> pd.DataFrame:
        """频谱表 (按波数升序, 可归一化到峰值 1)"""
        intensity = self.intensity
        if normalize and intensity.max() > 0:
            intensity = intensity / intensity.max()
        frame = pd.DataFrame({"wavenumber_cm-1": self.wavenumber, "intensity": intensity})
        return frame.sort_values("wavenumber_cm-1", kind="mergesort").reset_index(drop=True)


def apply_shape(pulse: Pulse, shape: ShapeFunction) -> Pulse:
    """把脉冲乘以形状函数, 使其在 t=0 和 t=T 处为零"""
    return pulse.with_envelope(pulse.envelope * shape.values(pulse.grid))


def gaussian_guess(grid: TimeGrid, center: float, fwhm: float, peak: float,
                   detuning: float = 0.0, omega_L: float = 0.0) -> Pulse:
    """
    高斯变换极限猜测脉冲

    eps(t) = peak * exp(-4 ln2 (t - center)^2 / fwhm^2) * exp(i detuning t)

    Args:
        grid: 时间网格
        center: 脉冲中心 (a.u.)
        fwhm: 包络振幅的半高全宽 (a.u.); 强度半高全宽为 fwhm / sqrt(2)
        peak: 峰值场强 (a.u.)
        detuning: 相对载频的失谐 (hartree)
        omega_L: 载频 (hartree)

    Returns:
        Pulse: 猜测脉冲
    """
    if not 0.0 < center < grid.t_final:
        raise ConfigurationError(f"脉冲中心 {center} 必须在 (0, T) 内", "center")
    if fwhm <= 0:
        raise ConfigurationError(f"半高全宽必须为正: {fwhm}", "fwhm")

    t = grid.times
    envelope = peak * np.exp(-4.0 * np.log(2.0) * (t - center) ** 2 / fwhm ** 2) * np.exp(1j * detuning * t)
    logger.debug(f"高斯猜测脉冲: 中心 {center:.1f} a.u., FWHM {fwhm:.1f} a.u., 峰值 {peak:.3e} a.u.")
    return Pulse(grid, envelope, float(omega_L))


def transform_limited_fwhm(spectral_fwhm: float) -> float:
    """
    变换极限高斯脉冲的强度半高全宽

    Args:
        spectral_fwhm: 频谱强度的半高全宽 (hartree, 角频率)

    Returns:
        float: 时域强度半高全宽 (a.u.), 满足 dt * domega = 4 ln2
    """
    if spectral_fwhm <= 0:
        raise ConfigurationError(f"频谱宽度必须为正: {spectral_fwhm}", "spectral_fwhm")
    return 4.0 * np.log(2.0) / spectral_fwhm


def spectrum(pulse: Pulse) -> Spectrum:
    """
    计算脉冲频谱

    Args:
        pulse: 脉冲

    Returns:
        Spectrum: 频谱 (满足 Parseval: sum|eps|^2 dt = sum|eps~|^2 domega / 2pi)
    """
    dt = pulse.grid.dt
    n = pulse.grid.n_points
    transformed = np.fft.fftshift(np.fft.fft(pulse.envelope)) * dt
    omega = np.fft.fftshift(2.0 * np.pi * np.fft.fftfreq(n, d=dt))
    wavenumber = hartree_to_wavenumber(pulse.omega_L - omega)
    return Spectrum(
        omega=omega,
        wavenumber=wavenumber,
        intensity=np.abs(transformed) ** 2,
        d_omega=2.0 * np.pi / (n * dt),
    )


def spectral_cut(pulse: Pulse, cutoff_wavenumber: float, keep: str = "below") -> Pulse:
    """
    频谱截断: 去掉截止波数一侧的所有频率分量

    Args:
        pulse: 原始脉冲
        cutoff_wavenumber: 截止波数 (cm-1, 绝对值)
        keep: "below" 保留低于截止的分量, "above" 保留高于截止的分量

    Returns:
        Pulse: 截断后的脉冲
    """
    if keep not in ("below", "above"):
        raise ConfigurationError(f"keep 只能是 below 或 above: {keep}", "keep")

    n = pulse.grid.n_points
    omega = 2.0 * np.pi * np.fft.fftfreq(n, d=pulse.grid.dt)
    absolute = pulse.omega_L - omega
    cutoff = wavenumber_to_hartree(cutoff_wavenumber)
    mask = absolute < cutoff if keep == "below" else absolute > cutoff

    transformed = np.fft.fft(pulse.envelope)
    envelope = np.fft.ifft(np.where(mask, transformed, 0.0))
    removed = 1.0 - np.sum(np.abs(envelope) ** 2) / max(np.sum(np.abs(pulse.envelope) ** 2), np.finfo(float).tiny)
    logger.info(f"频谱截断于 {cutoff_wavenumber:.1f} cm-1 (保留{'低' if keep == 'below' else '高'}频侧), "
                f"去除通量比例 {removed:.3f}")
    return pulse.with_envelope(envelope)


def pulse_energy(pulse: Pulse, beam_area: float = None) -> Dict[str, Any]:
    """
    积分脉冲能量

    E = (eps0 c / 2) * A * integral |E(t)|^2 dt

    Args:
        pulse: 脉冲
        beam_area: 光斑面积 (a.u. 面积, 即 a0^2); None 时只报告通量

    Returns:
        Dict[str, Any]: 包含:
            - value: 能量 (uJ) 或通量 (a.u.)
            - unit: "uJ" 或 "au_fluence"
            - flagged: 是否因缺少光斑面积而退化为通量
    """
    fluence = pulse.fluence()
    if beam_area is None:
        logger.warning("未提供光斑面积, 报告积分通量 sum|eps|^2 dt (a.u.) 代替能量")
        return {"value": fluence, "unit": "au_fluence", "flagged": True}
    if beam_area <= 0:
        raise ConfigurationError(f"光斑面积必须为正: {beam_area}", "beam_area")

    field_si_squared_time = fluence * _AU_FIELD ** 2 * _AU_TIME  # (V/m)^2 s
    area_si = beam_area * _BOHR ** 2
    energy_joule = 0.5 * constants.epsilon_0 * constants.c * area_si * field_si_squared_time
    return {"value": energy_joule * 1e6, "unit": "uJ", "flagged": False}
