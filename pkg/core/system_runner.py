"""
系统运行器模块 - 按阶段执行计算流水线

本模块提供:
1. 各阶段的执行 (solve / fcmap / optimize / cool)
2. 流水线串联 (pipeline)
3. 结果文件写出
4. 异常处理: 阶段失败时包装阶段名并标记输出不完整

运行流程:
1. solve    求解两个势能面的振动能级 -> levels.csv
2. fcmap    Franck-Condon 矩阵与辐射模型 -> fc_map.csv, emission.csv
3. optimize Krotov 优化 -> convergence.csv, 脉冲与频谱 CSV, optimization_summary.json
4. cool     冷却循环 -> cooling_history_<脉冲>.csv, cooling_summary.csv/json

注意: 相同配置得到逐字节相同的 CSV 文件 (计算过程中没有随机数)
"""

import logging
import os
from typing import Dict, List

from core.config_manager import RunConfig
from core.errors import EXIT_OK, ConfigurationError, MonotonicityError, StageError, VibCoolError
from cooling.cooling_cycle import compare_pulses, comparison_frame
from data import exporters
from dynamics.propagator import ChebyshevPropagator, FORWARD, TwoSurfaceState
from molecule.system import MolecularSystem, build_system
from optimization.krotov_optimizer import OptimizationResult, optimize
from pulses.pulse import Pulse, pulse_energy

logger = logging.getLogger(__name__)

STAGES = ("solve", "fcmap", "optimize", "cool")
COMMANDS = STAGES + ("pipeline",)


class SystemRunner:
    """
    流水线运行器

    Args:
        config: 运行配置
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self.out_dir = config.output_dir
        self.config_hash = config.config_hash()
        self.written: List[str] = []
        self._system = None
        self._result = None
        logger.info(f"运行器已初始化, 输出目录: {self.out_dir}")

    def _path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def _record(self, path: str):
        self.written.append(path)

    @property
    def system(self) -> MolecularSystem:
        if self._system is None:
            self._system = build_system(self.config.system_definition())
        return self._system

    def solve(self):
        """求解振动能级"""
        frame = exporters.levels_frame(self.system)
        self._record(exporters.write_csv(frame, self._path("levels.csv"), self.config_hash,
                                         units={"surface": "", "v": "", "energy": "hartree",
                                                "energy_cm-1": "cm-1"}))

    def fcmap(self):
        """Franck-Condon 矩阵和辐射模型"""
        fc_frame = self.system.fc.to_frame().reset_index()
        units = {column: "au" for column in fc_frame.columns}
        units["v_excited"] = ""
        self._record(exporters.write_csv(fc_frame, self._path("fc_map.csv"), self.config_hash, units,
                                         metadata={"dipole_au": self.system.dipole}))
        self._record(exporters.write_csv(
            exporters.emission_frame(self.system), self._path("emission.csv"), self.config_hash,
            units={"v_excited": "", "gamma": "au", "lifetime": "au", "escape": "", "branching_to_0": ""},
            metadata={"lifetime_au": self.system.emission.lifetime},
        ))

    def _energy_summary(self, pulse: Pulse) -> Dict[str, object]:
        return pulse_energy(pulse, self.config.get("pulse", "beam_area"))

    def optimize(self):
        """Krotov 优化"""
        guess = self.config.guess_pulse()
        cfg = self.config.functional_config()
        opts = self.config.krotov_options()

        self._record(exporters.write_pulse(guess, self._path("guess_pulse.csv"), self.config_hash))
        self._record(exporters.write_spectrum(guess, self._path("guess_spectrum.csv"), self.config_hash))

        try:
            result = optimize(self.system, guess, cfg, opts)
        except MonotonicityError as e:
            partial = getattr(e, "result", None)
            if partial is not None:
                self._write_optimization(partial, suffix="_partial")
            raise

        self._result = result
        self._write_optimization(result)

        if self.config.get("output", "dump_trajectories"):
            self._dump_trajectories(result.pulse, cfg.n_members)

    def _write_optimization(self, result: OptimizationResult, suffix: str = ""):
        self._record(exporters.write_convergence(result.convergence_frame(),
                                                 self._path(f"convergence{suffix}.csv"), self.config_hash))
        self._record(exporters.write_pulse(result.pulse, self._path(f"optimized_pulse{suffix}.csv"),
                                           self.config_hash))
        self._record(exporters.write_spectrum(result.pulse, self._path(f"optimized_spectrum{suffix}.csv"),
                                              self.config_hash))
        final = {key: value for key, value in result.final.items() if key != "sigma"}
        summary = {
            "config_hash": self.config_hash,
            "iterations": result.iterations,
            "converged": result.converged,
            "stop_reason": result.message,
            "final": final,
            "sigma": result.final["sigma"],
            "guess_energy": self._energy_summary(result.guess),
            "optimized_energy": self._energy_summary(result.pulse),
            "wall_time_s": result.wall_time,
            "peak_memory_mb": result.peak_memory_mb,
        }
        self._record(exporters.write_json(summary, self._path(f"optimization_summary{suffix}.json")))

    def _dump_trajectories(self, pulse: Pulse, n_members: int):
        hamiltonian = self.system.hamiltonian(carrier=pulse.omega_L)
        initial = TwoSurfaceState.ground_level(hamiltonian, list(range(n_members)))
        trajectory = ChebyshevPropagator(hamiltonian).propagate(initial, pulse, FORWARD)
        for member in range(n_members):
            frame = trajectory.populations(member)
            path = self._path(os.path.join("trajectories", f"populations_v{member}.csv"))
            self._record(exporters.write_csv(frame, path, self.config_hash,
                                             units={column: "" for column in frame.columns} | {"t_au": "au"}))

    def _optimized_pulse(self) -> Pulse:
        if self._result is not None:
            return self._result.pulse
        path = self._path("optimized_pulse.csv")
        if not os.path.exists(path):
            raise ConfigurationError(f"未找到优化脉冲 {path}, 请先运行 optimize", "optimized_pulse")
        logger.info(f"读取已有的优化脉冲: {path}")
        return exporters.read_pulse(path)

    def cool(self):
        """冷却循环模拟 (优化脉冲, 可选与猜测脉冲和频谱截断脉冲比较)"""
        pulses = {"optimized": self._optimized_pulse()}
        guess = self.config.guess_pulse()
        if self.config.get("cooling", "compare_guess"):
            pulses["guess"] = guess
        cut = self.config.cut_pulse(guess)
        if cut is not None:
            pulses["spectral_cut"] = cut

        initial = self.config.cooling_initial(self.system.n_ground)
        runs = compare_pulses(self.system, pulses, initial, self.config.get("cooling", "n_cycles"),
                              target=self.config.get("functional", "target"))
        for name, run in runs.items():
            self._record(exporters.write_cooling_history(
                run.to_frame(), self._path(f"cooling_history_{name}.csv"), self.config_hash))
        summary = comparison_frame(runs)
        self._record(exporters.write_csv(summary, self._path("cooling_summary.csv"), self.config_hash,
                                         units={column: "" for column in summary.columns}))
        self._record(exporters.write_json(
            {"config_hash": self.config_hash,
             "runs": {name: {key: value for key, value in run.summary.items() if key != "purity_trace"}
                      for name, run in runs.items()}},
            self._path("cooling_summary.json"),
        ))

    def run_stage(self, stage: str):
        """执行单个阶段, 失败时包装为 StageError"""
        logger.info(f"===== 阶段 {stage} =====")
        try:
            getattr(self, stage)()
        except StageError:
            raise
        except Exception as e:
            raise StageError(stage, e) from e

    def run(self, command: str):
        """执行命令 (单个阶段或 pipeline)"""
        if command not in COMMANDS:
            raise ConfigurationError(f"未知命令 '{command}', 可选: {COMMANDS}", "command")
        os.makedirs(self.out_dir, exist_ok=True)
        exporters.clear_incomplete(self.out_dir)
        stages = STAGES if command == "pipeline" else (command,)
        for stage in stages:
            self.run_stage(stage)
        logger.info(f"命令 {command} 完成, 共写出 {len(self.written)} 个文件")


def run(command: str, config: RunConfig) -> int:
    """
    运行命令并返回退出码

    Args:
        command: solve / fcmap / optimize / cool / pipeline
        config: 运行配置

    Returns:
        int: 0 成功, 2 配置错误, 3 数值错误
    """
    runner = SystemRunner(config)
    try:
        runner.run(command)
    except StageError as e:
        logger.exception(f"运行失败: {e}")
        exporters.mark_incomplete(runner.out_dir, e.stage, str(e.cause))
        return e.exit_code
    except VibCoolError as e:
        logger.error(f"运行失败: {e}")
        return e.exit_code
    return EXIT_OK
