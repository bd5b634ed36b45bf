"""
结果导出模块 - 把计算结果写成可直接作图的 CSV 文件

文件约定:
- 开头若干行以 '#' 开头的注释: 配置 hash、各列单位以及其他元数据 (key: value)
- 之后是 pandas 写出的表格, 浮点数使用 17 位有效数字, 相同输入得到逐字节相同的文件
- 汇总信息另存为 JSON

流水线某个阶段失败时, 输出目录中写入 INCOMPLETE 标记文件。
"""

import json
import logging
import os
from typing import Dict, Any, Tuple

import numpy as np
import pandas as pd

from core.errors import ConfigurationError
from core.units import hartree_to_wavenumber
from pulses.pulse import PULSE_COLUMNS, Pulse, TimeGrid, spectrum

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
INCOMPLETE_MARKER = "INCOMPLETE"


def write_csv(frame: pd.DataFrame, path: str, config_hash: str, units: Dict[str, str],
              metadata: Dict[str, Any] = None) -> str:
    """
    写出带注释头的 CSV

    Args:
        frame: 表格
        path: 文件路径
        config_hash: 配置 hash
        units: 列名 -> 单位
        metadata: 其他元数据

    Returns:
        str: 文件路径
    """
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(f"# config_hash: {config_hash}\n")
        f.write("# units: " + ", ".join(f"{column}={units.get(column, '')}" for column in frame.columns) + "\n")
        for key, value in (metadata or {}).items():
            if isinstance(value, float):
                value = FLOAT_FORMAT % value
            f.write(f"# {key}: {value}\n")
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"已写出 {path} ({len(frame)} 行)")
    return path


def read_csv(path: str) -> Tuple[pd.DataFrame, Dict[str, str]]:
    """
    读取 write_csv 写出的文件

    Returns:
        Tuple[pd.DataFrame, Dict[str, str]]: 表格和注释头中的元数据
    """
    metadata = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                if not line.startswith("#"):
                    break
                key, _, value = line[1:].partition(":")
                metadata[key.strip()] = value.strip()
        # round_trip 解析器保证 %.17g 文本读回后逐位相同
        frame = pd.read_csv(path, comment="#", float_precision="round_trip")
    except OSError as e:
        raise ConfigurationError(f"无法读取 {path}: {e}", "path")
    return frame, metadata


def write_json(data: Dict[str, Any], path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_to_builtin)
        f.write("\n")
    return path


def _to_builtin(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"无法序列化 {type(value)}")


def levels_frame(system) -> pd.DataFrame:
    """两个势能面的振动能级表"""
    rows = []
    for surface, basis in (("ground", system.ground), ("excited", system.excited)):
        for v, energy in enumerate(basis.energies):
            rows.append({"surface": surface, "v": v, "energy": energy,
                         "energy_cm-1": hartree_to_wavenumber(energy)})
    return pd.DataFrame(rows)


def emission_frame(system) -> pd.DataFrame:
    """每个激发态能级的衰变速率、寿命与逃逸比例"""
    emission = system.emission
    with np.errstate(divide="ignore"):
        lifetimes = np.where(emission.gamma > 0, 1.0 / emission.gamma, np.inf)
    return pd.DataFrame({
        "v_excited": np.arange(len(emission.gamma)),
        "gamma": emission.gamma,
        "lifetime": lifetimes,
        "escape": emission.escape,
        "branching_to_0": emission.branching()[:, 0],
    })


def write_pulse(pulse: Pulse, path: str, config_hash: str) -> str:
    """脉冲 CSV, 元数据中保存重建时间网格所需的精确值"""
    re, im, modulus, phase = PULSE_COLUMNS
    return write_csv(
        pulse.to_frame(), path, config_hash,
        units={"t_fs": "fs", re: "au", im: "au", modulus: "au", phase: "rad"},
        metadata={"omega_L_au": pulse.omega_L, "t_final_au": pulse.grid.t_final, "n_steps": pulse.grid.n_steps},
    )


def read_pulse(path: str) -> Pulse:
    """读取 write_pulse 写出的脉冲"""
    frame, metadata = read_csv(path)
    try:
        grid = TimeGrid(float(metadata["t_final_au"]), int(metadata["n_steps"]))
        omega_L = float(metadata["omega_L_au"])
    except KeyError as e:
        raise ConfigurationError(f"脉冲文件 {path} 缺少元数据 {e}", "pulse_file")
    missing = [column for column in PULSE_COLUMNS[:2] if column not in frame.columns]
    if missing:
        raise ConfigurationError(f"脉冲文件 {path} 缺少列 {missing}", "pulse_file")
    envelope = frame[PULSE_COLUMNS[0]].to_numpy() + 1j * frame[PULSE_COLUMNS[1]].to_numpy()
    return Pulse(grid, envelope, omega_L)


def write_spectrum(pulse: Pulse, path: str, config_hash: str) -> str:
    return write_csv(spectrum(pulse).to_frame(normalize=True), path, config_hash,
                     units={"wavenumber_cm-1": "cm-1", "intensity": "normalized"})


def write_convergence(frame: pd.DataFrame, path: str, config_hash: str) -> str:
    units = {column: "" for column in frame.columns}
    units.update({"J_t": "au", "fluence": "au"})
    return write_csv(frame, path, config_hash, units)


def write_cooling_history(frame: pd.DataFrame, path: str, config_hash: str) -> str:
    return write_csv(frame, path, config_hash, units={column: "" for column in frame.columns})


def mark_incomplete(out_dir: str, stage: str, message: str) -> str:
    """写入 INCOMPLETE 标记, 说明哪个阶段失败"""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, INCOMPLETE_MARKER)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"stage: {stage}\nerror: {message}\n")
    logger.warning(f"输出目录 {out_dir} 已标记为不完整 (阶段 {stage} 失败)")
    return path


def clear_incomplete(out_dir: str):
    path = os.path.join(out_dir, INCOMPLETE_MARKER)
    if os.path.exists(path):
        os.remove(path)
