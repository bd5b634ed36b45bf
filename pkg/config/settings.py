"""
配置模块 - 系统全局设置

本模块定义了系统的所有全局配置参数，包括:
- 日志与输出目录配置
- 数值计算参数(Chebyshev 截断误差、轨迹内存上限)
- 优化泛函的默认权重

注意: 与具体计算任务相关的参数(势能曲线、脉冲、迭代次数等)写在运行配置文件中，
由 core.config_manager 解析；这里只放与运行环境相关、可通过环境变量覆盖的设置
"""

import os
from dotenv import load_dotenv

# 加载环境变量 (从.env文件或系统环境)
load_dotenv(os.path.expanduser("~/.config/vibcool/.env"))

# 系统配置
SYSTEM_CONFIG = {
    "log_file": os.getenv("LOG_FILE", ""),  # 为空时只输出到控制台
    "log_level": os.getenv("LOG_LEVEL", "INFO"),
    "output_dir": os.getenv("OUTPUT_DIR", "results"),
}

# 数值计算配置
NUMERICS_CONFIG = {
    # Chebyshev 展开的局部截断误差
    "cheby_tolerance": float(os.getenv("CHEBY_TOLERANCE", "1e-14")),
    # Chebyshev 展开允许的最大项数, 超过即认为时间步长过大
    "cheby_max_terms": int(os.getenv("CHEBY_MAX_TERMS", "128")),
    # 轨迹最多占用可用内存的比例, 超过后改用检查点存储
    "memory_fraction": float(os.getenv("MEMORY_FRACTION", "0.25")),
    # 默认时间步长准则: max|H|·dt <= 0.5
    "max_phase_per_step": 0.5,
}

# 默认泛函权重配置
FUNCTIONAL_WEIGHTS = {
    # 对称激发: lambda_ss 和 lambda_leak 取得比 yield/sym 大
    "symmetrized": {
        "lambda_ss": 2.0,
        "lambda_leak": 1.0,
        "lambda_yield": 0.4,
        "lambda_sym": 1.0,
    },
    # 流水线冷却: 全部取 1
    "assembly": {
        "lambda_ss": 1.0,
        "lambda_leak": 1.0,
        "lambda_yield": 1.0,
        "lambda_ass": 1.0,
    },
}


def validate_config():
    """
    验证配置是否完整有效

    Returns:
        bool: 配置是否有效
        str: 错误信息(如果有)
    """
    if not 0.0 < NUMERICS_CONFIG["memory_fraction"] <= 1.0:
        return False, "MEMORY_FRACTION 必须在 (0, 1] 区间内"

    if NUMERICS_CONFIG["cheby_tolerance"] <= 0.0:
        return False, "CHEBY_TOLERANCE 必须为正数"

    if NUMERICS_CONFIG["cheby_max_terms"] < 4:
        return False, "CHEBY_MAX_TERMS 至少为 4"

    if SYSTEM_CONFIG["log_level"].upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        return False, f"未知的日志级别: {SYSTEM_CONFIG['log_level']}"

    return True, ""
