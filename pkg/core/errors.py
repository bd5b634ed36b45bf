"""
异常模块 - 系统统一的错误类型

错误分为两类:
1. 配置错误: 输入参数或配置文件不合法 (退出码 2)
2. 数值错误: 计算过程中出现的失败 (退出码 3)

每种错误都携带足够的诊断信息(键名、行号、时间步、建议步长等)
"""

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ERROR = 3


class VibCoolError(Exception):
    """所有系统错误的基类"""

    exit_code = EXIT_NUMERICAL_ERROR


class ConfigurationError(VibCoolError, ValueError):
    """
    配置错误

    Args:
        message: 错误信息
        key: 出错的配置键(可选)
        line: 配置文件中的行号(可选)
    """

    exit_code = EXIT_CONFIG_ERROR

    def __init__(self, message: str, key: str = None, line: int = None):
        self.key = key
        self.line = line
        location = ""
        if key is not None:
            location += f" [键: {key}"
            location += f", 行: {line}]" if line is not None else "]"
        super().__init__(message + location)


class ResolutionError(VibCoolError):
    """空间网格无法分辨所需能级(能级超过解离极限或未收敛)"""


class StepSizeError(VibCoolError):
    """时间步长过大, Chebyshev 展开无法收敛"""

    def __init__(self, message: str, suggested_dt: float):
        self.suggested_dt = suggested_dt
        super().__init__(f"{message} (建议 dt <= {suggested_dt:.6g} a.u.)")


class NumericalError(VibCoolError):
    """传播或优化过程中出现 NaN/Inf"""

    def __init__(self, message: str, step: int = None):
        self.step = step
        super().__init__(message if step is None else f"{message} (首个异常时间步: {step})")


class MonotonicityError(VibCoolError):
    """Krotov 迭代违反单调性"""

    def __init__(self, iteration: int, increase: float):
        self.iteration = iteration
        self.increase = increase
        super().__init__(
            f"第 {iteration} 次迭代 J_T 上升了 {increase:.3e}, 超过容差; 建议增大 lambda"
        )


class StageError(VibCoolError):
    """包装某个流水线阶段内部抛出的错误, 保留原始退出码"""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", EXIT_NUMERICAL_ERROR)
        super().__init__(f"阶段 '{stage}' 失败: {cause}")
