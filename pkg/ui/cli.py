"""
命令行界面 - 配置驱动的振动冷却计算

用法:
    python -m ui.cli solve --config config/example_run.ini
    python -m ui.cli pipeline --config run.ini --out results/run1 --variant ass --max-iter 300

命令:
    solve     求解振动能级
    fcmap     Franck-Condon 矩阵与 Einstein 系数
    optimize  Krotov 脉冲优化
    cool      冷却循环模拟 (需要 optimize 的结果)
    pipeline  依次执行以上全部阶段

退出码: 0 成功, 2 配置错误, 3 数值错误
"""

import argparse
import logging
import sys
from typing import List

from config.settings import SYSTEM_CONFIG, validate_config
from core.config_manager import parse_config
from core.errors import EXIT_CONFIG_ERROR, ConfigurationError
from core.system_runner import COMMANDS, run
from functionals import VARIANT_ALIASES

logger = logging.getLogger(__name__)

_LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def setup_logging(level: str = None, log_file: str = None):
    """配置根日志: 控制台输出, 可选写入文件"""
    handlers = [logging.StreamHandler(sys.stderr)]
    log_file = SYSTEM_CONFIG["log_file"] if log_file is None else log_file
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        level=(level or SYSTEM_CONFIG["log_level"]).upper(),
        format=_LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vibcool", description="分子振动的激光冷却: 脉冲优化与冷却循环模拟")
    parser.add_argument("command", choices=COMMANDS, help="要执行的阶段")
    parser.add_argument("--config", required=True, help="运行配置文件路径")
    parser.add_argument("--out", default=None, help="输出目录 (覆盖配置中的 [output] directory)")
    parser.add_argument("--max-iter", type=int, default=None, help="最大迭代次数 (覆盖配置)")
    parser.add_argument("--variant", choices=sorted(VARIANT_ALIASES), default=None, help="泛函类型")
    parser.add_argument("--log-level", default=None, help="日志级别")
    return parser


def main(argv: List[str] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    valid, message = validate_config()
    if not valid:
        logger.error(f"环境配置无效: {message}")
        return EXIT_CONFIG_ERROR

    try:
        config = parse_config(args.config)
        config = config.with_overrides(
            max_iterations=args.max_iter,
            variant=VARIANT_ALIASES[args.variant] if args.variant else None,
            output_dir=args.out,
        )
    except ConfigurationError as e:
        logger.error(f"配置错误: {e}")
        return e.exit_code

    logger.info(f"执行命令 {args.command}, 配置 hash {config.config_hash()[:12]}")
    return run(args.command, config)


if __name__ == "__main__":
    sys.exit(main())
