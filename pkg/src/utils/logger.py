"""日志系统

所有模块 logger 都挂在 "src" 之下，只在 "src" 上安装 handler，
子 logger 通过 propagation 输出，Web 包装器也挂在同一个父 logger 上拦截进度。
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import Optional

ROOT_LOGGER = "src"

_FORMAT = logging.Formatter(
    "[%(asctime)s] %(levelname)-7s %(name)s - %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S",
)


def setup_logger(
    name: str = ROOT_LOGGER,
    level: str = "INFO",
    log_file: Optional[str] = None,
) -> logging.Logger:
    """配置并返回 logger。

    Args:
        name: logger 名称，默认为包级父 logger
        level: 日志级别
        log_file: 日志文件路径，为 None 时仅输出到控制台

    Returns:
        配置好的 Logger 实例
    """
    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))

    # 重复调用时只调整级别与文件 handler
    has_console = any(getattr(h, "_cdgraph_console", False) for h in logger.handlers)
    if not has_console:
        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(_FORMAT)
        console._cdgraph_console = True  # type: ignore[attr-defined]
        logger.addHandler(console)

    if log_file:
        path = str(Path(log_file).resolve())
        exists = any(
            isinstance(h, logging.FileHandler) and h.baseFilename == path
            for h in logger.handlers
        )
        if not exists:
            Path(log_file).parent.mkdir(parents=True, exist_ok=True)
            fh = logging.FileHandler(log_file, encoding="utf-8")
            fh.setFormatter(_FORMAT)
            logger.addHandler(fh)

    return logger


def get_logger(name: str = ROOT_LOGGER) -> logging.Logger:
    """获取模块 logger（不安装 handler，输出交给父 logger）"""
    return logging.getLogger(name)
