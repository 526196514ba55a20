#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
统一日志系统

控制台输出写到stderr，stdout只留给数据（表格、报告）。
"""

import logging
import logging.handlers
import os
import sys
from typing import Dict, Optional

DEFAULT_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
FILE_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(filename)s:%(lineno)d - %(message)s'
ROOT_NAME = "semantic_inpainting"


class InpaintingLogger:
    """语义补全系统日志器"""

    def __init__(self, name: str = ROOT_NAME, log_level: str = "INFO",
                 log_dir: str = "logs", enable_file: bool = True,
                 max_file_size: int = 10 * 1024 * 1024, backup_count: int = 5):
        self.name = name
        self.log_level = getattr(logging, log_level.upper(), logging.INFO)
        self.log_dir = log_dir
        self.enable_file = enable_file
        self.max_file_size = max_file_size
        self.backup_count = backup_count
        self.logger = self._setup_logger()

    def _setup_logger(self) -> logging.Logger:
        """设置日志器"""
        logger = logging.getLogger(self.name)

        # 子日志器只向上传播，处理器挂在根日志器上
        if self.name != ROOT_NAME:
            return logger

        logger.setLevel(self.log_level)

        # 避免重复添加处理器
        if logger.handlers:
            return logger

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(self.log_level)
        console_handler.setFormatter(logging.Formatter(DEFAULT_FORMAT))
        logger.addHandler(console_handler)

        if self.enable_file:
            os.makedirs(self.log_dir, exist_ok=True)
            file_format = logging.Formatter(FILE_FORMAT)

            file_handler = logging.handlers.RotatingFileHandler(
                os.path.join(self.log_dir, f"{self.name}.log"),
                maxBytes=self.max_file_size,
                backupCount=self.backup_count
            )
            file_handler.setLevel(logging.DEBUG)
            file_handler.setFormatter(file_format)
            logger.addHandler(file_handler)

            error_handler = logging.handlers.RotatingFileHandler(
                os.path.join(self.log_dir, f"{self.name}_error.log"),
                maxBytes=self.max_file_size,
                backupCount=self.backup_count
            )
            error_handler.setLevel(logging.ERROR)
            error_handler.setFormatter(file_format)
            logger.addHandler(error_handler)

        logger.propagate = False
        return logger

    def set_level(self, log_level: str):
        """调整日志级别"""
        self.log_level = getattr(logging, log_level.upper(), logging.INFO)
        self.logger.setLevel(self.log_level)
        for handler in self.logger.handlers:
            if not isinstance(handler, logging.handlers.RotatingFileHandler):
                handler.setLevel(self.log_level)

    def debug(self, message: str, **kwargs):
        """调试日志"""
        self.logger.debug(message, extra=kwargs)

    def info(self, message: str, **kwargs):
        """信息日志"""
        self.logger.info(message, extra=kwargs)

    def warning(self, message: str, **kwargs):
        """警告日志"""
        self.logger.warning(message, extra=kwargs)

    def error(self, message: str, **kwargs):
        """错误日志"""
        self.logger.error(message, extra=kwargs)

    def critical(self, message: str, **kwargs):
        """严重错误日志"""
        self.logger.critical(message, extra=kwargs)

    def log_performance(self, operation: str, duration: float, **metrics):
        """记录性能指标"""
        self.info(f"性能指标 - 操作: {operation}, 耗时: {duration:.3f}s", **metrics)

    def log_training_step(self, step: int, loss: float, wall_time: float):
        """记录训练步"""
        self.debug(f"训练步 {step}: loss={loss:.6f}, 累计耗时={wall_time:.2f}s",
                   train_step=step, train_loss=loss)

    def log_sampling(self, strategy: str, step: int, total: int):
        """记录采样进度"""
        self.debug(f"采样 [{strategy}] t={step}/{total}", sampling_strategy=strategy)


_loggers: Dict[str, InpaintingLogger] = {}


def configure_logging(level: str = "INFO", log_dir: str = "logs", enable_file: bool = False,
                      max_file_size: int = 10 * 1024 * 1024, backup_count: int = 5) -> InpaintingLogger:
    """按配置重建根日志器"""
    root = logging.getLogger(ROOT_NAME)
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()
    logger = InpaintingLogger(ROOT_NAME, level, log_dir, enable_file, max_file_size, backup_count)
    _loggers[ROOT_NAME] = logger
    return logger


def get_logger(name: Optional[str] = None) -> InpaintingLogger:
    """获取日志器，子模块日志器挂在根日志器之下"""
    if ROOT_NAME not in _loggers:
        _loggers[ROOT_NAME] = InpaintingLogger(ROOT_NAME, enable_file=False)
    full_name = f"{ROOT_NAME}.{name}" if name else ROOT_NAME
    if full_name not in _loggers:
        _loggers[full_name] = InpaintingLogger(full_name, enable_file=False)
    return _loggers[full_name]
