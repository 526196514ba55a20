#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
自定义异常类
"""

from typing import Any, Dict, Optional


class InpaintingSystemError(Exception):
    """语义补全系统基础异常"""
    def __init__(self, message: str, error_code: Optional[str] = None,
                 details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.error_code = error_code
        self.details = details or {}


class ConfigurationError(InpaintingSystemError):
    """配置异常"""
    pass


class ValidationError(InpaintingSystemError):
    """配置字段验证异常"""
    pass


class DomainError(InpaintingSystemError):
    """领域异常：形状不一致、步数越界、标签超出类别数等"""
    pass


class FormatError(InpaintingSystemError):
    """文件格式异常，携带出错位置的字节偏移"""
    def __init__(self, message: str, offset: int = 0, path: Optional[str] = None,
                 error_code: Optional[str] = None):
        details = {"offset": offset}
        if path is not None:
            details["path"] = path
        super().__init__(f"{message} (字节偏移 {offset})", error_code, details)
        self.offset = offset
        self.path = path


class UsageError(InpaintingSystemError):
    """调用方式错误"""
    pass


class TrainingError(InpaintingSystemError):
    """训练异常"""
    pass


class NonFiniteLossError(TrainingError):
    """损失出现非有限值"""
    pass


class TrainingDivergenceError(TrainingError):
    """训练发散"""
    pass
