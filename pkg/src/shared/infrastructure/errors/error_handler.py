#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
统一错误处理器
"""

import logging
import traceback
from datetime import datetime
from functools import wraps
from typing import Any, Callable, Dict, Optional

from .exceptions import InpaintingSystemError


class ErrorHandler:
    """统一错误处理器"""

    def __init__(self, logger: Optional[logging.Logger] = None):
        self.logger = logger or logging.getLogger("semantic_inpainting")

    def handle_error(self, error: Exception, context: str = "", **kwargs) -> Dict[str, Any]:
        """处理错误并返回错误信息"""
        error_info = {
            "error_type": type(error).__name__,
            "error_message": str(error),
            "context": context,
            "timestamp": datetime.now().isoformat(),
            **kwargs
        }

        if isinstance(error, InpaintingSystemError):
            error_info["error_details"] = error.details
            self.logger.error(f"系统错误 [{context}]: {error.message}")
        else:
            self.logger.error(f"未知错误 [{context}]: {error}")
            self.logger.debug(f"错误堆栈: {traceback.format_exc()}")

        return error_info


def handle_exceptions(context: str = "", reraise: bool = True) -> Callable:
    """异常处理装饰器"""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except Exception as e:
                ErrorHandler().handle_error(e, context or func.__name__)
                if reraise:
                    raise
                return None
        return wrapper
    return decorator
