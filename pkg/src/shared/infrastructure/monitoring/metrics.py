#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
性能指标收集器

记录训练步耗时、采样链耗时等运行指标，供日志与推理侧车文件使用。
"""

import threading
import time
from collections import defaultdict
from contextlib import contextmanager
from functools import wraps
from typing import Any, Callable, Dict, Iterator, List, Optional


class MetricsCollector:
    """指标收集器"""

    def __init__(self, max_timer_history: int = 1000):
        self.max_timer_history = max_timer_history
        self.counters: Dict[str, int] = defaultdict(int)
        self.gauges: Dict[str, float] = {}
        self.timers: Dict[str, List[float]] = defaultdict(list)
        self.lock = threading.RLock()
        self.start_time = time.perf_counter()

    def increment_counter(self, name: str, value: int = 1, tags: Optional[Dict[str, str]] = None):
        """增加计数器"""
        with self.lock:
            self.counters[self._build_key(name, tags)] += value

    def set_gauge(self, name: str, value: float, tags: Optional[Dict[str, str]] = None):
        """设置仪表值"""
        with self.lock:
            self.gauges[self._build_key(name, tags)] = value

    def record_timer(self, name: str, duration: float, tags: Optional[Dict[str, str]] = None):
        """记录计时器"""
        with self.lock:
            key = self._build_key(name, tags)
            self.timers[key].append(duration)
            if len(self.timers[key]) > self.max_timer_history:
                self.timers[key] = self.timers[key][-self.max_timer_history:]

    @contextmanager
    def timer(self, name: str, tags: Optional[Dict[str, str]] = None) -> Iterator[None]:
        """计时上下文"""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.record_timer(name, time.perf_counter() - start, tags)

    def time_function(self, name: str, tags: Optional[Dict[str, str]] = None):
        """函数计时装饰器"""
        def decorator(func: Callable):
            @wraps(func)
            def wrapper(*args, **kwargs):
                start_time = time.perf_counter()
                try:
                    result = func(*args, **kwargs)
                    self.increment_counter(f"{name}.success", tags=tags)
                    return result
                except Exception:
                    self.increment_counter(f"{name}.error", tags=tags)
                    raise
                finally:
                    self.record_timer(name, time.perf_counter() - start_time, tags)
            return wrapper
        return decorator

    def total_time(self, name: str, tags: Optional[Dict[str, str]] = None) -> float:
        """某个计时器的累计耗时"""
        with self.lock:
            return float(sum(self.timers.get(self._build_key(name, tags), [])))

    def get_metrics_summary(self) -> Dict[str, Any]:
        """获取指标摘要"""
        with self.lock:
            return {
                "uptime_seconds": time.perf_counter() - self.start_time,
                "counters": dict(self.counters),
                "gauges": dict(self.gauges),
                "timer_stats": {
                    name: {
                        "count": len(values),
                        "total": sum(values),
                        "avg": sum(values) / len(values) if values else 0.0,
                        "min": min(values) if values else 0.0,
                        "max": max(values) if values else 0.0,
                    }
                    for name, values in self.timers.items()
                }
            }

    def reset_metrics(self):
        """重置指标"""
        with self.lock:
            self.counters.clear()
            self.gauges.clear()
            self.timers.clear()
            self.start_time = time.perf_counter()

    def _build_key(self, name: str, tags: Optional[Dict[str, str]] = None) -> str:
        """构建指标键"""
        if not tags:
            return name
        tag_str = ",".join(f"{k}={v}" for k, v in sorted(tags.items()))
        return f"{name}[{tag_str}]"


# 全局指标收集器实例
metrics_collector = MetricsCollector()


def get_metrics() -> MetricsCollector:
    """获取指标收集器实例"""
    return metrics_collector
