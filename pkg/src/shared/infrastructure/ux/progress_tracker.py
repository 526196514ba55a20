#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
进度跟踪器
通过日志（stderr）报告训练、消融实验、多次采样的进度
"""

import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional

from ..logging.logger import get_logger


class ProgressStatus(Enum):
    """进度状态"""
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class ProgressInfo:
    """进度信息"""
    task_id: str
    task_name: str
    total: int
    done: int = 0
    status: ProgressStatus = ProgressStatus.PENDING
    start_time: Optional[float] = None
    end_time: Optional[float] = None
    last_reported: float = -1.0
    error_message: Optional[str] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def fraction(self) -> float:
        return self.done / self.total if self.total else 1.0

    @property
    def eta_seconds(self) -> Optional[float]:
        """按当前速度估计剩余时间"""
        if not self.start_time or self.done == 0:
            return None
        elapsed = time.perf_counter() - self.start_time
        return elapsed / self.done * (self.total - self.done)


class ProgressTracker:
    """进度跟踪器"""

    def __init__(self, report_every: float = 0.1):
        self.report_every = report_every
        self.tasks: Dict[str, ProgressInfo] = {}
        self.callbacks: List[Callable[[ProgressInfo], None]] = []
        self.lock = threading.Lock()
        self.logger = get_logger("progress")

    def add_callback(self, callback: Callable[[ProgressInfo], None]):
        """注册进度回调"""
        self.callbacks.append(callback)

    def create_task(self, task_id: str, task_name: str, total: int) -> ProgressInfo:
        """创建并开始任务"""
        with self.lock:
            task = ProgressInfo(task_id=task_id, task_name=task_name, total=max(0, total),
                                status=ProgressStatus.RUNNING, start_time=time.perf_counter())
            self.tasks[task_id] = task
        self.logger.info(f"开始任务: {task_name} (共 {total} 步)")
        return task

    def advance(self, task_id: str, amount: int = 1, **metadata) -> Optional[ProgressInfo]:
        """推进任务进度，跨过报告阈值时输出一次日志"""
        with self.lock:
            task = self.tasks.get(task_id)
            if task is None:
                return None
            task.done = min(task.total, task.done + amount)
            task.metadata.update(metadata)
            should_report = task.fraction - task.last_reported >= self.report_every or task.done == task.total
            if should_report:
                task.last_reported = task.fraction
        if should_report:
            eta = task.eta_seconds
            eta_text = f", 预计剩余 {eta:.1f}s" if eta is not None else ""
            extra = "".join(f", {k}={v}" for k, v in metadata.items())
            self.logger.info(f"[{task.task_name}] {task.done}/{task.total} ({task.fraction:.0%}){eta_text}{extra}")
            self._notify_callbacks(task)
        return task

    def complete_task(self, task_id: str, error_message: Optional[str] = None) -> Optional[ProgressInfo]:
        """完成任务"""
        with self.lock:
            task = self.tasks.get(task_id)
            if task is None:
                return None
            task.end_time = time.perf_counter()
            task.status = ProgressStatus.FAILED if error_message else ProgressStatus.COMPLETED
            task.error_message = error_message
        duration = task.end_time - (task.start_time or task.end_time)
        if error_message:
            self.logger.error(f"任务失败: {task.task_name}: {error_message}")
        else:
            self.logger.info(f"任务完成: {task.task_name}, 耗时 {duration:.2f}s")
        self._notify_callbacks(task)
        return task

    def _notify_callbacks(self, task: ProgressInfo):
        for callback in self.callbacks:
            try:
                callback(task)
            except Exception as e:
                self.logger.warning(f"进度回调失败: {e}")
