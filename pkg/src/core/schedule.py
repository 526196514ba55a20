#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
噪声调度

构造并保存 β_t、α_t、ᾱ_t（t = 1..T）。对外接口按 1 起始的步数索引，
t = 0 表示干净数据（β_0 = 0，α_0 = ᾱ_0 = 1）。调度构造后不可修改。
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Union

import numpy as np

from ..shared.infrastructure.errors.exceptions import ConfigurationError, DomainError

BETA_MAX = 0.999
DEFAULT_COSINE_OFFSET = 0.008

StepLike = Union[int, np.integer, np.ndarray]


@dataclass(frozen=True)
class NoiseSchedule:
    """扩散时间表

    内部数组长度为 T + 1，下标 0 存放 t = 0 的约定值，
    因此 ``beta[t]`` 与公式中的 β_t 一一对应。
    """
    kind: str
    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for arr in (self.beta, self.alpha, self.alpha_bar):
            arr.setflags(write=False)

    def _index(self, t: StepLike, allow_zero: bool) -> StepLike:
        lo = 0 if allow_zero else 1
        t_arr = np.asarray(t)
        if not np.issubdtype(t_arr.dtype, np.integer):
            raise DomainError(f"步数必须是整数: {t}")
        if t_arr.size and (t_arr.min() < lo or t_arr.max() > self.T):
            raise DomainError(f"步数越界: t 必须在 [{lo}, {self.T}] 内, 实际 {t}")
        return t

    def beta_at(self, t: StepLike) -> Union[float, np.ndarray]:
        """β_t"""
        return self.beta[self._index(t, allow_zero=True)]

    def alpha_at(self, t: StepLike) -> Union[float, np.ndarray]:
        """α_t = 1 − β_t"""
        return self.alpha[self._index(t, allow_zero=True)]

    def alpha_bar_at(self, t: StepLike) -> Union[float, np.ndarray]:
        """ᾱ_t = ∏_{i≤t} α_i，ᾱ_0 = 1"""
        return self.alpha_bar[self._index(t, allow_zero=True)]

    def check_step(self, t: StepLike) -> StepLike:
        """校验 1 ≤ t ≤ T"""
        return self._index(t, allow_zero=False)

    def descriptor(self) -> Dict[str, Any]:
        """写入检查点的调度描述"""
        if self.kind == "custom":
            return {"kind": self.kind, "T": self.T, "betas": [float(b) for b in self.beta[1:]]}
        return {"kind": self.kind, "T": self.T, **self.params}


def _from_betas(kind: str, betas: np.ndarray, params: Dict[str, float]) -> NoiseSchedule:
    beta = np.concatenate([[0.0], betas.astype(np.float64)])
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    return NoiseSchedule(kind=kind, T=len(betas), beta=beta, alpha=alpha,
                         alpha_bar=alpha_bar, params=params)


def schedule_from_betas(betas, kind: str = "custom") -> NoiseSchedule:
    """由任意 β 序列构造调度（实验与测试用）"""
    betas = np.asarray(betas, dtype=np.float64)
    if betas.ndim != 1 or betas.size < 1:
        raise ConfigurationError("β 序列必须是非空一维数组")
    if betas.min() <= 0 or betas.max() > BETA_MAX:
        raise ConfigurationError(f"β 必须在 (0, {BETA_MAX}] 内")
    return _from_betas(kind, betas, {})


def cosine_schedule(T: int, s: float = DEFAULT_COSINE_OFFSET) -> NoiseSchedule:
    """余弦调度

    ᾱ_t = f(t)/f(0)，f(t) = cos²(((t/T)+s)/(1+s)·π/2)，
    β_t = 1 − ᾱ_t/ᾱ_{t−1}，并截断到 0.999。存储的 ᾱ 由截断后的 β 累乘得到。
    """
    if not isinstance(T, (int, np.integer)) or isinstance(T, bool) or T < 1:
        raise ConfigurationError(f"扩散步数 T 必须是正整数: {T}")
    if not (0 < s < 0.1):
        raise ConfigurationError(f"余弦偏移 s 必须在 (0, 0.1) 内: {s}")

    steps = np.arange(T + 1, dtype=np.float64)
    f = np.cos(((steps / T) + s) / (1 + s) * math.pi / 2) ** 2
    closed_form = f / f[0]
    betas = 1.0 - closed_form[1:] / closed_form[:-1]
    betas = np.clip(betas, 0.0, BETA_MAX)
    return _from_betas("cosine", betas, {"s": float(s)})


def cosine_alpha_bar_closed_form(T: int, s: float = DEFAULT_COSINE_OFFSET) -> np.ndarray:
    """未截断的闭式 ᾱ_t，t = 0..T"""
    steps = np.arange(T + 1, dtype=np.float64)
    f = np.cos(((steps / T) + s) / (1 + s) * math.pi / 2) ** 2
    return f / f[0]


def linear_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """线性调度：β_t 从 beta_start 线性插值到 beta_end"""
    if not isinstance(T, (int, np.integer)) or isinstance(T, bool) or T < 1:
        raise ConfigurationError(f"扩散步数 T 必须是正整数: {T}")
    if not (0 < beta_start <= beta_end <= BETA_MAX):
        raise ConfigurationError(
            f"线性调度要求 0 < beta_start <= beta_end <= {BETA_MAX}: {beta_start}, {beta_end}")
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    return _from_betas("linear", betas, {"beta_start": float(beta_start), "beta_end": float(beta_end)})


def schedule_from_descriptor(descriptor: Dict[str, Any]) -> NoiseSchedule:
    """由检查点中的描述重建调度"""
    kind = descriptor.get("kind")
    T = int(descriptor.get("T", 0))
    if kind == "cosine":
        return cosine_schedule(T, float(descriptor.get("s", DEFAULT_COSINE_OFFSET)))
    if kind == "linear":
        return linear_schedule(T, float(descriptor["beta_start"]), float(descriptor["beta_end"]))
    if kind == "custom":
        return schedule_from_betas(descriptor["betas"])
    raise ConfigurationError(f"未知调度类型: {kind}")


def build_schedule(config) -> NoiseSchedule:
    """由 ScheduleConfig 构造调度"""
    if config.kind == "cosine":
        return cosine_schedule(config.steps, config.cosine_offset)
    if config.kind == "linear":
        return linear_schedule(config.steps, config.beta_start, config.beta_end)
    raise ConfigurationError(f"未知调度类型: {config.kind}")
