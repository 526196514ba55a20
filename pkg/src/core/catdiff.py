#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
多项式（类别）扩散核心运算

- 前向单步转移  p = (1−β_t)·x_{t−1} + β_t/K
- 闭式边缘分布  p = ᾱ_t·x₀ + (1−ᾱ_t)/K
- 闭式后验      p ∝ [α_t x_t + (1−α_t)/K] ⊙ [ᾱ_{t−1} x₀ + (1−ᾱ_{t−1})/K]
- 参数化反向    后验中以网络预测 x̂₀ 替换 x₀
- 类别 KL 散度

类别场（CategoricalField）用形如 (..., H, W, K) 的 float64 数组表示，
标签图（LabelMap）用形如 (..., H, W) 的整数数组表示。所有核支持批量前导维，
步数 t 可以是标量，也可以是与批量维等长的数组。
"""

from typing import Union

import numpy as np

from .schedule import NoiseSchedule, StepLike
from ..shared.infrastructure.errors.exceptions import DomainError

PROB_FLOOR = 1e-30
SIMPLEX_TOL = 1e-9

LabelMap = np.ndarray
CategoricalField = np.ndarray


def validate_labels(labels: LabelMap, K: int) -> LabelMap:
    """校验标签图的取值范围"""
    labels = np.asarray(labels)
    if not np.issubdtype(labels.dtype, np.integer):
        raise DomainError(f"标签图必须是整数数组, 实际 dtype={labels.dtype}")
    if K < 2:
        raise DomainError(f"类别数 K 必须至少为 2: {K}")
    if labels.size and (labels.min() < 0 or labels.max() >= K):
        raise DomainError(f"标签超出范围 [0, {K}): min={labels.min()}, max={labels.max()}")
    return labels


def validate_field(probs: CategoricalField, tol: float = SIMPLEX_TOL) -> CategoricalField:
    """校验每个像素的分布都在概率单纯形上"""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim < 1 or probs.shape[-1] < 2:
        raise DomainError(f"类别场最后一维必须是类别数 K ≥ 2: shape={probs.shape}")
    if not np.all(np.isfinite(probs)) or probs.min() < -tol:
        raise DomainError("类别场包含负值或非有限值")
    sums = probs.sum(axis=-1)
    if np.abs(sums - 1.0).max(initial=0.0) > tol:
        raise DomainError(f"类别场未归一化: 最大偏差 {np.abs(sums - 1.0).max():.3e}")
    return probs


def one_hot(labels: LabelMap, K: int) -> CategoricalField:
    """标签图 → 独热类别场"""
    labels = validate_labels(labels, K)
    return np.eye(K, dtype=np.float64)[labels]


def argmax_decode(probs: CategoricalField) -> LabelMap:
    """类别场 → 标签图（并列时取最小类别号）"""
    return np.argmax(np.asarray(probs), axis=-1).astype(np.int64)


def _broadcast_coef(coef: Union[float, np.ndarray], like: np.ndarray) -> np.ndarray:
    """把标量或逐样本系数广播到 (..., H, W, K)"""
    coef = np.asarray(coef, dtype=np.float64)
    if coef.ndim == 0:
        return coef
    return coef.reshape(coef.shape + (1,) * (like.ndim - coef.ndim))


def _mix(x: CategoricalField, keep: Union[float, np.ndarray]) -> CategoricalField:
    """keep·x + (1−keep)/K"""
    K = x.shape[-1]
    keep = _broadcast_coef(keep, x)
    return keep * x + (1.0 - keep) / K


def forward_step_probs(x_prev: CategoricalField, t: StepLike, sch: NoiseSchedule) -> CategoricalField:
    """q(x_t | x_{t−1}) 的参数：(1−β_t)·x_{t−1} + β_t/K"""
    sch.check_step(t)
    x_prev = np.asarray(x_prev, dtype=np.float64)
    return _mix(x_prev, sch.alpha_at(t))


def marginal_probs(x0: CategoricalField, t: StepLike, sch: NoiseSchedule) -> CategoricalField:
    """q(x_t | x₀) 的参数：ᾱ_t·x₀ + (1−ᾱ_t)/K"""
    sch.check_step(t)
    x0 = np.asarray(x0, dtype=np.float64)
    return _mix(x0, sch.alpha_bar_at(t))


def log_normalize(log_p: np.ndarray) -> np.ndarray:
    """按最后一维做 log-sum-exp 归一化"""
    m = np.max(log_p, axis=-1, keepdims=True)
    return log_p - (m + np.log(np.sum(np.exp(log_p - m), axis=-1, keepdims=True)))


def posterior_log_probs(x_t: CategoricalField, x0: CategoricalField, t: StepLike,
                        sch: NoiseSchedule) -> np.ndarray:
    """后验的对数概率（已归一化）"""
    sch.check_step(t)
    x_t = np.asarray(x_t, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if x_t.shape != x0.shape:
        raise DomainError(f"x_t 与 x₀ 形状不一致: {x_t.shape} vs {x0.shape}")
    t_prev = np.asarray(t) - 1
    first = _mix(x_t, sch.alpha_at(t))
    second = _mix(x0, sch.alpha_bar_at(t_prev))
    log_p = np.log(np.maximum(first, PROB_FLOOR)) + np.log(np.maximum(second, PROB_FLOOR))
    return log_normalize(log_p)


def posterior_probs(x_t: CategoricalField, x0: CategoricalField, t: StepLike,
                    sch: NoiseSchedule) -> CategoricalField:
    """q(x_{t−1} | x_t, x₀)，在对数空间计算；x₀ 可以是软分布"""
    return np.exp(posterior_log_probs(x_t, x0, t, sch))


def reverse_probs(x_t: CategoricalField, x0_hat: CategoricalField, t: StepLike,
                  sch: NoiseSchedule) -> CategoricalField:
    """p_θ(x_{t−1} | x_t) = C(posterior(x_t, x̂₀))"""
    return posterior_probs(x_t, x0_hat, t, sch)


def categorical_kl(p: CategoricalField, q: CategoricalField) -> float:
    """逐像素 KL(p‖q) 的像素平均，0·log 0 := 0"""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DomainError(f"KL 的两个类别场形状不一致: {p.shape} vs {q.shape}")
    per_pixel = kl_per_pixel(p, q)
    return float(per_pixel.mean()) if per_pixel.size else 0.0


def kl_per_pixel(p: CategoricalField, q: CategoricalField) -> np.ndarray:
    """逐像素 KL，返回形状为 p.shape[:-1]"""
    log_p = np.log(np.maximum(p, PROB_FLOOR))
    log_q = np.log(np.maximum(q, PROB_FLOOR))
    terms = np.where(p > 0, p * (log_p - log_q), 0.0)
    return np.maximum(terms.sum(axis=-1), 0.0)


def transition_matrix(beta: float, K: int) -> np.ndarray:
    """单步转移矩阵 Q = (1−β)I + (β/K)𝟙𝟙ᵀ"""
    return (1.0 - beta) * np.eye(K) + (beta / K) * np.ones((K, K))


def cumulative_matrix(sch: NoiseSchedule, t: int, K: int) -> np.ndarray:
    """闭式累积转移矩阵 ᾱ_t I + ((1−ᾱ_t)/K)𝟙𝟙ᵀ"""
    a = float(sch.alpha_bar_at(t))
    return a * np.eye(K) + ((1.0 - a) / K) * np.ones((K, K))
