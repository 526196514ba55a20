#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
插值基线

在标签编号上做散点插值：
- nearest  取欧氏距离最近的已知像素（并列时取行号小者，再取列号小者）
- linear   最近 8 个已知像素的反距离平方加权平均，四舍五入（半数进位）并截断到 [0, K−1]
- cubic    同一邻域，权重 (1−(d/d_max)³)³，d_max 为所选邻居中最远者的距离；
           权重全为零时退回 nearest

linear/cubic 把标签编号当作实数处理，因此会在两个类别之间"插值"出新的类别。
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from dataclasses_json import dataclass_json
from scipy.spatial import cKDTree

from ..core.catdiff import LabelMap
from ..shared.infrastructure.errors.exceptions import ConfigurationError, DomainError
from ..shared.infrastructure.monitoring.metrics import get_metrics
from .maskgen import validate_mask

METHODS = ("nearest", "linear", "cubic")
TIE_TOL = 1e-9


@dataclass_json
@dataclass(frozen=True)
class BaselineMethod:
    """插值方法与邻域参数"""
    kind: str = "nearest"
    neighbors: int = 8
    power: float = 2.0

    def __post_init__(self):
        if self.kind not in METHODS:
            raise ConfigurationError(f"未知插值方法: {self.kind}，可选 {', '.join(METHODS)}")
        if self.neighbors < 1:
            raise ConfigurationError(f"邻居数必须至少为 1: {self.neighbors}")


def _nearest(tree: cKDTree, known_labels: np.ndarray, queries: np.ndarray) -> np.ndarray:
    dist, _ = tree.query(queries, k=1)
    # 已知坐标按行优先排列，等距候选中下标最小者即行号、列号最小者
    candidates = tree.query_ball_point(queries, r=dist + TIE_TOL)
    chosen = np.fromiter((min(c) for c in candidates), dtype=np.int64, count=len(queries))
    return known_labels[chosen]


def _neighbors(tree: cKDTree, queries: np.ndarray, k: int):
    dist, idx = tree.query(queries, k=k)
    if k == 1:
        dist, idx = dist[:, None], idx[:, None]
    return dist, idx


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5).astype(np.int64)


@get_metrics().time_function("baseline.complete")
def complete(method: Union[str, BaselineMethod], y0: LabelMap, M: np.ndarray,
             K: Optional[int] = None) -> LabelMap:
    """用插值补全未知像素，已知像素保持不变"""
    if isinstance(method, str):
        method = BaselineMethod(kind=method)
    y0 = np.asarray(y0).astype(np.int64)
    if y0.ndim != 2:
        raise DomainError(f"标签图必须是二维: shape={y0.shape}")
    M = validate_mask(M, y0.shape)

    known_coords = np.argwhere(M == 1)
    if len(known_coords) == 0:
        raise DomainError("没有已知像素，无法插值")
    unknown_coords = np.argwhere(M == 0)
    out = y0.copy()
    if len(unknown_coords) == 0:
        return out

    known_labels = y0[M == 1]
    if K is None:
        K = int(known_labels.max()) + 1
    tree = cKDTree(known_coords.astype(np.float64))
    queries = unknown_coords.astype(np.float64)

    if method.kind == "nearest":
        filled = _nearest(tree, known_labels, queries)
    else:
        k = min(method.neighbors, len(known_coords))
        dist, idx = _neighbors(tree, queries, k)
        values = known_labels[idx].astype(np.float64)
        if method.kind == "linear":
            weights = 1.0 / dist ** method.power
        else:
            d_max = dist[:, -1:]
            ratio = np.divide(dist, d_max, out=np.ones_like(dist), where=d_max > 0)
            weights = np.where(ratio < 1.0, (1.0 - ratio ** 3) ** 3, 0.0)
        total = weights.sum(axis=1)
        vanished = total <= 0
        estimate = np.divide((weights * values).sum(axis=1), total,
                             out=np.zeros_like(total), where=~vanished)
        filled = np.clip(_round_half_up(estimate), 0, K - 1)
        if np.any(vanished):
            filled[vanished] = _nearest(tree, known_labels, queries[vanished])

    out[M == 0] = filled
    return out
