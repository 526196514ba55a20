#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
可复现的类别采样（Gumbel-Max）

随机数来自基于计数器的 Philox 位生成器。每次 Gumbel-Max 调用按行优先顺序
为每个像素消耗 K 个均匀数，因此输出只取决于 (种子, 像素位置, 调用序号)。
"""

from typing import Optional, Tuple

import numpy as np

from .catdiff import PROB_FLOOR, CategoricalField, LabelMap, validate_field
from ..shared.infrastructure.errors.exceptions import DomainError

EPS_CLAMP = 1e-12


class RngStream:
    """单次运行的随机数流"""

    def __init__(self, seed: int, spawn_key: Tuple[int, ...] = ()):
        if seed < 0 or seed >= 2 ** 64:
            raise DomainError(f"随机种子必须是 64 位无符号整数: {seed}")
        self.seed = int(seed)
        self.spawn_key = tuple(spawn_key)
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=self.spawn_key)
        self._generator = np.random.Generator(np.random.Philox(seq))
        self.counter = 0

    def spawn(self, index: int) -> "RngStream":
        """派生独立子流（与父流的抽取顺序无关）"""
        return RngStream(self.seed, self.spawn_key + (int(index),))

    def uniform(self, shape: Tuple[int, ...]) -> np.ndarray:
        """[0,1) 均匀数，截断到 [1e-12, 1−1e-12] 以避开 log(0)"""
        eps = self._generator.random(shape)
        self.counter += int(np.prod(shape, dtype=np.int64))
        return np.clip(eps, EPS_CLAMP, 1.0 - EPS_CLAMP)

    def integers(self, low: int, high: int, size=None):
        """整数抽取（数据顺序、步数抽样等）"""
        out = self._generator.integers(low, high, size=size)
        self.counter += 1 if size is None else int(np.prod(size, dtype=np.int64))
        return out

    def random(self, size=None):
        """[0,1) 均匀数，不截断"""
        out = self._generator.random(size)
        self.counter += 1 if size is None else int(np.prod(size, dtype=np.int64))
        return out

    def permutation(self, n: int) -> np.ndarray:
        """随机排列"""
        self.counter += n
        return self._generator.permutation(n)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, spawn_key={self.spawn_key}, counter={self.counter})"


def gumbel_max(p: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """s = argmax_i(log p_i − log(−log ε_i))，沿最后一维

    p 可以未归一化（正缩放不改变结果）；ε 超出 (0,1) 时截断。
    """
    p = np.asarray(p, dtype=np.float64)
    eps = np.clip(np.asarray(eps, dtype=np.float64), EPS_CLAMP, 1.0 - EPS_CLAMP)
    if p.shape != eps.shape:
        raise DomainError(f"概率与噪声形状不一致: {p.shape} vs {eps.shape}")
    scores = np.log(np.maximum(p, PROB_FLOOR)) - np.log(-np.log(eps))
    return np.argmax(scores, axis=-1).astype(np.int64)


def sample_field(probs: CategoricalField, rng: Optional[RngStream], deterministic: bool = False,
                 validate: bool = False) -> LabelMap:
    """逐像素采样类别场

    deterministic=True 对应最后一步"去掉采样噪声"：直接取 argmax，
    并列取最小类别号，不消耗随机数。
    """
    probs = np.asarray(probs, dtype=np.float64)
    if validate:
        validate_field(probs)
    if deterministic:
        return np.argmax(probs, axis=-1).astype(np.int64)
    if rng is None:
        raise DomainError("随机采样需要 RngStream")
    return gumbel_max(probs, rng.uniform(probs.shape))
