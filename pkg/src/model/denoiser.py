#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
去噪网络 x̂₀ = net(x_t, t)

接口（BaseDenoiser）与参考实现（ResidualConvDenoiser）。参考实现是一个小型残差
卷积网络：输入为 K 通道独热 x_t，正弦时间嵌入经线性投影后作为逐通道偏置注入，
输出头为 1×1 卷积 + softmax。输出头默认零初始化，使初始预测恰好均匀。
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from dataclasses_json import dataclass_json

from . import layers
from ..core.catdiff import CategoricalField
from ..core.schedule import StepLike
from ..shared.infrastructure.errors.exceptions import DomainError, UsageError


@dataclass_json
@dataclass(frozen=True)
class DenoiserSpec:
    """网络结构描述（写入检查点）"""
    num_classes: int
    height: int
    width: int
    channels: int = 32
    num_blocks: int = 3
    kernel_size: int = 3
    time_dim: int = 32

    def layout(self) -> List[Tuple[str, Tuple[int, ...]]]:
        """参数名与形状，按扁平向量中的顺序排列"""
        K, C, k, E = self.num_classes, self.channels, self.kernel_size, self.time_dim
        entries: List[Tuple[str, Tuple[int, ...]]] = [
            ("in.w", (k, k, K, C)), ("in.b", (C,)),
            ("in.t.w", (E, C)), ("in.t.b", (C,)),
        ]
        for i in range(self.num_blocks):
            entries += [
                (f"blk{i}.norm.g", (C,)), (f"blk{i}.norm.b", (C,)),
                (f"blk{i}.conv.w", (k, k, C, C)), (f"blk{i}.conv.b", (C,)),
                (f"blk{i}.t.w", (E, C)), (f"blk{i}.t.b", (C,)),
            ]
        entries += [("out.w", (1, 1, C, K)), ("out.b", (K,))]
        return entries

    @property
    def num_params(self) -> int:
        return int(sum(np.prod(shape) for _, shape in self.layout()))


@dataclass
class DenoiserParams:
    """θ：结构描述 + 扁平参数向量"""
    spec: DenoiserSpec
    values: np.ndarray
    _offsets: Dict[str, Tuple[int, Tuple[int, ...]]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size != self.spec.num_params:
            raise DomainError(f"参数数量与结构不符: {self.values.size} vs {self.spec.num_params}")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("参数包含非有限值")
        offset = 0
        for name, shape in self.spec.layout():
            self._offsets[name] = (offset, shape)
            offset += int(np.prod(shape))

    def view(self, name: str) -> np.ndarray:
        """按名称取参数视图（与 values 共享内存）"""
        offset, shape = self._offsets[name]
        return self.values[offset:offset + int(np.prod(shape))].reshape(shape)

    def copy(self) -> "DenoiserParams":
        return DenoiserParams(self.spec, self.values.copy())

    def quantized(self) -> "DenoiserParams":
        """对齐到 float32 网格，使检查点重载逐位一致"""
        return DenoiserParams(self.spec, self.values.astype(np.float32).astype(np.float64))


def init_params(spec: DenoiserSpec, seed: int = 0, zero_head: bool = True) -> DenoiserParams:
    """He 初始化卷积，归一化增益为 1，输出头默认置零"""
    rng = np.random.default_rng(seed)
    values = np.zeros(spec.num_params)
    params = DenoiserParams(spec, values)
    for name, shape in spec.layout():
        view = params.view(name)
        if name.endswith("norm.g"):
            view[...] = 1.0
        elif name.endswith(".w"):
            if name == "out.w" and zero_head:
                continue
            fan_in = int(np.prod(shape[:-1]))
            scale = np.sqrt(2.0 / fan_in)
            if ".conv." in name:
                scale *= 0.5
            view[...] = rng.normal(0.0, scale, size=shape)
    return params


@dataclass
class ForwardContext:
    """一次前向传播的缓存，供 backward 使用"""
    params_id: int
    batched: bool
    probs: np.ndarray
    caches: Dict[str, object] = field(default_factory=dict)


class BaseDenoiser(ABC):
    """去噪网络接口，可替换为外部机器学习运行时的实现"""

    @abstractmethod
    def predict_x0(self, x_t: CategoricalField, t: StepLike) -> CategoricalField:
        """返回 x̂₀ 的逐像素分布"""

    @abstractmethod
    def forward(self, x_t: CategoricalField, t: StepLike) -> Tuple[CategoricalField, ForwardContext]:
        """前向传播并保留缓存"""

    @abstractmethod
    def backward(self, context: Optional[ForwardContext], grad_probs: np.ndarray) -> np.ndarray:
        """返回标量损失对全部参数的梯度（扁平向量）"""


class ResidualConvDenoiser(BaseDenoiser):
    """参考去噪网络"""

    def __init__(self, params: DenoiserParams):
        self.params = params
        self.spec = params.spec

    def _prepare(self, x_t: CategoricalField, t: StepLike) -> Tuple[np.ndarray, np.ndarray, bool]:
        x = np.asarray(x_t, dtype=np.float64)
        batched = x.ndim == 4
        if not batched:
            x = x[None]
        expected = (self.spec.height, self.spec.width, self.spec.num_classes)
        if x.ndim != 4 or x.shape[1:] != expected:
            raise DomainError(f"输入形状与训练尺寸不符: 期望 (..., {expected}), 实际 {np.shape(x_t)}")
        t_arr = np.broadcast_to(np.asarray(t, dtype=np.float64).reshape(-1), (x.shape[0],))
        if np.any(t_arr < 1):
            raise DomainError(f"步数必须 ≥ 1: {t}")
        return x, t_arr, batched

    def forward(self, x_t: CategoricalField, t: StepLike) -> Tuple[CategoricalField, ForwardContext]:
        p = self.params
        x, t_arr, batched = self._prepare(x_t, t)
        caches: Dict[str, object] = {}
        emb = layers.sinusoidal_embedding(t_arr, self.spec.time_dim)

        h, caches["in"] = layers.conv2d_forward(x, p.view("in.w"), p.view("in.b"))
        tb, caches["in.t"] = layers.time_bias_forward(emb, p.view("in.t.w"), p.view("in.t.b"))
        h = h + tb

        for i in range(self.spec.num_blocks):
            n, caches[f"blk{i}.norm"] = layers.channel_norm_forward(
                h, p.view(f"blk{i}.norm.g"), p.view(f"blk{i}.norm.b"))
            a, caches[f"blk{i}.relu"] = layers.relu_forward(n)
            c, caches[f"blk{i}.conv"] = layers.conv2d_forward(
                a, p.view(f"blk{i}.conv.w"), p.view(f"blk{i}.conv.b"))
            tb, caches[f"blk{i}.t"] = layers.time_bias_forward(
                emb, p.view(f"blk{i}.t.w"), p.view(f"blk{i}.t.b"))
            h = h + c + tb

        a, caches["out.relu"] = layers.relu_forward(h)
        logits, caches["out"] = layers.conv2d_forward(a, p.view("out.w"), p.view("out.b"))
        probs = layers.softmax(logits)

        context = ForwardContext(params_id=id(self.params.values), batched=batched,
                                 probs=probs, caches=caches)
        return (probs if batched else probs[0]), context

    def predict_x0(self, x_t: CategoricalField, t: StepLike) -> CategoricalField:
        probs, _ = self.forward(x_t, t)
        return probs

    def backward(self, context: Optional[ForwardContext], grad_probs: np.ndarray) -> np.ndarray:
        if context is None:
            raise UsageError("backward 之前必须先在相同输入上执行 forward")
        grad_probs = np.asarray(grad_probs, dtype=np.float64)
        if not context.batched:
            grad_probs = grad_probs[None]
        return self.backward_logits(context, layers.softmax_backward(grad_probs, context.probs))

    def backward_logits(self, context: Optional[ForwardContext], grad_logits: np.ndarray) -> np.ndarray:
        """上游梯度直接作用在 logits 上时的反向传播"""
        if context is None:
            raise UsageError("backward 之前必须先在相同输入上执行 forward")
        if context.params_id != id(self.params.values):
            raise UsageError("前向缓存不属于当前参数")
        grad_logits = np.asarray(grad_logits, dtype=np.float64)
        if grad_logits.ndim == 3:
            grad_logits = grad_logits[None]
        caches = context.caches
        grads = DenoiserParams(self.spec, np.zeros(self.spec.num_params))

        da, dw, db = layers.conv2d_backward(grad_logits, caches["out"])
        grads.view("out.w")[...] = dw
        grads.view("out.b")[...] = db
        dh = layers.relu_backward(da, caches["out.relu"])

        for i in reversed(range(self.spec.num_blocks)):
            dtw, dtb = layers.time_bias_backward(dh, caches[f"blk{i}.t"])
            grads.view(f"blk{i}.t.w")[...] = dtw
            grads.view(f"blk{i}.t.b")[...] = dtb
            da, dw, db = layers.conv2d_backward(dh, caches[f"blk{i}.conv"])
            grads.view(f"blk{i}.conv.w")[...] = dw
            grads.view(f"blk{i}.conv.b")[...] = db
            dn = layers.relu_backward(da, caches[f"blk{i}.relu"])
            dx, dg, dbias = layers.channel_norm_backward(dn, caches[f"blk{i}.norm"])
            grads.view(f"blk{i}.norm.g")[...] = dg
            grads.view(f"blk{i}.norm.b")[...] = dbias
            dh = dh + dx

        dtw, dtb = layers.time_bias_backward(dh, caches["in.t"])
        grads.view("in.t.w")[...] = dtw
        grads.view("in.t.b")[...] = dtb
        _, dw, db = layers.conv2d_backward(dh, caches["in"])
        grads.view("in.w")[...] = dw
        grads.view("in.b")[...] = db
        return grads.values


def predict_x0(params: DenoiserParams, x_t: CategoricalField, t: StepLike) -> CategoricalField:
    """x̂₀ = net(x_t, t)"""
    return ResidualConvDenoiser(params).predict_x0(x_t, t)


def backward(params: DenoiserParams, context: Optional[ForwardContext], grad_probs: np.ndarray) -> np.ndarray:
    """损失对参数的梯度"""
    return ResidualConvDenoiser(params).backward(context, grad_probs)
