#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
去噪网络的基础层（numpy 实现，显式反向传播）

张量布局统一为 NHWC：(B, H, W, C)。每个 *_forward 返回 (输出, 缓存)，
对应的 *_backward 接收上游梯度与缓存，返回 (输入梯度, 参数梯度...)。
"""

import math
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NORM_EPS = 1e-5


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, tuple]:
    """same 填充的二维卷积，w 形状为 (k, k, C_in, C_out)"""
    B, H, W, C_in = x.shape
    k = w.shape[0]
    pad = k // 2
    c_out = w.shape[-1]
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    # (B, H, W, C_in, k, k) → (B·H·W, k·k·C_in)，顺序与 w.reshape 一致
    cols = sliding_window_view(xp, (k, k), axis=(1, 2))
    cols = cols.transpose(0, 1, 2, 4, 5, 3).reshape(B * H * W, k * k * C_in)
    out = cols @ w.reshape(-1, c_out) + b
    return out.reshape(B, H, W, c_out), (x.shape, cols, w)


def conv2d_backward(dout: np.ndarray, cache: tuple) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    x_shape, cols, w = cache
    B, H, W, C_in = x_shape
    k = w.shape[0]
    pad = k // 2
    c_out = w.shape[-1]
    d2 = dout.reshape(-1, c_out)
    dw = (cols.T @ d2).reshape(w.shape)
    db = d2.sum(axis=0)
    dcols = (d2 @ w.reshape(-1, c_out).T).reshape(B, H, W, k, k, C_in)
    dxp = np.zeros((B, H + 2 * pad, W + 2 * pad, C_in))
    for i in range(k):
        for j in range(k):
            dxp[:, i:i + H, j:j + W, :] += dcols[:, :, :, i, j, :]
    return dxp[:, pad:pad + H, pad:pad + W, :], dw, db


def relu_forward(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mask = x > 0
    return x * mask, mask


def relu_backward(dout: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return dout * mask


def channel_norm_forward(x: np.ndarray, gain: np.ndarray, bias: np.ndarray) -> Tuple[np.ndarray, tuple]:
    """逐像素在通道维上归一化（LayerNorm over C）"""
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + NORM_EPS)
    xhat = (x - mu) * inv_std
    return gain * xhat + bias, (xhat, inv_std, gain)


def channel_norm_backward(dout: np.ndarray, cache: tuple) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    xhat, inv_std, gain = cache
    C = xhat.shape[-1]
    dgain = (dout * xhat).reshape(-1, C).sum(axis=0)
    dbias = dout.reshape(-1, C).sum(axis=0)
    dxhat = dout * gain
    dx = inv_std / C * (C * dxhat
                        - dxhat.sum(axis=-1, keepdims=True)
                        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True))
    return dx, dgain, dbias


def sinusoidal_embedding(t: np.ndarray, dim: int) -> np.ndarray:
    """正弦时间嵌入，t 形状 (B,) → (B, dim)"""
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half, dtype=np.float64) / half)
    args = np.asarray(t, dtype=np.float64).reshape(-1, 1) * freqs.reshape(1, -1)
    return np.concatenate([np.sin(args), np.cos(args)], axis=1)


def time_bias_forward(emb: np.ndarray, w: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """时间嵌入经线性投影后作为逐通道偏置，返回 (B, 1, 1, C)"""
    proj = emb @ w + b
    return proj[:, None, None, :], emb


def time_bias_backward(dout: np.ndarray, emb: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    dproj = dout.sum(axis=(1, 2))
    return emb.T @ dproj, dproj.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(dprobs: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """对概率的梯度 → 对 logits 的梯度"""
    return probs * (dprobs - (dprobs * probs).sum(axis=-1, keepdims=True))
