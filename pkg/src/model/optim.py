#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
优化器

两者都原地更新扁平参数向量，状态缓冲区归优化器自己所有。
"""

from abc import ABC, abstractmethod

import numpy as np

from ..shared.infrastructure.errors.exceptions import ConfigurationError


class Optimizer(ABC):
    """优化器基类"""

    def __init__(self, learning_rate: float):
        if learning_rate <= 0:
            raise ConfigurationError(f"学习率必须为正: {learning_rate}")
        self.learning_rate = float(learning_rate)
        self.iterations = 0

    @abstractmethod
    def step(self, values: np.ndarray, grad: np.ndarray) -> None:
        """按梯度原地更新 values"""


class SGDMomentum(Optimizer):
    """带动量的随机梯度下降：v ← μv − ηg，θ ← θ + v"""

    def __init__(self, learning_rate: float, momentum: float = 0.9):
        super().__init__(learning_rate)
        if not 0.0 <= momentum < 1.0:
            raise ConfigurationError(f"动量必须在 [0, 1) 内: {momentum}")
        self.momentum = float(momentum)
        self._velocity = None

    def step(self, values: np.ndarray, grad: np.ndarray) -> None:
        if self._velocity is None:
            self._velocity = np.zeros_like(values)
        self._velocity *= self.momentum
        self._velocity -= self.learning_rate * grad
        values += self._velocity
        self.iterations += 1


class Adam(Optimizer):
    """自适应矩估计"""

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        super().__init__(learning_rate)
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigurationError(f"Adam 的 beta 必须在 [0, 1) 内: {beta1}, {beta2}")
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self._m = None
        self._v = None

    def step(self, values: np.ndarray, grad: np.ndarray) -> None:
        if self._m is None:
            self._m = np.zeros_like(values)
            self._v = np.zeros_like(values)
        self.iterations += 1
        self._m = self.beta1 * self._m + (1.0 - self.beta1) * grad
        self._v = self.beta2 * self._v + (1.0 - self.beta2) * grad * grad
        m_hat = self._m / (1.0 - self.beta1 ** self.iterations)
        v_hat = self._v / (1.0 - self.beta2 ** self.iterations)
        values -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def build_optimizer(config) -> Optimizer:
    """由 TrainConfig 构造优化器"""
    if config.optimizer == "sgd":
        return SGDMomentum(config.learning_rate, config.momentum)
    if config.optimizer == "adam":
        return Adam(config.learning_rate, config.adam_beta1, config.adam_beta2)
    raise ConfigurationError(f"未知优化器: {config.optimizer}")
