#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
条件推理：Seq-Con 与 LB-Con

约定：掩码 M = 1 为已知像素，合并时已知像素取 y，未知像素取 x。
反向链的下标与外部 API 一致：从 x_T ~ 均匀分布开始，每步由
posterior(x_{t+1}, x̂₀) 采样 x_t，x̂₀ = net(x_{t+1}, t+1)。目标步 t ≤ 1 的
所有采样都去掉噪声，直接取 argmax。

两种策略共享同一条链：
  1. 由 x_T 得到 x_{T−1}（不合并）
  对 t = T−2..0：
  2. 反向采样 x_t
     加噪已知区域 y_t ~ C(ᾱ_t y₀ + (1−ᾱ_t)/K)
  3. 合并 m_t = M⊙y_t + (1−M)⊙x_t
  4. 回看：x_{t+1} ~ C((1−β_{t+1}) m_t + β_{t+1}/K)
  5. 再次反向采样 x_t
4–5 每步重复 r 次（重复之间重新合并）；r = 0 时直接把 m_t 带入下一步，即 Seq-Con。
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np

from ..core.catdiff import LabelMap, forward_step_probs, marginal_probs, one_hot, reverse_probs, validate_labels
from ..core.sampler import RngStream, sample_field
from ..core.schedule import NoiseSchedule
from ..model.denoiser import BaseDenoiser, DenoiserParams, ResidualConvDenoiser
from ..shared.infrastructure.config.settings import InpaintConfig
from ..shared.infrastructure.errors.exceptions import ConfigurationError, DomainError
from ..shared.infrastructure.logging.logger import get_logger
from ..shared.infrastructure.monitoring.metrics import get_metrics
from ..shared.infrastructure.ux.progress_tracker import ProgressTracker
from .maskgen import validate_mask

logger = get_logger("inpaint")

ModelLike = Union[DenoiserParams, BaseDenoiser]

STRATEGY_ALIASES = {
    "lb_con": "lb_con", "lb": "lb_con", "lb-con": "lb_con",
    "seq_con": "seq_con", "seq": "seq_con", "seq-con": "seq_con",
}


def normalize_strategy(name: str) -> str:
    """lb / lb_con / lb-con → lb_con，seq 同理"""
    try:
        return STRATEGY_ALIASES[name.lower()]
    except KeyError:
        raise ConfigurationError(f"未知推理策略: {name}，可选 lb_con, seq_con")


def as_denoiser(model: ModelLike) -> BaseDenoiser:
    if isinstance(model, BaseDenoiser):
        return model
    if isinstance(model, DenoiserParams):
        return ResidualConvDenoiser(model)
    raise DomainError(f"不支持的去噪网络类型: {type(model).__name__}")


def _model_dims(model: BaseDenoiser):
    spec = getattr(model, "spec", None)
    if spec is None:
        raise DomainError("去噪网络缺少结构描述 spec")
    return spec.height, spec.width, spec.num_classes


def merge(x: LabelMap, y: LabelMap, M: np.ndarray) -> LabelMap:
    """m = M⊙y + (1−M)⊙x：已知像素取 y，未知像素取 x"""
    x = np.asarray(x)
    y = np.asarray(y)
    M = np.asarray(M)
    if not (x.shape == y.shape == M.shape):
        raise DomainError(f"合并输入形状不一致: x={x.shape}, y={y.shape}, M={M.shape}")
    return np.where(M == 1, y, x)


class _Chain:
    """一条反向链的公共操作，所有随机数按调用顺序取自同一个流"""

    def __init__(self, model: BaseDenoiser, sch: NoiseSchedule, rng: RngStream, K: int):
        self.model = model
        self.sch = sch
        self.rng = rng
        self.K = K

    def initial(self, shape) -> LabelMap:
        """x_T ~ C(1/K)"""
        uniform = np.full(tuple(shape) + (self.K,), 1.0 / self.K)
        return sample_field(uniform, self.rng)

    def reverse(self, x_next: LabelMap, t_next: int) -> LabelMap:
        """x_{t_next−1} ~ posterior(x_{t_next}, net(x_{t_next}, t_next))"""
        x_onehot = one_hot(x_next, self.K)
        x0_hat = self.model.predict_x0(x_onehot, t_next)
        probs = reverse_probs(x_onehot, x0_hat, t_next, self.sch)
        return sample_field(probs, self.rng, deterministic=(t_next - 1) <= 1)

    def noise_known(self, y0: LabelMap, t: int) -> LabelMap:
        """y_t ~ C(ᾱ_t y₀ + (1−ᾱ_t)/K)；t = 0 时即 y₀"""
        if t == 0:
            return y0.copy()
        probs = marginal_probs(one_hot(y0, self.K), t, self.sch)
        return sample_field(probs, self.rng, deterministic=t <= 1)

    def look_back(self, m: LabelMap, t: int) -> LabelMap:
        """由 m_t 前向一步回到 x_{t+1}"""
        probs = forward_step_probs(one_hot(m, self.K), t + 1, self.sch)
        return sample_field(probs, self.rng, deterministic=t <= 1)


def _check_inputs(model: BaseDenoiser, y0: LabelMap, M: np.ndarray):
    H, W, K = _model_dims(model)
    y0 = np.asarray(y0)
    if y0.shape != (H, W):
        raise DomainError(f"输入地图尺寸与模型训练尺寸不符: {y0.shape} vs {(H, W)}")
    validate_labels(y0, K)
    return y0.astype(np.int64), validate_mask(M, (H, W)), K


def _conditioned_chain(model: ModelLike, y0: LabelMap, M: np.ndarray, sch: NoiseSchedule,
                       rng: RngStream, lookbacks: int, paste_known: bool, strategy: str) -> LabelMap:
    if lookbacks < 0:
        raise ConfigurationError(f"回看次数不能为负: {lookbacks}")
    net = as_denoiser(model)
    y0, M, K = _check_inputs(net, y0, M)
    chain = _Chain(net, sch, rng, K)
    T = sch.T

    with get_metrics().timer("inpaint.chain", {"strategy": strategy}):
        x_T = chain.initial(y0.shape)
        state = chain.reverse(x_T, T)
        for t in range(T - 2, -1, -1):
            x_t = chain.reverse(state, t + 1)
            y_t = chain.noise_known(y0, t)
            m_t = merge(x_t, y_t, M)
            for repeat in range(lookbacks):
                if repeat > 0:
                    m_t = merge(x_t, chain.noise_known(y0, t), M)
                x_up = chain.look_back(m_t, t)
                x_t = chain.reverse(x_up, t + 1)
            state = m_t if lookbacks == 0 else x_t
            if t % max(1, T // 10) == 0:
                logger.log_sampling(strategy, t, T)

    return merge(state, y0, M) if paste_known else state


def seq_con(params: ModelLike, y0: LabelMap, M: np.ndarray, sch: NoiseSchedule, rng: RngStream,
            paste_known: bool = True) -> LabelMap:
    """顺序条件：每步把加噪后的已知区域合并进生成结果"""
    return _conditioned_chain(params, y0, M, sch, rng, 0, paste_known, "seq_con")


def lb_con(params: ModelLike, y0: LabelMap, M: np.ndarray, sch: NoiseSchedule, rng: RngStream,
           r: int = 1, paste_known: bool = True) -> LabelMap:
    """回看条件：合并后前向加噪一步，再反向采样一次"""
    return _conditioned_chain(params, y0, M, sch, rng, r, paste_known, "lb_con")


def sample_unconditional(params: ModelLike, sch: NoiseSchedule, rng: RngStream) -> LabelMap:
    """标准反向过程：从均匀噪声生成一张地图"""
    net = as_denoiser(params)
    H, W, K = _model_dims(net)
    chain = _Chain(net, sch, rng, K)
    with get_metrics().timer("sample.chain"):
        x = chain.initial((H, W))
        for t_next in range(sch.T, 0, -1):
            x = chain.reverse(x, t_next)
    return x


def run_strategy(params: ModelLike, y0: LabelMap, M: np.ndarray, sch: NoiseSchedule, rng: RngStream,
                 strategy: str = "lb_con", lookbacks: int = 1, paste_known: bool = True) -> LabelMap:
    """按策略名运行一条条件链"""
    if normalize_strategy(strategy) == "seq_con":
        return seq_con(params, y0, M, sch, rng, paste_known)
    return lb_con(params, y0, M, sch, rng, lookbacks, paste_known)


def uncertainty_map(samples, K: int) -> np.ndarray:
    """多样本经验类别直方图的逐像素熵，按 log K 归一化到 [0, 1]"""
    samples = np.asarray(samples)
    if samples.ndim != 3 or samples.shape[0] < 1:
        raise DomainError(f"样本必须是 (S, H, W) 且 S ≥ 1: shape={samples.shape}")
    validate_labels(samples, K)
    freq = one_hot(samples, K).mean(axis=0)
    logs = np.log(np.where(freq > 0, freq, 1.0))
    entropy = -(freq * logs).sum(axis=-1)
    return np.clip(entropy / np.log(K), 0.0, 1.0)


@dataclass
class MultiSampleResult:
    """多次采样结果"""
    samples: List[LabelMap]
    uncertainty: np.ndarray
    seeds: List[int]
    strategy: str
    lookbacks: int
    timings: Dict[str, float] = field(default_factory=dict)


def multi_sample(params: ModelLike, y0: LabelMap, M: np.ndarray, sch: NoiseSchedule, S: int, seed: int,
                 strategy: str = "lb_con", lookbacks: int = 1, paste_known: bool = True,
                 workers: int = 1, tracker: Optional[ProgressTracker] = None) -> MultiSampleResult:
    """S 次独立推理（种子 seed+0..seed+S−1）及不确定性图"""
    if S < 1:
        raise DomainError(f"样本数必须至少为 1: {S}")
    strategy = normalize_strategy(strategy)
    net = as_denoiser(params)
    _, _, K = _model_dims(net)
    seeds = [seed + i for i in range(S)]
    tracker = tracker or ProgressTracker()
    tracker.create_task("multi_sample", f"多次采样 [{strategy}]", S)
    start = time.perf_counter()

    def one(run_seed: int) -> LabelMap:
        out = run_strategy(net, y0, M, sch, RngStream(run_seed), strategy, lookbacks, paste_known)
        tracker.advance("multi_sample")
        return out

    if workers > 1 and S > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            samples = list(executor.map(one, seeds))
    else:
        samples = [one(s) for s in seeds]
    tracker.complete_task("multi_sample")

    elapsed = time.perf_counter() - start
    logger.log_performance("multi_sample", elapsed, samples=S)
    return MultiSampleResult(samples=samples, uncertainty=uncertainty_map(np.stack(samples), K),
                             seeds=seeds, strategy=strategy, lookbacks=lookbacks,
                             timings={"total_seconds": elapsed, "per_sample_seconds": elapsed / S})


def inpaint(params: ModelLike, y0: LabelMap, M: np.ndarray, sch: NoiseSchedule,
            config: Optional[InpaintConfig] = None) -> MultiSampleResult:
    """按配置补全一张地图（num_samples = 1 时只运行一条链）"""
    config = config or InpaintConfig()
    return multi_sample(params, y0, M, sch, config.num_samples, config.seed,
                        strategy=config.strategy, lookbacks=config.lookbacks,
                        paste_known=config.paste_known, workers=config.workers)
