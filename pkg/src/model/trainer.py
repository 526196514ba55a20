#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
无条件训练

每个样本独立抽取 t ~ U{1..T}，按闭式边缘分布加噪得到 x_t，
对 t ≥ 2 最小化两个后验之间的 KL，对 t = 1 最小化重建项 −log x̂₀[真实类别]。
数据顺序、步数、加噪与翻转增广全部来自同一个种子流，训练可逐步复现。
"""

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import layers
from .denoiser import DenoiserParams, DenoiserSpec, ResidualConvDenoiser, init_params
from .optim import build_optimizer
from ..core.catdiff import PROB_FLOOR, marginal_probs, one_hot, posterior_probs, kl_per_pixel, validate_labels
from ..core.sampler import RngStream, sample_field
from ..core.schedule import NoiseSchedule
from ..data.formats import save_checkpoint
from ..shared.infrastructure.config.settings import ModelConfig, TrainConfig
from ..shared.infrastructure.errors.exceptions import (
    DomainError, NonFiniteLossError, TrainingDivergenceError,
)
from ..shared.infrastructure.logging.logger import get_logger
from ..shared.infrastructure.monitoring.metrics import get_metrics
from ..shared.infrastructure.ux.progress_tracker import ProgressTracker

logger = get_logger("trainer")

LOG_COLUMNS = ["step", "loss", "t_mean", "wall_time"]


def _as_batch(labels) -> np.ndarray:
    batch = np.asarray(labels)
    if batch.ndim == 2:
        batch = batch[None]
    if batch.ndim != 3:
        raise DomainError(f"训练批次必须是 (B, H, W) 标签图: shape={batch.shape}")
    return batch


def _loss_terms(x0: np.ndarray, x_t: np.ndarray, x0_hat: np.ndarray, t: np.ndarray,
                sch: NoiseSchedule) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """逐样本损失及其对 x̂₀ 的梯度

    返回 (loss[B], grad_probs[B,H,W,K], grad_logits[B,H,W,K])。t ≥ 2 的样本梯度放在
    grad_probs 中，t = 1 的重建项直接给出对 logits 的梯度 (x̂₀ − x₀)/N。
    """
    B = x0.shape[0]
    n_pixels = x0.shape[1] * x0.shape[2]
    losses = np.zeros(B)
    grad_probs = np.zeros_like(x0_hat)
    grad_logits = np.zeros_like(x0_hat)

    for b in range(B):
        tb = int(t[b])
        if tb == 1:
            true_prob = np.sum(x0_hat[b] * x0[b], axis=-1)
            losses[b] = float(-np.mean(np.log(np.maximum(true_prob, PROB_FLOOR))))
            grad_logits[b] = (x0_hat[b] - x0[b]) / n_pixels
            continue
        q = posterior_probs(x_t[b], x0[b], tb, sch)
        p = posterior_probs(x_t[b], x0_hat[b], tb, sch)
        losses[b] = float(kl_per_pixel(q, p).mean())
        # p ∝ a ⊙ c，c = ᾱ_{t−1} x̂₀ + (1−ᾱ_{t−1})/K，∂KL/∂x̂₀ = ᾱ_{t−1}(p − q)/c
        a_prev = float(sch.alpha_bar_at(tb - 1))
        K = x0.shape[-1]
        c = a_prev * x0_hat[b] + (1.0 - a_prev) / K
        grad_probs[b] = a_prev * (p - q) / np.maximum(c, PROB_FLOOR) / n_pixels
    return losses, grad_probs, grad_logits


def _check_finite(loss: float, t: np.ndarray, sch: NoiseSchedule, x0_hat: np.ndarray):
    if np.isfinite(loss):
        return
    details = {
        "t": [int(v) for v in t],
        "alpha_bar_t": [float(sch.alpha_bar_at(int(v))) for v in t],
        "min_prob": float(np.min(x0_hat)),
    }
    raise NonFiniteLossError(f"损失出现非有限值: {loss}", error_code="NON_FINITE_LOSS", details=details)


def compute_loss(params: DenoiserParams, x0_batch, x_t_batch, t, sch: NoiseSchedule,
                 with_grad: bool = True) -> Tuple[float, Optional[np.ndarray]]:
    """给定 (x₀, x_t, t) 的确定性损失与参数梯度（批量平均）"""
    x0_labels = _as_batch(x0_batch)
    xt_labels = _as_batch(x_t_batch)
    if x0_labels.shape != xt_labels.shape:
        raise DomainError(f"x₀ 与 x_t 形状不一致: {x0_labels.shape} vs {xt_labels.shape}")
    K = params.spec.num_classes
    B = x0_labels.shape[0]
    t_arr = np.broadcast_to(np.asarray(t, dtype=np.int64).reshape(-1), (B,))
    sch.check_step(t_arr)

    x0 = one_hot(x0_labels, K)
    x_t = one_hot(xt_labels, K)
    model = ResidualConvDenoiser(params)
    x0_hat, context = model.forward(x_t, t_arr)

    losses, grad_probs, grad_logits = _loss_terms(x0, x_t, x0_hat, t_arr, sch)
    loss = float(losses.mean())
    _check_finite(loss, t_arr, sch, x0_hat)
    if not with_grad:
        return loss, None

    total_logits = layers.softmax_backward(grad_probs, x0_hat) + grad_logits
    grad = model.backward_logits(context, total_logits / B)
    return loss, grad


def oracle_loss(x0_batch, x_t_batch, t, sch: NoiseSchedule, K: int) -> float:
    """x̂₀ = x₀ 时的损失，是任何去噪网络在同一批次上的下界"""
    x0_labels = _as_batch(x0_batch)
    xt_labels = _as_batch(x_t_batch)
    t_arr = np.broadcast_to(np.asarray(t, dtype=np.int64).reshape(-1), (x0_labels.shape[0],))
    sch.check_step(t_arr)
    x0 = one_hot(x0_labels, K)
    losses, _, _ = _loss_terms(x0, one_hot(xt_labels, K), x0, t_arr, sch)
    return float(losses.mean())


def draw_noisy(x0_batch, rng: RngStream, sch: NoiseSchedule, K: int,
               t: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """抽取 t（未给出时均匀抽样）并采样 x_t ~ C(ᾱ_t x₀ + (1−ᾱ_t)/K)"""
    x0_labels = _as_batch(x0_batch)
    B = x0_labels.shape[0]
    if t is None:
        t = rng.integers(1, sch.T + 1, size=B)
    t = np.broadcast_to(np.asarray(t, dtype=np.int64).reshape(-1), (B,)).copy()
    probs = marginal_probs(one_hot(x0_labels, K), t, sch)
    return sample_field(probs, rng), t


def loss_step(params: DenoiserParams, x0_batch, rng: RngStream,
              sch: NoiseSchedule) -> Tuple[float, np.ndarray]:
    """一次随机损失评估：抽 t，加噪，返回 (损失, 梯度)"""
    x0_labels = _as_batch(x0_batch)
    x_t, t = draw_noisy(x0_labels, rng, sch, params.spec.num_classes)
    return compute_loss(params, x0_labels, x_t, t, sch)


def evaluate_loss(params: DenoiserParams, maps, sch: NoiseSchedule, t: int, seed: int = 0) -> Dict[str, float]:
    """固定 t 的留出集损失：模型损失、oracle 损失与 KL(one_hot(x₀) ‖ x̂₀)"""
    x0_labels = _as_batch(maps)
    K = params.spec.num_classes
    rng = RngStream(seed)
    x_t, t_arr = draw_noisy(x0_labels, rng, sch, K, t=np.full(x0_labels.shape[0], t))
    model_loss, _ = compute_loss(params, x0_labels, x_t, t_arr, sch, with_grad=False)
    x0_hat = ResidualConvDenoiser(params).predict_x0(one_hot(x_t, K), t_arr)
    x0 = one_hot(x0_labels, K)
    return {
        "loss": model_loss,
        "oracle_loss": oracle_loss(x0_labels, x_t, t_arr, sch, K),
        "x0_kl": float(kl_per_pixel(x0, x0_hat).mean()),
    }


def smooth(curve: Sequence[float], window: int = 50) -> np.ndarray:
    """滑动平均（窗口不足时取已有部分）"""
    series = pd.Series(np.asarray(curve, dtype=np.float64))
    return series.rolling(window=max(1, int(window)), min_periods=1).mean().to_numpy()


@dataclass
class TrainResult:
    """训练结果"""
    params: DenoiserParams
    log: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=LOG_COLUMNS))
    checkpoints: list = field(default_factory=list)

    @property
    def losses(self) -> np.ndarray:
        return self.log["loss"].to_numpy()

    @property
    def initial_loss(self) -> float:
        return float(self.losses[0]) if len(self.log) else float("nan")

    @property
    def final_loss(self) -> float:
        return float(self.losses[-1]) if len(self.log) else float("nan")

    def save_log(self, path) -> Path:
        """写出训练日志 CSV（step, loss, t_mean, wall_time）"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.log.to_csv(path, index=False, columns=LOG_COLUMNS)
        return path


class _BatchSampler:
    """按轮次打乱的数据顺序，批次跨轮次连续取"""

    def __init__(self, size: int, rng: RngStream):
        self.size = size
        self.rng = rng
        self._order = np.empty(0, dtype=np.int64)
        self._cursor = 0

    def next(self, batch_size: int) -> np.ndarray:
        picked = []
        while len(picked) < batch_size:
            if self._cursor >= len(self._order):
                self._order = self.rng.permutation(self.size)
                self._cursor = 0
            take = min(batch_size - len(picked), len(self._order) - self._cursor)
            picked.extend(self._order[self._cursor:self._cursor + take])
            self._cursor += take
        return np.asarray(picked, dtype=np.int64)


def train(config: TrainConfig, dataset, sch: NoiseSchedule, num_classes: int,
          model_config: Optional[ModelConfig] = None,
          params: Optional[DenoiserParams] = None,
          tracker: Optional[ProgressTracker] = None) -> TrainResult:
    """训练去噪网络，返回量化后的参数与逐步损失日志"""
    data = _as_batch(dataset)
    if data.shape[0] == 0:
        raise DomainError("训练数据集为空")
    validate_labels(data, num_classes)
    model_config = model_config or ModelConfig()
    _, H, W = data.shape

    if params is None:
        spec = DenoiserSpec(num_classes=num_classes, height=H, width=W,
                            channels=model_config.channels, num_blocks=model_config.num_blocks,
                            kernel_size=model_config.kernel_size, time_dim=model_config.time_dim)
        params = init_params(spec, seed=config.seed, zero_head=True)
    else:
        params = params.copy()
        if (params.spec.height, params.spec.width, params.spec.num_classes) != (H, W, num_classes):
            raise DomainError("初始参数的训练尺寸与数据集不一致")

    rng = RngStream(config.seed)
    data_rng = rng.spawn(0)
    noise_rng = rng.spawn(1)
    flip_rng = rng.spawn(2)
    batches = _BatchSampler(data.shape[0], data_rng)
    optimizer = build_optimizer(config)
    metrics = get_metrics()
    tracker = tracker or ProgressTracker()
    tracker.create_task("train", "训练去噪网络", config.steps)

    rows = []
    checkpoints = []
    initial_loss: Optional[float] = None
    over_count = 0
    start = time.perf_counter()

    logger.info(f"开始训练: {data.shape[0]} 张地图, {H}x{W}, K={num_classes}, T={sch.T}, "
                f"参数量={params.spec.num_params}, 优化器={config.optimizer}")
    try:
        for step in range(1, config.steps + 1):
            batch = data[batches.next(config.batch_size)]
            if config.augment_flip:
                flips = flip_rng.random(config.batch_size) < config.flip_probability
                batch = np.where(flips[:, None, None], batch[:, :, ::-1], batch)

            with metrics.timer("train.step"):
                x_t, t = draw_noisy(batch, noise_rng, sch, num_classes)
                loss, grad = compute_loss(params, batch, x_t, t, sch)
                optimizer.step(params.values, grad)

            wall_time = time.perf_counter() - start
            rows.append((step, loss, float(t.mean()), wall_time))

            if initial_loss is None:
                initial_loss = loss
            if loss > config.divergence_factor * initial_loss:
                over_count += 1
                if over_count >= config.divergence_patience:
                    raise TrainingDivergenceError(
                        f"训练发散: 连续 {over_count} 步损失超过初始值的 {config.divergence_factor} 倍",
                        error_code="DIVERGED",
                        details={"step": step, "loss": loss, "initial_loss": initial_loss})
            else:
                over_count = 0

            if config.log_every and step % config.log_every == 0:
                logger.log_training_step(step, loss, wall_time)
            tracker.advance("train", loss=f"{loss:.4f}")

            if config.checkpoint_every and config.checkpoint_dir and step % config.checkpoint_every == 0:
                checkpoints.append(_write_checkpoint(params, sch, config.checkpoint_dir, step))
    except Exception as e:
        tracker.complete_task("train", error_message=str(e))
        raise

    tracker.complete_task("train")
    metrics.set_gauge("train.final_loss", rows[-1][1] if rows else float("nan"))
    log = pd.DataFrame(rows, columns=LOG_COLUMNS)
    return TrainResult(params=params.quantized(), log=log, checkpoints=checkpoints)


def _write_checkpoint(params: DenoiserParams, sch: NoiseSchedule, directory: str, step: int) -> str:
    path = Path(directory) / f"step_{step:07d}.spnt"
    save_checkpoint(path, params.quantized(), sch)
    logger.info(f"已保存检查点: {path}")
    return str(path)
