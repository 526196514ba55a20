#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
评估指标：像素精度与平均交并比

混淆矩阵行为真值、列为预测。评估区域为 missing（M = 0 的像素）或 full（全部像素）。
IoU_k = tp / (tp + fp + fn)，并集为零的类别不参与 mIoU 平均。
所有数值以百分比（×100）保存与输出。
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from dataclasses_json import dataclass_json

from ..shared.infrastructure.errors.exceptions import DomainError

REGIONS = ("missing", "full")


@dataclass_json
@dataclass
class EvalReport:
    """单次评估结果（百分比）"""
    miou: float
    acc: float
    pixels: int
    region: str
    per_class_iou: Dict[int, float] = field(default_factory=dict)
    name: str = ""

    def to_row(self) -> Dict[str, object]:
        row: Dict[str, object] = {"name": self.name, "region": self.region, "pixels": self.pixels,
                                  "miou": round(self.miou, 4), "acc": round(self.acc, 4)}
        for k, v in sorted(self.per_class_iou.items()):
            row[f"iou_{k}"] = round(v, 4)
        return row

    def summary(self) -> str:
        return f"mIoU {self.miou:.2f} / Acc {self.acc:.2f}"


def confusion_matrix(pred: np.ndarray, gt: np.ndarray, K: int) -> np.ndarray:
    """K×K 混淆矩阵（行 = 真值，列 = 预测）"""
    index = K * gt.astype(np.int64) + pred.astype(np.int64)
    return np.bincount(index, minlength=K * K).reshape(K, K)


def scores_from_confusion(cm: np.ndarray):
    """由混淆矩阵得到 (acc, mIoU, 各类 IoU)，均为 [0, 1] 小数"""
    total = cm.sum()
    if total == 0:
        raise DomainError("评估区域为空")
    tp = np.diag(cm).astype(np.float64)
    union = cm.sum(axis=0) + cm.sum(axis=1) - tp
    included = union > 0
    iou = {int(k): float(tp[k] / union[k]) for k in np.flatnonzero(included)}
    miou = float(np.mean(list(iou.values())))
    acc = float(tp.sum() / total)
    return acc, miou, iou


def evaluate(pred: np.ndarray, gt: np.ndarray, M: Optional[np.ndarray] = None, region: str = "missing",
             K: Optional[int] = None, name: str = "") -> EvalReport:
    """在指定区域上计算 Acc 与 mIoU"""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise DomainError(f"预测与真值形状不一致: {pred.shape} vs {gt.shape}")
    if region not in REGIONS:
        raise DomainError(f"未知评估区域: {region}，可选 missing, full")
    if region == "missing":
        if M is None:
            raise DomainError("missing 区域评估需要掩码")
        M = np.asarray(M)
        if M.shape != gt.shape:
            raise DomainError(f"掩码形状不一致: {M.shape} vs {gt.shape}")
        selected = M == 0
    else:
        selected = np.ones(gt.shape, dtype=bool)

    p, g = pred[selected], gt[selected]
    if g.size == 0:
        raise DomainError(f"评估区域 '{region}' 中没有像素")
    if min(p.min(), g.min()) < 0:
        raise DomainError("标签不能为负")
    top = int(max(p.max(), g.max()))
    K = K or top + 1
    if top >= K:
        raise DomainError(f"标签 {top} 超出类别数 K={K}")
    acc, miou, iou = scores_from_confusion(confusion_matrix(p, g, K))
    return EvalReport(miou=100.0 * miou, acc=100.0 * acc, pixels=int(g.size), region=region,
                      per_class_iou={k: 100.0 * v for k, v in iou.items()}, name=name)


def reports_to_frame(reports: List[EvalReport]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in reports])


def format_report(report: EvalReport) -> str:
    """打印用表格（两位小数）"""
    lines = [f"{'region':<10}{'mIoU':>10}{'Acc':>10}{'pixels':>10}",
             f"{report.region:<10}{report.miou:>10.2f}{report.acc:>10.2f}{report.pixels:>10d}"]
    if report.per_class_iou:
        lines.append("per-class IoU: " + ", ".join(f"{k}={v:.2f}" for k, v in sorted(report.per_class_iou.items())))
    return "\n".join(lines)
