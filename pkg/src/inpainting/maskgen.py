#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
掩码生成（1 = 已知，0 = 未知）

- rect      若干随机矩形未知
- half      四个轴对齐半区之一未知
- speckle   每个像素以概率 ρ 独立已知（稀疏投影）
- strokes   随机粗折线未知
- coverage  沿随机游走的圆盘足迹已知，其余未知

生成结果只取决于 (MaskSpec, H, W)。
"""

import dataclasses
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np
from dataclasses_json import dataclass_json
from PIL import Image, ImageDraw
from scipy import ndimage

from ..shared.infrastructure.errors.exceptions import ConfigurationError, DomainError

FAMILIES = ("rect", "half", "speckle", "strokes", "coverage")
HALF_SIDES = ("left", "right", "top", "bottom")


@dataclass_json
@dataclass(frozen=True)
class MaskSpec:
    """掩码族及其参数"""
    family: str = "rect"
    seed: int = 0
    # rect
    count: int = 2
    min_frac: float = 0.25
    max_frac: float = 0.55
    # half
    side: str = "random"
    # speckle
    rho: float = 0.05
    # strokes
    strokes: int = 3
    stroke_width: int = 3
    vertices: int = 4
    # coverage
    walk_length: int = 60
    radius: int = 3

    def validate(self) -> "MaskSpec":
        if self.family not in FAMILIES:
            raise ConfigurationError(f"未知掩码族: {self.family}，可选 {', '.join(FAMILIES)}")
        if self.seed < 0:
            raise ConfigurationError(f"种子不能为负: {self.seed}")
        if self.family == "rect":
            if self.count < 1 or not (0 < self.min_frac <= self.max_frac <= 1):
                raise ConfigurationError("rect 要求 count ≥ 1 且 0 < min_frac ≤ max_frac ≤ 1")
        elif self.family == "half":
            if self.side not in HALF_SIDES + ("random",):
                raise ConfigurationError(f"half 的 side 无效: {self.side}")
        elif self.family == "speckle":
            if not 0.0 <= self.rho <= 1.0:
                raise ConfigurationError(f"speckle 的 rho 必须在 [0, 1] 内: {self.rho}")
        elif self.family == "strokes":
            if self.strokes < 1 or self.stroke_width < 1 or self.vertices < 2:
                raise ConfigurationError("strokes 要求 strokes ≥ 1, stroke_width ≥ 1, vertices ≥ 2")
        elif self.family == "coverage":
            if self.walk_length < 1 or self.radius < 0:
                raise ConfigurationError("coverage 要求 walk_length ≥ 1 且 radius ≥ 0")
        return self

    @classmethod
    def from_string(cls, text: str, **overrides) -> "MaskSpec":
        """解析 "family:key=value,key=value"，例如 "rect:count=2" 或 "speckle:rho=0.05" """
        family, _, rest = text.strip().partition(":")
        values: Dict[str, Any] = {"family": family.strip()}
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        for item in filter(None, (part.strip() for part in rest.split(","))):
            key, sep, raw = item.partition("=")
            key = key.strip()
            if not sep or key not in types or key == "family":
                raise ConfigurationError(f"无效的掩码参数: {item}")
            try:
                values[key] = types[key](raw.strip())
            except ValueError:
                raise ConfigurationError(f"掩码参数取值无效: {item}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values).validate()

    def label(self) -> str:
        """用于表格的简短名称"""
        if self.family == "speckle":
            return f"speckle(ρ={self.rho:g})"
        if self.family == "half" and self.side != "random":
            return f"half({self.side})"
        return self.family


@dataclass_json
@dataclass
class MaskStats:
    """掩码统计"""
    height: int
    width: int
    known: int
    unknown: int

    @property
    def total(self) -> int:
        return self.height * self.width

    @property
    def unknown_fraction(self) -> float:
        return self.unknown / self.total if self.total else 0.0


def validate_mask(mask: np.ndarray, shape=None) -> np.ndarray:
    """校验二值掩码（可选地校验形状）"""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise DomainError(f"掩码必须是二维: shape={mask.shape}")
    if shape is not None and mask.shape != tuple(shape):
        raise DomainError(f"掩码形状不一致: {mask.shape} vs {tuple(shape)}")
    if not np.isin(mask, (0, 1)).all():
        raise DomainError("掩码只能取 0 或 1")
    return mask.astype(np.uint8)


def mask_stats(mask: np.ndarray) -> MaskStats:
    mask = validate_mask(mask)
    known = int(mask.sum())
    return MaskStats(height=mask.shape[0], width=mask.shape[1], known=known, unknown=int(mask.size - known))


def _rect(spec: MaskSpec, H: int, W: int, rng: np.random.Generator) -> np.ndarray:
    known = np.ones((H, W), dtype=np.uint8)
    for _ in range(spec.count):
        h_lo, h_hi = max(1, round(H * spec.min_frac)), max(1, round(H * spec.max_frac))
        w_lo, w_hi = max(1, round(W * spec.min_frac)), max(1, round(W * spec.max_frac))
        h = int(rng.integers(h_lo, h_hi + 1))
        w = int(rng.integers(w_lo, w_hi + 1))
        r = int(rng.integers(0, H - h + 1))
        c = int(rng.integers(0, W - w + 1))
        known[r:r + h, c:c + w] = 0
    return known


def _half(spec: MaskSpec, H: int, W: int, rng: np.random.Generator) -> np.ndarray:
    side = spec.side if spec.side != "random" else HALF_SIDES[int(rng.integers(len(HALF_SIDES)))]
    known = np.ones((H, W), dtype=np.uint8)
    if side == "left":
        known[:, :W // 2] = 0
    elif side == "right":
        known[:, W - W // 2:] = 0
    elif side == "top":
        known[:H // 2, :] = 0
    else:
        known[H - H // 2:, :] = 0
    return known


def _speckle(spec: MaskSpec, H: int, W: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.random((H, W)) < spec.rho).astype(np.uint8)


def _strokes(spec: MaskSpec, H: int, W: int, rng: np.random.Generator) -> np.ndarray:
    canvas = Image.new("L", (W, H), 0)
    draw = ImageDraw.Draw(canvas)
    for _ in range(spec.strokes):
        xs = rng.integers(0, W, size=spec.vertices)
        ys = rng.integers(0, H, size=spec.vertices)
        draw.line([(int(x), int(y)) for x, y in zip(xs, ys)], fill=255, width=spec.stroke_width)
    painted = np.asarray(canvas) > 0
    return (~painted).astype(np.uint8)


def _coverage(spec: MaskSpec, H: int, W: int, rng: np.random.Generator) -> np.ndarray:
    path = np.zeros((H, W), dtype=bool)
    r, c = int(rng.integers(H)), int(rng.integers(W))
    path[r, c] = True
    moves = np.array([(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)])
    for step in rng.integers(len(moves), size=spec.walk_length):
        r = int(np.clip(r + moves[step, 0], 0, H - 1))
        c = int(np.clip(c + moves[step, 1], 0, W - 1))
        path[r, c] = True
    if spec.radius > 0:
        yy, xx = np.mgrid[-spec.radius:spec.radius + 1, -spec.radius:spec.radius + 1]
        disk = xx * xx + yy * yy <= spec.radius * spec.radius
        path = ndimage.binary_dilation(path, structure=disk)
    return path.astype(np.uint8)


_GENERATORS = {
    "rect": _rect,
    "half": _half,
    "speckle": _speckle,
    "strokes": _strokes,
    "coverage": _coverage,
}


def generate(spec: MaskSpec, H: int, W: int) -> np.ndarray:
    """按掩码族生成 (H, W) 掩码"""
    spec.validate()
    if H < 1 or W < 1:
        raise ConfigurationError(f"掩码尺寸无效: {H}x{W}")
    rng = np.random.default_rng(spec.seed)
    return _GENERATORS[spec.family](spec, H, W, rng)
