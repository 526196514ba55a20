#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
PNG 渲染（供人工查看）

固定 20 色调色板，类别号超过 20 时循环取色；调色板中没有纯黑，
纯黑专门表示未知像素。
"""

from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image

from ..shared.infrastructure.errors.exceptions import DomainError

PathLike = Union[str, Path]

UNKNOWN_COLOR = (0, 0, 0)

PALETTE: Tuple[Tuple[int, int, int], ...] = (
    (107, 142, 35),    # background
    (128, 64, 128),    # road
    (244, 35, 232),    # sidewalk
    (70, 70, 70),      # building
    (0, 0, 142),       # vehicle
    (220, 20, 60),
    (250, 170, 30),
    (220, 220, 0),
    (102, 102, 156),
    (190, 153, 153),
    (153, 153, 153),
    (152, 251, 152),
    (70, 130, 180),
    (255, 0, 0),
    (0, 0, 70),
    (0, 60, 100),
    (0, 80, 100),
    (0, 0, 230),
    (119, 11, 32),
    (255, 255, 255),
)


def colorize(labels: np.ndarray, mask: Optional[np.ndarray] = None,
             palette: Sequence[Tuple[int, int, int]] = PALETTE, scale: int = 1) -> np.ndarray:
    """标签图 → RGB 数组，mask 为 0 的像素涂黑"""
    labels = np.asarray(labels)
    if labels.ndim != 2 or labels.size == 0:
        raise DomainError(f"标签图必须是非空二维数组: shape={labels.shape}")
    if labels.min() < 0:
        raise DomainError("标签不能为负")
    table = np.asarray(palette, dtype=np.uint8)
    rgb = table[labels % len(table)]
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape != labels.shape:
            raise DomainError(f"掩码形状与标签图不一致: {mask.shape} vs {labels.shape}")
        rgb[mask == 0] = UNKNOWN_COLOR
    if scale > 1:
        rgb = np.repeat(np.repeat(rgb, scale, axis=0), scale, axis=1)
    return rgb


def render_png(labels: np.ndarray, path: PathLike, mask: Optional[np.ndarray] = None,
               palette: Sequence[Tuple[int, int, int]] = PALETTE, scale: int = 4) -> Path:
    """渲染标签图为 PNG"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(colorize(labels, mask, palette, scale), mode="RGB").save(path, format="PNG")
    return path


def render_uncertainty_png(uncertainty: np.ndarray, path: PathLike, scale: int = 4) -> Path:
    """不确定性图 [0,1] → 灰度 PNG（越亮越不确定）"""
    u = np.asarray(uncertainty, dtype=np.float64)
    if u.ndim != 2:
        raise DomainError(f"不确定性图必须是二维: shape={u.shape}")
    gray = np.rint(np.clip(u, 0.0, 1.0) * 255.0).astype(np.uint8)
    if scale > 1:
        gray = np.repeat(np.repeat(gray, scale, axis=0), scale, axis=1)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(gray, mode="L").save(path, format="PNG")
    return path
