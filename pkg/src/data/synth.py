#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
合成街景数据集

类别约定：0 背景、1 道路、2 人行道、3 建筑、4 车辆。
每张地图由 1~2 条直行道路、紧贴道路的人行道、背景上的矩形建筑
以及只停在道路上的车辆组成。第 i 张地图使用由根种子派生的独立子种子，
因此可以按地图并行生成，结果与执行顺序无关。
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List

import numpy as np
from dataclasses_json import dataclass_json
from scipy import ndimage

from ..shared.infrastructure.errors.exceptions import ConfigurationError
from ..shared.infrastructure.logging.logger import get_logger

logger = get_logger("synth")

BACKGROUND, ROAD, SIDEWALK, BUILDING, VEHICLE = range(5)
CLASS_NAMES = ["background", "road", "sidewalk", "building", "vehicle"]


@dataclass_json
@dataclass
class SynthSpec:
    """合成数据集参数"""
    count: int = 1000
    height: int = 32
    width: int = 32
    num_classes: int = 5
    seed: int = 0
    max_roads: int = 2
    road_width_min: int = 3
    road_width_max: int = 6
    sidewalk_width: int = 1
    building_density: float = 0.6
    building_size_min: int = 3
    building_size_max: int = 8
    vehicle_rate: float = 1.0

    def validate(self) -> "SynthSpec":
        if self.count < 0:
            raise ConfigurationError(f"地图数量不能为负: {self.count}")
        if self.num_classes < 3:
            raise ConfigurationError(f"合成街景至少需要 3 个类别: {self.num_classes}")
        if not (1 <= self.road_width_min <= self.road_width_max):
            raise ConfigurationError("道路宽度范围无效")
        if self.road_width_max > min(self.height, self.width):
            raise ConfigurationError(f"道路宽度超过地图尺寸: {self.road_width_max}")
        if self.max_roads < 1 or self.sidewalk_width < 0:
            raise ConfigurationError("道路数量至少为 1，人行道宽度不能为负")
        if self.building_density < 0 or self.vehicle_rate < 0:
            raise ConfigurationError("建筑密度与车辆率不能为负")
        if not (1 <= self.building_size_min <= self.building_size_max):
            raise ConfigurationError("建筑尺寸范围无效")
        return self


def _place_roads(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    H, W = spec.height, spec.width
    road = np.zeros((H, W), dtype=bool)
    for _ in range(int(rng.integers(1, spec.max_roads + 1))):
        width = int(rng.integers(spec.road_width_min, spec.road_width_max + 1))
        if rng.integers(2) == 0:
            row = int(rng.integers(0, H - width + 1))
            road[row:row + width, :] = True
        else:
            col = int(rng.integers(0, W - width + 1))
            road[:, col:col + width] = True
    return road


def _place_buildings(labels: np.ndarray, spec: SynthSpec, rng: np.random.Generator):
    H, W = labels.shape
    n_buildings = int(rng.poisson(spec.building_density * H * W / 64.0))
    hi = min(spec.building_size_max, H, W)
    lo = min(spec.building_size_min, hi)
    for _ in range(n_buildings):
        h = int(rng.integers(lo, hi + 1))
        w = int(rng.integers(lo, hi + 1))
        r = int(rng.integers(0, H - h + 1))
        c = int(rng.integers(0, W - w + 1))
        block = labels[r:r + h, c:c + w]
        block[block == BACKGROUND] = BUILDING


def _place_vehicles(labels: np.ndarray, spec: SynthSpec, rng: np.random.Generator, n_roads_hint: int):
    H, W = labels.shape
    n_vehicles = int(rng.poisson(spec.vehicle_rate * 2 * n_roads_hint))
    for _ in range(n_vehicles):
        # 每辆车尝试若干次，只接受完全落在道路上的位置
        for _attempt in range(10):
            h, w = (2, 3) if rng.integers(2) == 0 else (3, 2)
            if h > H or w > W:
                break
            r = int(rng.integers(0, H - h + 1))
            c = int(rng.integers(0, W - w + 1))
            block = labels[r:r + h, c:c + w]
            if np.all(block == ROAD):
                block[...] = VEHICLE
                break


def synth_one(spec: SynthSpec, seed_seq: np.random.SeedSequence) -> np.ndarray:
    """生成一张街景地图"""
    rng = np.random.default_rng(seed_seq)
    road = _place_roads(spec, rng)
    labels = np.full(road.shape, BACKGROUND, dtype=np.int64)
    labels[road] = ROAD

    if spec.sidewalk_width > 0:
        grown = ndimage.binary_dilation(road, structure=np.ones((3, 3), dtype=bool),
                                        iterations=spec.sidewalk_width)
        labels[grown & ~road] = SIDEWALK

    if spec.num_classes > BUILDING:
        _place_buildings(labels, spec, rng)
    if spec.num_classes > VEHICLE:
        n_road_runs = int(ndimage.label(road)[1])
        _place_vehicles(labels, spec, rng, max(1, n_road_runs))
    return labels


def synth(spec: SynthSpec, workers: int = 1) -> List[np.ndarray]:
    """按种子生成整套数据集"""
    spec.validate()
    children = np.random.SeedSequence(spec.seed).spawn(spec.count)
    if workers > 1 and spec.count > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            maps = list(executor.map(lambda seq: synth_one(spec, seq), children))
    else:
        maps = [synth_one(spec, seq) for seq in children]
    logger.info(f"已生成 {len(maps)} 张 {spec.height}x{spec.width} 合成地图 (seed={spec.seed})")
    return maps


def class_frequencies(maps: List[np.ndarray], num_classes: int) -> np.ndarray:
    """各类别像素占比"""
    if not maps:
        return np.zeros(num_classes)
    counts = sum(np.bincount(m.ravel(), minlength=num_classes) for m in maps)
    return counts / counts.sum()
