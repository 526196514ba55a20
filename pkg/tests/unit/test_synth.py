#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
合成数据集单元测试
"""

import os
import sys
import unittest

import numpy as np

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..'))

from src.data.synth import (BACKGROUND, BUILDING, ROAD, SIDEWALK, VEHICLE, SynthSpec,
                            class_frequencies, synth)
from src.shared.infrastructure.errors.exceptions import ConfigurationError


class TestSynth(unittest.TestCase):
    """街景生成测试"""

    def test_deterministic(self):
        spec = SynthSpec(count=5, seed=3)
        for a, b in zip(synth(spec), synth(spec)):
            np.testing.assert_array_equal(a, b)

    def test_workers_do_not_change_result(self):
        spec = SynthSpec(count=6, seed=9)
        for a, b in zip(synth(spec), synth(spec, workers=3)):
            np.testing.assert_array_equal(a, b)

    def test_no_buildings_no_vehicles(self):
        maps = synth(SynthSpec(count=20, building_density=0.0, vehicle_rate=0.0, seed=1))
        present = set(np.unique(np.stack(maps)).tolist())
        self.assertTrue(present <= {BACKGROUND, ROAD, SIDEWALK})
        self.assertIn(ROAD, present)

    def test_labels_in_range(self):
        maps = synth(SynthSpec(count=10, height=24, width=40, seed=2))
        for labels in maps:
            self.assertEqual(labels.shape, (24, 40))
            self.assertTrue(np.all((labels >= 0) & (labels < 5)))

    def test_vehicles_sit_on_roads(self):
        """车辆的四邻域只可能是道路、车辆、人行道或地图边界"""
        for labels in synth(SynthSpec(count=30, vehicle_rate=3.0, seed=4)):
            padded = np.pad(labels, 1, constant_values=ROAD)
            rows, cols = np.where(labels == VEHICLE)
            for r, c in zip(rows + 1, cols + 1):
                neighbours = padded[[r - 1, r + 1, r, r], [c, c, c - 1, c + 1]]
                self.assertTrue(np.all(np.isin(neighbours, (ROAD, VEHICLE, SIDEWALK))))

    def test_fewer_classes(self):
        maps = synth(SynthSpec(count=10, num_classes=3, seed=5))
        self.assertLess(int(np.stack(maps).max()), BUILDING)

    def test_road_frequency_bound(self):
        freq = class_frequencies(synth(SynthSpec(count=200, seed=0)), 5)
        self.assertAlmostEqual(float(freq.sum()), 1.0)
        self.assertGreater(freq[ROAD], 0.10)
        self.assertLess(freq[ROAD], 0.40)

    def test_validation(self):
        with self.assertRaises(ConfigurationError):
            synth(SynthSpec(count=1, num_classes=2))
        with self.assertRaises(ConfigurationError):
            synth(SynthSpec(count=1, height=4, width=4, road_width_max=6))


if __name__ == '__main__':
    unittest.main()
