#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
条件推理（Seq-Con / LB-Con）单元测试
"""

import os
import sys
import unittest

import numpy as np

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..'))

from src.core.sampler import RngStream
from src.core.schedule import cosine_schedule
from src.inpainting.inpaint import (as_denoiser, inpaint, lb_con, merge, multi_sample, normalize_strategy,
                                    run_strategy, sample_unconditional, seq_con, uncertainty_map)
from src.inpainting.maskgen import FAMILIES, MaskSpec, generate
from src.model.denoiser import BaseDenoiser, DenoiserSpec, init_params
from src.shared.infrastructure.config.settings import InpaintConfig
from src.shared.infrastructure.errors.exceptions import ConfigurationError, DomainError

SPEC = DenoiserSpec(num_classes=3, height=6, width=6, channels=4, num_blocks=1, time_dim=4)


class CountingDenoiser(BaseDenoiser):
    """记录调用步数的均匀预测网络"""

    def __init__(self, spec: DenoiserSpec):
        self.spec = spec
        self.calls = []

    def predict_x0(self, x_t, t):
        self.calls.append(int(t))
        return np.full(np.shape(x_t), 1.0 / self.spec.num_classes)

    def forward(self, x_t, t):
        return self.predict_x0(x_t, t), None

    def backward(self, context, grad_probs):
        raise NotImplementedError


class InpaintTestCase(unittest.TestCase):

    def setUp(self):
        self.sch = cosine_schedule(10)
        self.params = init_params(SPEC, seed=1, zero_head=False)
        rng = np.random.default_rng(0)
        self.y0 = rng.integers(0, 3, size=(6, 6))
        self.mask = np.ones((6, 6), dtype=np.uint8)
        self.mask[1:4, 2:5] = 0


class TestMerge(unittest.TestCase):
    """合并测试"""

    def test_examples(self):
        x = np.array([[7], [4]])
        y = np.array([[3], [9]])
        np.testing.assert_array_equal(merge(x, y, np.array([[1], [0]])), [[3], [4]])
        np.testing.assert_array_equal(merge(x, y, np.ones((2, 1))), y)
        np.testing.assert_array_equal(merge(x, y, np.zeros((2, 1))), x)

    def test_shape_mismatch(self):
        with self.assertRaises(DomainError):
            merge(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)))


class TestStrategies(InpaintTestCase):
    """两种条件策略测试"""

    def test_all_known_returns_y0(self):
        full = np.ones((6, 6), dtype=np.uint8)
        for out in (seq_con(self.params, self.y0, full, self.sch, RngStream(3)),
                    lb_con(self.params, self.y0, full, self.sch, RngStream(3), r=2)):
            np.testing.assert_array_equal(out, self.y0)

    def test_known_region_fidelity(self):
        for out in (seq_con(self.params, self.y0, self.mask, self.sch, RngStream(4)),
                    lb_con(self.params, self.y0, self.mask, self.sch, RngStream(4), r=1)):
            np.testing.assert_array_equal(out[self.mask == 1], self.y0[self.mask == 1])
            self.assertTrue(np.all((out >= 0) & (out < 3)))

    def test_seq_con_deterministic(self):
        a = seq_con(self.params, self.y0, self.mask, self.sch, RngStream(11))
        b = seq_con(self.params, self.y0, self.mask, self.sch, RngStream(11))
        np.testing.assert_array_equal(a, b)

    def test_lb_con_deterministic(self):
        a = lb_con(self.params, self.y0, self.mask, self.sch, RngStream(12), r=1)
        b = lb_con(self.params, self.y0, self.mask, self.sch, RngStream(12), r=1)
        np.testing.assert_array_equal(a, b)

    def test_zero_lookbacks_is_seq_con(self):
        """r = 0 时与 Seq-Con 逐位一致，且消耗的随机数相同"""
        rng_a, rng_b = RngStream(7), RngStream(7)
        a = lb_con(self.params, self.y0, self.mask, self.sch, rng_a, r=0, paste_known=False)
        b = seq_con(self.params, self.y0, self.mask, self.sch, rng_b, paste_known=False)
        np.testing.assert_array_equal(a, b)
        self.assertEqual(rng_a.counter, rng_b.counter)

    def test_network_evaluations(self):
        """Seq-Con 每步一次网络调用，LB-Con 每步额外 r 次"""
        T = self.sch.T
        seq_net = CountingDenoiser(SPEC)
        seq_con(seq_net, self.y0, self.mask, self.sch, RngStream(0))
        self.assertEqual(seq_net.calls, list(range(T, 0, -1)))

        lb_net = CountingDenoiser(SPEC)
        lb_con(lb_net, self.y0, self.mask, self.sch, RngStream(0), r=2)
        self.assertEqual(len(lb_net.calls), T + 2 * (T - 1))
        self.assertEqual(lb_net.calls[:4], [T, T - 1, T - 1, T - 1])

    def test_lookbacks_change_draws(self):
        rng_a, rng_b = RngStream(2), RngStream(2)
        lb_con(self.params, self.y0, self.mask, self.sch, rng_a, r=1)
        seq_con(self.params, self.y0, self.mask, self.sch, rng_b)
        self.assertGreater(rng_a.counter, rng_b.counter)

    def test_negative_lookbacks(self):
        with self.assertRaises(ConfigurationError):
            lb_con(self.params, self.y0, self.mask, self.sch, RngStream(0), r=-1)

    def test_input_validation(self):
        with self.assertRaises(DomainError):
            seq_con(self.params, np.zeros((5, 6), dtype=np.int64), self.mask, self.sch, RngStream(0))
        with self.assertRaises(DomainError):
            seq_con(self.params, np.full((6, 6), 3), self.mask, self.sch, RngStream(0))
        with self.assertRaises(DomainError):
            as_denoiser("not a model")

    def test_run_strategy_aliases(self):
        a = run_strategy(self.params, self.y0, self.mask, self.sch, RngStream(5), "seq")
        b = seq_con(self.params, self.y0, self.mask, self.sch, RngStream(5))
        np.testing.assert_array_equal(a, b)
        self.assertEqual(normalize_strategy("LB-Con"), "lb_con")
        with self.assertRaises(ConfigurationError):
            normalize_strategy("repaint")

    def test_unconditional(self):
        out = sample_unconditional(self.params, self.sch, RngStream(1))
        self.assertEqual(out.shape, (6, 6))
        self.assertTrue(np.all((out >= 0) & (out < 3)))
        np.testing.assert_array_equal(out, sample_unconditional(self.params, self.sch, RngStream(1)))


class TestConditioningSweep(InpaintTestCase):
    """跨掩码族的批量条件推理测试"""

    def cases(self, count):
        for i in range(count):
            rng = np.random.default_rng(100 + i)
            y0 = rng.integers(0, 3, size=(6, 6))
            spec = MaskSpec(family=FAMILIES[i % len(FAMILIES)], seed=i, rho=0.3, stroke_width=1,
                            walk_length=8, radius=1)
            yield i, y0, generate(spec, 6, 6)

    def test_known_region_fidelity_all_families(self):
        """100 组 (地图, 掩码) 上两种策略都逐像素保留已知区域"""
        for i, y0, mask in self.cases(100):
            known = mask == 1
            seq = seq_con(self.params, y0, mask, self.sch, RngStream(i), paste_known=False)
            lb = lb_con(self.params, y0, mask, self.sch, RngStream(i), r=1)
            for out in (seq, lb):
                np.testing.assert_array_equal(out[known], y0[known], err_msg=str(i))
                self.assertTrue(np.all((out >= 0) & (out < 3)), i)

    def test_zero_lookbacks_matches_seq_con_on_many_cases(self):
        for i, y0, mask in self.cases(20):
            rng_a, rng_b = RngStream(500 + i), RngStream(500 + i)
            a = lb_con(self.params, y0, mask, self.sch, rng_a, r=0, paste_known=False)
            b = seq_con(self.params, y0, mask, self.sch, rng_b, paste_known=False)
            np.testing.assert_array_equal(a, b, err_msg=str(i))
            self.assertEqual(rng_a.counter, rng_b.counter, i)

    def test_uncertainty_concentrates_on_unknown_pixels(self):
        """S = 8 时未知像素的平均不确定性严格高于已知像素"""
        for strategy in ("lb_con", "seq_con"):
            result = multi_sample(self.params, self.y0, self.mask, self.sch, 8, seed=21, strategy=strategy)
            unknown = result.uncertainty[self.mask == 0].mean()
            known = result.uncertainty[self.mask == 1].mean()
            self.assertGreater(unknown, known, strategy)

    def test_all_unknown_is_unconditional_sample(self):
        empty = np.zeros((6, 6), dtype=np.uint8)
        config = InpaintConfig(strategy="lb_con", lookbacks=1, num_samples=2, seed=9)
        result = inpaint(self.params, self.y0, empty, self.sch, config)
        self.assertEqual(len(result.samples), 2)
        for sample in result.samples:
            self.assertEqual(sample.shape, (6, 6))
            self.assertTrue(np.all((sample >= 0) & (sample < 3)))
        self.assertEqual(result.uncertainty.shape, (6, 6))


class TestMultiSample(InpaintTestCase):
    """多次采样与不确定性测试"""

    def test_single_sample_zero_uncertainty(self):
        result = multi_sample(self.params, self.y0, self.mask, self.sch, 1, seed=3)
        np.testing.assert_array_equal(result.uncertainty, np.zeros((6, 6)))
        self.assertEqual(result.seeds, [3])

    def test_identical_samples_zero_uncertainty(self):
        samples = np.stack([self.y0] * 4)
        np.testing.assert_array_equal(uncertainty_map(samples, 3), np.zeros((6, 6)))

    def test_even_votes_max_entropy(self):
        samples = np.array([[[0]], [[0]], [[1]], [[1]]])
        np.testing.assert_allclose(uncertainty_map(samples, 2), [[1.0]])

    def test_seeds_and_workers(self):
        serial = multi_sample(self.params, self.y0, self.mask, self.sch, 3, seed=10, strategy="lb", lookbacks=1)
        parallel = multi_sample(self.params, self.y0, self.mask, self.sch, 3, seed=10, strategy="lb",
                                lookbacks=1, workers=3)
        self.assertEqual(serial.seeds, [10, 11, 12])
        for a, b in zip(serial.samples, parallel.samples):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(serial.samples[1],
                                      lb_con(self.params, self.y0, self.mask, self.sch, RngStream(11), r=1))
        self.assertTrue(np.all(serial.uncertainty[self.mask == 1] == 0))
        self.assertIn("total_seconds", serial.timings)

    def test_inpaint_config(self):
        config = InpaintConfig(strategy="seq_con", num_samples=2, seed=4)
        result = inpaint(self.params, self.y0, self.mask, self.sch, config)
        self.assertEqual(result.strategy, "seq_con")
        np.testing.assert_array_equal(result.samples[0],
                                      seq_con(self.params, self.y0, self.mask, self.sch, RngStream(4)))

    def test_invalid_sample_count(self):
        with self.assertRaises(DomainError):
            multi_sample(self.params, self.y0, self.mask, self.sch, 0, seed=0)


if __name__ == '__main__':
    unittest.main()
