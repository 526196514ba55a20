#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Gumbel-Max 采样单元测试
"""

import os
import sys
import unittest

import numpy as np
from scipy import stats

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..'))

from src.core.catdiff import one_hot
from src.core.sampler import RngStream, gumbel_max, sample_field
from src.shared.infrastructure.errors.exceptions import DomainError


class TestRngStream(unittest.TestCase):
    """随机数流测试"""

    def test_replay(self):
        a, b = RngStream(42), RngStream(42)
        np.testing.assert_array_equal(a.uniform((3, 4)), b.uniform((3, 4)))
        self.assertEqual(a.counter, 12)

    def test_spawn_independent_of_parent_position(self):
        parent = RngStream(7)
        first = parent.spawn(3).uniform((5,))
        parent.uniform((100,))
        np.testing.assert_array_equal(parent.spawn(3).uniform((5,)), first)
        self.assertFalse(np.array_equal(parent.spawn(4).uniform((5,)), first))

    def test_uniform_clamped(self):
        eps = RngStream(0).uniform((1000,))
        self.assertGreaterEqual(eps.min(), 1e-12)
        self.assertLessEqual(eps.max(), 1.0 - 1e-12)

    def test_invalid_seed(self):
        with self.assertRaises(DomainError):
            RngStream(-1)


class TestGumbelMax(unittest.TestCase):
    """Gumbel-Max 测试"""

    def test_one_hot_always_wins(self):
        p = np.array([0.0, 0.0, 1.0, 0.0])
        rng = np.random.default_rng(0)
        for _ in range(50):
            self.assertEqual(int(gumbel_max(p, rng.random(4))), 2)

    def test_equal_noise_is_argmax(self):
        """相同噪声时等价于对 log p 取 argmax"""
        self.assertEqual(int(gumbel_max(np.array([0.2, 0.3, 0.5]), np.full(3, 0.5))), 2)

    def test_frequencies_fair_coin(self):
        """p=[0.5,0.5]，100000 次抽样通过卡方检验"""
        n = 100000
        rng = RngStream(2024)
        draws = gumbel_max(np.full((n, 2), 0.5), rng.uniform((n, 2)))
        counts = np.bincount(draws, minlength=2)
        _, p_value = stats.chisquare(counts, f_exp=[n / 2, n / 2])
        self.assertGreater(p_value, 0.001)

    def test_frequencies_skewed(self):
        n = 100000
        p = np.array([0.1, 0.2, 0.3, 0.4])
        draws = gumbel_max(np.broadcast_to(p, (n, 4)), RngStream(5).uniform((n, 4)))
        counts = np.bincount(draws, minlength=4)
        _, p_value = stats.chisquare(counts, f_exp=n * p)
        self.assertGreater(p_value, 0.001)

    def test_frequencies_random_simplex(self):
        """20 个随机概率向量（K ≤ 8），每个 100000 次抽样都通过卡方检验"""
        n = 100000
        rng = np.random.default_rng(77)
        for case in range(20):
            K = int(rng.integers(2, 9))
            p = rng.dirichlet(np.ones(K))
            draws = gumbel_max(np.broadcast_to(p, (n, K)), RngStream(1000 + case).uniform((n, K)))
            counts = np.bincount(draws, minlength=K)
            _, p_value = stats.chisquare(counts, f_exp=n * p)
            self.assertGreater(p_value, 0.001, f"case={case}, p={p}")

    def test_unnormalized_scale_invariant(self):
        eps = np.random.default_rng(1).random((6, 3))
        p = np.array([0.2, 0.5, 0.3])
        np.testing.assert_array_equal(gumbel_max(np.tile(p, (6, 1)), eps), gumbel_max(np.tile(7 * p, (6, 1)), eps))

    def test_shape_mismatch(self):
        with self.assertRaises(DomainError):
            gumbel_max(np.ones((2, 3)), np.ones((3, 2)) * 0.5)


class TestSampleField(unittest.TestCase):
    """类别场采样测试"""

    def test_one_hot_field(self):
        labels = np.array([[0, 2], [1, 1]])
        probs = one_hot(labels, 3)
        np.testing.assert_array_equal(sample_field(probs, RngStream(1)), labels)
        np.testing.assert_array_equal(sample_field(probs, RngStream(99)), labels)
        np.testing.assert_array_equal(sample_field(probs, None, deterministic=True), labels)

    def test_deterministic_argmax(self):
        probs = np.broadcast_to(np.array([0.2, 0.3, 0.5]), (4, 4, 3))
        rng = RngStream(0)
        out = sample_field(probs, rng, deterministic=True)
        np.testing.assert_array_equal(out, np.full((4, 4), 2))
        self.assertEqual(rng.counter, 0)

    def test_replay(self):
        probs = np.random.default_rng(4).dirichlet(np.ones(5), size=(8, 8))
        np.testing.assert_array_equal(sample_field(probs, RngStream(3)), sample_field(probs, RngStream(3)))

    def test_requires_rng(self):
        with self.assertRaises(DomainError):
            sample_field(np.full((2, 2, 2), 0.5), None)

    def test_validate(self):
        with self.assertRaises(DomainError):
            sample_field(np.full((2, 2, 2), 0.9), RngStream(0), validate=True)


if __name__ == '__main__':
    unittest.main()
