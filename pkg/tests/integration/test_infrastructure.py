#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
基础设施集成测试
"""

import json
import logging
import os
import sys
import tempfile
import unittest
from pathlib import Path
from unittest import mock

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..'))

from outputs.output_manager import MANIFEST_NAME, OutputManager, load_manifest
from src.shared.infrastructure.config.settings import ConfigManager
from src.shared.infrastructure.errors.error_handler import ErrorHandler, handle_exceptions
from src.shared.infrastructure.errors.exceptions import ConfigurationError, DomainError, FormatError
from src.shared.infrastructure.logging.logger import ROOT_NAME, configure_logging, get_logger
from src.shared.infrastructure.monitoring.metrics import MetricsCollector
from src.shared.infrastructure.ux.progress_tracker import ProgressStatus, ProgressTracker


class TempDirTestCase(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()


class TestConfigManager(TempDirTestCase):
    """配置管理器测试"""

    def test_defaults(self):
        """测试默认配置"""
        config = ConfigManager(load_env=False)
        self.assertEqual(config.schedule.kind, "cosine")
        self.assertEqual(config.inpaint.strategy, "lb_con")
        self.assertEqual(config.inpaint.lookbacks, 1)
        self.assertEqual(config.train.optimizer, "sgd")

    def test_config_file(self):
        """测试配置加载"""
        path = self.tmp / "run.cfg"
        path.write_text("# 小规模试验\nschedule.steps = 50\ntrain.augment_flip = false\n"
                        "inpaint.strategy = seq_con  # 对照\n", encoding="utf-8")
        config = ConfigManager(str(path), load_env=False)
        self.assertEqual(config.schedule.steps, 50)
        self.assertFalse(config.train.augment_flip)
        self.assertEqual(config.inpaint.strategy, "seq_con")

    def test_env_vars(self):
        with mock.patch.dict(os.environ, {"SEPAINT_SEED": "17", "SEPAINT_LOG_LEVEL": "DEBUG"}):
            config = ConfigManager()
        self.assertEqual(config.system.seed, 17)
        self.assertEqual(config.logging.level, "DEBUG")

    def test_overrides(self):
        config = ConfigManager(load_env=False)
        config.apply_overrides({"train.steps": 7, "train.learning_rate": None, "model.channels": "8"})
        self.assertEqual(config.train.steps, 7)
        self.assertEqual(config.train.learning_rate, 1e-4)
        self.assertEqual(config.model.channels, 8)
        self.assertEqual(config.get("model.channels"), 8)
        self.assertIsNone(config.get("model.missing"))

    def test_invalid_values(self):
        config = ConfigManager(load_env=False)
        for overrides in ({"schedule.steps": 0}, {"inpaint.strategy": "greedy"}, {"model.kernel_size": 4},
                          {"train.batch_size": "many"}, {"inpaint.lookbacks": -1}, {"inpaint.seed": -1}):
            with self.assertRaises(ConfigurationError, msg=str(overrides)):
                ConfigManager(load_env=False).apply_overrides(overrides)
        with self.assertRaises(ConfigurationError):
            config.set("model.depth", 3)
        with self.assertRaises(ConfigurationError):
            config.set("optimizer.lr", 0.1)

    def test_bad_file(self):
        with self.assertRaises(ConfigurationError):
            ConfigManager(str(self.tmp / "absent.cfg"), load_env=False)
        path = self.tmp / "bad.cfg"
        path.write_text("steps 50\n", encoding="utf-8")
        with self.assertRaises(ConfigurationError):
            ConfigManager(str(path), load_env=False)

    def test_save_round_trip(self):
        """测试配置保存"""
        config = ConfigManager(load_env=False)
        config.apply_overrides({"schedule.kind": "linear", "inpaint.paste_known": False, "system.seed": 5})
        path = self.tmp / "saved.cfg"
        config.save_config(str(path))
        reloaded = ConfigManager(str(path), load_env=False)
        self.assertEqual(reloaded.to_dict(), config.to_dict())


class TestMetricsCollector(unittest.TestCase):
    """指标收集器测试"""

    def setUp(self):
        self.metrics = MetricsCollector()

    def test_counter_and_gauge(self):
        """测试计数器与仪表"""
        self.metrics.increment_counter("train.steps")
        self.metrics.increment_counter("train.steps", 2)
        self.metrics.set_gauge("train.loss", 0.25, tags={"schedule": "cosine"})
        summary = self.metrics.get_metrics_summary()
        self.assertEqual(summary["counters"]["train.steps"], 3)
        self.assertEqual(summary["gauges"]["train.loss[schedule=cosine]"], 0.25)

    def test_timer(self):
        """测试计时器"""
        self.metrics.record_timer("test.timer", 1.5)
        self.metrics.record_timer("test.timer", 2.0)
        summary = self.metrics.get_metrics_summary()
        self.assertEqual(summary["timer_stats"]["test.timer"]["count"], 2)
        self.assertEqual(summary["timer_stats"]["test.timer"]["avg"], 1.75)
        self.assertEqual(self.metrics.total_time("test.timer"), 3.5)

    def test_time_function(self):
        @self.metrics.time_function("work")
        def work(fail):
            if fail:
                raise DomainError("坏输入")
            return 1

        self.assertEqual(work(False), 1)
        with self.assertRaises(DomainError):
            work(True)
        summary = self.metrics.get_metrics_summary()
        self.assertEqual(summary["counters"]["work.success"], 1)
        self.assertEqual(summary["counters"]["work.error"], 1)
        self.assertEqual(summary["timer_stats"]["work"]["count"], 2)

    def test_timer_context_and_reset(self):
        with self.metrics.timer("chain"):
            pass
        self.assertGreaterEqual(self.metrics.total_time("chain"), 0.0)
        self.metrics.reset_metrics()
        self.assertEqual(self.metrics.get_metrics_summary()["timer_stats"], {})


class TestProgressTracker(unittest.TestCase):
    """进度跟踪器测试"""

    def test_task_lifecycle(self):
        tracker = ProgressTracker(report_every=0.5)
        seen = []
        tracker.add_callback(lambda info: seen.append((info.done, info.status)))
        tracker.create_task("train", "训练", 4)
        tracker.advance("train")
        tracker.advance("train")
        info = tracker.advance("train", 5)
        self.assertEqual(info.done, 4)
        self.assertEqual(info.fraction, 1.0)
        done = tracker.complete_task("train")
        self.assertEqual(done.status, ProgressStatus.COMPLETED)
        # 首次推进与完成各报告一次，结束时再通知一次
        self.assertEqual(seen, [(1, ProgressStatus.RUNNING), (4, ProgressStatus.RUNNING),
                                (4, ProgressStatus.COMPLETED)])

    def test_failed_and_unknown(self):
        tracker = ProgressTracker()
        tracker.create_task("chain", "采样", 3)
        failed = tracker.complete_task("chain", error_message="损失非有限")
        self.assertEqual(failed.status, ProgressStatus.FAILED)
        self.assertIsNone(tracker.advance("nope"))
        self.assertIsNone(tracker.complete_task("nope"))

    def test_callback_errors_ignored(self):
        tracker = ProgressTracker(report_every=1.0)

        def broken(_):
            raise RuntimeError("回调失败")

        tracker.add_callback(broken)
        tracker.create_task("t", "t", 1)
        self.assertEqual(tracker.advance("t").done, 1)


class TestErrorHandling(unittest.TestCase):
    """错误处理测试"""

    def test_handle_error_details(self):
        info = ErrorHandler().handle_error(FormatError("坏魔数", offset=0, path="a.smap"), "read")
        self.assertEqual(info["error_type"], "FormatError")
        self.assertEqual(info["context"], "read")
        self.assertEqual(info["error_details"]["offset"], 0)
        self.assertIn("字节偏移 0", info["error_message"])

    def test_decorator_reraise(self):
        @handle_exceptions("unit")
        def boom():
            raise DomainError("坏掩码")

        with self.assertRaises(DomainError):
            boom()

    def test_decorator_swallow(self):
        @handle_exceptions("unit", reraise=False)
        def boom():
            raise ValueError("x")

        self.assertIsNone(boom())


class TestLogging(TempDirTestCase):
    """日志测试"""

    def tearDown(self):
        configure_logging("WARNING")
        super().tearDown()

    def test_child_logger_names(self):
        logger = get_logger("inpaint")
        self.assertEqual(logger.logger.name, f"{ROOT_NAME}.inpaint")
        self.assertIs(get_logger("inpaint"), logger)

    def test_set_level(self):
        root = configure_logging("INFO")
        root.set_level("error")
        self.assertEqual(root.logger.level, logging.ERROR)
        self.assertTrue(all(h.level == logging.ERROR for h in root.logger.handlers))

    def test_file_logging(self):
        configure_logging("DEBUG", log_dir=str(self.tmp), enable_file=True)
        get_logger("train").info("第 1 步")
        for handler in get_logger().logger.handlers:
            handler.flush()
        text = (self.tmp / f"{ROOT_NAME}.log").read_text(encoding="utf-8")
        self.assertIn("第 1 步", text)


class TestOutputManager(TempDirTestCase):
    """输出管理器测试"""

    def test_command_dir(self):
        manager = OutputManager(str(self.tmp))
        self.assertEqual(manager.command_dir("train"), self.tmp / "train")
        self.assertTrue((self.tmp / "train").is_dir())
        custom = manager.command_dir("train", str(self.tmp / "custom"))
        self.assertEqual(custom, self.tmp / "custom")

    def test_env_base_dir(self):
        with mock.patch.dict(os.environ, {"SEPAINT_OUTPUT_DIR": str(self.tmp / "env")}):
            manager = OutputManager()
        self.assertEqual(manager.command_dir("eval"), self.tmp / "env" / "eval")

    def test_manifest_is_reproducible(self):
        manager = OutputManager(str(self.tmp))
        config = ConfigManager(load_env=False).to_dict()
        path = manager.write_manifest(self.tmp / "run", "inpaint", 7, config, ["inpaint", "--seed", "7"],
                                      {"map": "a.smap"})
        first = path.read_text(encoding="utf-8")
        manager.write_manifest(self.tmp / "run", "inpaint", 7, config, ["inpaint", "--seed", "7"], {"map": "a.smap"})
        self.assertEqual(path.read_text(encoding="utf-8"), first)
        self.assertEqual(path.name, MANIFEST_NAME)
        payload = json.loads(first)
        self.assertEqual(list(payload), sorted(payload))
        self.assertNotIn("timestamp", payload)
        manifest = load_manifest(path)
        self.assertEqual((manifest.command, manifest.seed), ("inpaint", 7))
        self.assertEqual(manifest.inputs, {"map": "a.smap"})

    def test_overwriting_other_command_manifest_warns(self):
        manager = OutputManager(str(self.tmp))
        manager.write_manifest(self.tmp / "shared", "synth", 1, {})
        with self.assertLogs(f"{ROOT_NAME}.outputs", level="WARNING") as logs:
            path = manager.write_manifest(self.tmp / "shared", "train", 1, {})
        self.assertIn("synth", logs.output[0])
        self.assertEqual(load_manifest(path).command, "train")

        path.write_text("{not json", encoding="utf-8")
        with self.assertLogs(f"{ROOT_NAME}.outputs", level="WARNING"):
            manager.write_manifest(self.tmp / "shared", "eval", None, {})
        self.assertEqual(load_manifest(path).command, "eval")


if __name__ == '__main__':
    unittest.main()
