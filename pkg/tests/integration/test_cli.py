#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
命令行端到端测试

在临时目录里跑通 synth → train → maskgen → inpaint → baseline → eval → sample → ablate，
网络与扩散步数都取极小值，只检查产物与退出码。
"""

import json
import os
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np
from click.testing import CliRunner

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..'))

from outputs.output_manager import MANIFEST_NAME, load_manifest
from src.cli.commands import EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, CliState, cli, run
from src.data.formats import read_smap, read_smask, write_smap
from src.shared.infrastructure.config.settings import ConfigManager
from src.shared.infrastructure.errors.exceptions import DomainError
from src.shared.infrastructure.logging.logger import configure_logging

SIZE = "8"


class TestCliPipeline(unittest.TestCase):
    """完整流水线测试"""

    @classmethod
    def setUpClass(cls):
        cls._tmp = tempfile.TemporaryDirectory()
        cls.tmp = Path(cls._tmp.name)
        cls.runner = CliRunner()
        cls.invoke_ok(["synth", "--count", "6", "--height", SIZE, "--width", SIZE, "--seed", "1",
                       "--render", "1", "--out", str(cls.tmp / "data")])
        cls.invoke_ok(["train", "--data", str(cls.tmp / "data"), "--steps", "3", "--batch-size", "2",
                       "--schedule-steps", "5", "--channels", "4", "--blocks", "1", "--seed", "0",
                       "--out", str(cls.tmp / "train")])
        cls.invoke_ok(["maskgen", "--spec", "rect:count=1", "--height", SIZE, "--width", SIZE, "--seed", "2",
                       "--out", str(cls.tmp / "masks")])
        cls.model = cls.tmp / "train" / "model.spnt"
        cls.gt = cls.tmp / "data" / "map_00000.smap"
        cls.mask = cls.tmp / "masks" / "mask.smask"

    @classmethod
    def tearDownClass(cls):
        configure_logging("WARNING")
        cls._tmp.cleanup()

    @classmethod
    def invoke(cls, args):
        env = {"SEPAINT_OUTPUT_DIR": str(cls.tmp / "runs")}
        return cls.runner.invoke(cli, ["--log-level", "WARNING"] + args, obj=CliState(argv=args), env=env)

    @classmethod
    def invoke_ok(cls, args):
        result = cls.invoke(args)
        if result.exit_code != 0:
            raise AssertionError(f"{args[0]} 失败 ({result.exit_code}): {result.output}\n{result.exception!r}")
        return result

    def inpaint(self, out, *extra):
        return self.invoke_ok(["inpaint", "--checkpoint", str(self.model), "--map", str(self.gt),
                               "--mask", str(self.mask), "--out", str(self.tmp / out)] + list(extra))

    def test_synth_outputs(self):
        data = self.tmp / "data"
        self.assertEqual(len(list(data.glob("map_*.smap"))), 6)
        self.assertTrue((data / "preview" / "map_00000.png").exists())
        labels, K = read_smap(self.gt)
        self.assertEqual((labels.shape, K), ((8, 8), 5))
        self.assertEqual(load_manifest(data / MANIFEST_NAME).command, "synth")

    def test_train_outputs(self):
        self.assertTrue(self.model.exists())
        log = (self.tmp / "train" / "train_log.csv").read_text(encoding="utf-8").splitlines()
        self.assertEqual(len(log), 1 + 3)
        manifest = load_manifest(self.tmp / "train" / MANIFEST_NAME)
        self.assertEqual(manifest.config["schedule"]["steps"], 5)
        self.assertEqual(manifest.inputs["data"], str(self.tmp / "data"))

    def test_maskgen_outputs(self):
        mask = read_smask(self.mask)
        self.assertEqual(mask.shape, (8, 8))
        self.assertTrue(0 < int(mask.sum()) < 64)
        self.assertTrue((self.tmp / "masks" / "mask.png").exists())

    def test_lookbacks_zero_matches_sequential(self):
        """回看次数为 0 的 LB-Con 与同种子的 Seq-Con 逐字节一致"""
        self.inpaint("lb0", "--strategy", "lb", "--lookbacks", "0", "--seed", "7")
        self.inpaint("seq", "--strategy", "seq", "--seed", "7")
        a = (self.tmp / "lb0" / "output.smap").read_bytes()
        b = (self.tmp / "seq" / "output.smap").read_bytes()
        self.assertEqual(a, b)

    def test_inpaint_is_reproducible(self):
        self.inpaint("r1", "--seed", "3", "--lookbacks", "2")
        self.inpaint("r2", "--seed", "3", "--lookbacks", "2")
        self.assertEqual((self.tmp / "r1" / "output.smap").read_bytes(), (self.tmp / "r2" / "output.smap").read_bytes())
        first, second = (load_manifest(self.tmp / name / MANIFEST_NAME) for name in ("r1", "r2"))
        self.assertEqual((first.seed, first.config, first.inputs), (second.seed, second.config, second.inputs))
        self.assertEqual(first.config["inpaint"]["lookbacks"], 2)

    def test_inpaint_multi_sample(self):
        result = self.inpaint("multi", "--samples", "3", "--seed", "5", "--gt", str(self.gt), "--region", "full")
        out = self.tmp / "multi"
        for name in ("output.smap", "output.png", "known.png", "uncertainty.png", "sample_001.smap",
                     "sample_002.smap", "inpaint.json", MANIFEST_NAME):
            self.assertTrue((out / name).exists(), name)
        sidecar = json.loads((out / "inpaint.json").read_text(encoding="utf-8"))
        self.assertEqual(sidecar["samples"], 3)
        self.assertEqual(sidecar["seeds"], [5, 6, 7])
        self.assertEqual(sidecar["strategy"], "lb_con")
        self.assertEqual(sidecar["metrics"]["region"], "full")
        self.assertIn("mIoU", result.output)

        pred, _ = read_smap(out / "output.smap")
        y0, _ = read_smap(self.gt)
        mask = read_smask(self.mask)
        np.testing.assert_array_equal(pred[mask == 1], y0[mask == 1])

    def test_resolved_config_replays(self):
        """config.cfg 可以原样作为 --config 重新载入"""
        saved = self.tmp / "train" / "config.cfg"
        self.assertTrue(saved.exists())
        reloaded = ConfigManager(str(saved), load_env=False)
        manifest = load_manifest(self.tmp / "train" / MANIFEST_NAME)
        self.assertEqual(reloaded.to_dict()["schedule"], manifest.config["schedule"])
        self.assertEqual(reloaded.model.channels, 4)

    def test_gt_class_mismatch_fails_before_sampling(self):
        """真值的类别数与模型不同时以领域错误退出，不留下半写的输出"""
        wide = self.tmp / "wide_gt.smap"
        labels, _ = read_smap(self.gt)
        labels = labels.copy()
        labels[0, 0] = 6
        write_smap(wide, labels, 7)
        out = self.tmp / "mismatch"
        result = self.invoke(["inpaint", "--checkpoint", str(self.model), "--map", str(self.gt),
                              "--mask", str(self.mask), "--gt", str(wide), "--out", str(out)])
        self.assertNotEqual(result.exit_code, 0)
        self.assertIsInstance(result.exception, DomainError)
        self.assertFalse((out / "output.smap").exists())

    def test_baseline(self):
        self.invoke_ok(["baseline", "--method", "nearest", "--map", str(self.gt), "--mask", str(self.mask),
                        "--out", str(self.tmp / "base")])
        pred, K = read_smap(self.tmp / "base" / "baseline_nearest.smap")
        self.assertEqual((pred.shape, K), ((8, 8), 5))
        self.assertTrue((self.tmp / "base" / "baseline_nearest.png").exists())

    def test_eval_perfect(self):
        result = self.invoke_ok(["eval", "--pred", str(self.gt), "--gt", str(self.gt), "--mask", str(self.mask),
                                 "--out", str(self.tmp / "eval")])
        self.assertIn("100.00", result.output)
        self.assertIn("[map_00000]", result.output)
        self.assertTrue((self.tmp / "eval" / "report.csv").exists())
        report = json.loads((self.tmp / "eval" / "report.json").read_text(encoding="utf-8"))
        self.assertEqual(report["reports"][0]["miou"], 100.0)

    def test_eval_missing_region_needs_mask(self):
        result = self.invoke(["eval", "--pred", str(self.gt), "--gt", str(self.gt), "--region", "missing"])
        self.assertNotEqual(result.exit_code, 0)

    def test_sample(self):
        self.invoke_ok(["sample", "--checkpoint", str(self.model), "--count", "2", "--seed", "4",
                        "--out", str(self.tmp / "samples")])
        for i in range(2):
            labels, K = read_smap(self.tmp / "samples" / f"sample_{i:03d}.smap")
            self.assertEqual((labels.shape, K), ((8, 8), 5))

    def test_ablate(self):
        result = self.invoke_ok(["ablate", "--checkpoint", str(self.model), "--data", str(self.tmp / "data"),
                                 "--maps", "2", "--offset", "4", "--seeds", "1", "--family", "rect:count=1",
                                 "--lookbacks", "1", "--baselines", "--out", str(self.tmp / "ablate")])
        self.assertIn("LB-Con", result.output)
        self.assertIn("Seq-Con", result.output)
        self.assertTrue((self.tmp / "ablate" / "ablation.csv").exists())
        runs = (self.tmp / "ablate" / "ablation_runs.csv").read_text(encoding="utf-8").splitlines()
        # 2 张地图 × (1 个种子 × 2 种策略 + 3 种基线)
        self.assertEqual(len(runs), 1 + 2 * (2 + 3))


class TestExitCodes(unittest.TestCase):
    """退出码测试"""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        configure_logging("WARNING")
        self._tmp.cleanup()

    def test_help(self):
        self.assertEqual(run(["--help"]), EXIT_OK)

    def test_unknown_flag(self):
        self.assertEqual(run(["maskgen", "--bogus"]), EXIT_USAGE)

    def test_missing_input_file(self):
        self.assertEqual(run(["eval", "--pred", str(self.tmp / "absent.smap"), "--gt", "x.smap"]), EXIT_USAGE)

    def test_bad_smap(self):
        bad = self.tmp / "bad.smap"
        bad.write_bytes(b"SMAP 1\n1 2 3\n0 7\n")
        code = run(["--log-level", "CRITICAL", "eval", "--pred", str(bad), "--gt", str(bad), "--region", "full",
                    "--out", str(self.tmp / "eval")])
        self.assertEqual(code, EXIT_DOMAIN)

    def test_region_without_mask(self):
        gt = self.tmp / "gt.smap"
        gt.write_bytes(b"SMAP 1\n1 2 3\n0 1\n")
        code = run(["--log-level", "CRITICAL", "eval", "--pred", str(gt), "--gt", str(gt), "--region", "missing"])
        self.assertEqual(code, EXIT_USAGE)

    def test_bad_config_key(self):
        config = self.tmp / "bad.cfg"
        config.write_text("model.depth = 3\n", encoding="utf-8")
        self.assertEqual(run(["--config", str(config), "--log-level", "CRITICAL", "maskgen", "--help"]),
                         EXIT_USAGE)

    def test_negative_inpaint_seed(self):
        code = run(["--log-level", "CRITICAL", "inpaint", "--checkpoint", __file__, "--map", __file__,
                    "--mask", __file__, "--seed", "-3"])
        self.assertEqual(code, EXIT_USAGE)

    def test_bad_mask_spec(self):
        code = run(["--log-level", "CRITICAL", "maskgen", "--spec", "blob", "--out", str(self.tmp / "m")])
        self.assertEqual(code, EXIT_USAGE)


if __name__ == '__main__':
    unittest.main()
