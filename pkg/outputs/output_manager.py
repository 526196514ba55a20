#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
输出路径管理器
统一管理各命令的输出目录与可复现清单（manifest.json）
"""

import json
import os
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from dataclasses_json import dataclass_json

from src.shared.infrastructure.logging.logger import get_logger

DEFAULT_BASE_DIR = "outputs/runs"
OUTPUT_DIR_ENV = "SEPAINT_OUTPUT_DIR"
MANIFEST_NAME = "manifest.json"
PACKAGE_NAME = "semantic-inpainting-system"

logger = get_logger("outputs")


@dataclass_json
@dataclass
class RunManifest:
    """可复现清单：不含时间戳，相同清单意味着相同产物"""
    command: str
    seed: Optional[int]
    version: str
    config: Dict[str, Any] = field(default_factory=dict)
    argv: List[str] = field(default_factory=list)
    inputs: Dict[str, str] = field(default_factory=dict)


def describe_version() -> str:
    """git describe 风格的版本号，不在仓库中时退回包版本"""
    try:
        result = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent.parent,
            capture_output=True, text=True, timeout=5, check=False,
        )
        if result.returncode == 0 and result.stdout.strip():
            return result.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        from importlib.metadata import PackageNotFoundError, version
        return version(PACKAGE_NAME)
    except (ImportError, PackageNotFoundError):
        from src import __version__
        return __version__


class OutputManager:
    """输出路径管理器"""

    def __init__(self, base_dir: Optional[str] = None):
        """
        初始化输出管理器

        Args:
            base_dir: 输出根目录；未给出时依次使用环境变量 SEPAINT_OUTPUT_DIR 与 outputs/runs
        """
        self.base_dir = Path(base_dir or os.getenv(OUTPUT_DIR_ENV) or DEFAULT_BASE_DIR)

    def command_dir(self, command: str, override: Optional[str] = None) -> Path:
        """
        获取命令的输出目录（不存在时创建）

        Args:
            command: 子命令名 (e.g., "train", "inpaint")
            override: 命令行 --out 指定的目录，优先使用
        """
        path = Path(override) if override else self.base_dir / command
        path.mkdir(parents=True, exist_ok=True)
        return path

    def write_manifest(self, directory: Path, command: str, seed: Optional[int],
                       config: Dict[str, Any], argv: Optional[List[str]] = None,
                       inputs: Optional[Dict[str, str]] = None) -> Path:
        """写出 manifest.json"""
        manifest = RunManifest(command=command, seed=seed, version=describe_version(),
                               config=config, argv=list(argv or []), inputs=dict(inputs or {}))
        path = Path(directory) / MANIFEST_NAME
        previous = _existing_manifest(path)
        if previous is not None and previous.command != command:
            logger.warning(f"覆盖 {previous.command} 命令留下的清单: {path}")
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                        encoding="utf-8")
        return path

    @staticmethod
    def write_json(path: Path, payload: Dict[str, Any]) -> Path:
        """写出 JSON 侧车文件"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, ensure_ascii=False, default=str) + "\n", encoding="utf-8")
        return path


def load_manifest(path: Path) -> RunManifest:
    return RunManifest.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _existing_manifest(path: Path) -> Optional[RunManifest]:
    """读取目录里已有的清单，不存在或无法解析时返回 None"""
    if not path.exists():
        return None
    try:
        return load_manifest(path)
    except (OSError, ValueError, KeyError, TypeError):
        logger.warning(f"无法解析已有清单，将覆盖: {path}")
        return None
