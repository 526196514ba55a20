#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
统一配置管理系统

加载顺序：默认值 → 配置文件（section.key = value）→ 环境变量 → 命令行覆盖。
"""

import os
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional

from dataclasses_json import dataclass_json

from .validators import ConfigValidator
from ..errors.exceptions import ConfigurationError


@dataclass_json
@dataclass
class ScheduleConfig:
    """噪声调度配置"""
    kind: str = "cosine"            # cosine, linear
    steps: int = 200                # 扩散步数 T
    cosine_offset: float = 0.008
    beta_start: float = 1e-4
    beta_end: float = 0.02


@dataclass_json
@dataclass
class ModelConfig:
    """去噪网络结构配置"""
    channels: int = 32
    num_blocks: int = 3
    kernel_size: int = 3
    time_dim: int = 32


@dataclass_json
@dataclass
class TrainConfig:
    """训练配置"""
    learning_rate: float = 1e-4
    batch_size: int = 16
    steps: int = 5000
    optimizer: str = "sgd"          # sgd, adam
    momentum: float = 0.9
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    augment_flip: bool = True
    flip_probability: float = 0.5
    seed: int = 0
    checkpoint_every: int = 0       # 0 表示只保存最终检查点
    checkpoint_dir: str = ""
    log_every: int = 50
    divergence_factor: float = 10.0
    divergence_patience: int = 100


@dataclass_json
@dataclass
class InpaintConfig:
    """条件推理配置"""
    strategy: str = "lb_con"        # lb_con, seq_con
    lookbacks: int = 1
    num_samples: int = 1
    paste_known: bool = True
    seed: int = 0
    region: str = "missing"         # missing, full
    workers: int = 1


@dataclass_json
@dataclass
class LoggingConfig:
    """日志配置"""
    level: str = "INFO"
    max_file_size: int = 10 * 1024 * 1024  # 10MB
    backup_count: int = 5
    enable_file: bool = False


@dataclass_json
@dataclass
class SystemConfig:
    """系统配置"""
    output_dir: str = "outputs/runs"
    log_dir: str = "logs"
    max_workers: int = 4
    seed: int = 0


# 完整规模训练设置：T=4000，学习率1e-4，批大小16
FULL_SCALE_PRESET: Dict[str, Any] = {
    "schedule.kind": "cosine",
    "schedule.steps": 4000,
    "train.learning_rate": 1e-4,
    "train.batch_size": 16,
    "train.augment_flip": True,
}

ENV_MAPPINGS = {
    "SEPAINT_OUTPUT_DIR": ("system", "output_dir"),
    "SEPAINT_LOG_DIR": ("system", "log_dir"),
    "SEPAINT_LOG_LEVEL": ("logging", "level"),
    "SEPAINT_SEED": ("system", "seed"),
    "SEPAINT_MAX_WORKERS": ("system", "max_workers"),
}

SECTIONS = ("schedule", "model", "train", "inpaint", "logging", "system")


def _coerce(value: Any, target_type: Any) -> Any:
    """把字符串值转换为字段声明的类型"""
    if not isinstance(value, str):
        return value
    origin = typing.get_origin(target_type)
    if origin is typing.Union:
        args = [a for a in typing.get_args(target_type) if a is not type(None)]
        if value.strip().lower() in ("", "none", "null"):
            return None
        target_type = args[0]
    if target_type is bool:
        lowered = value.strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigurationError(f"无法解析布尔值: {value}")
    if target_type is int:
        return int(value)
    if target_type is float:
        return float(value)
    return value.strip()


class ConfigManager:
    """配置管理器"""

    def __init__(self, config_file: Optional[str] = None, load_env: bool = True):
        self.config_file = config_file
        self.validator = ConfigValidator()

        self.schedule = ScheduleConfig()
        self.model = ModelConfig()
        self.train = TrainConfig()
        self.inpaint = InpaintConfig()
        self.logging = LoggingConfig()
        self.system = SystemConfig()

        if config_file:
            self._load_config(config_file)
        if load_env:
            self._load_env_vars()
        self._validate_config()

    def _load_config(self, config_file: str):
        """加载 key=value 配置文件"""
        path = Path(config_file)
        if not path.exists():
            raise ConfigurationError(f"配置文件不存在: {config_file}")
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigurationError(f"加载配置文件失败: {e}")

        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"配置文件第{lineno}行缺少'=': {raw}")
            key, value = (part.strip() for part in line.split("=", 1))
            if "." not in key:
                raise ConfigurationError(f"配置键必须形如 section.key: {key}")
            section, name = key.split(".", 1)
            self._set_nested_attr(section, name, value)

    def _load_env_vars(self):
        """加载环境变量"""
        for env_var, (section, key) in ENV_MAPPINGS.items():
            value = os.getenv(env_var)
            if value is not None:
                self._set_nested_attr(section, key, value)

    def _set_nested_attr(self, section: str, key: str, value: Any):
        """设置嵌套属性（带类型转换）"""
        if section not in SECTIONS:
            raise ConfigurationError(f"未知配置段: {section}")
        section_obj = getattr(self, section)
        field_types = {f.name: f.type for f in fields(section_obj)}
        if key not in field_types:
            raise ConfigurationError(f"未知配置项: {section}.{key}")
        try:
            setattr(section_obj, key, _coerce(value, field_types[key]))
        except ValueError as e:
            raise ConfigurationError(f"配置项 {section}.{key} 取值无效: {value} ({e})")

    def _validate_config(self):
        """验证配置"""
        try:
            self.validator.validate_schedule_config(self.schedule)
            self.validator.validate_model_config(self.model)
            self.validator.validate_train_config(self.train)
            self.validator.validate_inpaint_config(self.inpaint)
            self.validator.validate_logging_config(self.logging)
            self.validator.validate_system_config(self.system)
        except Exception as e:
            raise ConfigurationError(f"配置验证失败: {e}")

    def apply_overrides(self, overrides: Dict[str, Any]):
        """应用命令行覆盖（None 值忽略），随后重新验证"""
        for key, value in overrides.items():
            if value is None:
                continue
            section, name = key.split(".", 1)
            self._set_nested_attr(section, name, value)
        self._validate_config()

    def get(self, key: str, default: Any = None) -> Any:
        """获取配置值"""
        try:
            obj: Any = self
            for part in key.split("."):
                obj = getattr(obj, part)
            return obj
        except AttributeError:
            return default

    def set(self, key: str, value: Any):
        """设置配置值"""
        section, name = key.split(".", 1)
        self._set_nested_attr(section, name, value)

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        """导出全部配置"""
        return {section: getattr(self, section).to_dict() for section in SECTIONS}

    def save_config(self, file_path: str):
        """保存为 key=value 配置文件"""
        lines = []
        for section, values in self.to_dict().items():
            for key, value in values.items():
                lines.append(f"{section}.{key} = {value}")
        try:
            Path(file_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
        except OSError as e:
            raise ConfigurationError(f"保存配置文件失败: {e}")
