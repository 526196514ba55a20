#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
配置验证器
"""

from ..errors.exceptions import ValidationError

VALID_LOG_LEVELS = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']


class ConfigValidator:
    """配置验证器"""

    def validate_schedule_config(self, config) -> None:
        """验证噪声调度配置"""
        if config.kind not in ("cosine", "linear"):
            raise ValidationError(f"调度类型必须是 cosine 或 linear: {config.kind}")
        if config.steps < 1:
            raise ValidationError("扩散步数必须大于0")
        if not (0 < config.cosine_offset < 0.1):
            raise ValidationError("余弦调度偏移 s 必须在 (0, 0.1) 之间")
        if not (0 < config.beta_start <= config.beta_end <= 0.999):
            raise ValidationError("线性调度要求 0 < beta_start <= beta_end <= 0.999")

    def validate_model_config(self, config) -> None:
        """验证网络结构配置"""
        if config.channels <= 0:
            raise ValidationError("通道数必须大于0")
        if config.num_blocks < 0:
            raise ValidationError("残差块数量不能为负数")
        if config.kernel_size <= 0 or config.kernel_size % 2 == 0:
            raise ValidationError("卷积核尺寸必须是正奇数")
        if config.time_dim <= 0 or config.time_dim % 2 != 0:
            raise ValidationError("时间嵌入维度必须是正偶数")

    def validate_train_config(self, config) -> None:
        """验证训练配置"""
        if config.learning_rate <= 0:
            raise ValidationError("学习率必须大于0")
        if config.batch_size <= 0:
            raise ValidationError("批大小必须大于0")
        if config.steps <= 0:
            raise ValidationError("训练步数必须大于0")
        if config.optimizer not in ("sgd", "adam"):
            raise ValidationError(f"优化器必须是 sgd 或 adam: {config.optimizer}")
        if not (0 <= config.momentum < 1):
            raise ValidationError("动量必须在 [0, 1) 之间")
        if not (0 <= config.flip_probability <= 1):
            raise ValidationError("翻转概率必须在 [0, 1] 之间")
        if config.checkpoint_every < 0:
            raise ValidationError("检查点间隔不能为负数")
        if config.log_every <= 0:
            raise ValidationError("日志间隔必须大于0")
        if config.divergence_factor <= 1 or config.divergence_patience <= 0:
            raise ValidationError("发散判据参数无效")

    def validate_inpaint_config(self, config) -> None:
        """验证推理配置"""
        if config.strategy not in ("lb_con", "seq_con"):
            raise ValidationError(f"条件策略必须是 lb_con 或 seq_con: {config.strategy}")
        if config.lookbacks < 0:
            raise ValidationError("回看次数不能为负数")
        if config.num_samples < 1:
            raise ValidationError("采样数量必须至少为1")
        if config.region not in ("missing", "full"):
            raise ValidationError(f"评估区域必须是 missing 或 full: {config.region}")
        if config.workers < 1:
            raise ValidationError("工作线程数必须至少为1")
        if config.seed < 0:
            raise ValidationError(f"随机种子不能为负数: {config.seed}")

    def validate_logging_config(self, config) -> None:
        """验证日志配置"""
        if config.level.upper() not in VALID_LOG_LEVELS:
            raise ValidationError(f"日志级别必须是: {', '.join(VALID_LOG_LEVELS)}")
        if config.max_file_size <= 0:
            raise ValidationError("日志文件最大大小必须大于0")
        if config.backup_count < 0:
            raise ValidationError("日志备份数量不能为负数")

    def validate_system_config(self, config) -> None:
        """验证系统配置"""
        if not config.output_dir:
            raise ValidationError("输出目录不能为空")
        if config.max_workers <= 0:
            raise ValidationError("最大工作线程数必须大于0")
        if config.seed < 0:
            raise ValidationError("随机种子不能为负数")
