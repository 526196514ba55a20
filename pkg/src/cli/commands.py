#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
命令行入口

    sepaint synth     生成合成街景数据集
    sepaint train     训练去噪网络
    sepaint sample    无条件采样
    sepaint inpaint   条件补全（LB-Con / Seq-Con）
    sepaint maskgen   生成掩码
    sepaint baseline  插值基线补全
    sepaint eval      计算 mIoU / Acc
    sepaint ablate    掩码族 × 策略对比实验

进度与日志写到 stderr，表格与结果路径写到 stdout。
每个子命令在输出目录里写出 manifest.json 与解析后的 config.cfg。
"""

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import click
import numpy as np

from outputs.output_manager import OutputManager
from ..core.sampler import RngStream
from ..core.schedule import build_schedule
from ..data.formats import (load_checkpoint, load_dataset, read_smap, read_smask, save_checkpoint,
                            save_dataset, write_smap, write_smask)
from ..data.render import render_png, render_uncertainty_png
from ..data.synth import SynthSpec, class_frequencies, synth
from ..evaluation.ablation import format_table, run_ablation
from ..evaluation.metrics import REGIONS, evaluate, format_report, reports_to_frame
from ..inpainting.baselines import METHODS as BASELINE_METHODS, complete
from ..inpainting.inpaint import multi_sample, normalize_strategy, sample_unconditional
from ..inpainting.maskgen import MaskSpec, generate, mask_stats
from ..model.trainer import train as train_model
from ..shared.infrastructure.config.settings import FULL_SCALE_PRESET, ConfigManager
from ..shared.infrastructure.errors.error_handler import handle_exceptions
from ..shared.infrastructure.errors.exceptions import (ConfigurationError, DomainError, FormatError,
                                                       TrainingError, UsageError, ValidationError)
from ..shared.infrastructure.logging.logger import configure_logging, get_logger

logger = get_logger("cli")

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2

STRATEGY_CHOICES = ["lb", "seq", "lb_con", "seq_con"]
LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
RESOLVED_CONFIG_NAME = "config.cfg"


@dataclass
class CliState:
    """子命令共享的上下文；finish 写出可用 --config 重放的 config.cfg 与 manifest.json"""
    argv: List[str] = field(default_factory=list)
    config: Optional[ConfigManager] = None
    outputs: Optional[OutputManager] = None

    def finish(self, directory: Path, command: str, seed: Optional[int],
               inputs: Optional[Dict[str, str]] = None) -> Path:
        self.config.save_config(str(Path(directory) / RESOLVED_CONFIG_NAME))
        return self.outputs.write_manifest(directory, command, seed, self.config.to_dict(),
                                           argv=self.argv, inputs=inputs)


def _emit(text: str):
    """结果数据写到 stdout"""
    click.echo(text)


def _load_pair(map_path: str, mask_path: str):
    y0, K = read_smap(map_path)
    mask = read_smask(mask_path)
    if mask.shape != y0.shape:
        raise DomainError(f"掩码尺寸与地图不符: {mask.shape} vs {y0.shape}")
    return y0, K, mask


def _load_gt(gt_path: str, K: int, shape) -> np.ndarray:
    """真值地图必须与输入地图同尺寸、同类别数，在采样之前检查"""
    gt, K_gt = read_smap(gt_path)
    if K_gt != K or gt.shape != tuple(shape):
        raise DomainError(f"真值地图 (K={K_gt}, {gt.shape}) 与输入地图 (K={K}, {tuple(shape)}) 不符")
    return gt


@click.group()
@click.option("--config", "config_file", type=click.Path(dir_okay=False), default=None,
              help="key=value 配置文件 (section.key = value)")
@click.option("--log-level", type=click.Choice(LOG_LEVELS, case_sensitive=False), default=None,
              help="日志级别")
@click.option("--full-scale", is_flag=True, help="使用完整规模训练设置 (T=4000, lr=1e-4, batch=16)")
@click.pass_context
@handle_exceptions("cli")
def cli(ctx: click.Context, config_file: Optional[str], log_level: Optional[str], full_scale: bool):
    """语义地图扩散补全工具"""
    state = ctx.ensure_object(CliState)
    config = ConfigManager(config_file)
    if full_scale:
        config.apply_overrides(FULL_SCALE_PRESET)
    config.apply_overrides({"logging.level": log_level.upper() if log_level else None})
    configure_logging(config.logging.level, config.system.log_dir, config.logging.enable_file,
                      config.logging.max_file_size, config.logging.backup_count)
    state.config = config
    state.outputs = OutputManager(config.system.output_dir)


@cli.command("synth")
@click.option("--count", type=int, default=None, help="地图数量")
@click.option("--height", type=int, default=32, show_default=True)
@click.option("--width", type=int, default=32, show_default=True)
@click.option("--classes", "num_classes", type=int, default=5, show_default=True, help="类别数 K")
@click.option("--seed", type=int, default=None, help="随机种子（默认取 system.seed）")
@click.option("--building-density", type=float, default=None)
@click.option("--vehicle-rate", type=float, default=None)
@click.option("--render", "render_count", type=int, default=0, show_default=True, help="渲染前 N 张 PNG 预览")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="输出目录")
@click.pass_obj
@handle_exceptions("synth")
def synth_command(state: CliState, count, height, width, num_classes, seed, building_density,
                  vehicle_rate, render_count, out):
    """生成合成街景语义地图数据集"""
    seed = state.config.system.seed if seed is None else seed
    spec = SynthSpec(count=1000 if count is None else count, height=height, width=width,
                     num_classes=num_classes, seed=seed)
    if building_density is not None:
        spec.building_density = building_density
    if vehicle_rate is not None:
        spec.vehicle_rate = vehicle_rate
    spec.validate()

    directory = state.outputs.command_dir("synth", out)
    maps = synth(spec, workers=state.config.system.max_workers)
    save_dataset(directory, maps, spec)
    for i, labels in enumerate(maps[:max(0, render_count)]):
        render_png(labels, directory / "preview" / f"map_{i:05d}.png")

    freq = class_frequencies(maps, num_classes) if maps else np.zeros(num_classes)
    logger.info("类别频率: " + ", ".join(f"{k}={v:.3f}" for k, v in enumerate(freq)))
    state.finish(directory, "synth", seed)
    _emit(str(directory))


@cli.command("train")
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), required=True,
              help="synth 输出的数据集目录")
@click.option("--steps", type=int, default=None, help="训练步数")
@click.option("--batch-size", type=int, default=None)
@click.option("--lr", "learning_rate", type=float, default=None, help="学习率")
@click.option("--optimizer", type=click.Choice(["sgd", "adam"]), default=None)
@click.option("--schedule", "schedule_kind", type=click.Choice(["cosine", "linear"]), default=None)
@click.option("--schedule-steps", type=int, default=None, help="扩散步数 T")
@click.option("--channels", type=int, default=None)
@click.option("--blocks", "num_blocks", type=int, default=None)
@click.option("--no-flip", is_flag=True, help="关闭水平翻转增强")
@click.option("--checkpoint-every", type=int, default=None, help="每 N 步保存一次检查点")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.pass_obj
@handle_exceptions("train")
def train_command(state: CliState, data_dir, steps, batch_size, learning_rate, optimizer, schedule_kind,
                  schedule_steps, channels, num_blocks, no_flip, checkpoint_every, seed, out):
    """训练去噪网络，写出 model.spnt 与 train_log.csv"""
    config = state.config
    directory = state.outputs.command_dir("train", out)
    config.apply_overrides({
        "train.steps": steps,
        "train.batch_size": batch_size,
        "train.learning_rate": learning_rate,
        "train.optimizer": optimizer,
        "train.checkpoint_every": checkpoint_every,
        "train.seed": seed,
        "train.augment_flip": False if no_flip else None,
        "schedule.kind": schedule_kind,
        "schedule.steps": schedule_steps,
        "model.channels": channels,
        "model.num_blocks": num_blocks,
    })
    if config.train.checkpoint_every and not config.train.checkpoint_dir:
        config.train.checkpoint_dir = str(directory / "checkpoints")

    maps, K, _ = load_dataset(data_dir)
    sch = build_schedule(config.schedule)
    result = train_model(config.train, maps, sch, K, model_config=config.model)

    model_path = save_checkpoint(directory / "model.spnt", result.params, sch)
    result.save_log(directory / "train_log.csv")
    state.finish(directory, "train", config.train.seed, inputs={"data": str(data_dir)})
    logger.info(f"训练完成: 初始损失 {result.initial_loss:.4f} → 最终损失 {result.final_loss:.4f}")
    _emit(str(model_path))


@cli.command("sample")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.pass_obj
@handle_exceptions("sample")
def sample_command(state: CliState, checkpoint, count, seed, out):
    """无条件采样 count 张地图（第 i 张使用种子 seed + i）"""
    if count < 1:
        raise UsageError(f"--count 必须至少为 1: {count}")
    seed = state.config.system.seed if seed is None else seed
    params, sch = load_checkpoint(checkpoint)
    K = params.spec.num_classes
    directory = state.outputs.command_dir("sample", out)
    for i in range(count):
        labels = sample_unconditional(params, sch, RngStream(seed + i))
        write_smap(directory / f"sample_{i:03d}.smap", labels, K)
        render_png(labels, directory / f"sample_{i:03d}.png")
    state.finish(directory, "sample", seed, inputs={"checkpoint": str(checkpoint)})
    _emit(str(directory))


@cli.command("inpaint")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="已知区域所在的 SMAP")
@click.option("--mask", "mask_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="SMASK（1 = 已知）")
@click.option("--strategy", type=click.Choice(STRATEGY_CHOICES), default=None, help="lb 或 seq")
@click.option("--samples", type=int, default=None, help="样本数 S")
@click.option("--lookbacks", type=int, default=None, help="每步回看次数 r")
@click.option("--seed", type=int, default=None)
@click.option("--region", type=click.Choice(list(REGIONS)), default=None, help="评估区域")
@click.option("--no-paste", is_flag=True, help="不把已知像素贴回最终结果")
@click.option("--workers", type=int, default=None, help="多样本并行线程数")
@click.option("--gt", "gt_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="可选真值 SMAP，给出时计算指标")
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.pass_obj
@handle_exceptions("inpaint")
def inpaint_command(state: CliState, checkpoint, map_path, mask_path, strategy, samples, lookbacks,
                    seed, region, no_paste, workers, gt_path, out):
    """条件补全：output.smap 为第一个样本，S > 1 时另存其余样本与不确定性图"""
    config = state.config
    config.apply_overrides({
        "inpaint.strategy": normalize_strategy(strategy) if strategy else None,
        "inpaint.num_samples": samples,
        "inpaint.lookbacks": lookbacks,
        "inpaint.seed": seed,
        "inpaint.region": region,
        "inpaint.paste_known": False if no_paste else None,
        "inpaint.workers": workers,
    })
    ic = config.inpaint
    params, sch = load_checkpoint(checkpoint)
    y0, K, mask = _load_pair(map_path, mask_path)
    if K != params.spec.num_classes:
        raise DomainError(f"地图类别数 K={K} 与模型 K={params.spec.num_classes} 不符")
    gt = _load_gt(gt_path, K, y0.shape) if gt_path else None

    directory = state.outputs.command_dir("inpaint", out)
    result = multi_sample(params, y0, mask, sch, ic.num_samples, ic.seed, strategy=ic.strategy,
                          lookbacks=ic.lookbacks, paste_known=ic.paste_known, workers=ic.workers)
    write_smap(directory / "output.smap", result.samples[0], K)
    render_png(result.samples[0], directory / "output.png")
    render_png(y0, directory / "known.png", mask=mask)
    for i, labels in enumerate(result.samples[1:], start=1):
        write_smap(directory / f"sample_{i:03d}.smap", labels, K)
    render_uncertainty_png(result.uncertainty, directory / "uncertainty.png")

    sidecar = {
        "strategy": result.strategy,
        "lookbacks": result.lookbacks if result.strategy == "lb_con" else 0,
        "samples": len(result.samples),
        "seeds": result.seeds,
        "paste_known": ic.paste_known,
        "region": ic.region,
        "unknown_fraction": mask_stats(mask).unknown_fraction,
        "mean_uncertainty": float(result.uncertainty.mean()),
        "timings": result.timings,
    }
    if gt is not None:
        report = evaluate(result.samples[0], gt, mask, ic.region, K, name=result.strategy)
        sidecar["metrics"] = report.to_dict()
        _emit(format_report(report))
    state.outputs.write_json(directory / "inpaint.json", sidecar)
    state.finish(directory, "inpaint", ic.seed,
                 inputs={"checkpoint": str(checkpoint), "map": str(map_path), "mask": str(mask_path)})
    _emit(str(directory / "output.smap"))


@cli.command("maskgen")
@click.option("--spec", "spec_text", default="rect", show_default=True,
              help="掩码族及参数，如 rect:count=2 或 speckle:rho=0.05")
@click.option("--height", type=int, default=32, show_default=True)
@click.option("--width", type=int, default=32, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--name", default="mask", show_default=True, help="输出文件名（不含扩展名）")
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.pass_obj
@handle_exceptions("maskgen")
def maskgen_command(state: CliState, spec_text, height, width, seed, name, out):
    """生成 SMASK 掩码（1 = 已知，0 = 待补全）"""
    seed = state.config.system.seed if seed is None else seed
    spec = MaskSpec.from_string(spec_text, seed=seed)
    mask = generate(spec, height, width)
    directory = state.outputs.command_dir("maskgen", out)
    path = write_smask(directory / f"{name}.smask", mask)
    render_uncertainty_png(1.0 - mask, directory / f"{name}.png")
    stats = mask_stats(mask)
    logger.info(f"{spec.label()}: 未知像素 {stats.unknown}/{stats.total} ({stats.unknown_fraction:.1%})")
    state.finish(directory, "maskgen", seed)
    _emit(str(path))


@cli.command("baseline")
@click.option("--method", type=click.Choice(list(BASELINE_METHODS)), required=True)
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--gt", "gt_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.pass_obj
@handle_exceptions("baseline")
def baseline_command(state: CliState, method, map_path, mask_path, gt_path, out):
    """插值基线补全（nearest / linear / cubic）"""
    y0, K, mask = _load_pair(map_path, mask_path)
    gt = _load_gt(gt_path, K, y0.shape) if gt_path else None
    pred = complete(method, y0, mask, K)
    directory = state.outputs.command_dir("baseline", out)
    path = write_smap(directory / f"baseline_{method}.smap", pred, K)
    render_png(pred, directory / f"baseline_{method}.png")
    if gt is not None:
        _emit(format_report(evaluate(pred, gt, mask, "missing", K, name=method)))
    state.finish(directory, "baseline", None, inputs={"map": str(map_path), "mask": str(mask_path)})
    _emit(str(path))


@cli.command("eval")
@click.option("--pred", "pred_paths", type=click.Path(exists=True, dir_okay=False), multiple=True,
              required=True, help="预测 SMAP，可重复")
@click.option("--gt", "gt_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--mask", "mask_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--region", type=click.Choice(list(REGIONS)), default=None)
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.pass_obj
@handle_exceptions("eval")
def eval_command(state: CliState, pred_paths, gt_path, mask_path, region, out):
    """在 missing 或 full 区域上计算 mIoU 与 Acc（百分比）"""
    region = region or state.config.inpaint.region
    if region == "missing" and mask_path is None:
        raise UsageError("--region missing 需要 --mask")
    gt, K = read_smap(gt_path)
    mask = read_smask(mask_path) if mask_path else None

    reports = []
    for pred_path in pred_paths:
        pred, K_pred = read_smap(pred_path)
        if K_pred != K:
            raise DomainError(f"预测与真值的类别数不同: {K_pred} vs {K}")
        reports.append(evaluate(pred, gt, mask, region, K, name=Path(pred_path).stem))

    for report in reports:
        _emit(f"[{report.name}]\n{format_report(report)}")
    directory = state.outputs.command_dir("eval", out)
    reports_to_frame(reports).to_csv(directory / "report.csv", index=False)
    state.outputs.write_json(directory / "report.json", {"reports": [r.to_dict() for r in reports]})
    state.finish(directory, "eval", None, inputs={"gt": str(gt_path)})


@cli.command("ablate")
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--maps", "num_maps", type=int, default=10, show_default=True, help="使用的地图数量")
@click.option("--offset", type=int, default=0, show_default=True, help="从第几张地图开始（留出集）")
@click.option("--family", "families", multiple=True,
              help="掩码族，可重复，如 --family rect:count=2 --family speckle:rho=0.05")
@click.option("--seeds", "num_seeds", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=None, help="种子起点")
@click.option("--lookbacks", type=int, default=None)
@click.option("--baselines", is_flag=True, help="同时运行插值基线")
@click.option("--out", type=click.Path(file_okay=False), default=None)
@click.pass_obj
@handle_exceptions("ablate")
def ablate_command(state: CliState, checkpoint, data_dir, num_maps, offset, families, num_seeds, seed,
                   lookbacks, baselines, out):
    """LB-Con 与 Seq-Con 在各掩码族上的对比表"""
    config = state.config
    config.apply_overrides({"inpaint.lookbacks": lookbacks, "inpaint.seed": seed})
    if num_maps < 1 or num_seeds < 1 or offset < 0:
        raise UsageError("--maps 与 --seeds 必须至少为 1，--offset 不能为负")
    params, sch = load_checkpoint(checkpoint)
    maps, K, _ = load_dataset(data_dir)
    if K != params.spec.num_classes:
        raise DomainError(f"数据集类别数 K={K} 与模型 K={params.spec.num_classes} 不符")
    selected = maps[offset:offset + num_maps]
    if len(selected) == 0:
        raise DomainError(f"数据集只有 {len(maps)} 张地图，偏移 {offset} 之后没有可用地图")

    specs = [MaskSpec.from_string(text) for text in (families or ("rect:count=2", "speckle:rho=0.05"))]
    base = config.inpaint.seed
    result = run_ablation(params, sch, selected, specs, [base + i for i in range(num_seeds)],
                          lookbacks=config.inpaint.lookbacks, include_baselines=baselines, K=K)

    directory = state.outputs.command_dir("ablate", out)
    result.runs.to_csv(directory / "ablation_runs.csv", index=False)
    result.summary.reset_index().to_csv(directory / "ablation.csv", index=False)
    state.finish(directory, "ablate", base, inputs={"checkpoint": str(checkpoint), "data": str(data_dir)})
    _emit(format_table(result))


def _exit_code(error: BaseException) -> int:
    if isinstance(error, (click.UsageError, UsageError, ConfigurationError, ValidationError)):
        return EXIT_USAGE
    return EXIT_DOMAIN


def run(argv: Optional[Sequence[str]] = None) -> int:
    """执行命令行并返回退出码：0 成功，1 领域或格式错误，2 用法错误"""
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        cli.main(args=args, prog_name="sepaint", standalone_mode=False, obj=CliState(argv=args))
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.exceptions.Abort:
        click.echo("已中止", err=True)
        return EXIT_DOMAIN
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except Exception as e:
        if not isinstance(e, (UsageError, ConfigurationError, ValidationError, DomainError,
                              FormatError, TrainingError)):
            click.echo(f"错误: {e}", err=True)
        return _exit_code(e)
    return EXIT_OK


def main():
    sys.exit(run())
