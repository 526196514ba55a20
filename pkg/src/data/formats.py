#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
文件格式

SMAP  文本标签图：第 1 行 "SMAP 1"，第 2 行 "H W K"，随后 H 行、每行 W 个整数。
SMASK 文本掩码：与 SMAP 相同，魔数为 "SMASK 1"，K 固定为 2，取值 {0,1}，1 = 已知。
SPNT  二进制检查点（小端）：
      magic "SPNT" | uint32 版本 | uint32 头长度 | JSON 头（调度描述、网络结构、层表）
      | uint64 参数个数 | float32 参数

所有解析错误都以 FormatError 报告，并给出出错记号的字节偏移。
"""

import json
import re
import struct
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from .synth import SynthSpec
from ..core.schedule import NoiseSchedule, schedule_from_descriptor
from ..model.denoiser import DenoiserParams, DenoiserSpec
from ..shared.infrastructure.errors.exceptions import ConfigurationError, DomainError, FormatError
from ..shared.infrastructure.logging.logger import get_logger

logger = get_logger("formats")

PathLike = Union[str, Path]

SMAP_MAGIC = "SMAP"
SMASK_MAGIC = "SMASK"
TEXT_VERSION = 1
MAX_DIM = 1 << 16

SPNT_MAGIC = b"SPNT"
SPNT_VERSION = 1

_TOKEN = re.compile(rb"\S+")


def _format_grid(magic: str, grid: np.ndarray, K: int) -> str:
    H, W = grid.shape
    lines = [f"{magic} {TEXT_VERSION}", f"{H} {W} {K}"]
    lines.extend(" ".join(str(int(v)) for v in row) for row in grid)
    return "\n".join(lines) + "\n"


def _parse_grid(data: bytes, magic: str, path: Optional[str]) -> Tuple[np.ndarray, int]:
    """解析文本网格，返回 (网格, K)"""
    lines = data.split(b"\n")
    offsets = []
    pos = 0
    for line in lines:
        offsets.append(pos)
        pos += len(line) + 1

    def tokens(index: int) -> List[Tuple[bytes, int]]:
        if index >= len(lines):
            return []
        return [(m.group(), offsets[index] + m.start()) for m in _TOKEN.finditer(lines[index])]

    def as_int(token: bytes, offset: int) -> int:
        try:
            return int(token)
        except ValueError:
            raise FormatError(f"不是整数: {token!r}", offset=offset, path=path)

    head = tokens(0)
    if len(head) != 2 or head[0][0] != magic.encode():
        raise FormatError(f"魔数不匹配, 期望 '{magic} {TEXT_VERSION}'", offset=0, path=path)
    if as_int(*head[1]) != TEXT_VERSION:
        raise FormatError(f"不支持的格式版本: {head[1][0]!r}", offset=head[1][1], path=path)

    dims = tokens(1)
    if len(dims) != 3:
        raise FormatError("第 2 行必须是 'H W K'", offset=offsets[1] if len(offsets) > 1 else len(data),
                          path=path)
    H, W, K = (as_int(tok, off) for tok, off in dims)
    for (tok, off), value in zip(dims, (H, W, K)):
        if value < 1 or value > MAX_DIM:
            raise FormatError(f"维度越界: {tok!r}", offset=off, path=path)
    if K < 2:
        raise FormatError(f"类别数必须至少为 2: {K}", offset=dims[2][1], path=path)
    # 每行至少 W 个单字节标签加 W-1 个分隔符
    body = len(data) - (offsets[2] if len(offsets) > 2 else len(data))
    if body < H * (2 * W - 1):
        raise FormatError(f"数据不足以容纳 {H}×{W} 网格: 剩余 {body} 字节", offset=len(data), path=path)

    grid = np.empty((H, W), dtype=np.int64)
    for r in range(H):
        row = tokens(2 + r)
        if len(row) != W:
            where = offsets[2 + r] if 2 + r < len(offsets) else len(data)
            raise FormatError(f"第 {r} 行应有 {W} 个值, 实际 {len(row)}", offset=where, path=path)
        for c, (tok, off) in enumerate(row):
            value = as_int(tok, off)
            if value < 0 or value >= K:
                raise FormatError(f"标签超出范围 [0, {K}): {value}", offset=off, path=path)
            grid[r, c] = value

    trailing = [tok for i in range(2 + H, len(lines)) for tok in tokens(i)]
    if trailing:
        raise FormatError("数据之后存在多余内容", offset=trailing[0][1], path=path)
    return grid, K


def write_smap(path: PathLike, labels: np.ndarray, K: int) -> Path:
    """写出 SMAP 标签图"""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise DomainError(f"标签图必须是二维: shape={labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= K):
        raise DomainError(f"标签超出范围 [0, {K})")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_format_grid(SMAP_MAGIC, labels, K), encoding="ascii")
    return path


def read_smap(path: PathLike) -> Tuple[np.ndarray, int]:
    """读取 SMAP，返回 (标签图, K)"""
    path = Path(path)
    return _parse_grid(path.read_bytes(), SMAP_MAGIC, str(path))


def parse_smap(data: bytes) -> Tuple[np.ndarray, int]:
    return _parse_grid(data, SMAP_MAGIC, None)


def write_smask(path: PathLike, mask: np.ndarray) -> Path:
    """写出 SMASK 掩码（1 = 已知）"""
    mask = np.asarray(mask)
    if mask.ndim != 2 or not np.isin(mask, (0, 1)).all():
        raise DomainError("掩码必须是取值 {0,1} 的二维数组")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_format_grid(SMASK_MAGIC, mask.astype(np.int64), 2), encoding="ascii")
    return path


def read_smask(path: PathLike) -> np.ndarray:
    path = Path(path)
    grid, K = _parse_grid(path.read_bytes(), SMASK_MAGIC, str(path))
    if K != 2:
        raise FormatError(f"SMASK 的 K 必须为 2: {K}", offset=0, path=str(path))
    return grid.astype(np.uint8)


# ---------------------------------------------------------------------------
# 检查点
# ---------------------------------------------------------------------------

def save_checkpoint(path: PathLike, params: DenoiserParams, sch: NoiseSchedule) -> Path:
    """保存检查点，参数以 float32 存储"""
    header = {
        "schedule": sch.descriptor(),
        "denoiser": params.spec.to_dict(),
        "layers": [[name, list(shape)] for name, shape in params.spec.layout()],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = params.values.astype("<f4").tobytes()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(SPNT_MAGIC)
        f.write(struct.pack("<II", SPNT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        f.write(struct.pack("<Q", params.values.size))
        f.write(payload)
    logger.debug(f"检查点已写出: {path} ({params.values.size} 个参数)")
    return path


def load_checkpoint(path: PathLike) -> Tuple[DenoiserParams, NoiseSchedule]:
    """加载检查点，恢复参数与训练时的噪声调度"""
    path = Path(path)
    data = path.read_bytes()
    name = str(path)
    if data[:4] != SPNT_MAGIC:
        raise FormatError("魔数不匹配, 期望 'SPNT'", offset=0, path=name)
    if len(data) < 12:
        raise FormatError("文件头被截断", offset=len(data), path=name)
    version, header_len = struct.unpack_from("<II", data, 4)
    if version != SPNT_VERSION:
        raise FormatError(f"不支持的检查点版本: {version}", offset=4, path=name)
    header_end = 12 + header_len
    if header_end + 8 > len(data):
        raise FormatError("检查点头部长度超出文件大小", offset=8, path=name)
    try:
        header: Dict[str, Any] = json.loads(data[12:header_end].decode("utf-8"))
        spec = DenoiserSpec.from_dict(header["denoiser"])
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(f"检查点头部无法解析: {e}", offset=12, path=name)

    expected_layers = [[n, list(s)] for n, s in spec.layout()]
    if header.get("layers") != expected_layers:
        raise FormatError("层表与网络结构不一致", offset=12, path=name)

    (count,) = struct.unpack_from("<Q", data, header_end)
    payload_start = header_end + 8
    if count != spec.num_params:
        raise FormatError(f"参数个数不符: {count} vs {spec.num_params}", offset=header_end, path=name)
    if len(data) != payload_start + 4 * count:
        raise FormatError("参数区长度与参数个数不符", offset=payload_start, path=name)

    values = np.frombuffer(data, dtype="<f4", count=count, offset=payload_start).astype(np.float64)
    try:
        sch = schedule_from_descriptor(header["schedule"])
    except (ConfigurationError, KeyError, TypeError, ValueError) as e:
        raise FormatError(f"调度描述无效: {e}", offset=12, path=name)
    return DenoiserParams(spec, values), sch


# ---------------------------------------------------------------------------
# 数据集目录
# ---------------------------------------------------------------------------

DATASET_INDEX = "dataset.json"


def save_dataset(directory: PathLike, maps: List[np.ndarray], spec: SynthSpec) -> Path:
    """数据集目录：逐张 SMAP 文件 + dataset.json"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = []
    for i, labels in enumerate(maps):
        filename = f"map_{i:05d}.smap"
        write_smap(directory / filename, labels, spec.num_classes)
        files.append(filename)
    index = {"spec": spec.to_dict(), "num_classes": spec.num_classes, "files": files}
    (directory / DATASET_INDEX).write_text(json.dumps(index, indent=2), encoding="utf-8")
    return directory


def load_dataset(directory: PathLike) -> Tuple[np.ndarray, int, Optional[SynthSpec]]:
    """读取数据集目录，返回 (地图数组[N,H,W], K, 生成参数)"""
    directory = Path(directory)
    index_path = directory / DATASET_INDEX
    spec: Optional[SynthSpec] = None
    if index_path.exists():
        index = json.loads(index_path.read_text(encoding="utf-8"))
        files = [directory / f for f in index["files"]]
        spec = SynthSpec.from_dict(index["spec"]) if "spec" in index else None
    else:
        files = sorted(directory.glob("*.smap"))
    if not files:
        raise DomainError(f"数据集目录中没有地图: {directory}")

    maps = []
    K = None
    for file in files:
        labels, k = read_smap(file)
        if K is None:
            K = k
        elif k != K or labels.shape != maps[0].shape:
            raise FormatError("数据集内地图尺寸或类别数不一致", offset=0, path=str(file))
        maps.append(labels)
    return np.stack(maps), int(K), spec
