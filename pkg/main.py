#!/usr/bin/env python3
"""
语义地图扩散补全系统 - 主入口脚本

使用方法：
    python main.py --help
    python main.py synth --count 200 --out data/toy
    python main.py train --data data/toy --steps 2000
    python main.py inpaint --checkpoint outputs/runs/train/model.spnt --map map.smap --mask mask.smask

安装后也可以直接运行 ``sepaint``。
"""

import sys
from pathlib import Path

# 添加项目根目录到Python路径
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from src.cli.commands import run  # noqa: E402


def main():
    """主函数"""
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
