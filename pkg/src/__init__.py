"""
语义地图扩散补全系统

基于多项分布扩散模型的语义地图生成与补全：噪声调度、去噪网络训练、
Seq-Con / LB-Con 条件推理、插值基线与评估。
"""

__version__ = "0.1.0"
__author__ = "Semantic Inpainting Team"

__all__ = ["__version__"]
