"""
输出管理模块
"""

from .output_manager import OutputManager, RunManifest, describe_version, load_manifest

__all__ = [
    "OutputManager",
    "RunManifest",
    "describe_version",
    "load_manifest",
]
