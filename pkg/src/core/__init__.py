"""
核心模块
包含噪声调度、类别扩散核与随机采样
"""
