"""
评估指标与对比实验
"""
