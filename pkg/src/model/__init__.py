"""
去噪网络、优化器与训练
"""
