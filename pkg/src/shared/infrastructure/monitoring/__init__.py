"""
性能监控模块
"""

