"""
基础设施模块
"""

