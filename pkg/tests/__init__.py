"""
测试包
"""

