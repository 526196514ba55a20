"""
日志
"""
