"""
配置管理
"""
