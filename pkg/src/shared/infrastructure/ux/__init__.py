"""
用户体验改进模块
"""

