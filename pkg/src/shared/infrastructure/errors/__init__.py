"""
异常与错误处理
"""
