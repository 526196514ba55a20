"""
合成数据、文件格式与渲染
"""
