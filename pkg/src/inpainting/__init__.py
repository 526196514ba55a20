"""
条件补全：扩散推理、掩码生成与插值基线
"""
