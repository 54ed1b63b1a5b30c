"""条件扩散图生成 - 同质性/传染性感知的多条件图生成"""

__version__ = "0.1.0"
