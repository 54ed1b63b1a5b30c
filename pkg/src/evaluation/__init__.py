"""评估：有效性、相对误差比与聚类系数 MMD"""

from src.evaluation.metrics import evaluate, mmd_clustering, relative_error_ratios, validity

__all__ = ["evaluate", "mmd_clustering", "relative_error_ratios", "validity"]
