"""条件指示图：数据模型统计量与数据集读写"""

from src.graph.core import (
    clustering_coefficients,
    condition_correlation,
    correlation_regime,
    graph_stats,
    induced_dual_subgraph,
)
from src.graph.io import EdgeListCorpusIO, extract_ego_nets, export_dot, load_dataset, save_corpus

__all__ = [
    "clustering_coefficients",
    "condition_correlation",
    "correlation_regime",
    "graph_stats",
    "induced_dual_subgraph",
    "EdgeListCorpusIO",
    "extract_ego_nets",
    "export_dot",
    "load_dataset",
    "save_corpus",
]
