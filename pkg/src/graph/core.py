"""条件指示图的统计量与条件相关性"""

from __future__ import annotations

import math
from typing import Iterable, List, Optional, Sequence

import networkx as nx
import numpy as np

from src.errors import EmptyCorpusError, GraphInvariantError, UndefinedCorrelationError
from src.models import CondGraph, GraphStats


def clustering_coefficients(g: CondGraph) -> np.ndarray:
    """局部聚类系数：2·三角形数 / (deg·(deg−1))，度 < 2 的节点记 0。"""
    if g.n == 0:
        return np.zeros(0)
    a = g.adj.astype(np.int64)
    deg = a.sum(axis=1)
    # diag(A³) 恰为经过节点 i 的三角形数的两倍
    closed = np.einsum("ij,jk,ki->i", a, a, a)
    denom = deg * (deg - 1)
    out = np.zeros(g.n)
    mask = deg >= 2
    out[mask] = closed[mask] / denom[mask]
    return out


def dual_mask(g: CondGraph) -> np.ndarray:
    return (g.x1 == 1) & (g.x2 == 1)


def dual_satisfying_count(g: CondGraph) -> int:
    """同时满足两个条件的节点数"""
    return int(dual_mask(g).sum())


def induced_dual_subgraph(g: CondGraph) -> CondGraph:
    """同时满足两个条件的节点诱导的子图，保持节点顺序；可能为空图。"""
    idx = np.flatnonzero(dual_mask(g))
    if idx.size == 0:
        return CondGraph.empty(0)
    return CondGraph(g.adj[np.ix_(idx, idx)], g.x1[idx], g.x2[idx])


def density(g: CondGraph) -> float:
    n = g.n
    if n <= 1:
        return 0.0
    return 2.0 * g.edge_count / (n * (n - 1))


def graph_stats(g: CondGraph) -> GraphStats:
    return GraphStats(
        node_count=g.n,
        edge_count=g.edge_count,
        density=density(g),
        clustering=clustering_coefficients(g),
    )


def contingency(corpus: Iterable[CondGraph]) -> np.ndarray:
    """合并所有节点的 2×2 列联表 counts[x1, x2]"""
    counts = np.zeros((2, 2), dtype=np.int64)
    for g in corpus:
        np.add.at(counts, (g.x1.astype(np.int64), g.x2.astype(np.int64)), 1)
    return counts


def condition_correlation(corpus: Sequence[CondGraph]) -> float:
    """合并节点上 x1 与 x2 的 phi 系数。

    Raises:
        EmptyCorpusError: 语料为空
        UndefinedCorrelationError: 合并节点数 < 2 或任一条件向量为常数
    """
    if not corpus:
        raise EmptyCorpusError("计算条件相关性需要非空语料")
    counts = contingency(corpus)
    total = int(counts.sum())
    if total < 2:
        raise UndefinedCorrelationError("合并节点数不足 2，相关性无定义")
    n11, n10, n01, n00 = (int(counts[1, 1]), int(counts[1, 0]), int(counts[0, 1]), int(counts[0, 0]))
    row1, row0 = n11 + n10, n01 + n00
    col1, col0 = n11 + n01, n10 + n00
    if row1 == 0 or row0 == 0 or col1 == 0 or col0 == 0:
        raise UndefinedCorrelationError("条件向量为常数，相关性无定义")
    phi = (n11 * n00 - n10 * n01) / math.sqrt(float(row1) * row0 * col1 * col0)
    return float(min(1.0, max(-1.0, phi)))


def correlation_regime(rho: float) -> str:
    """把相关系数归入分档名（负侧左开右闭，正侧左闭右开）"""
    if rho <= -0.5:
        return "strong_negative"
    if rho <= -0.25:
        return "high_negative"
    if rho <= -0.125:
        return "medium_negative"
    if rho < 0.0:
        return "low_negative"
    if rho < 0.125:
        return "low_positive"
    if rho < 0.25:
        return "weak_positive"
    if rho < 0.5:
        return "medium_positive"
    return "strong_positive"


def validate_corpus(corpus: Sequence[CondGraph], max_nodes: int = 100) -> None:
    """语料层面的检查：非空、每张图 1 ≤ n ≤ max_nodes。"""
    if not corpus:
        raise EmptyCorpusError("语料为空")
    for i, g in enumerate(corpus):
        if not (1 <= g.n <= max_nodes):
            raise GraphInvariantError(
                "第 {} 张图节点数 {} 不在 [1, {}] 内".format(i, g.n, max_nodes)
            )


def to_networkx(g: CondGraph) -> nx.Graph:
    G = nx.Graph()
    for i in range(g.n):
        G.add_node(i, c1=int(g.x1[i]), c2=int(g.x2[i]))
    G.add_edges_from(g.edges())
    return G


def from_networkx(G: nx.Graph, nodes: Optional[Sequence] = None) -> CondGraph:
    """按 nodes 给定的顺序（默认 G.nodes 顺序）转换，节点属性 c1/c2 缺省为 0。"""
    order: List = list(G.nodes) if nodes is None else list(nodes)
    index = {v: k for k, v in enumerate(order)}
    n = len(order)
    adj = np.zeros((n, n), dtype=np.int8)
    for u, v in G.subgraph(order).edges():
        if u == v:
            raise GraphInvariantError("不允许自环: {}".format(u))
        adj[index[u], index[v]] = 1
        adj[index[v], index[u]] = 1
    x1 = [int(G.nodes[v].get("c1", 0)) for v in order]
    x2 = [int(G.nodes[v].get("c2", 0)) for v in order]
    return CondGraph(adj, x1, x2)
