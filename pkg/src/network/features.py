"""结构与谱特征 z = f(G_t, t)"""

from __future__ import annotations

import math

import numpy as np

from src.models import FeatureTensor, NoisyGraph

NODE_FEATURE_DIM = 4   # x1, x2, 归一化度, 局部聚类系数
GRAPH_FEATURE_DIM = 5  # 密度, 两个最大的归一化拉普拉斯特征值, sin, cos


def normalized_laplacian(adj: np.ndarray) -> np.ndarray:
    """对称归一化拉普拉斯 I − D^{-1/2} A D^{-1/2}，孤立节点对应的行列全为 0。"""
    a = adj.astype(np.float64)
    deg = a.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    lap = -(inv_sqrt[:, None] * a * inv_sqrt[None, :])
    lap[np.diag_indices_from(lap)] = nz.astype(np.float64)
    return lap


def feature_arrays(adj: np.ndarray, x1: np.ndarray, x2: np.ndarray, t: int, T: int) -> FeatureTensor:
    """直接从数组计算特征（引导时对大量单变量翻转的候选图求值）"""
    n = x1.shape[0]
    a = adj.astype(np.float64)
    deg = a.sum(axis=1)

    node_feats = np.zeros((n, NODE_FEATURE_DIM))
    node_feats[:, 0] = x1
    node_feats[:, 1] = x2
    if n > 1:
        node_feats[:, 2] = deg / (n - 1)
    closed = np.einsum("ij,jk,ki->i", a, a, a)
    denom = deg * (deg - 1.0)
    mask = deg >= 2
    node_feats[mask, 3] = closed[mask] / denom[mask]

    graph_feats = np.zeros(GRAPH_FEATURE_DIM)
    if n > 1:
        graph_feats[0] = deg.sum() / (n * (n - 1))
    if n > 0:
        eig = np.sort(np.linalg.eigvalsh(normalized_laplacian(adj)))[::-1]
        top = eig[:2]
        graph_feats[1:1 + top.size] = top
    angle = 2.0 * math.pi * t / T
    graph_feats[3] = math.sin(angle)
    graph_feats[4] = math.cos(angle)
    return FeatureTensor(node_feats=node_feats, graph_feats=graph_feats)


def extract_features(g: NoisyGraph, T: int) -> FeatureTensor:
    """节点特征：当前条件位、度/(n−1)、聚类系数；图特征：密度、谱、时间嵌入。

    Example:
        >>> feats = extract_features(NoisyGraph(cycle4, t=3), T=50)
        >>> feats.graph_feats[1]
        2.0
    """
    graph = g.graph
    return feature_arrays(graph.adj, graph.x1, graph.x2, g.t, T)
