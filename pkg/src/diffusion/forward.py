"""前向加噪与依赖感知的前向因子（传染条件概率、同质性边缘化）"""

from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple

import numpy as np

from src.diffusion.schedule import cumulative_kernel
from src.errors import EmptyCorpusError
from src.models import (
    ConditionProfile,
    CondGraph,
    ContagionParam,
    DependencyProfile,
    NoiseSchedule,
    NoisyGraph,
)
from src.utils.logger import get_logger
from src.utils.seeding import RngLike, as_rng

logger = get_logger(__name__)


def flip_bits(g: CondGraph, flip: float, rng: np.random.Generator) -> CondGraph:
    """每个二值变量独立以 flip 的概率翻转。

    随机数消耗顺序固定：x1 的 n 个、x2 的 n 个、再按字典序的上三角节点对。
    """
    n = g.n
    x1 = g.x1 ^ (rng.random(n) < flip).astype(np.int8)
    x2 = g.x2 ^ (rng.random(n) < flip).astype(np.int8)
    rows, cols = np.triu_indices(n, k=1)
    upper = g.adj[rows, cols] ^ (rng.random(rows.size) < flip).astype(np.int8)
    adj = np.zeros((n, n), dtype=np.int8)
    adj[rows, cols] = upper
    adj[cols, rows] = upper
    return CondGraph(adj, x1, x2)


def corrupt(g: CondGraph, schedule: NoiseSchedule, t: int, rng: RngLike) -> NoisyGraph:
    """按 q(G_t | G_0) 独立加噪（训练时使用）。

    Raises:
        StepRangeError: t 不在 [1, T]
    """
    kernel = cumulative_kernel(schedule, t)
    return NoisyGraph(flip_bits(g, kernel.flip, as_rng(rng)), t)


def contagion_conditional(param: ContagionParam, neighbor_bit: int, edge_present: int) -> float:
    """P(x_m = 1 | x_n = neighbor_bit, e_mn)。

    有边时以概率 p 复制邻居的条件位；无边时不提供信息，返回 1/2。
    """
    if not edge_present:
        return 0.5
    return param.p if neighbor_bit == 1 else 1.0 - param.p


def homophily_edge_prob(bit_m: int, neighbor_dist: float) -> float:
    """q(e = 1 | x_m) = Σ_{x_n} 1[x_m = x_n] · q(x_n | x_m)

    neighbor_dist 是 q(x_n = 1 | x_m)。
    """
    return float(neighbor_dist) if bit_m == 1 else 1.0 - float(neighbor_dist)


def _adjacent_counts(corpus: Sequence[CondGraph], condition: int) -> np.ndarray:
    """相邻有序节点对的列联表 counts[x_m, x_n]"""
    counts = np.zeros((2, 2), dtype=np.int64)
    for g in corpus:
        x = g.condition(condition).astype(np.int64)
        rows, cols = np.nonzero(g.adj)
        np.add.at(counts, (x[rows], x[cols]), 1)
    return counts


def estimate_neighbor_distribution(corpus: Sequence[CondGraph], condition: int) -> Tuple[float, float]:
    """由相邻节点对估计 (q(x_n=1|x_m=0), q(x_n=1|x_m=1))。

    某一行没有样本时该条件概率取 1/2。
    """
    if not corpus:
        raise EmptyCorpusError("估计邻居分布需要非空语料")
    counts = _adjacent_counts(corpus, condition)
    out = []
    for m in (0, 1):
        row = counts[m].sum()
        if row == 0:
            logger.debug("条件 c%d 上没有 x_m=%d 的相邻节点对，取 1/2", condition, m)
            out.append(0.5)
        else:
            out.append(float(counts[m, 1]) / float(row))
    return out[0], out[1]


def contagion_log_likelihood(corpus: Sequence[CondGraph], condition: int, param: ContagionParam) -> float:
    """相邻有序节点对 (m, n) 上 log P(x_m | x_n, e_mn = 1) 的平均值；语料没有边时为 log(1/2)"""
    counts = _adjacent_counts(corpus, condition)
    total = int(counts.sum())
    if total == 0:
        return math.log(contagion_conditional(param, 1, 0))
    ll = 0.0
    for m in (0, 1):
        for nb in (0, 1):
            p1 = contagion_conditional(param, nb, 1)
            ll += counts[m, nb] * math.log(p1 if m == 1 else 1.0 - p1)
    return float(ll / total)


def _pair_edge_rates(corpus: Sequence[CondGraph], agree_fn) -> Tuple[float, float]:
    """(一致节点对的边率, 不一致节点对的边率)，无样本时记 0"""
    edges = np.zeros(2, dtype=np.int64)
    pairs = np.zeros(2, dtype=np.int64)
    for g in corpus:
        rows, cols = np.triu_indices(g.n, k=1)
        agree = agree_fn(g, rows, cols)
        e = g.adj[rows, cols].astype(np.int64)
        for k, mask in enumerate((agree, ~agree)):
            pairs[k] += int(mask.sum())
            edges[k] += int(e[mask].sum())
    rates = [float(edges[k]) / float(pairs[k]) if pairs[k] else 0.0 for k in range(2)]
    return rates[0], rates[1]


def dependency_profile(corpus: Sequence[CondGraph], contagion: Optional[ContagionParam] = None) -> DependencyProfile:
    """语料的传染性（相邻一致率、传染模型下的对数似然）与同质性（一致/不一致节点对的边率差）画像"""
    if not corpus:
        raise EmptyCorpusError("依赖画像需要非空语料")
    contagion = contagion or ContagionParam()
    profiles = []
    for c in (1, 2):
        counts = _adjacent_counts(corpus, c)
        total = int(counts.sum())
        agreement = float(counts[0, 0] + counts[1, 1]) / total if total else 0.5
        q0, q1 = estimate_neighbor_distribution(corpus, c)

        def agree_on(g, rows, cols, c=c):
            x = g.condition(c)
            return x[rows] == x[cols]

        rate_agree, rate_disagree = _pair_edge_rates(corpus, agree_on)
        profiles.append(
            ConditionProfile(
                condition=c,
                agreement_rate=agreement,
                neighbor_dist=(q0, q1),
                homophily_edge=(homophily_edge_prob(0, q0), homophily_edge_prob(1, q1)),
                homophily_gap=rate_agree - rate_disagree,
                contagion_p=contagion.p,
                contagion_loglik=contagion_log_likelihood(corpus, c, contagion),
            )
        )

    def agree_both(g, rows, cols):
        return (g.x1[rows] == g.x1[cols]) & (g.x2[rows] == g.x2[cols])

    both, other = _pair_edge_rates(corpus, agree_both)
    return DependencyProfile(conditions=profiles, edge_rate_both_agree=both, edge_rate_disagree=other)
