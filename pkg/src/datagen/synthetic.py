"""合成语料：植入同质性与可调条件相关性

节点的 (x1, x2) 取自边际都为 base_rate、phi 相关为 rho_target 的二元伯努利分布；
按 (x1, x2) 四种取值分块，块内连边概率 p_in，块间 p_out。
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import networkx as nx
import numpy as np

from src.config import SynthConfig, correlation_bounds
from src.errors import CorrelationTargetError, UndefinedCorrelationError
from src.graph.core import condition_correlation, correlation_regime, from_networkx
from src.models import CondGraph
from src.utils.logger import get_logger
from src.utils.seeding import STREAM_CORPUS, derive_rng

logger = get_logger(__name__)

# 联合取值的编号：0=(0,0) 1=(0,1) 2=(1,0) 3=(1,1)
_CELL_BITS = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=np.int8)


def joint_cell_probs(base_rate: float, rho: float) -> np.ndarray:
    """二元伯努利四格概率，p11 = b² + ρ·b(1−b)，其余由边际确定。

    Raises:
        CorrelationTargetError: 给定 base_rate 下 ρ 不可达
    """
    b = base_rate
    lo, hi = correlation_bounds(b)
    if not (lo - 1e-12 <= rho <= hi + 1e-12):
        raise CorrelationTargetError(
            "base_rate={} 时可达的相关性范围为 [{:.4f}, {:.4f}]，目标 {} 不可达".format(b, lo, hi, rho)
        )
    p11 = b * b + rho * b * (1.0 - b)
    p10 = b - p11
    p00 = 1.0 - 2.0 * b + p11
    probs = np.clip(np.array([p00, p10, p10, p11]), 0.0, 1.0)
    return probs / probs.sum()


def generate_graph(cfg: SynthConfig, rng: np.random.Generator) -> CondGraph:
    """单张图：抽 n、抽条件位，再用分块随机图模型连边"""
    n = int(rng.integers(cfg.n_min, cfg.n_max + 1))
    cells = rng.choice(4, size=n, p=joint_cell_probs(cfg.base_rate, cfg.rho_target))

    # 只保留非空的块
    blocks = [np.flatnonzero(cells == k).tolist() for k in range(4)]
    used = [k for k in range(4) if blocks[k]]
    sizes = [len(blocks[k]) for k in used]
    probs = [[cfg.p_in if a == b else cfg.p_out for b in used] for a in used]
    nodelist = [v for k in used for v in blocks[k]]
    G = nx.stochastic_block_model(sizes, probs, nodelist=nodelist, seed=int(rng.integers(2 ** 31)))

    bits = _CELL_BITS[cells]
    for v in range(n):
        G.nodes[v]["c1"] = int(bits[v, 0])
        G.nodes[v]["c2"] = int(bits[v, 1])
    return from_networkx(G, nodes=range(n))


def generate_corpus(cfg: Optional[SynthConfig] = None) -> List[CondGraph]:
    """生成合成语料，实测 phi 偏离目标超过 tolerance 时整体重抽，最多 max_attempts 次。

    base_rate = 1 时条件向量为常数，相关性无定义，跳过校验。

    Raises:
        CorrelationTargetError: 目标不可达，或重抽后仍偏离
    """
    cfg = cfg or SynthConfig()
    joint_cell_probs(cfg.base_rate, cfg.rho_target)

    measured: Optional[float] = None
    for attempt in range(cfg.max_attempts):
        def one(i: int, attempt: int = attempt) -> CondGraph:
            return generate_graph(cfg, derive_rng(cfg.seed, STREAM_CORPUS, attempt, i))

        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                corpus = list(pool.map(one, range(cfg.num_graphs)))
        else:
            corpus = [one(i) for i in range(cfg.num_graphs)]

        try:
            measured = condition_correlation(corpus)
        except UndefinedCorrelationError:
            logger.info("条件向量为常数，跳过相关性校验")
            return corpus
        if abs(measured - cfg.rho_target) <= cfg.tolerance:
            logger.info(
                "合成语料: %d 张图，实测 phi=%.4f (目标 %.4f，%s)，第 %d 次抽取",
                len(corpus), measured, cfg.rho_target, correlation_regime(measured), attempt + 1,
            )
            return corpus
        logger.warning(
            "第 %d 次抽取实测 phi=%.4f 偏离目标 %.4f 超过 %.2f，重抽",
            attempt + 1, measured, cfg.rho_target, cfg.tolerance,
        )
    raise CorrelationTargetError(
        "{} 次抽取后实测 phi={:.4f} 仍偏离目标 {:.4f}".format(cfg.max_attempts, measured, cfg.rho_target)
    )
