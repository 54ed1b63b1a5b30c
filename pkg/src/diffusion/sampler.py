"""反向采样：无条件共演化采样与双条件引导采样

每一步从同一个 G_t 快照出发，同时更新两个条件位和边（Jacobi 式）：
节点条件位走传染因子（只读该条件自身的位与当前边），
边走同质性因子，二者都是“后验按去噪网络的干净概率混合”。
"""

from __future__ import annotations

import contextvars
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.diffusion.schedule import mixed_posterior
from src.errors import StepRangeError
from src.models import (
    CleanPrediction,
    CondGraph,
    GuidanceStrength,
    NoiseSchedule,
    NoisyGraph,
    SampleResult,
    SampleRun,
)
from src.network.guidance import GuidanceClassifiers, GuidanceRatios, classifier_ratios, guide_bernoulli
from src.network.header import DenoiserProtocol
from src.utils.logger import get_logger
from src.utils.seeding import STREAM_SAMPLE, derive_rng

logger = get_logger(__name__)


@dataclass
class Guidance:
    """采样时的引导设置"""
    classifiers: GuidanceClassifiers
    gamma: float = 1.0
    hard_gating: bool = False
    guide_reconstruction: bool = True


def _predict(model: DenoiserProtocol, g: NoisyGraph, T: int) -> CleanPrediction:
    pred = model.predict_clean(g, T)
    pred.validate(g.graph.n)
    return pred


def _check_reverse_step(schedule: NoiseSchedule, t: int) -> None:
    if not (2 <= t <= schedule.T):
        raise StepRangeError("反向步 t={} 不在 [2, {}] 内".format(t, schedule.T))


def node_step_probs(schedule: NoiseSchedule, t: int, x: np.ndarray, p_clean: np.ndarray) -> np.ndarray:
    _check_reverse_step(schedule, t)
    return mixed_posterior(schedule, t, x, p_clean)


def edge_step_probs(schedule: NoiseSchedule, t: int, adj: np.ndarray, pe: np.ndarray) -> np.ndarray:
    _check_reverse_step(schedule, t)
    n = adj.shape[0]
    rows, cols = np.triu_indices(n, k=1)
    upper = mixed_posterior(schedule, t, adj[rows, cols], pe[rows, cols])
    out = np.zeros((n, n))
    out[rows, cols] = upper
    out[cols, rows] = upper
    return out


def reverse_node_step(
    model: DenoiserProtocol, schedule: NoiseSchedule, g: NoisyGraph, condition_index: int
) -> np.ndarray:
    """条件 c_i 的 P(x_{t−1} = 1)，长度 n；只读 X_{c_i}^(t)。

    Raises:
        StepRangeError: t 不在 [2, T]
    """
    _check_reverse_step(schedule, g.t)
    pred = _predict(model, g, schedule.T)
    return node_step_probs(schedule, g.t, g.graph.condition(condition_index), pred.condition(condition_index))


def reverse_edge_step(model: DenoiserProtocol, schedule: NoiseSchedule, g: NoisyGraph) -> np.ndarray:
    """每个无序节点对的 P(e_{t−1} = 1)，对称，对角线为 0"""
    _check_reverse_step(schedule, g.t)
    pred = _predict(model, g, schedule.T)
    return edge_step_probs(schedule, g.t, g.graph.adj, pred.pe)


def _draw(probs1: np.ndarray, probs2: np.ndarray, probs_e: np.ndarray, rng: np.random.Generator) -> CondGraph:
    """按 x1、x2、字典序节点对的顺序逐变量抽样"""
    n = probs1.shape[0]
    x1 = (rng.random(n) < probs1).astype(np.int8)
    x2 = (rng.random(n) < probs2).astype(np.int8)
    rows, cols = np.triu_indices(n, k=1)
    upper = (rng.random(rows.size) < probs_e[rows, cols]).astype(np.int8)
    adj = np.zeros((n, n), dtype=np.int8)
    adj[rows, cols] = upper
    adj[cols, rows] = upper
    return CondGraph(adj, x1, x2)


def _apply_guidance(
    probs: Tuple[np.ndarray, np.ndarray, np.ndarray], ratios: GuidanceRatios, gamma: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    q1, q2, qe = probs
    return (
        guide_bernoulli(q1, ratios.node1, gamma),
        guide_bernoulli(q2, ratios.node2, gamma),
        guide_bernoulli(qe, ratios.edge, gamma),
    )


def reconstruction_step(
    model: DenoiserProtocol,
    g: NoisyGraph,
    T: int,
    rng: np.random.Generator,
    guidance: Optional[Guidance] = None,
) -> CondGraph:
    """t = 1：直接按去噪网络的干净概率抽取 x1、x2 与边"""
    if g.t != 1:
        raise StepRangeError("重建步只在 t = 1 执行，实际 t={}".format(g.t))
    pred = _predict(model, g, T)
    probs = (pred.px1, pred.px2, pred.pe)
    if guidance is not None and guidance.gamma != 0 and guidance.guide_reconstruction:
        ratios = classifier_ratios(guidance.classifiers, g, T, guidance.hard_gating)
        probs = _apply_guidance(probs, ratios, guidance.gamma)
    return _draw(*probs, rng)


def sample_chain(
    model: DenoiserProtocol,
    schedule: NoiseSchedule,
    n: int,
    rng: np.random.Generator,
    guidance: Optional[Guidance] = None,
    trace: bool = False,
) -> Tuple[CondGraph, List[Tuple[int, CondGraph]]]:
    """单条反向链：G_T ~ Bernoulli(1/2)，t = T..2 逐步去噪，t = 1 重建。"""
    T = schedule.T
    half = np.full(n, 0.5)
    g = _draw(half, half, np.full((n, n), 0.5), rng)
    snapshots: List[Tuple[int, CondGraph]] = [(T, g)] if trace else []
    guided = guidance is not None and guidance.gamma != 0

    for t in range(T, 1, -1):
        noisy = NoisyGraph(g, t)
        pred = _predict(model, noisy, T)
        probs = (
            node_step_probs(schedule, t, g.x1, pred.px1),
            node_step_probs(schedule, t, g.x2, pred.px2),
            edge_step_probs(schedule, t, g.adj, pred.pe),
        )
        if guided:
            ratios = classifier_ratios(guidance.classifiers, noisy, T, guidance.hard_gating)
            probs = _apply_guidance(probs, ratios, guidance.gamma)
        g = _draw(*probs, rng)
        if trace:
            snapshots.append((t - 1, g))

    g = reconstruction_step(model, NoisyGraph(g, 1), T, rng, guidance)
    if trace:
        snapshots.append((0, g))
    return g, snapshots


def run_sampler(
    model: DenoiserProtocol,
    schedule: NoiseSchedule,
    run: SampleRun,
    guidance: Optional[Guidance] = None,
    workers: int = 1,
) -> SampleResult:
    """生成 run.num_graphs 张图。

    第 i 张图使用由 (run.seed, i) 派生的独立随机流：先抽节点数，再跑反向链，
    因此线程数不影响结果。
    """
    counts = list(run.node_counts)
    label = "引导" if guidance is not None else "无条件"

    def one(i: int) -> Tuple[CondGraph, List[Tuple[int, CondGraph]]]:
        rng = derive_rng(run.seed, STREAM_SAMPLE, i)
        n = int(counts[int(rng.integers(len(counts)))])
        out = sample_chain(model, schedule, n, rng, guidance, run.trace_enabled)
        logger.info("%s采样图 %d/%d (n=%d)", label, i + 1, run.num_graphs, n)
        return out

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # 工作线程继承提交线程的 contextvars
            futures = [pool.submit(contextvars.copy_context().run, one, i) for i in range(run.num_graphs)]
            results = [f.result() for f in futures]
    else:
        results = [one(i) for i in range(run.num_graphs)]

    graphs = [g for g, _ in results]
    traces = [tr for _, tr in results] if run.trace_enabled else []
    return SampleResult(graphs=graphs, traces=traces)


def sample_unconditional(
    model: DenoiserProtocol, schedule: NoiseSchedule, run: SampleRun, workers: int = 1
) -> List[CondGraph]:
    return run_sampler(model, schedule, run, None, workers).graphs


def sample_conditional(
    model: DenoiserProtocol,
    classifiers: GuidanceClassifiers,
    schedule: NoiseSchedule,
    run: SampleRun,
    gamma: float = 1.0,
    hard_gating: bool = False,
    guide_reconstruction: bool = True,
    workers: int = 1,
) -> List[CondGraph]:
    """每个逐变量伯努利参数先经 guide_bernoulli 重加权再抽样；γ = 0 与无条件采样逐位一致。"""
    gamma = GuidanceStrength(gamma).gamma
    guidance = Guidance(classifiers, gamma, hard_gating, guide_reconstruction)
    return run_sampler(model, schedule, run, guidance, workers).graphs
