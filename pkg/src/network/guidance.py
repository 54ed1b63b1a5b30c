"""双条件分类器引导

outer 分类器估计 q(c_j = 1 | G_t)，inner 分类器在 c_j 为多数的子语料上估计
q(c_i = 1 | G_t, c_j = 1)。采样时对每个二值变量做两点评估，
得到取 1 与取 0 两种补全下 outer·inner 的比值，再按 γ 次幂重加权。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.config import DenoiserConfig, GuidanceConfig, OptimizerConfig, classifier_optimizer_defaults
from src.diffusion.forward import corrupt
from src.errors import DegenerateLabelError, GraphInvariantError, ShapeMismatchError
from src.models import ClassifierRole, CondGraph, MajorityLabel, NoiseSchedule, NoisyGraph, TrainResult
from src.network.denoiser import DenoiserHyper
from src.network.features import extract_features, feature_arrays
from src.network.header import GraphClassifierProtocol
from src.network.optim import AdamOptimizer, ProgressCallback, train_loop
from src.network.trunk import PROB_EPS, MessagePassingTrunk, ParameterLayout, bce, sigmoid
from src.utils.logger import get_logger
from src.utils.seeding import STREAM_CLASSIFIER_INIT, STREAM_CLASSIFIER_TRAIN, derive_rng

logger = get_logger(__name__)

_ROLE_INDEX = {ClassifierRole.OUTER: 0, ClassifierRole.INNER: 1}


def majority_label(g: CondGraph) -> MajorityLabel:
    """严格超过半数节点满足条件时标签为 1，恰好一半记 0"""
    if g.n < 1:
        raise GraphInvariantError("多数标签要求 n ≥ 1")
    return MajorityLabel(
        label_c1=int(2 * int(g.x1.sum()) > g.n),
        label_c2=int(2 * int(g.x2.sum()) > g.n),
    )


class GraphClassifier:
    """图级概率分类器：共享消息传递主干，均值池化 + 图特征后接 logistic 输出"""

    def __init__(
        self,
        hyper: DenoiserHyper,
        role: ClassifierRole,
        condition: int,
        params: Optional[np.ndarray] = None,
    ) -> None:
        self.hyper = hyper
        self.role = role
        self.condition = condition
        self.trunk = MessagePassingTrunk(hyper.d_v, hyper.d_g, hyper.hidden, hyper.rounds)
        r = hyper.hidden + hyper.d_g
        self.layout = ParameterLayout(
            self.trunk.specs() + [("readout.w", (r,), r), ("readout.c", (1,), r)]
        )
        if params is None:
            params = np.zeros(self.layout.size)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.layout.size,):
            raise ShapeMismatchError(
                "分类器参数长度 {} 与结构所需的 {} 不符".format(params.shape, self.layout.size)
            )
        self.params = params

    def with_params(self, params: np.ndarray) -> "GraphClassifier":
        return GraphClassifier(self.hyper, self.role, self.condition, params)

    def _logit(self, theta: np.ndarray, feats, adj: np.ndarray):
        n = adj.shape[0]
        if n < 1:
            raise GraphInvariantError("分类器输入至少需要 1 个节点")
        self.trunk.check(feats, n)
        p = self.layout.unflatten(theta)
        tc = self.trunk.forward(p, feats, adj)
        readout = np.concatenate([tc.h[-1].mean(axis=0), feats.graph_feats])
        return float(readout @ p["readout.w"] + p["readout.c"][0]), readout, tc, p

    def prob_arrays(self, adj: np.ndarray, x1: np.ndarray, x2: np.ndarray, t: int, T: int) -> float:
        s, _, _, _ = self._logit(self.params, feature_arrays(adj, x1, x2, t, T), adj)
        p = float(sigmoid(np.array([s]))[0])
        return min(max(p, PROB_EPS), 1.0 - PROB_EPS)

    def prob(self, noisy: NoisyGraph, T: int) -> float:
        """输出严格落在 (0, 1) 内"""
        g = noisy.graph
        return self.prob_arrays(g.adj, g.x1, g.x2, noisy.t, T)

    def loss_and_grad(self, theta: np.ndarray, feats, adj: np.ndarray, y: int) -> Tuple[float, np.ndarray]:
        s, readout, tc, p = self._logit(theta, feats, adj)
        prob = sigmoid(np.array([s]))
        l, d_s = bce(prob, np.array([float(y)]))
        ds = float(d_s[0])
        h = self.hyper.hidden
        n = adj.shape[0]
        grads: Dict[str, np.ndarray] = {
            "readout.w": ds * readout,
            "readout.c": np.array([ds]),
        }
        d_H = np.tile(ds * p["readout.w"][:h] / n, (n, 1))
        self.trunk.backward(p, tc, d_H, grads)
        return l, self.layout.flatten(grads)


@dataclass
class GuidanceClassifiers:
    """outer/inner 分类器对"""
    outer: GraphClassifier
    inner: GraphClassifier
    results: Dict[str, TrainResult] = field(default_factory=dict)

    def scores(self, adj: np.ndarray, x1: np.ndarray, x2: np.ndarray, t: int, T: int) -> Tuple[float, float]:
        return (
            self.outer.prob_arrays(adj, x1, x2, t, T),
            self.inner.prob_arrays(adj, x1, x2, t, T),
        )


@dataclass
class GuidanceRatios:
    """每个变量取 1 与取 0 两种补全下的似然比"""
    node1: np.ndarray
    node2: np.ndarray
    edge: np.ndarray   # n × n 对称，对角线为 1

    def condition(self, index: int) -> np.ndarray:
        return self.node1 if index == 1 else self.node2


def guide_bernoulli(p_model: Any, ratio: Any, gamma: float) -> Union[float, np.ndarray]:
    """p·r^γ / (p·r^γ + 1 − p)。γ = 0 或 r = 1 时原样返回 p。

    Example:
        >>> guide_bernoulli(0.5, 3.0, 1.0)
        0.75
    """
    scalar = np.ndim(p_model) == 0 and np.ndim(ratio) == 0
    p = np.asarray(p_model, dtype=np.float64)
    if gamma == 0:
        return float(p) if scalar else p.copy()
    r = np.broadcast_to(np.asarray(ratio, dtype=np.float64), p.shape)
    w = p * r ** gamma
    out = np.where(r == 1.0, p, w / (w + (1.0 - p)))
    return float(out) if scalar else out


def classifier_ratios(
    classifiers: GuidanceClassifiers, g: NoisyGraph, T: int, hard_gating: bool = False
) -> GuidanceRatios:
    """对每个节点条件位与每个节点对做两点评估，返回 outer·inner 的比值。

    当前图本身就是两种补全之一，每个变量只需额外评估一次翻转后的图。
    hard_gating 时，仅当当前图上 outer 输出 ≥ 0.5 才乘入 inner 比值。
    """
    graph = g.graph
    n = graph.n
    adj = np.array(graph.adj, dtype=np.int8, copy=True)
    xs = {1: np.array(graph.x1, dtype=np.int8, copy=True), 2: np.array(graph.x2, dtype=np.int8, copy=True)}
    t = g.t
    o0, i0 = classifiers.scores(adj, xs[1], xs[2], t, T)
    use_inner = (not hard_gating) or o0 >= 0.5

    def ratio(current_bit: int, o_f: float, i_f: float) -> float:
        # 比值 = s(变量=1) / s(变量=0)
        if current_bit == 1:
            r_o, r_i = o0 / o_f, i0 / i_f
        else:
            r_o, r_i = o_f / o0, i_f / i0
        return r_o * r_i if use_inner else r_o

    node = {1: np.ones(n), 2: np.ones(n)}
    for c in (1, 2):
        x = xs[c]
        for k in range(n):
            bit = int(x[k])
            x[k] = 1 - bit
            o_f, i_f = classifiers.scores(adj, xs[1], xs[2], t, T)
            x[k] = bit
            node[c][k] = ratio(bit, o_f, i_f)

    edge = np.ones((n, n))
    rows, cols = np.triu_indices(n, k=1)
    for u, v in zip(rows.tolist(), cols.tolist()):
        bit = int(adj[u, v])
        adj[u, v] = adj[v, u] = 1 - bit
        o_f, i_f = classifiers.scores(adj, xs[1], xs[2], t, T)
        adj[u, v] = adj[v, u] = bit
        edge[u, v] = edge[v, u] = ratio(bit, o_f, i_f)
    return GuidanceRatios(node1=node[1], node2=node[2], edge=edge)


def classifier_accuracy(clf: GraphClassifierProtocol, graphs: Sequence[CondGraph], labels: Sequence[int], T: int) -> float:
    """在干净图（t = 1）上的分类准确率"""
    hits = sum(
        int((clf.prob(NoisyGraph(g, 1), T) >= 0.5) == bool(y)) for g, y in zip(graphs, labels)
    )
    return hits / len(graphs)


def train_graph_classifier(
    graphs: Sequence[CondGraph],
    labels: Sequence[int],
    schedule: NoiseSchedule,
    hyper: DenoiserHyper,
    opt_cfg: OptimizerConfig,
    role: ClassifierRole,
    condition: int,
    seed: int = 0,
    progress: Optional[ProgressCallback] = None,
) -> TrainResult:
    """在 (corrupt(g, t), label(g)) 上以交叉熵训练单个分类器

    Raises:
        DegenerateLabelError: 训练集为空或标签全部相同
    """
    if not graphs:
        raise DegenerateLabelError("{} 分类器训练集为空".format(role.value))
    if len(set(int(y) for y in labels)) < 2:
        raise DegenerateLabelError(
            "{} 分类器的标签全部为 {}，无法训练".format(role.value, int(labels[0]))
        )
    idx = _ROLE_INDEX[role]
    clf = GraphClassifier(hyper, role, condition)
    clf.params = clf.layout.init(derive_rng(seed, STREAM_CLASSIFIER_INIT, idx))
    T = schedule.T

    def sample_example(rng: np.random.Generator) -> Any:
        k = int(rng.integers(len(graphs)))
        t = int(rng.integers(1, T + 1))
        noisy = corrupt(graphs[k], schedule, t, rng)
        return extract_features(noisy, T), noisy.graph.adj, int(labels[k])

    def example_loss_grad(theta: np.ndarray, example: Any) -> Tuple[float, np.ndarray]:
        feats, adj, y = example
        return clf.loss_and_grad(theta, feats, adj, y)

    params, trace = train_loop(
        clf.params,
        sample_example,
        example_loss_grad,
        AdamOptimizer.from_config(opt_cfg),
        opt_cfg,
        derive_rng(seed, STREAM_CLASSIFIER_TRAIN, idx),
        label="{} 分类器 (c{})".format(role.value, condition),
        progress=progress,
    )
    clf = clf.with_params(params)
    acc = classifier_accuracy(clf, graphs, labels, T)
    logger.info("%s 分类器 (c%d) 训练集准确率 %.3f", role.value, condition, acc)
    return TrainResult(model=clf, loss_trace=trace, seed=seed, accuracy=acc)


def train_classifiers(
    corpus: Sequence[CondGraph],
    schedule: NoiseSchedule,
    denoiser_cfg: Optional[DenoiserConfig] = None,
    opt_cfg: Optional[OptimizerConfig] = None,
    guidance_cfg: Optional[GuidanceConfig] = None,
    seed: int = 0,
    progress: Optional[ProgressCallback] = None,
) -> GuidanceClassifiers:
    """训练 outer（全语料，目标 c_j 多数）与 inner（c_j 多数子语料，目标 c_i 多数）。"""
    denoiser_cfg = denoiser_cfg or DenoiserConfig()
    opt_cfg = opt_cfg or classifier_optimizer_defaults()
    guidance_cfg = guidance_cfg or GuidanceConfig()
    hyper = DenoiserHyper.from_config(denoiser_cfg)
    cj, ci = guidance_cfg.outer_condition, guidance_cfg.inner_condition

    labels = [majority_label(g) for g in corpus]
    outer_y = [lab.of(cj) for lab in labels]
    inner_graphs: List[CondGraph] = [g for g, y in zip(corpus, outer_y) if y == 1]
    inner_y = [lab.of(ci) for lab, y in zip(labels, outer_y) if y == 1]
    logger.info(
        "分类器语料: outer %d 张 (正例 %d)，inner %d 张 (正例 %d)",
        len(corpus), sum(outer_y), len(inner_graphs), sum(inner_y),
    )
    if not inner_graphs:
        raise DegenerateLabelError("没有 c{} 多数的图，inner 分类器训练集为空".format(cj))

    outer = train_graph_classifier(
        corpus, outer_y, schedule, hyper, opt_cfg, ClassifierRole.OUTER, cj, seed, progress
    )
    inner = train_graph_classifier(
        inner_graphs, inner_y, schedule, hyper, opt_cfg, ClassifierRole.INNER, ci, seed, progress
    )
    return GuidanceClassifiers(
        outer=outer.model, inner=inner.model, results={"outer": outer, "inner": inner}
    )
