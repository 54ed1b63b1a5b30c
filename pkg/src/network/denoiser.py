"""去噪网络 φ_θ：由加噪图预测干净图的条件位与边概率"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from src.config import DenoiserConfig, OptimizerConfig
from src.diffusion.forward import corrupt
from src.errors import EmptyCorpusError, ShapeMismatchError
from src.models import CleanPrediction, CondGraph, FeatureTensor, NoiseSchedule, NoisyGraph, TrainResult
from src.network.features import GRAPH_FEATURE_DIM, NODE_FEATURE_DIM, extract_features
from src.network.optim import AdamOptimizer, ProgressCallback, train_loop
from src.network.trunk import MessagePassingTrunk, ParameterLayout, TrunkCache, bce, relu, sigmoid
from src.utils.logger import get_logger
from src.utils.seeding import STREAM_DENOISER_INIT, STREAM_DENOISER_TRAIN, derive_rng

logger = get_logger(__name__)


def _mask_condition(feats: FeatureTensor, condition_index: int) -> FeatureTensor:
    """把条件 c_i 所在的特征列置 0"""
    node_feats = feats.node_feats.copy()
    node_feats[:, condition_index - 1] = 0.0
    return FeatureTensor(node_feats=node_feats, graph_feats=feats.graph_feats)


@dataclass
class DenoiserHyper:
    rounds: int = 2
    hidden: int = 32
    d_v: int = NODE_FEATURE_DIM
    d_g: int = GRAPH_FEATURE_DIM

    def to_dict(self) -> Dict[str, int]:
        return {"rounds": self.rounds, "hidden": self.hidden, "d_v": self.d_v, "d_g": self.d_g}

    @classmethod
    def from_config(cls, cfg: DenoiserConfig) -> "DenoiserHyper":
        return cls(rounds=cfg.rounds, hidden=cfg.hidden)


@dataclass
class _ForwardCache:
    trunk: TrunkCache     # 完整特征，供边头
    trunk1: TrunkCache    # 屏蔽 x2，供 c1 头
    trunk2: TrunkCache    # 屏蔽 x1，供 c2 头
    rows: np.ndarray
    cols: np.ndarray
    pair_in: np.ndarray   # [H_i⊙H_j, H_i+H_j, a_ij]
    z_edge: np.ndarray
    h_edge: np.ndarray


class DenoiserModel:
    """消息传递去噪网络。

    两个节点头输出 px1、px2，边头作用在无序节点对的对称组合
    [H_i⊙H_j, H_i+H_j, a_ij] 上，因此 pe 天然对称。

    主干对每个节点头各跑一遍，另一条件所在的特征列置 0：
    px1 只由 x1 与图结构决定，px2 同理。边头读完整特征。
    """

    def __init__(self, hyper: DenoiserHyper, params: Optional[np.ndarray] = None) -> None:
        self.hyper = hyper
        self.trunk = MessagePassingTrunk(hyper.d_v, hyper.d_g, hyper.hidden, hyper.rounds)
        h = hyper.hidden
        self.layout = ParameterLayout(
            self.trunk.specs()
            + [
                ("head.w1", (h,), h),
                ("head.c1", (1,), h),
                ("head.w2", (h,), h),
                ("head.c2", (1,), h),
                ("edge.W", (2 * h + 1, h), 2 * h + 1),
                ("edge.b", (h,), 2 * h + 1),
                ("edge.u", (h,), h),
                ("edge.c", (1,), h),
            ]
        )
        if params is None:
            params = np.zeros(self.layout.size)
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.layout.size,):
            raise ShapeMismatchError(
                "参数向量长度 {} 与结构 {} 所需的 {} 不符".format(
                    params.shape, hyper.to_dict(), self.layout.size
                )
            )
        self.params = params

    @classmethod
    def initialize(cls, hyper: DenoiserHyper, rng: np.random.Generator) -> "DenoiserModel":
        model = cls(hyper)
        model.params = model.layout.init(rng)
        return model

    @property
    def num_params(self) -> int:
        return self.layout.size

    def with_params(self, params: np.ndarray) -> "DenoiserModel":
        return DenoiserModel(self.hyper, params)

    # ---- 前向 ----

    def _forward(
        self, theta: np.ndarray, feats: FeatureTensor, graph: CondGraph
    ) -> Tuple[CleanPrediction, _ForwardCache, Dict[str, np.ndarray]]:
        n = graph.n
        self.trunk.check(feats, n)
        p = self.layout.unflatten(theta)
        tc = self.trunk.forward(p, feats, graph.adj)
        tc1 = self.trunk.forward(p, _mask_condition(feats, 2), graph.adj)
        tc2 = self.trunk.forward(p, _mask_condition(feats, 1), graph.adj)
        H = tc.h[-1]

        px1 = sigmoid(tc1.h[-1] @ p["head.w1"] + p["head.c1"][0])
        px2 = sigmoid(tc2.h[-1] @ p["head.w2"] + p["head.c2"][0])

        rows, cols = np.triu_indices(n, k=1)
        pair_in = np.concatenate(
            [H[rows] * H[cols], H[rows] + H[cols], graph.adj[rows, cols].astype(np.float64)[:, None]],
            axis=1,
        )
        z_edge = pair_in @ p["edge.W"] + p["edge.b"]
        h_edge = relu(z_edge)
        pe_pairs = sigmoid(h_edge @ p["edge.u"] + p["edge.c"][0])
        pe = np.zeros((n, n))
        pe[rows, cols] = pe_pairs
        pe[cols, rows] = pe_pairs

        cache = _ForwardCache(tc, tc1, tc2, rows, cols, pair_in, z_edge, h_edge)
        return CleanPrediction(px1=px1, px2=px2, pe=pe), cache, p

    def predict(self, feats: FeatureTensor, g: NoisyGraph) -> CleanPrediction:
        pred, _, _ = self._forward(self.params, feats, g.graph)
        return pred

    def predict_clean(self, noisy: NoisyGraph, T: int) -> CleanPrediction:
        return self.predict(extract_features(noisy, T), noisy)

    # ---- 损失与梯度 ----

    def loss_and_grad(
        self, feats: FeatureTensor, g: NoisyGraph, clean: CondGraph, lam: float, theta: Optional[np.ndarray] = None
    ) -> Tuple[float, np.ndarray]:
        theta = self.params if theta is None else theta
        if clean.n != g.graph.n:
            raise ShapeMismatchError("干净图节点数 {} 与加噪图 {} 不符".format(clean.n, g.graph.n))
        pred, cache, p = self._forward(theta, feats, g.graph)
        rows, cols = cache.rows, cache.cols
        h = self.hyper.hidden

        l1, d_s1 = bce(pred.px1, clean.x1)
        l2, d_s2 = bce(pred.px2, clean.x2)
        le, d_se = bce(pred.pe[rows, cols], clean.adj[rows, cols])
        d_se = lam * d_se
        total = l1 + l2 + lam * le

        H = cache.trunk.h[-1]
        grads: Dict[str, np.ndarray] = {
            "head.w1": cache.trunk1.h[-1].T @ d_s1,
            "head.c1": np.array([d_s1.sum()]),
            "head.w2": cache.trunk2.h[-1].T @ d_s2,
            "head.c2": np.array([d_s2.sum()]),
            "edge.u": cache.h_edge.T @ d_se,
            "edge.c": np.array([d_se.sum()]),
        }
        self.trunk.backward(p, cache.trunk1, np.outer(d_s1, p["head.w1"]), grads)
        self.trunk.backward(p, cache.trunk2, np.outer(d_s2, p["head.w2"]), grads)

        d_ze = np.outer(d_se, p["edge.u"]) * (cache.z_edge > 0)
        grads["edge.W"] = cache.pair_in.T @ d_ze
        grads["edge.b"] = d_ze.sum(axis=0)
        d_in = d_ze @ p["edge.W"].T
        d_prod, d_sum = d_in[:, :h], d_in[:, h:2 * h]
        d_H = np.zeros_like(H)
        np.add.at(d_H, rows, d_prod * H[cols] + d_sum)
        np.add.at(d_H, cols, d_prod * H[rows] + d_sum)

        self.trunk.backward(p, cache.trunk, d_H, grads)
        return total, self.layout.flatten(grads)


def predict(model: DenoiserModel, feats: FeatureTensor, g: NoisyGraph) -> CleanPrediction:
    return model.predict(feats, g)


def loss(pred: CleanPrediction, clean: CondGraph, lam: float = 1.0) -> float:
    """l_CE(px1, x1) + l_CE(px2, x2) + λ·l_CE(pe, E)，边项按无序节点对求和。

    Raises:
        ShapeMismatchError: 预测形状与干净图不符
    """
    pred.validate(clean.n)
    rows, cols = np.triu_indices(clean.n, k=1)
    l1, _ = bce(pred.px1, clean.x1)
    l2, _ = bce(pred.px2, clean.x2)
    le, _ = bce(pred.pe[rows, cols], clean.adj[rows, cols])
    return l1 + l2 + lam * le


def grad(
    model: DenoiserModel, feats: FeatureTensor, g: NoisyGraph, clean: CondGraph, lam: float = 1.0
) -> np.ndarray:
    """损失对扁平参数向量的精确梯度"""
    _, g_theta = model.loss_and_grad(feats, g, clean, lam)
    return g_theta


def train(
    corpus: Sequence[CondGraph],
    schedule: NoiseSchedule,
    denoiser_cfg: Optional[DenoiserConfig] = None,
    opt_cfg: Optional[OptimizerConfig] = None,
    seed: int = 0,
    progress: Optional[ProgressCallback] = None,
) -> TrainResult:
    """按“抽图 → 抽 t → 加噪 → 预测 → Adam 更新”训练去噪网络。

    批梯度为批内各样本梯度之和，同一种子得到逐位相同的参数。

    Raises:
        EmptyCorpusError: 语料为空
    """
    if not corpus:
        raise EmptyCorpusError("训练语料为空")
    denoiser_cfg = denoiser_cfg or DenoiserConfig()
    opt_cfg = opt_cfg or OptimizerConfig()
    hyper = DenoiserHyper.from_config(denoiser_cfg)
    model = DenoiserModel.initialize(hyper, derive_rng(seed, STREAM_DENOISER_INIT))
    T = schedule.T
    lam = denoiser_cfg.lambda_edge
    logger.info(
        "去噪网络: %d 个参数 (L=%d, h=%d)，语料 %d 张图，T=%d",
        model.num_params, hyper.rounds, hyper.hidden, len(corpus), T,
    )

    def sample_example(rng: np.random.Generator) -> Any:
        clean = corpus[int(rng.integers(len(corpus)))]
        t = int(rng.integers(1, T + 1))
        noisy = corrupt(clean, schedule, t, rng)
        return extract_features(noisy, T), noisy, clean

    def example_loss_grad(theta: np.ndarray, example: Any) -> Tuple[float, np.ndarray]:
        feats, noisy, clean = example
        return model.loss_and_grad(feats, noisy, clean, lam, theta=theta)

    params, trace = train_loop(
        model.params,
        sample_example,
        example_loss_grad,
        AdamOptimizer.from_config(opt_cfg),
        opt_cfg,
        derive_rng(seed, STREAM_DENOISER_TRAIN),
        label="去噪网络",
        progress=progress,
    )
    return TrainResult(model=model.with_params(params), loss_trace=trace, seed=seed)
