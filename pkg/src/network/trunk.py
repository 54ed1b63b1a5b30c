"""消息传递主干：参数布局、前向与手写反向传播

所有参数存放在一个扁平向量里，布局由 (名称, 形状, fan_in) 列表决定，
去噪网络与引导分类器共用这套主干，只在输出头上不同。
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from src.errors import ShapeMismatchError
from src.models import FeatureTensor

ParamSpec = Tuple[str, Tuple[int, ...], int]


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def sigmoid(z: np.ndarray) -> np.ndarray:
    """数值稳定的 logistic"""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class ParameterLayout:
    """扁平参数向量与具名数组之间的映射"""

    def __init__(self, specs: List[ParamSpec]) -> None:
        self.specs = list(specs)
        self.offsets: Dict[str, Tuple[int, int, Tuple[int, ...]]] = {}
        pos = 0
        for name, shape, _ in self.specs:
            size = int(np.prod(shape)) if shape else 1
            self.offsets[name] = (pos, pos + size, shape)
            pos += size
        self.size = pos

    def unflatten(self, theta: np.ndarray) -> Dict[str, np.ndarray]:
        if theta.shape != (self.size,):
            raise ShapeMismatchError(
                "参数向量长度 {} 与布局 {} 不符".format(theta.shape, self.size)
            )
        return {name: theta[a:b].reshape(shape) for name, (a, b, shape) in self.offsets.items()}

    def flatten(self, arrays: Dict[str, np.ndarray]) -> np.ndarray:
        out = np.zeros(self.size)
        for name, (a, b, _) in self.offsets.items():
            if name in arrays:
                out[a:b] = np.asarray(arrays[name]).reshape(-1)
        return out

    def init(self, rng: np.random.Generator) -> np.ndarray:
        """每块参数 ~ U(−1/√fan_in, 1/√fan_in)，按布局顺序抽取"""
        theta = np.zeros(self.size)
        for name, shape, fan_in in self.specs:
            a, b, _ = self.offsets[name]
            bound = 1.0 / np.sqrt(max(fan_in, 1))
            theta[a:b] = rng.uniform(-bound, bound, size=b - a)
        return theta


def _accumulate(grads: Dict[str, np.ndarray], name: str, value: np.ndarray) -> None:
    grads[name] = grads[name] + value if name in grads else value


@dataclass
class TrunkCache:
    """前向缓存，供反向传播使用"""
    xv: np.ndarray
    gf: np.ndarray
    adj: np.ndarray
    z: List[np.ndarray] = field(default_factory=list)   # 各层预激活
    h: List[np.ndarray] = field(default_factory=list)   # 各层输出（h[0] 为嵌入层）


class MessagePassingTrunk:
    """嵌入层 + L 轮求和聚合消息传递。

    H⁰ = relu(X W_in + g W_g + b_in)
    H^{l+1} = relu(H^l W_s + A H^l W_n + b)
    """

    def __init__(self, d_v: int, d_g: int, hidden: int, rounds: int) -> None:
        self.d_v = d_v
        self.d_g = d_g
        self.hidden = hidden
        self.rounds = rounds

    def specs(self) -> List[ParamSpec]:
        h = self.hidden
        fan_in = self.d_v + self.d_g
        out: List[ParamSpec] = [
            ("trunk.W_in", (self.d_v, h), fan_in),
            ("trunk.W_g", (self.d_g, h), fan_in),
            ("trunk.b_in", (h,), fan_in),
        ]
        for l in range(self.rounds):
            out += [
                ("trunk.W_s{}".format(l), (h, h), 2 * h),
                ("trunk.W_n{}".format(l), (h, h), 2 * h),
                ("trunk.b{}".format(l), (h,), 2 * h),
            ]
        return out

    def check(self, feats: FeatureTensor, n: int) -> None:
        if feats.node_feats.shape != (n, self.d_v) or feats.graph_feats.shape != (self.d_g,):
            raise ShapeMismatchError(
                "特征形状 node={} graph={} 与模型 (n={}, d_v={}, d_g={}) 不符".format(
                    feats.node_feats.shape, feats.graph_feats.shape, n, self.d_v, self.d_g
                )
            )

    def forward(self, p: Dict[str, np.ndarray], feats: FeatureTensor, adj: np.ndarray) -> TrunkCache:
        a = adj.astype(np.float64)
        cache = TrunkCache(xv=feats.node_feats, gf=feats.graph_feats, adj=a)
        z = feats.node_feats @ p["trunk.W_in"] + feats.graph_feats @ p["trunk.W_g"] + p["trunk.b_in"]
        cache.z.append(z)
        cache.h.append(relu(z))
        for l in range(self.rounds):
            h = cache.h[-1]
            z = h @ p["trunk.W_s{}".format(l)] + a @ h @ p["trunk.W_n{}".format(l)] + p["trunk.b{}".format(l)]
            cache.z.append(z)
            cache.h.append(relu(z))
        return cache

    def backward(
        self, p: Dict[str, np.ndarray], cache: TrunkCache, d_h: np.ndarray, grads: Dict[str, np.ndarray]
    ) -> None:
        """d_h 为损失对最后一层输出的梯度，结果累加进 grads（同一组参数可多次前向）"""
        a = cache.adj
        for l in reversed(range(self.rounds)):
            h_prev = cache.h[l]
            d_z = d_h * (cache.z[l + 1] > 0)
            agg = a @ h_prev
            _accumulate(grads, "trunk.W_s{}".format(l), h_prev.T @ d_z)
            _accumulate(grads, "trunk.W_n{}".format(l), agg.T @ d_z)
            _accumulate(grads, "trunk.b{}".format(l), d_z.sum(axis=0))
            # A 对称
            d_h = d_z @ p["trunk.W_s{}".format(l)].T + a @ (d_z @ p["trunk.W_n{}".format(l)].T)
        d_z = d_h * (cache.z[0] > 0)
        _accumulate(grads, "trunk.W_in", cache.xv.T @ d_z)
        _accumulate(grads, "trunk.W_g", np.outer(cache.gf, d_z.sum(axis=0)))
        _accumulate(grads, "trunk.b_in", d_z.sum(axis=0))


PROB_EPS = 1e-7


def bce(p: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """截断到 [1e−7, 1 − 1e−7] 的二值交叉熵之和，及其对 logit 的梯度。

    截断生效处梯度为 0。
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    loss = float(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)).sum())
    inside = (p > PROB_EPS) & (p < 1.0 - PROB_EPS)
    d_logit = np.where(inside, p - y, 0.0)
    return loss, d_logit
