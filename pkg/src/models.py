"""数据模型定义 - 所有阶段间共享的数据类型"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import GraphInvariantError, ScheduleError, ShapeMismatchError


class ScheduleShape(Enum):
    """β 调度形状"""
    LINEAR = "linear"
    COSINE = "cosine"


class ValidityMode(Enum):
    """有效性判定方式"""
    JOINT = "joint"          # 严格过半节点同时满足两个条件（默认）
    MARGINAL = "marginal"    # 两个条件各自严格过半


class ClassifierRole(Enum):
    """引导分类器角色"""
    OUTER = "outer"   # q(c_j = 1 | G)
    INNER = "inner"   # q(c_i = 1 | G, c_j = 1)


def _as_bits(values: Any, name: str) -> np.ndarray:
    raw = np.asarray(values)
    if raw.size and not np.all((raw == 0) | (raw == 1)):
        raise GraphInvariantError("{} 只能包含 0/1".format(name))
    return np.array(raw, dtype=np.int8, copy=True)


@dataclass(frozen=True, eq=False)
class CondGraph:
    """条件指示图：对称无自环的 0/1 邻接矩阵 + 两个条件满足向量。

    构造后不可变（数组只读），全部运算都返回新对象。
    """

    adj: np.ndarray
    x1: np.ndarray
    x2: np.ndarray

    def __post_init__(self) -> None:
        adj = _as_bits(self.adj, "adj")
        x1 = _as_bits(self.x1, "x1").reshape(-1)
        x2 = _as_bits(self.x2, "x2").reshape(-1)
        n = x1.shape[0]
        if adj.size == 0 and n == 0:
            adj = np.zeros((0, 0), dtype=np.int8)
        if adj.ndim != 2 or adj.shape != (n, n):
            raise GraphInvariantError(
                "邻接矩阵形状 {} 与节点数 {} 不符".format(adj.shape, n)
            )
        if x2.shape[0] != n:
            raise GraphInvariantError("x2 长度 {} 与节点数 {} 不符".format(x2.shape[0], n))
        if not np.array_equal(adj, adj.T):
            raise GraphInvariantError("邻接矩阵必须对称")
        if n and np.any(np.diag(adj) != 0):
            raise GraphInvariantError("不允许自环")
        for arr in (adj, x1, x2):
            arr.flags.writeable = False
        object.__setattr__(self, "adj", adj)
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)

    @property
    def n(self) -> int:
        return int(self.x1.shape[0])

    @property
    def edge_count(self) -> int:
        return int(self.adj.sum()) // 2

    @classmethod
    def empty(cls, n: int = 0) -> "CondGraph":
        return cls(np.zeros((n, n), dtype=np.int8), np.zeros(n), np.zeros(n))

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: Iterable[Tuple[int, int]],
        x1: Optional[Sequence[int]] = None,
        x2: Optional[Sequence[int]] = None,
    ) -> "CondGraph":
        adj = np.zeros((n, n), dtype=np.int8)
        for u, v in edges:
            if u == v:
                raise GraphInvariantError("不允许自环: ({}, {})".format(u, v))
            adj[u, v] = 1
            adj[v, u] = 1
        x1 = np.zeros(n) if x1 is None else x1
        x2 = np.zeros(n) if x2 is None else x2
        return cls(adj, x1, x2)

    def edges(self) -> List[Tuple[int, int]]:
        """无向边列表 (u < v)，按字典序。"""
        rows, cols = np.triu_indices(self.n, k=1)
        mask = self.adj[rows, cols] == 1
        return [(int(u), int(v)) for u, v in zip(rows[mask], cols[mask])]

    def replace(
        self,
        adj: Optional[np.ndarray] = None,
        x1: Optional[np.ndarray] = None,
        x2: Optional[np.ndarray] = None,
    ) -> "CondGraph":
        return CondGraph(
            self.adj if adj is None else adj,
            self.x1 if x1 is None else x1,
            self.x2 if x2 is None else x2,
        )

    def condition(self, index: int) -> np.ndarray:
        """按条件编号（1 或 2）取条件向量"""
        if index == 1:
            return self.x1
        if index == 2:
            return self.x2
        raise ValueError("条件编号只能是 1 或 2: {}".format(index))

    def permute(self, perm: Sequence[int]) -> "CondGraph":
        """节点重标号：新图第 k 个节点是原图第 perm[k] 个节点。"""
        p = np.asarray(perm, dtype=np.int64)
        return CondGraph(self.adj[np.ix_(p, p)], self.x1[p], self.x2[p])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CondGraph):
            return NotImplemented
        return (
            np.array_equal(self.adj, other.adj)
            and np.array_equal(self.x1, other.x1)
            and np.array_equal(self.x2, other.x2)
        )

    def __hash__(self) -> int:
        return hash((self.n, self.adj.tobytes(), self.x1.tobytes(), self.x2.tobytes()))

    def __repr__(self) -> str:
        return "CondGraph(n={}, edges={}, c1={}, c2={})".format(
            self.n, self.edge_count, int(self.x1.sum()), int(self.x2.sum())
        )


@dataclass
class GraphStats:
    """单图统计量"""
    node_count: int
    edge_count: int
    density: float
    clustering: np.ndarray


@dataclass(frozen=True)
class TransitionKernel:
    """对称二值转移核 [[1-flip, flip], [flip, 1-flip]]"""
    flip: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.flip <= 0.5):
            raise ScheduleError("翻转概率必须在 [0, 1/2]: {}".format(self.flip))

    def matrix(self) -> np.ndarray:
        f = self.flip
        return np.array([[1.0 - f, f], [f, 1.0 - f]])

    def prob(self, src: Any, dst: Any) -> Any:
        """q(dst | src)，支持数组广播"""
        same = np.asarray(src) == np.asarray(dst)
        return np.where(same, 1.0 - self.flip, self.flip)

    def compose(self, other: "TransitionKernel") -> "TransitionKernel":
        """先应用 self 再应用 other"""
        f, g = self.flip, other.flip
        return TransitionKernel(f * (1.0 - g) + (1.0 - f) * g)


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """β_t 调度与累积翻转概率（t 从 1 开始计数）。

    单步翻转概率 f_t = β_t / 2；cum_flip[t] = (1 - Π_{s≤t}(1 - 2 f_s)) / 2。
    """

    beta: np.ndarray
    cum_flip: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        beta = np.array(self.beta, dtype=np.float64).reshape(-1)
        if beta.size < 1:
            raise ScheduleError("步数 T 至少为 1")
        if not np.all((beta > 0.0) & (beta < 1.0)):
            raise ScheduleError("每个 β_t 必须在 (0, 1) 内")
        keep = np.cumprod(1.0 - beta)
        cum = (1.0 - keep) / 2.0
        # 精确算术下严格递增；浮点下 Π 下溢后会停在 1/2
        if np.any(np.diff(cum) < 0) or np.any(cum > 0.5):
            raise ScheduleError("累积翻转概率必须单调且不超过 1/2")
        beta.flags.writeable = False
        cum.flags.writeable = False
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "cum_flip", cum)

    @property
    def T(self) -> int:
        return int(self.beta.shape[0])

    def step_flip(self, t: int) -> float:
        return float(self.beta[t - 1]) / 2.0

    def cumulative_flip(self, t: int) -> float:
        return float(self.cum_flip[t - 1])

    def to_dict(self) -> Dict[str, Any]:
        return {"T": self.T, "beta": [float(b) for b in self.beta]}


@dataclass(frozen=True)
class ContagionParam:
    """社会传染参数 p：边端点复制邻居条件位的概率"""
    p: float = 0.8

    def __post_init__(self) -> None:
        if not (0.5 < self.p < 1.0):
            raise ValueError("传染参数 p 必须在 (1/2, 1) 内: {}".format(self.p))


@dataclass(frozen=True)
class NoisyGraph:
    """第 t 步的加噪图"""
    graph: CondGraph
    t: int

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ValueError("时间步 t 必须 ≥ 1: {}".format(self.t))


@dataclass
class FeatureTensor:
    """结构/谱特征 z = f(G_t, t)"""
    node_feats: np.ndarray   # n × d_v
    graph_feats: np.ndarray  # d_g

    @property
    def d_v(self) -> int:
        return int(self.node_feats.shape[1])

    @property
    def d_g(self) -> int:
        return int(self.graph_feats.shape[0])


@dataclass
class CleanPrediction:
    """去噪网络对干净图的预测：px1, px2 (n) 与对称 pe (n × n，对角线忽略并置 0)"""
    px1: np.ndarray
    px2: np.ndarray
    pe: np.ndarray

    def condition(self, index: int) -> np.ndarray:
        return self.px1 if index == 1 else self.px2

    def validate(self, n: int) -> None:
        if self.px1.shape != (n,) or self.px2.shape != (n,) or self.pe.shape != (n, n):
            raise ShapeMismatchError(
                "预测形状 px1={} px2={} pe={} 与节点数 {} 不符".format(
                    self.px1.shape, self.px2.shape, self.pe.shape, n
                )
            )


@dataclass(frozen=True)
class MajorityLabel:
    """图级多数标签：严格超过半数节点满足条件时为 1"""
    label_c1: int
    label_c2: int

    def of(self, index: int) -> int:
        return self.label_c1 if index == 1 else self.label_c2


@dataclass(frozen=True)
class GuidanceStrength:
    """分类器似然比的指数 γ"""
    gamma: float = 1.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError("引导强度 γ 必须是非负有限数: {}".format(self.gamma))


@dataclass
class SampleRun:
    """一次采样运行"""
    seed: int
    num_graphs: int
    node_counts: List[int]           # 训练语料的经验节点数多重集
    trace_enabled: bool = False

    def __post_init__(self) -> None:
        if self.num_graphs < 1:
            raise ValueError("num_graphs 必须 ≥ 1")
        if not self.node_counts:
            raise ValueError("node_counts 不能为空")


@dataclass
class SampleResult:
    """采样输出；trace 为每张图每步的快照 (t, 图)"""
    graphs: List[CondGraph]
    traces: List[List[Tuple[int, CondGraph]]] = field(default_factory=list)


@dataclass
class TrainResult:
    """训练输出：参数向量所属模型 + 损失轨迹"""
    model: Any
    loss_trace: List[float]
    seed: int
    accuracy: Optional[float] = None


@dataclass
class ConditionProfile:
    """单个条件上的同质性/传染性画像"""
    condition: int
    agreement_rate: float                   # 相邻节点对条件一致率（经验 p）
    neighbor_dist: Tuple[float, float]      # (q(x_n=1|x_m=0), q(x_n=1|x_m=1))
    homophily_edge: Tuple[float, float]     # (q(e=1|x_m=0), q(e=1|x_m=1))
    homophily_gap: float                    # 一致节点对与不一致节点对的边率差
    contagion_p: float                      # 假定的传染参数 p
    contagion_loglik: float                 # 相邻有序节点对在该 p 下的平均对数似然

    def to_dict(self) -> Dict[str, Any]:
        return {
            "condition": self.condition,
            "agreement_rate": self.agreement_rate,
            "neighbor_dist": list(self.neighbor_dist),
            "homophily_edge": list(self.homophily_edge),
            "homophily_gap": self.homophily_gap,
            "contagion_p": self.contagion_p,
            "contagion_loglik": self.contagion_loglik,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ConditionProfile":
        return cls(
            condition=int(data["condition"]),
            agreement_rate=float(data["agreement_rate"]),
            neighbor_dist=tuple(float(v) for v in data["neighbor_dist"]),
            homophily_edge=tuple(float(v) for v in data["homophily_edge"]),
            homophily_gap=float(data["homophily_gap"]),
            contagion_p=float(data["contagion_p"]),
            contagion_loglik=float(data["contagion_loglik"]),
        )


@dataclass
class DependencyProfile:
    """语料的同质性/传染性画像（两个条件各一份）"""
    conditions: List[ConditionProfile]
    edge_rate_both_agree: float
    edge_rate_disagree: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "conditions": [c.to_dict() for c in self.conditions],
            "edge_rate_both_agree": self.edge_rate_both_agree,
            "edge_rate_disagree": self.edge_rate_disagree,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DependencyProfile":
        return cls(
            conditions=[ConditionProfile.from_dict(c) for c in data["conditions"]],
            edge_rate_both_agree=float(data["edge_rate_both_agree"]),
            edge_rate_disagree=float(data["edge_rate_disagree"]),
        )


@dataclass
class BoundTerms:
    """负变分下界的分项（homo = 边，cont = 节点条件）"""
    diffusion_homo: float
    diffusion_cont: float
    prior_homo: float
    prior_cont: float
    recon_homo: float
    recon_cont: float

    @property
    def homo(self) -> float:
        return self.diffusion_homo + self.prior_homo + self.recon_homo

    @property
    def cont(self) -> float:
        return self.diffusion_cont + self.prior_cont + self.recon_cont

    @property
    def total(self) -> float:
        return self.homo + self.cont

    def to_dict(self) -> Dict[str, float]:
        return {
            "diffusion_homo": self.diffusion_homo,
            "diffusion_cont": self.diffusion_cont,
            "prior_homo": self.prior_homo,
            "prior_cont": self.prior_cont,
            "recon_homo": self.recon_homo,
            "recon_cont": self.recon_cont,
            "homo": self.homo,
            "cont": self.cont,
            "total": self.total,
        }


@dataclass
class EvalReport:
    """评估报告"""
    validity: float
    rel_err_nodes: float
    rel_err_edges: float
    rel_err_density: float
    mmd_clustering: float
    sample_sizes: Dict[str, int]
    hyper: Dict[str, Any] = field(default_factory=dict)
    reference_profile: Optional[DependencyProfile] = None
    generated_profile: Optional[DependencyProfile] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "validity": self.validity,
            "rel_err_nodes": self.rel_err_nodes,
            "rel_err_edges": self.rel_err_edges,
            "rel_err_density": self.rel_err_density,
            "mmd_clustering": self.mmd_clustering,
            "sample_sizes": dict(self.sample_sizes),
            "hyper": dict(self.hyper),
            "reference_profile": self.reference_profile.to_dict() if self.reference_profile else None,
            "generated_profile": self.generated_profile.to_dict() if self.generated_profile else None,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EvalReport":
        ref = data.get("reference_profile")
        gen = data.get("generated_profile")
        return cls(
            validity=float(data["validity"]),
            rel_err_nodes=float(data["rel_err_nodes"]),
            rel_err_edges=float(data["rel_err_edges"]),
            rel_err_density=float(data["rel_err_density"]),
            mmd_clustering=float(data["mmd_clustering"]),
            sample_sizes={k: int(v) for k, v in data["sample_sizes"].items()},
            hyper=dict(data.get("hyper", {})),
            reference_profile=DependencyProfile.from_dict(ref) if ref else None,
            generated_profile=DependencyProfile.from_dict(gen) if gen else None,
        )


@dataclass
class PipelineResult:
    """一次完整流水线运行的结果"""
    output_dir: Path
    corpus_size: int
    correlation: Optional[float]
    reports: Dict[str, EvalReport] = field(default_factory=dict)
    artifacts: List[Path] = field(default_factory=list)
    bound: Optional[BoundTerms] = None
