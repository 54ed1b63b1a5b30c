"""全局配置管理"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from src.errors import ConfigError

CONFIG_FORMAT_VERSION = 1


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


@dataclass
class ScheduleConfig:
    """噪声调度"""

    T: int = 50
    beta_min: float = 0.02
    beta_max: float = 0.6
    shape: str = "linear"  # linear | cosine

    def __post_init__(self) -> None:
        _check(self.T >= 1, "schedule.T 必须 ≥ 1")
        _check(0.0 < self.beta_min < 1.0, "schedule.beta_min 必须在 (0, 1)")
        _check(0.0 < self.beta_max < 1.0, "schedule.beta_max 必须在 (0, 1)")
        _check(self.beta_min <= self.beta_max, "schedule.beta_min 不能大于 beta_max")
        _check(self.shape in ("linear", "cosine"), "schedule.shape 只能是 linear 或 cosine")


@dataclass
class DenoiserConfig:
    """去噪网络结构"""

    rounds: int = 2          # 消息传递轮数 L
    hidden: int = 32         # 隐层宽度 h
    lambda_edge: float = 1.0  # 边交叉熵权重 λ

    def __post_init__(self) -> None:
        _check(self.rounds >= 0, "denoiser.rounds 必须 ≥ 0")
        _check(self.hidden >= 1, "denoiser.hidden 必须 ≥ 1")
        _check(self.lambda_edge >= 0.0, "denoiser.lambda_edge 必须 ≥ 0")


@dataclass
class OptimizerConfig:
    """Adam 优化器与训练循环"""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 8
    steps: int = 3000
    log_every: int = 100

    def __post_init__(self) -> None:
        _check(self.lr >= 0.0, "optimizer.lr 必须 ≥ 0")
        _check(0.0 <= self.beta1 < 1.0, "optimizer.beta1 必须在 [0, 1)")
        _check(0.0 <= self.beta2 < 1.0, "optimizer.beta2 必须在 [0, 1)")
        _check(self.eps > 0.0, "optimizer.eps 必须 > 0")
        _check(self.batch_size >= 1, "optimizer.batch_size 必须 ≥ 1")
        _check(self.steps >= 0, "optimizer.steps 必须 ≥ 0")
        _check(self.log_every >= 1, "optimizer.log_every 必须 ≥ 1")


@dataclass
class GuidanceConfig:
    """双条件分类器引导"""

    gamma: float = 1.0
    outer_condition: int = 2        # outer 分类器针对的条件，inner 针对另一个
    hard_gating: bool = False       # 仅当 outer 输出 ≥ 0.5 时施加 inner 比值
    guide_reconstruction: bool = True  # t = 1 重建步也施加引导

    def __post_init__(self) -> None:
        _check(self.gamma >= 0.0, "guidance.gamma 必须 ≥ 0")
        _check(self.outer_condition in (1, 2), "guidance.outer_condition 只能是 1 或 2")

    @property
    def inner_condition(self) -> int:
        return 3 - self.outer_condition


@dataclass
class SamplingConfig:
    """反向采样"""

    num_graphs: int = 100
    seed: int = 0
    trace: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        _check(self.num_graphs >= 1, "sampling.num_graphs 必须 ≥ 1")
        _check(self.workers >= 1, "sampling.workers 必须 ≥ 1")


@dataclass
class SynthConfig:
    """合成语料：植入同质性/传染性与可调条件相关性"""

    num_graphs: int = 200
    n_min: int = 4
    n_max: int = 12
    rho_target: float = 0.2
    p_in: float = 0.6
    p_out: float = 0.1
    base_rate: float = 0.5
    seed: int = 0
    tolerance: float = 0.1
    max_attempts: int = 10
    workers: int = 1

    def __post_init__(self) -> None:
        _check(self.num_graphs >= 1, "synth.num_graphs 必须 ≥ 1")
        _check(1 <= self.n_min <= self.n_max <= 100, "synth 要求 1 ≤ n_min ≤ n_max ≤ 100")
        _check(-1.0 < self.rho_target < 1.0, "synth.rho_target 必须在 (-1, 1)")
        _check(0.0 < self.p_in < 1.0 and 0.0 < self.p_out < 1.0, "synth.p_in/p_out 必须在 (0, 1)")
        _check(self.p_in >= self.p_out, "synth.p_in 不能小于 p_out")
        _check(0.0 < self.base_rate <= 1.0, "synth.base_rate 必须在 (0, 1]")
        _check(self.tolerance > 0.0, "synth.tolerance 必须 > 0")
        _check(self.max_attempts >= 1, "synth.max_attempts 必须 ≥ 1")
        _check(self.workers >= 1, "synth.workers 必须 ≥ 1")
        lo, hi = correlation_bounds(self.base_rate)
        _check(
            lo <= self.rho_target <= hi,
            "synth.rho_target={} 超出 base_rate={} 下的可行域 [{:.4f}, {:.4f}]".format(
                self.rho_target, self.base_rate, lo, hi
            ),
        )


@dataclass
class EvalConfig:
    """评估"""

    bins: int = 10
    sigma_floor: float = 1e-6
    validity_mode: str = "joint"  # joint | marginal

    def __post_init__(self) -> None:
        _check(self.bins >= 1, "eval.bins 必须 ≥ 1")
        _check(self.sigma_floor > 0.0, "eval.sigma_floor 必须 > 0")
        _check(self.validity_mode in ("joint", "marginal"), "eval.validity_mode 只能是 joint 或 marginal")


def classifier_optimizer_defaults() -> OptimizerConfig:
    """引导分类器的训练默认值"""
    return OptimizerConfig(lr=3e-3, steps=3000)


@dataclass
class RunConfig:
    """运行配置（单一 JSON 文件）"""

    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    classifier_optimizer: OptimizerConfig = field(default_factory=classifier_optimizer_defaults)
    guidance: GuidanceConfig = field(default_factory=GuidanceConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    contagion_p: float = 0.8
    seed: int = 0           # 训练种子（去噪器与分类器）
    max_nodes: int = 100

    # 路径配置
    output_dir: Path = field(default_factory=lambda: Path("output"))
    dataset_edges: Optional[Path] = None   # 设置后用真实数据替代合成语料
    dataset_attrs: Optional[Path] = None

    # 日志
    log_level: str = "INFO"
    log_file: Optional[str] = "pipeline.log"

    def __post_init__(self) -> None:
        _check(0.5 < self.contagion_p < 1.0, "contagion_p 必须在 (1/2, 1)")
        _check(1 <= self.max_nodes, "max_nodes 必须 ≥ 1")
        _check(self.synth.n_max <= self.max_nodes, "synth.n_max 不能超过 max_nodes")
        self.output_dir = Path(self.output_dir)
        if (self.dataset_edges is None) != (self.dataset_attrs is None):
            raise ConfigError("dataset_edges 与 dataset_attrs 必须同时设置")
        for name in ("dataset_edges", "dataset_attrs"):
            value = getattr(self, name)
            if value is not None:
                value = Path(value)
                setattr(self, name, value)
                _check(value.exists(), "{} 指向的文件不存在: {}".format(name, value))

    def ensure_dirs(self) -> None:
        """确保输出目录存在"""
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        for key in ("output_dir", "dataset_edges", "dataset_attrs"):
            if data[key] is not None:
                data[key] = str(data[key])
        return {"format_version": CONFIG_FORMAT_VERSION, **data}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        data = dict(data)
        version = data.pop("format_version", CONFIG_FORMAT_VERSION)
        if version != CONFIG_FORMAT_VERSION:
            raise ConfigError("不支持的配置版本: {}".format(version))
        sections = (
            "schedule", "denoiser", "optimizer", "classifier_optimizer", "guidance", "sampling", "synth", "eval",
        )
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError("未知配置项: {}".format(", ".join(sorted(unknown))))
        kwargs: Dict[str, Any] = {}
        defaults = cls()
        try:
            for key, value in data.items():
                if key in sections:
                    if not isinstance(value, dict):
                        raise ConfigError("配置段 {} 必须是对象".format(key))
                    # 缺省项取该段在 RunConfig 中的默认值
                    kwargs[key] = dataclasses.replace(getattr(defaults, key), **value)
                else:
                    kwargs[key] = value
            return cls(**kwargs)
        except TypeError as e:
            raise ConfigError("配置项错误: {}".format(e))


def correlation_bounds(base_rate: float) -> tuple:
    """两个边际都为 base_rate 的二元伯努利分布可达的 phi 范围。"""
    b = base_rate
    if b >= 1.0:
        return (-1.0, 1.0)
    lower = max(-b / (1.0 - b), -(1.0 - b) / b)
    return (lower, 1.0)


def load_config(path: Optional[Path]) -> RunConfig:
    """读取 JSON 配置；path 为 None 时返回默认配置。"""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError("配置文件不存在: {}".format(path))
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError("配置文件不是合法 JSON: {} (行 {})".format(path, e.lineno))
    if not isinstance(data, dict):
        raise ConfigError("配置文件顶层必须是对象")
    return RunConfig.from_dict(data)


def config_hash(config: RunConfig) -> str:
    """规范化 JSON 的 SHA256"""
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


DEFAULT_CONFIG = RunConfig()
