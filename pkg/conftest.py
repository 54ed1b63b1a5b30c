"""测试共用的小图、调度与精简配置"""

import json
import logging
import sys
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from src.diffusion.schedule import make_schedule  # noqa: E402
from src.models import CleanPrediction, CondGraph, NoiseSchedule, NoisyGraph  # noqa: E402
from src.utils.logger import ROOT_LOGGER  # noqa: E402


# 跑完整流水线用的最小配置：几秒内结束，但两个分类器都能拿到两类标签
TINY_CONFIG = {
    "schedule": {"T": 4},
    "denoiser": {"rounds": 1, "hidden": 4},
    "optimizer": {"steps": 3, "batch_size": 2, "log_every": 1},
    "classifier_optimizer": {"steps": 3, "batch_size": 2, "log_every": 1},
    "sampling": {"num_graphs": 8},
    "synth": {"num_graphs": 30, "n_min": 4, "n_max": 6, "tolerance": 0.3},
    "log_file": None,
}


def triangle(x1=(1, 1, 1), x2=(1, 1, 1)) -> CondGraph:
    return CondGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)], x1, x2)


def path3(x1=(1, 1, 1), x2=(1, 1, 1)) -> CondGraph:
    return CondGraph.from_edges(3, [(0, 1), (1, 2)], x1, x2)


def cycle4(x1=(1, 1, 1, 1), x2=(1, 1, 1, 1)) -> CondGraph:
    return CondGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)], x1, x2)


@pytest.fixture
def k3() -> CondGraph:
    return triangle()


@pytest.fixture
def p3() -> CondGraph:
    return path3()


@pytest.fixture
def c4() -> CondGraph:
    return cycle4()


@pytest.fixture
def small_schedule() -> NoiseSchedule:
    return make_schedule(T=6, beta_min=0.05, beta_max=0.5)


@pytest.fixture
def tiny_config_dict() -> Dict:
    return json.loads(json.dumps(TINY_CONFIG))


@pytest.fixture
def tiny_config_file(tmp_path, tiny_config_dict) -> Path:
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(tiny_config_dict), encoding="utf-8")
    return path


@pytest.fixture(autouse=True)
def _reset_src_logger():
    """每个用例结束后移除 "src" 上的 handler，避免文件 handler 跨用例累积"""
    yield
    root = logging.getLogger(ROOT_LOGGER)
    for h in list(root.handlers):
        root.removeHandler(h)
        h.close()


# ── 两节点单条件的精确 Bayes 去噪器 ──

State = Tuple[int, int, int]  # (x1[0], x1[1], e01)

# 数据分布；x2 恒为 0
TWO_NODE_DIST: Dict[State, float] = {
    (1, 1, 1): 0.30,
    (0, 0, 1): 0.10,
    (0, 0, 0): 0.20,
    (1, 1, 0): 0.10,
    (1, 0, 0): 0.15,
    (0, 1, 0): 0.15,
}


def all_states():
    return [(a, b, e) for a in (0, 1) for b in (0, 1) for e in (0, 1)]


def oracle_marginals(dist: Dict[State, float], flip: float, observed: State) -> np.ndarray:
    """给定观测与累积翻转概率，干净状态后验下三个变量各自取 1 的概率"""
    weights = np.zeros(3)
    total = 0.0
    for s, p in dist.items():
        like = p
        for a, b in zip(s, observed):
            like *= flip if a != b else 1.0 - flip
        total += like
        weights += like * np.array(s, dtype=np.float64)
    return weights / total


class BayesOracleDenoiser:
    """满足 DenoiserProtocol 的精确后验去噪器（只适用于两节点图）"""

    def __init__(self, schedule: NoiseSchedule, dist: Dict[State, float] = TWO_NODE_DIST) -> None:
        self.schedule = schedule
        self.dist = dist

    def predict_clean(self, noisy: NoisyGraph, T: int) -> CleanPrediction:
        g = noisy.graph
        observed = (int(g.x1[0]), int(g.x1[1]), int(g.adj[0, 1]))
        m = oracle_marginals(self.dist, self.schedule.cumulative_flip(noisy.t), observed)
        pe = np.array([[0.0, m[2]], [m[2], 0.0]])
        return CleanPrediction(px1=m[:2].copy(), px2=np.zeros(2), pe=pe)


@pytest.fixture
def oracle_schedule() -> NoiseSchedule:
    return make_schedule(T=50, beta_min=0.02, beta_max=0.6)
