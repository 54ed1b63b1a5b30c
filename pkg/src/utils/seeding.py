"""随机数流派生

所有随机性都来自 (主种子, 用途, 序号...) 派生的独立 Generator，
并发执行时每个任务拿自己的流，结果与串行一致。
"""

from __future__ import annotations

from typing import Union

import numpy as np

# 各用途的流编号，避免不同阶段共用同一条流
STREAM_CORPUS = 1
STREAM_DENOISER_INIT = 2
STREAM_DENOISER_TRAIN = 3
STREAM_CLASSIFIER_INIT = 4
STREAM_CLASSIFIER_TRAIN = 5
STREAM_SAMPLE = 6
STREAM_BOUND = 7

RngLike = Union[int, np.random.Generator]


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """由主种子与若干非负整数键派生独立的 Generator"""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def as_rng(rng: RngLike) -> np.random.Generator:
    """接受整数种子或现成的 Generator"""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(int(rng))
