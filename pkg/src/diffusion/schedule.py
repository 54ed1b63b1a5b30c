"""噪声调度、转移核与单变量精确后验

二值变量的前向链：每步以 f_t = β_t/2 的概率翻转，
累积到第 t 步的翻转概率为 (1 − Π_{s≤t}(1 − β_s)) / 2。
"""

from __future__ import annotations

import math
from typing import Union

import numpy as np

from src.config import ScheduleConfig
from src.errors import ScheduleError, StepRangeError
from src.models import NoiseSchedule, ScheduleShape, TransitionKernel

ArrayLike = Union[int, float, np.ndarray]

# 余弦调度的偏移量
_COSINE_OFFSET = 0.008


def linear_betas(T: int, beta_min: float, beta_max: float) -> np.ndarray:
    if T == 1:
        return np.array([beta_min])
    return np.linspace(beta_min, beta_max, T)


def cosine_betas(T: int, beta_min: float, beta_max: float) -> np.ndarray:
    """由 ᾱ(s) = cos²((s + δ)/(1 + δ) · π/2) 离散得到 β_t，再截断到 [beta_min, beta_max]。"""

    def alpha_bar(s: float) -> float:
        return math.cos((s + _COSINE_OFFSET) / (1.0 + _COSINE_OFFSET) * math.pi / 2) ** 2

    betas = [1.0 - alpha_bar(t / T) / alpha_bar((t - 1) / T) for t in range(1, T + 1)]
    return np.clip(np.array(betas), beta_min, beta_max)


def make_schedule(
    T: int = 50,
    beta_min: float = 0.02,
    beta_max: float = 0.6,
    shape: Union[str, ScheduleShape] = ScheduleShape.LINEAR,
) -> NoiseSchedule:
    """构造噪声调度。

    Raises:
        ScheduleError: T < 1、β 越界或未知形状
    """
    if T < 1:
        raise ScheduleError("步数 T 至少为 1: {}".format(T))
    if not (0.0 < beta_min <= beta_max < 1.0):
        raise ScheduleError("要求 0 < beta_min ≤ beta_max < 1: ({}, {})".format(beta_min, beta_max))
    try:
        shape = ScheduleShape(shape)
    except ValueError:
        raise ScheduleError("未知调度形状: {}".format(shape))
    if shape is ScheduleShape.LINEAR:
        beta = linear_betas(T, beta_min, beta_max)
    else:
        beta = cosine_betas(T, beta_min, beta_max)
    return NoiseSchedule(beta)


def schedule_from_config(cfg: ScheduleConfig) -> NoiseSchedule:
    return make_schedule(cfg.T, cfg.beta_min, cfg.beta_max, cfg.shape)


def _check_step(schedule: NoiseSchedule, t: int, lowest: int = 1) -> None:
    if not (lowest <= t <= schedule.T):
        raise StepRangeError("时间步 t={} 不在 [{}, {}] 内".format(t, lowest, schedule.T))


def step_kernel(schedule: NoiseSchedule, t: int) -> TransitionKernel:
    """第 t 步单步转移核，flip = β_t / 2"""
    _check_step(schedule, t)
    return TransitionKernel(schedule.step_flip(t))


def cumulative_kernel(schedule: NoiseSchedule, t: int) -> TransitionKernel:
    """q(x_t | x_0)，等于单步核 1..t 的复合"""
    _check_step(schedule, t)
    return TransitionKernel(schedule.cumulative_flip(t))


def posterior_one(step_flip: float, prev_flip: float, x_t: ArrayLike, x_0: ArrayLike) -> np.ndarray:
    """P(x_{t−1} = 1 | x_t, x_0) 的向量化形式。

    Args:
        step_flip: 第 t 步单步翻转概率
        prev_flip: 第 t−1 步的累积翻转概率
        x_t, x_0: 0/1 标量或数组，可广播
    """
    x_t = np.asarray(x_t)
    x_0 = np.asarray(x_0)
    # q(x_t | x_{t−1} = v) 与 q(x_{t−1} = v | x_0)
    like1 = np.where(x_t == 1, 1.0 - step_flip, step_flip)
    like0 = np.where(x_t == 0, 1.0 - step_flip, step_flip)
    prior1 = np.where(x_0 == 1, 1.0 - prev_flip, prev_flip)
    prior0 = 1.0 - prior1
    num = like1 * prior1
    return num / (num + like0 * prior0)


def posterior_flip(schedule: NoiseSchedule, t: int, x_t: int, x_0: int) -> float:
    """单变量精确后验 P(x_{t−1} = 1 | x_t, x_0)，2 ≤ t ≤ T。

    t = 1 由重建步处理，这里拒绝。

    Example:
        >>> s = NoiseSchedule(np.array([0.2, 0.2, 0.2]))
        >>> round(posterior_flip(s, 3, 1, 1), 5)
        0.97619
    """
    _check_step(schedule, t, lowest=2)
    return float(posterior_one(schedule.step_flip(t), schedule.cumulative_flip(t - 1), x_t, x_0))


def mixed_posterior(schedule: NoiseSchedule, t: int, x_t: np.ndarray, p_clean: np.ndarray) -> np.ndarray:
    """按去噪网络的干净位概率混合两个后验：

    P(x_{t−1}=1) = p̂·post(x_t, 1) + (1 − p̂)·post(x_t, 0)
    """
    _check_step(schedule, t, lowest=2)
    f = schedule.step_flip(t)
    c = schedule.cumulative_flip(t - 1)
    p_clean = np.asarray(p_clean, dtype=np.float64)
    return p_clean * posterior_one(f, c, x_t, 1) + (1.0 - p_clean) * posterior_one(f, c, x_t, 0)
