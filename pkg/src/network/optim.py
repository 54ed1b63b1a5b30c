"""Adam 优化器与通用训练循环"""

from __future__ import annotations

from typing import Any, Callable, List, Optional, Tuple

import numpy as np

from src.config import OptimizerConfig
from src.utils.logger import get_logger

logger = get_logger(__name__)

# (当前步, 总步数, 最近一步的平均损失)
ProgressCallback = Callable[[int, int, float], None]


class AdamOptimizer:
    """自适应矩估计，状态只在 step 中更新"""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: Optional[np.ndarray] = None
        self.v: Optional[np.ndarray] = None
        self.t = 0

    @classmethod
    def from_config(cls, cfg: OptimizerConfig) -> "AdamOptimizer":
        return cls(lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train_loop(
    params: np.ndarray,
    sample_example: Callable[[np.random.Generator], Any],
    example_loss_grad: Callable[[np.ndarray, Any], Tuple[float, np.ndarray]],
    optimizer: AdamOptimizer,
    cfg: OptimizerConfig,
    rng: np.random.Generator,
    label: str = "模型",
    progress: Optional[ProgressCallback] = None,
) -> Tuple[np.ndarray, List[float]]:
    """每步抽 batch_size 个样本，梯度按样本顺序求和后做一次更新。

    Returns:
        (最终参数, 每步的批平均损失)
    """
    params = np.array(params, dtype=np.float64, copy=True)
    trace: List[float] = []
    for step in range(1, cfg.steps + 1):
        examples = [sample_example(rng) for _ in range(cfg.batch_size)]
        total = 0.0
        g_sum = np.zeros_like(params)
        for ex in examples:
            l, g = example_loss_grad(params, ex)
            total += l
            g_sum += g
        params = optimizer.step(params, g_sum)
        mean_loss = total / cfg.batch_size
        trace.append(mean_loss)
        if step % cfg.log_every == 0 or step == cfg.steps:
            window = trace[-cfg.log_every:]
            logger.info(
                "%s 训练步 %d/%d loss=%.4f (近 %d 步均值 %.4f)",
                label, step, cfg.steps, mean_loss, len(window), float(np.mean(window)),
            )
        if progress is not None:
            progress(step, cfg.steps, mean_loss)
    return params, trace
