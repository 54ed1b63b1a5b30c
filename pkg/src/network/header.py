"""去噪网络与引导分类器接口定义"""

from __future__ import annotations

from typing_extensions import Protocol, runtime_checkable

from src.models import CleanPrediction, NoisyGraph


@runtime_checkable
class DenoiserProtocol(Protocol):
    """去噪器接口。

    反向采样只依赖这一个方法，因此可以替换成精确的贝叶斯后验（测试中的 oracle）。
    """

    def predict_clean(self, noisy: NoisyGraph, T: int) -> CleanPrediction:
        """预测干净图各二值变量取 1 的概率。

        Args:
            noisy: 第 t 步的加噪图
            T: 总步数（用于时间嵌入）

        Returns:
            CleanPrediction，px1/px2 长度为 n，pe 为 n × n 对称矩阵

        Example:
            >>> pred = model.predict_clean(NoisyGraph(g, t=10), T=50)
            >>> pred.pe.shape
            (5, 5)
        """
        ...


@runtime_checkable
class GraphClassifierProtocol(Protocol):
    """图级概率分类器接口"""

    def prob(self, noisy: NoisyGraph, T: int) -> float:
        """返回条件多数成立的概率，严格位于 (0, 1)。

        Raises:
            GraphInvariantError: 图为空
        """
        ...
