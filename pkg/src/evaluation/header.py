"""评估接口定义"""

from __future__ import annotations

from typing import Optional, Sequence

from typing_extensions import Protocol, runtime_checkable

from src.config import EvalConfig
from src.models import CondGraph, ContagionParam, EvalReport


@runtime_checkable
class EvaluatorProtocol(Protocol):
    """生成图评估器接口"""

    def __call__(
        self,
        reference: Sequence[CondGraph],
        generated: Sequence[CondGraph],
        cfg: Optional[EvalConfig] = None,
        contagion: Optional[ContagionParam] = None,
    ) -> EvalReport:
        """对照参考集评估生成集。

        Args:
            reference: 参考图（训练语料或留出集）
            generated: 生成图
            cfg: 直方图区间数、带宽下限与有效性判定方式
            contagion: 依赖画像里计算传染似然所用的参数 p，缺省 0.8

        Returns:
            EvalReport，含有效性、三个相对误差比、MMD 与所用超参数

        Raises:
            EmptyEvaluationError: 任一列表为空，或某侧没有可用于 MMD 的图
            UndefinedRatioError: 参考集某项统计量均值为 0

        Example:
            >>> report = evaluate(corpus, corpus)
            >>> report.mmd_clustering
            0.0
        """
        ...
