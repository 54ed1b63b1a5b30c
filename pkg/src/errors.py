"""领域异常 - 所有模块共享的错误类型

每个异常带稳定的 ``code``，CLI 据此输出单行机器可解析的错误。
"""

from __future__ import annotations

from typing import Optional


class CDGraphError(Exception):
    """所有领域错误的基类"""

    code = "cdgraph_error"


class GraphInvariantError(CDGraphError, ValueError):
    """CondGraph 不变量被破坏（非对称、自环、非 0/1 取值、长度不符）"""

    code = "graph_invariant"


class UndefinedCorrelationError(CDGraphError, ValueError):
    """合并后的条件向量为常数，phi 系数无定义"""

    code = "undefined_correlation"


class ScheduleError(CDGraphError, ValueError):
    """噪声调度参数非法"""

    code = "invalid_schedule"


class StepRangeError(CDGraphError, ValueError):
    """时间步越界"""

    code = "step_out_of_range"


class ShapeMismatchError(CDGraphError, ValueError):
    """张量维度与图/模型不一致"""

    code = "shape_mismatch"


class EmptyCorpusError(CDGraphError, ValueError):
    """训练或评估语料为空"""

    code = "empty_corpus"


class DegenerateLabelError(CDGraphError, ValueError):
    """分类器训练标签全部相同，或 inner 训练子集为空"""

    code = "degenerate_labels"


class UndefinedRatioError(CDGraphError, ValueError):
    """参考集统计量均值为 0，相对误差无定义"""

    code = "undefined_ratio"


class EmptyEvaluationError(CDGraphError, ValueError):
    """评估输入为空或没有可用于 MMD 的图"""

    code = "empty_evaluation"


class ConfigError(CDGraphError, ValueError):
    """配置文件解析失败或数值越界"""

    code = "invalid_config"


class CorrelationTargetError(CDGraphError, ValueError):
    """相关性目标不可达（二元伯努利可行域之外，或重抽后仍偏离）"""

    code = "correlation_target"


class CheckpointError(CDGraphError, ValueError):
    """检查点格式或版本不符"""

    code = "invalid_checkpoint"


class DatasetFormatError(CDGraphError, ValueError):
    """数据集文件解析失败，带行号"""

    code = "dataset_format"

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None) -> None:
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = "{}".format(path)
            if line is not None:
                where += ":{}".format(line)
            where += ": "
        super().__init__(where + message)


class ReproductionError(CDGraphError, RuntimeError):
    """按清单重跑后产物校验和不一致"""

    code = "reproduction_mismatch"
