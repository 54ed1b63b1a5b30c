"""语料读写接口定义"""

from __future__ import annotations

from pathlib import Path
from typing import List, Sequence

from typing_extensions import Protocol, runtime_checkable

from src.models import CondGraph


@runtime_checkable
class CorpusIOProtocol(Protocol):
    """语料读写器接口。

    负责在磁盘格式与 CondGraph 列表之间转换。
    """

    def load(
        self, edge_path: Path, attr_path: Path, split_components: bool = False
    ) -> List[CondGraph]:
        """读取语料。

        Args:
            edge_path: 边列表文件
            attr_path: 节点属性表文件
            split_components: 是否把每张图按连通分量切分

        Returns:
            CondGraph 列表，顺序与文件中图编号首次出现的顺序一致

        Raises:
            FileNotFoundError: 文件不存在
            DatasetFormatError: 解析失败（消息带行号），包括自环与越界端点

        Example:
            >>> corpus = EdgeListCorpusIO().load(Path("data/edges.txt"), Path("data/attrs.csv"))
            >>> corpus[0].n
            7
        """
        ...

    def save(self, corpus: Sequence[CondGraph], edge_path: Path, attr_path: Path) -> None:
        """写出语料，可由 load 无损读回。

        Args:
            corpus: 待写出的图
            edge_path: 边列表输出路径
            attr_path: 属性表输出路径
        """
        ...
