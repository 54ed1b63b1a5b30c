"""数据集读写 - 边列表 + 属性表，ego 网络抽取，DOT 导出"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List, Sequence, Set, Tuple

import networkx as nx

from src.errors import DatasetFormatError
from src.graph.core import from_networkx, to_networkx
from src.graph.header import CorpusIOProtocol
from src.models import CondGraph
from src.utils.file_ops import safe_write_text
from src.utils.logger import get_logger

logger = get_logger(__name__)

EDGELIST_HEADER = "# cdgraph-edgelist v1"
ATTRIBUTES_HEADER = "# cdgraph-attributes v1"
DOT_HEADER = "// cdgraph-dot v1"

_SINGLE_COLUMNS = ["node", "c1", "c2"]
_MULTI_COLUMNS = ["graph", "node", "c1", "c2"]

# 节点填充色：两个条件都满足=蓝，仅 c1=绿，仅 c2=黄，都不满足=红
_FILL = {(1, 1): "blue", (1, 0): "green", (0, 1): "yellow", (0, 0): "red"}


def _content_lines(path: Path) -> List[Tuple[int, str]]:
    """返回 (行号, 内容)，跳过空行与 # 注释"""
    out = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            for lineno, raw in enumerate(f, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                out.append((lineno, line))
    except UnicodeDecodeError as e:
        raise DatasetFormatError("不是 UTF-8 文本 ({})".format(e.reason), str(path)) from e
    return out


def _parse_int(token: str, path: Path, lineno: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise DatasetFormatError("{} 不是整数: {!r}".format(what, token), str(path), lineno)


def _parse_bit(token: str, path: Path, lineno: int, what: str) -> int:
    value = _parse_int(token, path, lineno, what)
    if value not in (0, 1):
        raise DatasetFormatError("{} 只能是 0 或 1: {}".format(what, value), str(path), lineno)
    return value


class EdgeListCorpusIO:
    """边列表 + 属性表格式的语料读写器。

    单图文件：边行 ``u v``，属性表头 ``node,c1,c2``；
    多图文件：边行 ``graph u v``，属性表头 ``graph,node,c1,c2``。
    """

    def load(
        self, edge_path: Path, attr_path: Path, split_components: bool = False
    ) -> List[CondGraph]:
        """读取语料，按属性表中图编号首次出现的顺序返回。"""
        edge_path, attr_path = Path(edge_path), Path(attr_path)
        for p in (edge_path, attr_path):
            if not p.exists():
                raise FileNotFoundError("数据文件不存在: {}".format(p))

        multi, attrs = self._read_attributes(attr_path)
        sizes = {gid: len(rows) for gid, rows in attrs.items()}
        edges = self._read_edges(edge_path, multi, sizes)

        corpus = []
        for gid, rows in attrs.items():
            n = sizes[gid]
            x1 = [rows[i][0] for i in range(n)]
            x2 = [rows[i][1] for i in range(n)]
            g = CondGraph.from_edges(n, sorted(edges.get(gid, set())), x1, x2)
            if split_components:
                corpus.extend(split_connected_components(g))
            else:
                corpus.append(g)
        logger.info("数据集读取完成: %d 张图 (%s, %s)", len(corpus), edge_path, attr_path)
        return corpus

    def _read_attributes(self, path: Path) -> Tuple[bool, Dict[str, Dict[int, Tuple[int, int]]]]:
        lines = _content_lines(path)
        if not lines:
            raise DatasetFormatError("属性表为空", str(path))
        header_lineno, header = lines[0]
        columns = [c.strip() for c in next(csv.reader([header]))]
        if columns == _SINGLE_COLUMNS:
            multi = False
        elif columns == _MULTI_COLUMNS:
            multi = True
        else:
            raise DatasetFormatError(
                "属性表头必须是 node,c1,c2 或 graph,node,c1,c2: {}".format(header),
                str(path), header_lineno,
            )

        attrs: Dict[str, Dict[int, Tuple[int, int]]] = {}
        for lineno, line in lines[1:]:
            row = [c.strip() for c in next(csv.reader([line]))]
            if len(row) != len(columns):
                raise DatasetFormatError(
                    "列数应为 {}，实际 {}".format(len(columns), len(row)), str(path), lineno
                )
            gid = row[0] if multi else "0"
            node_tok, c1_tok, c2_tok = row[-3:]
            node = _parse_int(node_tok, path, lineno, "节点编号")
            if node < 0:
                raise DatasetFormatError("节点编号不能为负: {}".format(node), str(path), lineno)
            bits = (_parse_bit(c1_tok, path, lineno, "c1"), _parse_bit(c2_tok, path, lineno, "c2"))
            rows = attrs.setdefault(gid, {})
            if node in rows:
                raise DatasetFormatError("节点 {} 重复定义".format(node), str(path), lineno)
            rows[node] = bits

        for gid, rows in attrs.items():
            n = len(rows)
            if sorted(rows) != list(range(n)):
                raise DatasetFormatError(
                    "图 {} 的节点编号必须是 0..{} 的排列".format(gid, n - 1), str(path)
                )
        return multi, attrs

    def _read_edges(
        self, path: Path, multi: bool, sizes: Dict[str, int]
    ) -> Dict[str, Set[Tuple[int, int]]]:
        width = 3 if multi else 2
        edges: Dict[str, Set[Tuple[int, int]]] = {}
        for lineno, line in _content_lines(path):
            tokens = line.split()
            if len(tokens) != width:
                raise DatasetFormatError(
                    "边行应有 {} 个字段，实际 {}".format(width, len(tokens)), str(path), lineno
                )
            gid = tokens[0] if multi else "0"
            if gid not in sizes:
                raise DatasetFormatError("未知图编号: {}".format(gid), str(path), lineno)
            u = _parse_int(tokens[-2], path, lineno, "端点")
            v = _parse_int(tokens[-1], path, lineno, "端点")
            n = sizes[gid]
            if not (0 <= u < n and 0 <= v < n):
                raise DatasetFormatError(
                    "端点越界: ({}, {})，图 {} 只有 {} 个节点".format(u, v, gid, n), str(path), lineno
                )
            if u == v:
                raise DatasetFormatError("不允许自环: {} {}".format(u, v), str(path), lineno)
            # 无向边：u v 与 v u 视为同一条
            edges.setdefault(gid, set()).add((min(u, v), max(u, v)))
        return edges

    def save(self, corpus: Sequence[CondGraph], edge_path: Path, attr_path: Path) -> None:
        """写出多图格式"""
        edge_lines = [EDGELIST_HEADER]
        attr_lines = [ATTRIBUTES_HEADER, ",".join(_MULTI_COLUMNS)]
        for gid, g in enumerate(corpus):
            for u, v in g.edges():
                edge_lines.append("{} {} {}".format(gid, u, v))
            for i in range(g.n):
                attr_lines.append("{},{},{},{}".format(gid, i, int(g.x1[i]), int(g.x2[i])))
        safe_write_text(Path(edge_path), "\n".join(edge_lines) + "\n")
        safe_write_text(Path(attr_path), "\n".join(attr_lines) + "\n")
        logger.info("语料已保存: %d 张图 -> %s, %s", len(corpus), edge_path, attr_path)

    def save_graph(self, g: CondGraph, edge_path: Path, attr_path: Path) -> None:
        """写出单图格式"""
        edge_lines = [EDGELIST_HEADER] + ["{} {}".format(u, v) for u, v in g.edges()]
        attr_lines = [ATTRIBUTES_HEADER, ",".join(_SINGLE_COLUMNS)] + [
            "{},{},{}".format(i, int(g.x1[i]), int(g.x2[i])) for i in range(g.n)
        ]
        safe_write_text(Path(edge_path), "\n".join(edge_lines) + "\n")
        safe_write_text(Path(attr_path), "\n".join(attr_lines) + "\n")


_DEFAULT_IO: CorpusIOProtocol = EdgeListCorpusIO()


def load_dataset(edge_path: Path, attr_path: Path, split_components: bool = False) -> List[CondGraph]:
    return _DEFAULT_IO.load(edge_path, attr_path, split_components=split_components)


def save_corpus(corpus: Sequence[CondGraph], edge_path: Path, attr_path: Path) -> None:
    _DEFAULT_IO.save(corpus, edge_path, attr_path)


def split_connected_components(g: CondGraph) -> List[CondGraph]:
    """按连通分量切分，分量按最小节点编号排序，分量内保持原节点顺序。"""
    G = to_networkx(g)
    comps = sorted((sorted(c) for c in nx.connected_components(G)), key=lambda c: c[0])
    return [from_networkx(G, nodes) for nodes in comps]


def extract_ego_nets(g: CondGraph, max_n: int = 100) -> List[CondGraph]:
    """对每个节点取其自身与邻居诱导的子图，节点数超过 max_n 的丢弃。

    结果按 ego 编号排序，子图内保持原节点顺序。
    """
    G = to_networkx(g)
    nets = []
    discarded = 0
    for ego in range(g.n):
        nodes = sorted(nx.ego_graph(G, ego, radius=1).nodes)
        if len(nodes) > max_n:
            discarded += 1
            continue
        nets.append(from_networkx(G, nodes))
    logger.info("ego 网络抽取: 保留 %d 个，丢弃 %d 个 (max_n=%d)", len(nets), discarded, max_n)
    return nets


def to_dot(g: CondGraph, name: str = "G") -> str:
    """无向 DOT 文本，节点按条件满足情况着色"""
    lines = [DOT_HEADER, "graph {} {{".format(name), "  node [style=filled];"]
    for i in range(g.n):
        color = _FILL[(int(g.x1[i]), int(g.x2[i]))]
        lines.append("  {} [fillcolor={}];".format(i, color))
    for u, v in g.edges():
        lines.append("  {} -- {};".format(u, v))
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(corpus: Sequence[CondGraph], output_dir: Path, prefix: str = "graph") -> List[Path]:
    """每张图写一个 DOT 文件"""
    output_dir = Path(output_dir)
    paths = []
    for i, g in enumerate(corpus):
        path = output_dir / "{}_{:04d}.dot".format(prefix, i)
        safe_write_text(path, to_dot(g, name="{}_{}".format(prefix, i)))
        paths.append(path)
    logger.info("DOT 导出完成: %d 个文件 -> %s", len(paths), output_dir)
    return paths


def node_fill_colors(g: CondGraph) -> List[str]:
    return [_FILL[(int(a), int(b))] for a, b in zip(g.x1, g.x2)]
