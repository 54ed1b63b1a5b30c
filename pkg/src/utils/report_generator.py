"""报告生成 - 将 EvalReport 输出为可读报告

产物内容不含时间戳，同样的输入得到逐字节相同的文件。
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from src.models import BoundTerms, DependencyProfile, EvalReport
from src.utils.file_ops import ensure_dir, read_json, safe_write_json, safe_write_text
from src.utils.logger import get_logger

logger = get_logger(__name__)

REPORT_FORMAT_VERSION = 1


def generate_report(report: EvalReport, output_dir: Path, tag: str) -> List[Path]:
    """生成评估报告（Markdown 摘要 + JSON 数据）。

    输出文件:
        {output_dir}/report_{tag}.md   - 人类可读的评估摘要
        {output_dir}/report_{tag}.json - 结构化数据，可由 load_report 精确读回
    """
    output_dir = ensure_dir(Path(output_dir))
    tag = _sanitize(tag)

    md_path = output_dir / "report_{}.md".format(tag)
    safe_write_text(md_path, _build_markdown_report(report, tag))
    logger.info("评估摘要: %s", md_path)

    json_path = output_dir / "report_{}.json".format(tag)
    safe_write_json(json_path, {"format_version": REPORT_FORMAT_VERSION, "tag": tag, **report.to_dict()})
    logger.info("评估数据: %s", json_path)
    return [md_path, json_path]


def load_report(path: Path) -> EvalReport:
    data = read_json(path)
    data.pop("format_version", None)
    data.pop("tag", None)
    return EvalReport.from_dict(data)


def _profile_lines(title: str, profile: Optional[DependencyProfile]) -> List[str]:
    if profile is None:
        return []
    lines = ["### {}".format(title), "", "| 条件 | 相邻一致率 | q(x_n=1|x_m=0) | q(x_n=1|x_m=1) | 同质边率差 | 传染对数似然 |", "|---|---|---|---|---|---|"]
    for c in profile.conditions:
        lines.append(
            "| c{} | {:.4f} | {:.4f} | {:.4f} | {:+.4f} | {:.4f} (p={:.2f}) |".format(
                c.condition, c.agreement_rate, c.neighbor_dist[0], c.neighbor_dist[1], c.homophily_gap,
                c.contagion_loglik, c.contagion_p,
            )
        )
    lines += [
        "",
        "两条件都一致的节点对边率 {:.4f}，其余节点对 {:.4f}".format(
            profile.edge_rate_both_agree, profile.edge_rate_disagree
        ),
        "",
    ]
    return lines


def _build_markdown_report(report: EvalReport, tag: str) -> str:
    h = report.hyper
    lines = [
        "# 评估报告: {}".format(tag),
        "",
        "**参考图**: {} | **生成图**: {} | **有效性判定**: {}".format(
            report.sample_sizes.get("reference", 0),
            report.sample_sizes.get("generated", 0),
            h.get("validity_mode", "joint"),
        ),
        "",
        "## 指标",
        "",
        "| 指标 | 数值 |",
        "|---|---|",
        "| validity | {:.4f} |".format(report.validity),
        "| rel_err_nodes | {:.4f} |".format(report.rel_err_nodes),
        "| rel_err_edges | {:.4f} |".format(report.rel_err_edges),
        "| rel_err_density | {:.4f} |".format(report.rel_err_density),
        "| mmd_clustering | {:.6f} |".format(report.mmd_clustering),
        "",
        "MMD: {} 核，{}，{} 个区间，带宽 σ={:.6g}（{}，下限 {:g}）".format(
            h.get("kernel", "gaussian"),
            h.get("estimator", ""),
            h.get("bins", 10),
            h.get("bandwidth", 0.0),
            h.get("bandwidth_rule", ""),
            h.get("sigma_floor", 0.0),
        ),
        "",
    ]
    if report.reference_profile or report.generated_profile:
        lines += ["## 同质性与传染性", ""]
        lines += _profile_lines("参考集", report.reference_profile)
        lines += _profile_lines("生成集", report.generated_profile)
    return "\n".join(lines)


def write_bound(bound: BoundTerms, path: Path, num_graphs: int) -> Path:
    safe_write_json(Path(path), {"format_version": REPORT_FORMAT_VERSION, "num_graphs": num_graphs, **bound.to_dict()})
    return Path(path)


def generate_sweep_summary(rows: Sequence[Dict[str, Any]], output_dir: Path) -> List[Path]:
    """相关性敏感性实验的汇总（每个 ρ 目标一行）"""
    output_dir = ensure_dir(Path(output_dir))
    lines = [
        "# 条件相关性敏感性",
        "",
        "| ρ 目标 | 实测 phi | 档位 | validity 无引导 | validity 引导 | MMD 无引导 | MMD 引导 |",
        "|---|---|---|---|---|---|---|",
    ]
    for r in rows:
        measured = r["rho_measured"]
        lines.append(
            "| {:+.3f} | {} | {} | {:.4f} | {:.4f} | {:.6f} | {:.6f} |".format(
                r["rho_target"],
                "n/a" if measured is None else "{:+.4f}".format(measured),
                r["regime"] or "undefined",
                r["validity_unguided"], r["validity_guided"], r["mmd_unguided"], r["mmd_guided"],
            )
        )
    md_path = output_dir / "sweep_summary.md"
    json_path = output_dir / "sweep_summary.json"
    safe_write_text(md_path, "\n".join(lines) + "\n")
    safe_write_json(json_path, {"format_version": REPORT_FORMAT_VERSION, "rows": list(rows)})
    logger.info("敏感性汇总: %s", md_path)
    return [md_path, json_path]


def _sanitize(name: str, max_len: int = 80) -> str:
    safe = name.replace("/", "_").replace("\\", "_").replace(":", "_")
    safe = safe.replace("?", "").replace("*", "").replace('"', "")
    safe = safe.replace("<", "").replace(">", "").replace("|", "")
    safe = safe.strip(". ")
    return (safe or "eval")[:max_len]
