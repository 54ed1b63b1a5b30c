"""CLI 入口点"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from src.config import RunConfig, load_config
from src.errors import CDGraphError, ConfigError, ReproductionError
from src.graph.io import export_dot, extract_ego_nets, load_dataset, save_corpus
from src.models import ContagionParam
from src.network.checkpoint import load_classifiers, load_denoiser
from src.pipeline import (
    CORPUS_ATTRS,
    CORPUS_EDGES,
    CORPUS_PROFILE,
    DENOISER_CKPT,
    INNER_CKPT,
    OUTER_CKPT,
    Pipeline,
    corpus_summary,
    run_sweep,
    samples_paths,
)
from src.utils.file_ops import safe_write_json
from src.utils.logger import get_logger, setup_logger
from src.utils.manifest import artifact_checksums, compare_checksums, load_manifest, write_manifest

logger = get_logger(__name__)

DEFAULT_SWEEP_RHOS = [-0.3, -0.15, 0.0, 0.15, 0.3]

# 会被解析成绝对路径写入清单的参数
PATH_ARGS = (
    "config", "edges", "attrs", "denoiser", "outer", "inner",
    "reference_edges", "reference_attrs", "generated_edges", "generated_attrs", "manifest",
)

EXIT_DOMAIN_ERROR = 1
EXIT_IO_ERROR = 2


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON 配置文件（缺省用内置默认值）")
    common.add_argument("--output-dir", type=Path, help="输出目录（覆盖配置）")
    common.add_argument("--seed", type=int, help="覆盖训练、采样与合成语料的种子")
    common.add_argument("--steps", type=int, help="覆盖去噪网络训练步数")
    common.add_argument("--classifier-steps", type=int, help="覆盖分类器训练步数")
    common.add_argument(
        "--log-level",
        type=str,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="日志级别",
    )
    return common


def _corpus_options(p: argparse.ArgumentParser, what: str = "训练语料") -> None:
    p.add_argument("--edges", type=Path, help="{}边列表（缺省: 输出目录/{}）".format(what, CORPUS_EDGES))
    p.add_argument("--attrs", type=Path, help="{}属性表（缺省: 输出目录/{}）".format(what, CORPUS_ATTRS))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="python -m src.main",
        description="条件扩散图生成 - 同质性/传染性感知的多条件图生成",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""\
示例:
  # 完整流水线（合成语料 → 训练 → 采样 → 评估）
  python -m src.main run --output-dir output/demo

  # 分步执行
  python -m src.main gen-data --output-dir output/demo
  python -m src.main train --output-dir output/demo --steps 500
  python -m src.main train-classifiers --output-dir output/demo
  python -m src.main sample --output-dir output/demo --guided --gamma 2.0
  python -m src.main eval --output-dir output/demo

  # 相关性敏感性实验
  python -m src.main sweep --rhos -0.3 0 0.3 --output-dir output/sweep

  # 按清单复现
  python -m src.main reproduce --manifest output/demo/manifest_run.json --output-dir output/check
""",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_options()

    sub.add_parser("gen-data", parents=[common], help="生成合成语料（或读入配置中的数据集）")

    p = sub.add_parser("train", parents=[common], help="训练去噪网络")
    _corpus_options(p)
    p.add_argument("--no-bound", action="store_true", help="训练后不计算变分下界")

    p = sub.add_parser("train-classifiers", parents=[common], help="训练 outer/inner 引导分类器")
    _corpus_options(p)

    p = sub.add_parser("sample", parents=[common], help="反向采样生成图")
    _corpus_options(p, "节点数来源语料")
    p.add_argument("--denoiser", type=Path, help="去噪网络检查点（缺省: 输出目录/{}）".format(DENOISER_CKPT))
    p.add_argument("--guided", action="store_true", help="启用分类器引导")
    p.add_argument("--gamma", type=float, help="引导强度 γ（覆盖配置）")
    p.add_argument("--outer", type=Path, help="outer 分类器检查点")
    p.add_argument("--inner", type=Path, help="inner 分类器检查点")
    p.add_argument("--num-graphs", type=int, help="生成图数量（覆盖配置）")

    p = sub.add_parser("eval", parents=[common], help="评估生成图")
    p.add_argument("--reference-edges", type=Path)
    p.add_argument("--reference-attrs", type=Path)
    p.add_argument("--generated-edges", type=Path, help="缺省: 输出目录下的无引导样本")
    p.add_argument("--generated-attrs", type=Path)
    p.add_argument("--tag", type=str, default="eval", help="报告文件标签")

    p = sub.add_parser("export-dot", parents=[common], help="每张图导出一个 DOT 文件")
    _corpus_options(p, "待导出")
    p.add_argument("--prefix", type=str, default="graph")

    sub.add_parser("run", parents=[common], help="完整流水线")

    p = sub.add_parser("sweep", parents=[common], help="条件相关性敏感性实验")
    p.add_argument("--rhos", type=float, nargs="+", default=DEFAULT_SWEEP_RHOS, help="ρ 目标列表")

    p = sub.add_parser("bound", parents=[common], help="在语料上评估负变分下界")
    _corpus_options(p)
    p.add_argument("--denoiser", type=Path)

    p = sub.add_parser("ego", parents=[common], help="从大图抽取 ego 网络语料")
    p.add_argument("--edges", type=Path, required=True, help="大图边列表（单图格式）")
    p.add_argument("--attrs", type=Path, required=True, help="大图属性表")
    p.add_argument("--max-n", type=int, default=100, help="ego 网络最大节点数")

    p = sub.add_parser("reproduce", parents=[common], help="按清单重跑并校验产物")
    p.add_argument("--manifest", type=Path, required=True)

    return parser


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    return build_parser().parse_args(argv)


def build_config(args: argparse.Namespace) -> RunConfig:
    """读取配置文件并应用命令行覆盖"""
    config = load_config(args.config)
    changes: Dict[str, Any] = {}
    if args.output_dir is not None:
        changes["output_dir"] = args.output_dir
    if args.log_level is not None:
        changes["log_level"] = args.log_level
    if args.seed is not None:
        changes["seed"] = args.seed
        changes["synth"] = dataclasses.replace(config.synth, seed=args.seed)
        changes["sampling"] = dataclasses.replace(config.sampling, seed=args.seed)
    if args.steps is not None:
        changes["optimizer"] = dataclasses.replace(config.optimizer, steps=args.steps)
    if args.classifier_steps is not None:
        changes["classifier_optimizer"] = dataclasses.replace(
            config.classifier_optimizer, steps=args.classifier_steps
        )
    num_graphs = getattr(args, "num_graphs", None)
    if num_graphs is not None:
        sampling = changes.get("sampling", config.sampling)
        changes["sampling"] = dataclasses.replace(sampling, num_graphs=num_graphs)
    if changes:
        config = dataclasses.replace(config, **changes)
    config.output_dir = config.output_dir.resolve()
    return config


def resolve_inputs(args: argparse.Namespace, config: RunConfig) -> None:
    """填充缺省输入路径并转为绝对路径，清单里记录的就是实际读取的文件"""
    out = config.output_dir
    defaults: Dict[str, Path] = {}
    if args.command in ("train", "train-classifiers", "sample", "export-dot", "bound"):
        defaults.update(edges=out / CORPUS_EDGES, attrs=out / CORPUS_ATTRS)
    if args.command in ("sample", "bound"):
        defaults["denoiser"] = out / DENOISER_CKPT
    if args.command == "sample" and args.guided:
        defaults.update(outer=out / OUTER_CKPT, inner=out / INNER_CKPT)
    if args.command == "eval":
        gen_edges, gen_attrs = samples_paths(out, "unguided")
        defaults.update(
            reference_edges=out / CORPUS_EDGES,
            reference_attrs=out / CORPUS_ATTRS,
            generated_edges=gen_edges,
            generated_attrs=gen_attrs,
        )
    for name, value in defaults.items():
        if getattr(args, name, None) is None:
            setattr(args, name, value)
    for name in PATH_ARGS:
        value = getattr(args, name, None)
        if value is not None:
            setattr(args, name, Path(value).resolve())


def manifest_args(args: argparse.Namespace) -> Dict[str, Any]:
    data = {}
    for key, value in sorted(vars(args).items()):
        if key == "command":
            continue
        data[key] = str(value) if isinstance(value, Path) else value
    return data


def _path(value: Any) -> Optional[Path]:
    return None if value is None else Path(value)


# ── 子命令：(config, args) -> 产物列表 ──

def cmd_gen_data(config: RunConfig, args: argparse.Namespace) -> List[Path]:
    pipeline = Pipeline(config)
    corpus = pipeline.prepare_corpus()
    print("语料已生成: {} 张图 -> {}".format(len(corpus), config.output_dir))
    return pipeline.artifacts


def cmd_train(config: RunConfig, args: argparse.Namespace) -> List[Path]:
    pipeline = Pipeline(config)
    corpus = load_dataset(_path(args.edges), _path(args.attrs))
    pipeline.train_denoiser(corpus, with_bound=not args.no_bound)
    print("去噪网络已保存: {}".format(config.output_dir / DENOISER_CKPT))
    return pipeline.artifacts


def cmd_train_classifiers(config: RunConfig, args: argparse.Namespace) -> List[Path]:
    pipeline = Pipeline(config)
    corpus = load_dataset(_path(args.edges), _path(args.attrs))
    classifiers = pipeline.train_classifiers(corpus)
    for role, result in sorted(classifiers.results.items()):
        print("{} 分类器训练集准确率: {:.3f}".format(role, result.accuracy))
    return pipeline.artifacts


def cmd_sample(config: RunConfig, args: argparse.Namespace) -> List[Path]:
    pipeline = Pipeline(config)
    corpus = load_dataset(_path(args.edges), _path(args.attrs))
    model = load_denoiser(_path(args.denoiser))
    classifiers = load_classifiers(_path(args.outer), _path(args.inner)) if args.guided else None
    graphs = pipeline.sample(model, [g.n for g in corpus], classifiers, gamma=args.gamma)
    print("已生成 {} 张图 ({})".format(len(graphs), "引导" if args.guided else "无引导"))
    return pipeline.artifacts


def cmd_eval(config: RunConfig, args: argparse.Namespace) -> List[Path]:
    pipeline = Pipeline(config)
    reference = load_dataset(_path(args.reference_edges), _path(args.reference_attrs))
    generated = load_dataset(_path(args.generated_edges), _path(args.generated_attrs))
    report = pipeline.evaluate(reference, generated, args.tag)
    print(
        "validity={:.4f} rel_err_nodes={:.4f} rel_err_edges={:.4f} rel_err_density={:.4f} mmd={:.6f}".format(
            report.validity, report.rel_err_nodes, report.rel_err_edges,
            report.rel_err_density, report.mmd_clustering,
        )
    )
    return pipeline.artifacts


def cmd_export_dot(config: RunConfig, args: argparse.Namespace) -> List[Path]:
    corpus = load_dataset(_path(args.edges), _path(args.attrs))
    paths = export_dot(corpus, config.output_dir / "dot", args.prefix)
    print("DOT 已导出: {} 个文件".format(len(paths)))
    return paths


def cmd_run(config: RunConfig, args: argparse.Namespace) -> List[Path]:
    result = Pipeline(config).run()
    for tag, report in result.reports.items():
        print("{}: validity={:.4f} mmd={:.6f}".format(tag, report.validity, report.mmd_clustering))
    print("产物目录: {}".format(result.output_dir))
    return result.artifacts


def cmd_sweep(config: RunConfig, args: argparse.Namespace) -> List[Path]:
    rows, artifacts = run_sweep(config, args.rhos)
    for r in rows:
        print("ρ={:+.3f} validity {:.4f} → {:.4f}".format(
            r["rho_target"], r["validity_unguided"], r["validity_guided"]))
    return artifacts


def cmd_bound(config: RunConfig, args: argparse.Namespace) -> List[Path]:
    pipeline = Pipeline(config)
    corpus = load_dataset(_path(args.edges), _path(args.attrs))
    terms = pipeline.bound(load_denoiser(_path(args.denoiser)), corpus)
    print("负变分下界: total={:.4f} homo={:.4f} cont={:.4f}".format(terms.total, terms.homo, terms.cont))
    return pipeline.artifacts


def cmd_ego(config: RunConfig, args: argparse.Namespace) -> List[Path]:
    graphs = load_dataset(_path(args.edges), _path(args.attrs))
    corpus = [net for g in graphs for net in extract_ego_nets(g, args.max_n)]
    edges, attrs = config.output_dir / CORPUS_EDGES, config.output_dir / CORPUS_ATTRS
    save_corpus(corpus, edges, attrs)
    profile = config.output_dir / CORPUS_PROFILE
    safe_write_json(profile, corpus_summary(corpus, ContagionParam(config.contagion_p)))
    print("ego 网络语料: {} 张图".format(len(corpus)))
    return [edges, attrs, profile]


def cmd_reproduce(config: RunConfig, args: argparse.Namespace) -> List[Path]:
    """按清单里的命令、参数与配置在新目录重跑，产物校验和必须逐一相同"""
    manifest = load_manifest(_path(args.manifest))
    command = manifest["command"]
    if command not in COMMANDS or command == "reproduce":
        raise ConfigError("清单中的命令无法复现: {}".format(command))
    recorded = RunConfig.from_dict(manifest["config"])
    if recorded.output_dir.resolve() == config.output_dir:
        raise ConfigError("复现需要与原运行不同的输出目录: {}".format(config.output_dir))
    recorded = dataclasses.replace(recorded, output_dir=config.output_dir)

    replay = argparse.Namespace(command=command, **manifest["args"])
    artifacts = COMMANDS[command](recorded, replay)
    write_manifest(command, manifest["args"], recorded, artifacts)
    mismatched = compare_checksums(manifest["artifacts"], artifact_checksums(config.output_dir, artifacts))
    if mismatched:
        raise ReproductionError("{} 个产物与清单不一致: {}".format(len(mismatched), ", ".join(mismatched)))
    print("复现一致: {} 个产物".format(len(manifest["artifacts"])))
    return artifacts


COMMANDS: Dict[str, Callable[[RunConfig, argparse.Namespace], List[Path]]] = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "train-classifiers": cmd_train_classifiers,
    "sample": cmd_sample,
    "eval": cmd_eval,
    "export-dot": cmd_export_dot,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "bound": cmd_bound,
    "ego": cmd_ego,
    "reproduce": cmd_reproduce,
}


def _error_line(code: str, message: str) -> str:
    return "error code={} message={}".format(code, json.dumps(message, ensure_ascii=False))


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    try:
        config = build_config(args)
        config.ensure_dirs()
        log_file = str(config.output_dir / config.log_file) if config.log_file else None
        setup_logger(level=config.log_level, log_file=log_file)

        resolve_inputs(args, config)
        artifacts = COMMANDS[args.command](config, args)
        write_manifest(args.command, manifest_args(args), config, artifacts)
    except CDGraphError as e:
        print(_error_line(e.code, str(e)), file=sys.stderr)
        return EXIT_DOMAIN_ERROR
    except OSError as e:
        print(_error_line("io_error", str(e)), file=sys.stderr)
        return EXIT_IO_ERROR
    except ValueError as e:
        print(_error_line("invalid_value", str(e)), file=sys.stderr)
        return EXIT_DOMAIN_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
