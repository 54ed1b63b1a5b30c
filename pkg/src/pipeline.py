"""主编排器 - 串联5个阶段

阶段1: 语料准备（合成或读入数据集）
阶段2: 去噪网络训练
阶段3: 引导分类器训练
阶段4: 采样（无引导 + 引导，同一采样种子）
阶段5: 评估
"""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from src.config import RunConfig
from src.datagen.synthetic import generate_corpus
from src.diffusion.bound import corpus_bound
from src.diffusion.forward import dependency_profile
from src.diffusion.sampler import Guidance, run_sampler
from src.diffusion.schedule import schedule_from_config
from src.errors import ConfigError, UndefinedCorrelationError
from src.evaluation.header import EvaluatorProtocol
from src.evaluation.metrics import evaluate
from src.graph.core import condition_correlation, contingency, correlation_regime, validate_corpus
from src.graph.io import load_dataset, save_corpus
from src.models import (
    BoundTerms,
    CondGraph,
    ContagionParam,
    EvalReport,
    NoiseSchedule,
    PipelineResult,
    SampleResult,
    SampleRun,
)
from src.network.checkpoint import save_classifiers, save_denoiser
from src.network.denoiser import DenoiserModel, train
from src.network.guidance import GuidanceClassifiers, train_classifiers
from src.utils.file_ops import ensure_dir, safe_write_json
from src.utils.logger import get_logger
from src.utils.report_generator import generate_report, generate_sweep_summary, write_bound
from src.utils.seeding import STREAM_BOUND, derive_rng

logger = get_logger(__name__)

# 产物文件名
CORPUS_EDGES = "corpus_edges.txt"
CORPUS_ATTRS = "corpus_attrs.csv"
CORPUS_PROFILE = "corpus_profile.json"
DENOISER_CKPT = "denoiser.json"
DENOISER_LOSS = "denoiser_loss.json"
BOUND_FILE = "bound.json"
OUTER_CKPT = "classifier_outer.json"
INNER_CKPT = "classifier_inner.json"
CLASSIFIER_LOSS = "classifiers_loss.json"

BOUND_MAX_GRAPHS = 20


def samples_paths(output_dir: Path, tag: str) -> Tuple[Path, Path]:
    output_dir = Path(output_dir)
    return output_dir / "samples_{}_edges.txt".format(tag), output_dir / "samples_{}_attrs.csv".format(tag)


def measure_correlation(corpus: Sequence[CondGraph]) -> Optional[float]:
    try:
        return condition_correlation(corpus)
    except UndefinedCorrelationError:
        return None


def corpus_summary(corpus: Sequence[CondGraph], contagion: Optional[ContagionParam] = None) -> Dict[str, Any]:
    """语料画像：规模、条件列联表、相关性档位、同质性/传染性"""
    rho = measure_correlation(corpus)
    return {
        "format_version": 1,
        "num_graphs": len(corpus),
        "node_counts": [g.n for g in corpus],
        "contingency": contingency(corpus).tolist(),
        "correlation": rho,
        "regime": correlation_regime(rho) if rho is not None else None,
        "profile": dependency_profile(corpus, contagion).to_dict(),
    }


class Pipeline:
    """条件扩散图生成流水线，按顺序调用5个阶段。

    每个阶段都可以单独调用（CLI 子命令即如此），产物写入 config.output_dir。
    """

    def __init__(self, config: Optional[RunConfig] = None) -> None:
        self.config = config or RunConfig()
        self.config.ensure_dirs()
        self.schedule: NoiseSchedule = schedule_from_config(self.config.schedule)
        self.artifacts: List[Path] = []
        self.evaluator: EvaluatorProtocol = evaluate

    @property
    def contagion(self) -> ContagionParam:
        return ContagionParam(self.config.contagion_p)

    @property
    def output_dir(self) -> Path:
        return self.config.output_dir

    def _record(self, *paths: Path) -> None:
        for p in paths:
            if p not in self.artifacts:
                self.artifacts.append(p)

    # ── 阶段1 ──
    def prepare_corpus(self) -> List[CondGraph]:
        cfg = self.config
        if cfg.dataset_edges is not None:
            corpus = load_dataset(cfg.dataset_edges, cfg.dataset_attrs)
        else:
            corpus = generate_corpus(cfg.synth)
        validate_corpus(corpus, cfg.max_nodes)

        edges, attrs = self.output_dir / CORPUS_EDGES, self.output_dir / CORPUS_ATTRS
        save_corpus(corpus, edges, attrs)
        profile_path = self.output_dir / CORPUS_PROFILE
        safe_write_json(profile_path, corpus_summary(corpus, self.contagion))
        self._record(edges, attrs, profile_path)
        return corpus

    # ── 阶段2 ──
    def train_denoiser(self, corpus: Sequence[CondGraph], with_bound: bool = True) -> DenoiserModel:
        cfg = self.config
        result = train(corpus, self.schedule, cfg.denoiser, cfg.optimizer, seed=cfg.seed)
        model: DenoiserModel = result.model

        ckpt = self.output_dir / DENOISER_CKPT
        save_denoiser(model, ckpt, cfg.seed)
        loss_path = self.output_dir / DENOISER_LOSS
        safe_write_json(loss_path, {"format_version": 1, "seed": cfg.seed, "loss": result.loss_trace})
        self._record(ckpt, loss_path)

        if with_bound:
            self.bound(model, corpus)
        return model

    def bound(self, model: DenoiserModel, corpus: Sequence[CondGraph]) -> BoundTerms:
        """在语料前 BOUND_MAX_GRAPHS 张图上估计负变分下界"""
        subset = list(corpus[:BOUND_MAX_GRAPHS])
        terms = corpus_bound(model, self.schedule, subset, derive_rng(self.config.seed, STREAM_BOUND))
        path = write_bound(terms, self.output_dir / BOUND_FILE, len(subset))
        self._record(path)
        return terms

    # ── 阶段3 ──
    def train_classifiers(self, corpus: Sequence[CondGraph]) -> GuidanceClassifiers:
        cfg = self.config
        classifiers = train_classifiers(
            corpus, self.schedule, cfg.denoiser, cfg.classifier_optimizer, cfg.guidance, seed=cfg.seed
        )
        outer, inner = self.output_dir / OUTER_CKPT, self.output_dir / INNER_CKPT
        save_classifiers(classifiers, outer, inner, cfg.seed)
        loss_path = self.output_dir / CLASSIFIER_LOSS
        safe_write_json(
            loss_path,
            {
                "format_version": 1,
                "seed": cfg.seed,
                **{
                    role: {"loss": r.loss_trace, "accuracy": r.accuracy}
                    for role, r in sorted(classifiers.results.items())
                },
            },
        )
        self._record(outer, inner, loss_path)
        return classifiers

    # ── 阶段4 ──
    def sample(
        self,
        model: DenoiserModel,
        node_counts: Sequence[int],
        classifiers: Optional[GuidanceClassifiers] = None,
        gamma: Optional[float] = None,
    ) -> List[CondGraph]:
        """classifiers 为 None 时无引导采样，产物标签为 unguided，否则为 guided"""
        cfg = self.config
        run = SampleRun(
            seed=cfg.sampling.seed,
            num_graphs=cfg.sampling.num_graphs,
            node_counts=list(node_counts),
            trace_enabled=cfg.sampling.trace,
        )
        guidance = None
        tag = "unguided"
        if classifiers is not None:
            g = cfg.guidance
            guidance = Guidance(
                classifiers,
                g.gamma if gamma is None else gamma,
                g.hard_gating,
                g.guide_reconstruction,
            )
            tag = "guided"

        result = run_sampler(model, self.schedule, run, guidance, cfg.sampling.workers)
        edges, attrs = samples_paths(self.output_dir, tag)
        save_corpus(result.graphs, edges, attrs)
        self._record(edges, attrs)
        if run.trace_enabled:
            self._write_traces(result, tag)
        return result.graphs

    def _write_traces(self, result: SampleResult, tag: str) -> None:
        """每条链一对文件，图编号即时间步（T, T−1, ..., 0）"""
        trace_dir = ensure_dir(self.output_dir / "traces")
        for i, snapshots in enumerate(result.traces):
            edges = trace_dir / "{}_{:04d}_edges.txt".format(tag, i)
            attrs = trace_dir / "{}_{:04d}_attrs.csv".format(tag, i)
            save_corpus([g for _, g in snapshots], edges, attrs)
            self._record(edges, attrs)

    # ── 阶段5 ──
    def evaluate(
        self, reference: Sequence[CondGraph], generated: Sequence[CondGraph], tag: str
    ) -> EvalReport:
        report = self.evaluator(reference, generated, self.config.eval, self.contagion)
        self._record(*generate_report(report, self.output_dir, tag))
        return report

    def run(self) -> PipelineResult:
        """执行完整流水线"""
        logger.info("Pipeline 开始: 输出目录 %s，种子 train=%d sample=%d synth=%d",
                    self.output_dir, self.config.seed, self.config.sampling.seed, self.config.synth.seed)

        logger.info("=== 阶段1: 语料准备 ===")
        corpus = self.prepare_corpus()
        rho = measure_correlation(corpus)
        logger.info("阶段1 完成: %d 张图", len(corpus))

        logger.info("=== 阶段2: 去噪网络训练 ===")
        model = self.train_denoiser(corpus, with_bound=False)
        terms = self.bound(model, corpus)
        logger.info("阶段2 完成: 变分下界 %.4f", terms.total)

        logger.info("=== 阶段3: 引导分类器训练 ===")
        classifiers = self.train_classifiers(corpus)
        logger.info("阶段3 完成")

        logger.info("=== 阶段4: 采样 ===")
        counts = [g.n for g in corpus]
        unguided = self.sample(model, counts)
        guided = self.sample(model, counts, classifiers)
        logger.info("阶段4 完成: 无引导 %d 张，引导 %d 张", len(unguided), len(guided))

        logger.info("=== 阶段5: 评估 ===")
        reports = {
            "unguided": self.evaluate(corpus, unguided, "unguided"),
            "guided": self.evaluate(corpus, guided, "guided"),
        }
        logger.info(
            "阶段5 完成: validity 无引导 %.4f → 引导 %.4f",
            reports["unguided"].validity, reports["guided"].validity,
        )
        logger.info("Pipeline 完成: %d 个产物 -> %s", len(self.artifacts), self.output_dir)

        return PipelineResult(
            output_dir=self.output_dir,
            corpus_size=len(corpus),
            correlation=rho,
            reports=reports,
            artifacts=list(self.artifacts),
            bound=terms,
        )


def sweep_dir(output_dir: Path, rho: float) -> Path:
    return Path(output_dir) / "rho_{:+.3f}".format(rho)


def run_sweep(config: RunConfig, rhos: Sequence[float]) -> Tuple[List[Dict[str, Any]], List[Path]]:
    """相关性敏感性实验：对每个 ρ 目标在子目录中跑完整流水线并汇总。

    Raises:
        ConfigError: 配置了外部数据集（ρ 只对合成语料有意义），或 rhos 为空
    """
    if config.dataset_edges is not None:
        raise ConfigError("sweep 只适用于合成语料，请去掉 dataset_edges/dataset_attrs")
    if not rhos:
        raise ConfigError("sweep 需要至少一个 ρ 目标")

    rows: List[Dict[str, Any]] = []
    artifacts: List[Path] = []
    for k, rho in enumerate(rhos, 1):
        logger.info("敏感性实验 %d/%d: ρ 目标 %+.3f", k, len(rhos), rho)
        sub = dataclasses.replace(
            config,
            synth=dataclasses.replace(config.synth, rho_target=float(rho)),
            output_dir=sweep_dir(config.output_dir, rho),
        )
        result = Pipeline(sub).run()
        un, gd = result.reports["unguided"], result.reports["guided"]
        rows.append({
            "rho_target": float(rho),
            "rho_measured": result.correlation,
            "regime": correlation_regime(result.correlation) if result.correlation is not None else None,
            "validity_unguided": un.validity,
            "validity_guided": gd.validity,
            "mmd_unguided": un.mmd_clustering,
            "mmd_guided": gd.mmd_clustering,
        })
        artifacts.extend(result.artifacts)
    artifacts.extend(generate_sweep_summary(rows, config.output_dir))
    return rows, artifacts
