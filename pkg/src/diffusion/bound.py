"""负变分下界，按边（同质性项）与节点条件（传染性项）分开汇总"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from src.diffusion.forward import corrupt
from src.diffusion.schedule import mixed_posterior, posterior_one
from src.errors import EmptyCorpusError
from src.models import BoundTerms, CondGraph, NoiseSchedule
from src.network.header import DenoiserProtocol
from src.network.trunk import PROB_EPS
from src.utils.logger import get_logger
from src.utils.seeding import RngLike, as_rng

logger = get_logger(__name__)


def bernoulli_kl(q: np.ndarray, p: np.ndarray) -> float:
    """Σ KL(Bern(q) ‖ Bern(p))，q ∈ {0, 1} 处按 0·log0 = 0 处理"""
    q = np.asarray(q, dtype=np.float64)
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(q > 0, q * np.log(q / p), 0.0)
        t0 = np.where(q < 1, (1.0 - q) * np.log((1.0 - q) / (1.0 - p)), 0.0)
    return float((t1 + t0).sum())


def _nll(p: np.ndarray, x: np.ndarray) -> float:
    pc = np.clip(np.asarray(p, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    x = np.asarray(x, dtype=np.float64)
    return float(-(x * np.log(pc) + (1.0 - x) * np.log(1.0 - pc)).sum())


def _prior_kl(flip: float, count: int) -> float:
    """count 个变量上 KL(q(x_T | x_0) ‖ Bernoulli(1/2))"""
    per = 0.0
    for prob in (flip, 1.0 - flip):
        if prob > 0:
            per += prob * np.log(2.0 * prob)
    return count * per


def variational_bound(
    model: DenoiserProtocol, schedule: NoiseSchedule, g: CondGraph, rng: RngLike
) -> BoundTerms:
    """单张图的负变分下界估计。

    扩散项对 t = 2..T 各抽一个 x_t；先验项与 Bernoulli(1/2) 比较；重建项为 −log p(x_0 | x_1)。
    """
    rng = as_rng(rng)
    T = schedule.T
    n = g.n
    rows, cols = np.triu_indices(n, k=1)
    e0 = g.adj[rows, cols]

    diff_homo = 0.0
    diff_cont = 0.0
    for t in range(2, T + 1):
        noisy = corrupt(g, schedule, t, rng)
        pred = model.predict_clean(noisy, T)
        pred.validate(n)
        f, c = schedule.step_flip(t), schedule.cumulative_flip(t - 1)
        gt = noisy.graph
        for x0, xt, p_hat in ((g.x1, gt.x1, pred.px1), (g.x2, gt.x2, pred.px2)):
            diff_cont += bernoulli_kl(posterior_one(f, c, xt, x0), mixed_posterior(schedule, t, xt, p_hat))
        et = gt.adj[rows, cols]
        diff_homo += bernoulli_kl(
            posterior_one(f, c, et, e0), mixed_posterior(schedule, t, et, pred.pe[rows, cols])
        )

    flip_T = schedule.cumulative_flip(T)
    noisy = corrupt(g, schedule, 1, rng)
    pred = model.predict_clean(noisy, T)
    pred.validate(n)
    return BoundTerms(
        diffusion_homo=diff_homo,
        diffusion_cont=diff_cont,
        prior_homo=_prior_kl(flip_T, rows.size),
        prior_cont=_prior_kl(flip_T, 2 * n),
        recon_homo=_nll(pred.pe[rows, cols], e0),
        recon_cont=_nll(pred.px1, g.x1) + _nll(pred.px2, g.x2),
    )


def corpus_bound(
    model: DenoiserProtocol, schedule: NoiseSchedule, corpus: Sequence[CondGraph], rng: RngLike
) -> BoundTerms:
    """语料上的平均下界分项"""
    if not corpus:
        raise EmptyCorpusError("计算变分下界需要非空语料")
    rng = as_rng(rng)
    terms = [variational_bound(model, schedule, g, rng) for g in corpus]
    fields = ("diffusion_homo", "diffusion_cont", "prior_homo", "prior_cont", "recon_homo", "recon_cont")
    mean = BoundTerms(**{k: float(np.mean([getattr(b, k) for b in terms])) for k in fields})
    logger.info(
        "变分下界: total=%.4f (homo=%.4f, cont=%.4f)，%d 张图", mean.total, mean.homo, mean.cont, len(corpus)
    )
    return mean
