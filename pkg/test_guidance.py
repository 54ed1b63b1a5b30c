"""双条件分类器引导"""

import math

import numpy as np
import pytest

from conftest import triangle
from src.config import DenoiserConfig, GuidanceConfig, OptimizerConfig
from src.diffusion.schedule import make_schedule
from src.errors import CheckpointError, DegenerateLabelError, GraphInvariantError
from src.models import ClassifierRole, CondGraph, NoisyGraph
from src.network.checkpoint import load_classifier, load_classifiers, save_classifiers
from src.network.denoiser import DenoiserHyper
from src.network.features import extract_features
from src.network.guidance import (
    GraphClassifier,
    GuidanceClassifiers,
    classifier_accuracy,
    classifier_ratios,
    guide_bernoulli,
    majority_label,
    train_classifiers,
)
from src.network.header import GraphClassifierProtocol

# 主干全零（rounds=0, hidden=1）时 readout = [0, 密度, λ1, λ2, sin, cos]
_DENSITY = 1
_TINY = DenoiserHyper(rounds=0, hidden=1)


def _readout_classifier(role: ClassifierRole, condition: int, w_density: float, bias: float) -> GraphClassifier:
    clf = GraphClassifier(_TINY, role, condition)
    w = np.zeros(_TINY.hidden + _TINY.d_g)
    w[_DENSITY] = w_density
    return clf.with_params(clf.layout.flatten({"readout.w": w, "readout.c": np.array([bias])}))


def _constant(role: ClassifierRole, condition: int, bias: float = 0.0) -> GraphClassifier:
    return _readout_classifier(role, condition, 0.0, bias)


def _pair(x1=(1, 0), x2=(1, 1), edge=True) -> CondGraph:
    return CondGraph.from_edges(2, [(0, 1)] if edge else [], x1, x2)


class TestMajorityLabel:
    def test_strict_majority(self):
        g = CondGraph.empty(4).replace(x1=[1, 1, 1, 0], x2=[1, 1, 0, 0])
        lab = majority_label(g)
        assert (lab.label_c1, lab.label_c2) == (1, 0)
        assert lab.of(1) == 1

    def test_single_node(self):
        lab = majority_label(CondGraph.empty(1).replace(x1=[1]))
        assert (lab.label_c1, lab.label_c2) == (1, 0)

    def test_empty_rejected(self):
        with pytest.raises(GraphInvariantError):
            majority_label(CondGraph.empty(0))


class TestGuideBernoulli:
    def test_known_value(self):
        assert guide_bernoulli(0.5, 3.0, 1.0) == pytest.approx(0.75)

    def test_gamma_two(self):
        assert guide_bernoulli(0.5, 2.0, 2.0) == pytest.approx(0.8)

    def test_gamma_zero_is_identity(self):
        assert guide_bernoulli(0.3, 5.0, 0.0) == 0.3

    def test_unit_ratio_is_identity(self):
        p = np.array([0.1, 0.5, 0.9])
        np.testing.assert_array_equal(guide_bernoulli(p, np.ones(3), 2.5), p)

    def test_vectorized(self):
        out = guide_bernoulli(np.array([0.5, 0.5]), np.array([3.0, 1 / 3]), 1.0)
        np.testing.assert_allclose(out, [0.75, 0.25])

    def test_endpoints_preserved(self):
        out = guide_bernoulli(np.array([0.0, 1.0]), np.array([4.0, 0.25]), 1.0)
        np.testing.assert_allclose(out, [0.0, 1.0])


class TestClassifier:
    def test_zero_params_half(self, k3):
        clf = GraphClassifier(DenoiserHyper(rounds=1, hidden=3), ClassifierRole.OUTER, 2)
        assert clf.prob(NoisyGraph(k3, t=1), T=4) == pytest.approx(0.5)

    def test_output_clamped(self, k3):
        clf = _constant(ClassifierRole.OUTER, 2, bias=1000.0)
        p = clf.prob(NoisyGraph(k3, t=1), T=4)
        assert p == pytest.approx(1 - 1e-7)
        assert p < 1.0

    def test_empty_graph_rejected(self):
        clf = GraphClassifier(_TINY, ClassifierRole.OUTER, 2)
        with pytest.raises(GraphInvariantError):
            clf.prob(NoisyGraph(CondGraph.empty(0), t=1), T=4)

    def test_accuracy(self):
        clf = _readout_classifier(ClassifierRole.OUTER, 2, 10.0, -5.0)
        graphs = [_pair(edge=True), _pair(edge=False)]
        assert classifier_accuracy(clf, graphs, [1, 0], T=4) == pytest.approx(1.0)
        assert classifier_accuracy(clf, graphs, [0, 1], T=4) == pytest.approx(0.0)


class TestClassifierGradient:
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        upper = np.triu((rng.random((n, n)) < 0.5).astype(int), k=1)
        g = CondGraph(upper + upper.T, rng.integers(0, 2, n), rng.integers(0, 2, n))
        t = int(rng.integers(1, 11))
        clf = GraphClassifier(DenoiserHyper(rounds=2, hidden=5), ClassifierRole.INNER, 1)
        theta = clf.layout.init(rng)
        feats = extract_features(NoisyGraph(g, t=t), 10)
        y = seed % 2

        _, analytic = clf.loss_and_grad(theta, feats, g.adj, y)
        h = 1e-4
        numeric = np.zeros_like(theta)
        for k in range(theta.size):
            step = np.zeros_like(theta)
            step[k] = h
            up, _ = clf.loss_and_grad(theta + step, feats, g.adj, y)
            down, _ = clf.loss_and_grad(theta - step, feats, g.adj, y)
            numeric[k] = (up - down) / (2 * h)

        rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), np.linalg.norm(numeric))
        assert rel < 1e-4


class TestRatios:
    def test_constant_classifiers_give_unit_ratios(self, k3):
        pair = GuidanceClassifiers(
            outer=GraphClassifier(DenoiserHyper(rounds=1, hidden=3), ClassifierRole.OUTER, 2),
            inner=GraphClassifier(DenoiserHyper(rounds=1, hidden=3), ClassifierRole.INNER, 1),
        )
        r = classifier_ratios(pair, NoisyGraph(k3, t=2), T=4)
        np.testing.assert_array_equal(r.node1, np.ones(3))
        np.testing.assert_array_equal(r.node2, np.ones(3))
        np.testing.assert_array_equal(r.edge, np.ones((3, 3)))

    @pytest.mark.parametrize("edge", [True, False])
    def test_density_readout_edge_ratio(self, edge):
        # σ(a + b) / σ(b)，a = 2, b = −1 时恰为 e
        pair = GuidanceClassifiers(
            outer=_readout_classifier(ClassifierRole.OUTER, 2, 2.0, -1.0),
            inner=_constant(ClassifierRole.INNER, 1),
        )
        r = classifier_ratios(pair, NoisyGraph(_pair(edge=edge), t=2), T=4)
        assert r.edge[0, 1] == pytest.approx(math.e)
        assert r.edge[1, 0] == r.edge[0, 1]
        np.testing.assert_allclose(r.node1, [1.0, 1.0])

    def test_hard_gating_drops_inner(self):
        pair = GuidanceClassifiers(
            outer=_constant(ClassifierRole.OUTER, 2, bias=-1.0),
            inner=_readout_classifier(ClassifierRole.INNER, 1, 2.0, -1.0),
        )
        g = NoisyGraph(_pair(), t=2)
        assert classifier_ratios(pair, g, T=4, hard_gating=False).edge[0, 1] == pytest.approx(math.e)
        assert classifier_ratios(pair, g, T=4, hard_gating=True).edge[0, 1] == pytest.approx(1.0)

    def test_matches_two_point_evaluation(self):
        rng = np.random.default_rng(0)
        hyper = DenoiserHyper(rounds=1, hidden=3)
        outer = GraphClassifier(hyper, ClassifierRole.OUTER, 2)
        inner = GraphClassifier(hyper, ClassifierRole.INNER, 1)
        pair = GuidanceClassifiers(outer.with_params(outer.layout.init(rng)), inner.with_params(inner.layout.init(rng)))
        g = triangle(x1=(1, 0, 1), x2=(0, 1, 1))
        T, t = 6, 3

        def joint(x1):
            o, i = pair.scores(g.adj, np.array(x1), g.x2, t, T)
            return o * i

        r = classifier_ratios(pair, NoisyGraph(g, t), T)
        assert r.node1[1] == pytest.approx(joint([1, 1, 1]) / joint([1, 0, 1]))
        assert r.node1[0] == pytest.approx(joint([1, 0, 1]) / joint([0, 0, 1]))


def _label_corpus():
    return [
        triangle(x1=(1, 1, 1), x2=(1, 1, 1)),
        triangle(x1=(0, 0, 0), x2=(1, 1, 0)),
        triangle(x1=(1, 1, 0), x2=(0, 0, 0)),
        CondGraph.from_edges(2, [(0, 1)], [1, 0], [0, 0]),
    ]


class TestTrainClassifiers:
    opt = OptimizerConfig(lr=0.01, steps=3, batch_size=2)
    cfg = DenoiserConfig(rounds=1, hidden=3)

    def test_trains_both_roles(self):
        pair = train_classifiers(_label_corpus(), make_schedule(T=4), self.cfg, self.opt, GuidanceConfig(), seed=0)
        assert pair.outer.role is ClassifierRole.OUTER
        assert pair.outer.condition == 2
        assert pair.inner.condition == 1
        assert set(pair.results) == {"outer", "inner"}
        for result in pair.results.values():
            assert len(result.loss_trace) == 3
            assert 0.0 <= result.accuracy <= 1.0

    def test_deterministic(self):
        a = train_classifiers(_label_corpus(), make_schedule(T=4), self.cfg, self.opt, seed=5)
        b = train_classifiers(_label_corpus(), make_schedule(T=4), self.cfg, self.opt, seed=5)
        np.testing.assert_array_equal(a.outer.params, b.outer.params)
        np.testing.assert_array_equal(a.inner.params, b.inner.params)

    def test_swapped_conditions(self):
        pair = train_classifiers(
            _label_corpus() + [triangle(x1=(1, 1, 1), x2=(0, 0, 0))],
            make_schedule(T=4), self.cfg, self.opt, GuidanceConfig(outer_condition=1), seed=0,
        )
        assert pair.outer.condition == 1
        assert pair.inner.condition == 2

    def test_no_outer_positives(self):
        corpus = [triangle(x2=(0, 0, 0)), triangle(x2=(1, 0, 0))]
        with pytest.raises(DegenerateLabelError):
            train_classifiers(corpus, make_schedule(T=4), self.cfg, self.opt, seed=0)

    def test_single_outer_label(self):
        corpus = [triangle(), triangle(x1=(0, 0, 1))]
        with pytest.raises(DegenerateLabelError):
            train_classifiers(corpus, make_schedule(T=4), self.cfg, self.opt, seed=0)


class TestClassifierCheckpoint:
    def test_round_trip(self, tmp_path):
        pair = GuidanceClassifiers(
            outer=_readout_classifier(ClassifierRole.OUTER, 2, 2.0, -1.0),
            inner=_constant(ClassifierRole.INNER, 1, bias=0.3),
        )
        outer_path, inner_path = tmp_path / "outer.json", tmp_path / "inner.json"
        save_classifiers(pair, outer_path, inner_path, seed=0)
        loaded = load_classifiers(outer_path, inner_path)
        np.testing.assert_array_equal(loaded.outer.params, pair.outer.params)
        assert loaded.inner.condition == 1
        assert loaded.inner.role is ClassifierRole.INNER

    def test_role_mismatch(self, tmp_path):
        pair = GuidanceClassifiers(
            outer=_constant(ClassifierRole.OUTER, 2),
            inner=_constant(ClassifierRole.INNER, 1),
        )
        outer_path, inner_path = tmp_path / "outer.json", tmp_path / "inner.json"
        save_classifiers(pair, outer_path, inner_path, seed=0)
        with pytest.raises(CheckpointError):
            load_classifier(inner_path, expected_role=ClassifierRole.OUTER)


def test_classifier_satisfies_protocol():
    assert isinstance(_constant(ClassifierRole.OUTER, 2), GraphClassifierProtocol)
