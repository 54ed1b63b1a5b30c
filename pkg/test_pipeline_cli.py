"""流水线与命令行：子命令串联、错误码、清单复现与敏感性实验"""

import dataclasses
import json

import numpy as np
import pytest

from src.config import RunConfig, SamplingConfig
from src.errors import ConfigError
from src.graph.io import load_dataset, save_corpus
from src.main import main
from src.models import CondGraph
from src.pipeline import Pipeline, run_sweep
from src.utils.report_generator import load_report


@pytest.fixture
def tiny_config(tmp_path, tiny_config_dict) -> RunConfig:
    return RunConfig.from_dict({**tiny_config_dict, "output_dir": str(tmp_path / "out")})


class TestPipeline:
    def test_run(self, tiny_config):
        result = Pipeline(tiny_config).run()
        assert result.corpus_size == 30
        assert set(result.reports) == {"unguided", "guided"}
        for report in result.reports.values():
            assert 0.0 <= report.validity <= 1.0
            assert report.sample_sizes["generated"] == 8
        assert result.bound.total > 0.0
        assert all(p.exists() for p in result.artifacts)
        names = {p.name for p in result.artifacts}
        assert {"denoiser.json", "classifier_outer.json", "report_guided.json", "bound.json"} <= names

    def test_deterministic(self, tmp_path, tiny_config_dict):
        a = RunConfig.from_dict({**tiny_config_dict, "output_dir": str(tmp_path / "a")})
        b = RunConfig.from_dict({**tiny_config_dict, "output_dir": str(tmp_path / "b")})
        ra, rb = Pipeline(a).run(), Pipeline(b).run()
        assert [p.name for p in ra.artifacts] == [p.name for p in rb.artifacts]
        for pa, pb in zip(ra.artifacts, rb.artifacts):
            assert pa.read_bytes() == pb.read_bytes()

    def test_contagion_param_reaches_profiles(self, tmp_path, tiny_config_dict):
        cfg = RunConfig.from_dict({**tiny_config_dict, "output_dir": str(tmp_path / "p"), "contagion_p": 0.9})
        result = Pipeline(cfg).run()
        corpus_profile = json.loads((cfg.output_dir / "corpus_profile.json").read_text(encoding="utf-8"))
        assert [c["contagion_p"] for c in corpus_profile["profile"]["conditions"]] == [0.9, 0.9]
        for report in result.reports.values():
            assert all(c.contagion_p == 0.9 for c in report.reference_profile.conditions)
            assert all(c.contagion_loglik < 0.0 for c in report.generated_profile.conditions)
        assert "p=0.90" in (cfg.output_dir / "report_guided.md").read_text(encoding="utf-8")

    def test_traces_written(self, tiny_config_dict, tmp_path):
        data = {**tiny_config_dict, "output_dir": str(tmp_path / "t")}
        data["sampling"] = {"num_graphs": 2, "trace": True}
        cfg = RunConfig.from_dict(data)
        pipeline = Pipeline(cfg)
        corpus = pipeline.prepare_corpus()
        model = pipeline.train_denoiser(corpus, with_bound=False)
        pipeline.sample(model, [4])
        snaps = load_dataset(cfg.output_dir / "traces" / "unguided_0000_edges.txt",
                             cfg.output_dir / "traces" / "unguided_0000_attrs.csv")
        assert len(snaps) == 5
        assert all(g.n == 4 for g in snaps)

    def test_sweep(self, tiny_config):
        rows, artifacts = run_sweep(tiny_config, [0.0, 0.1])
        assert [r["rho_target"] for r in rows] == [0.0, 0.1]
        assert (tiny_config.output_dir / "rho_+0.000" / "report_guided.json").exists()
        summary = json.loads((tiny_config.output_dir / "sweep_summary.json").read_text(encoding="utf-8"))
        assert len(summary["rows"]) == 2
        assert artifacts[-1].name == "sweep_summary.json"

    def test_sweep_rejects_dataset(self, tmp_path, tiny_config_dict, k3):
        edges, attrs = tmp_path / "e.txt", tmp_path / "a.csv"
        save_corpus([k3], edges, attrs)
        cfg = RunConfig.from_dict({**tiny_config_dict, "dataset_edges": str(edges), "dataset_attrs": str(attrs)})
        with pytest.raises(ConfigError):
            run_sweep(cfg, [0.0])


@pytest.mark.slow
class TestGuidanceGain:
    """默认训练设置、γ = 1 下，引导把有效性至少提高 0.2，且聚类 MMD 不超过无引导的 1.5 倍（3 个种子取平均）"""

    def test_guidance_improves_validity(self, tmp_path):
        gains, guided_mmd, plain_mmd = [], [], []
        for seed in range(3):
            base = RunConfig(output_dir=tmp_path / "seed{}".format(seed), log_file=None)
            cfg = dataclasses.replace(
                base,
                seed=seed,
                sampling=SamplingConfig(num_graphs=60, seed=seed),
                synth=dataclasses.replace(base.synth, seed=seed),
            )
            assert cfg.guidance.gamma == 1.0
            reports = Pipeline(cfg).run().reports
            gains.append(reports["guided"].validity - reports["unguided"].validity)
            guided_mmd.append(reports["guided"].mmd_clustering)
            plain_mmd.append(reports["unguided"].mmd_clustering)

        assert np.mean(gains) >= 0.2
        assert np.mean(guided_mmd) <= 1.5 * np.mean(plain_mmd)


def _cli(*args):
    return main([str(a) for a in args])


class TestCLI:
    def test_step_by_step(self, tmp_path, tiny_config_file):
        out = tmp_path / "cli"
        common = ["--config", tiny_config_file, "--output-dir", out]
        assert _cli("gen-data", *common) == 0
        assert _cli("train", *common) == 0
        assert _cli("train-classifiers", *common) == 0
        assert _cli("sample", *common) == 0
        assert _cli("sample", *common, "--guided", "--gamma", "2.0", "--num-graphs", "3") == 0
        assert _cli("eval", *common) == 0

        report = load_report(out / "report_eval.json")
        assert report.sample_sizes["generated"] == 8
        guided = load_dataset(out / "samples_guided_edges.txt", out / "samples_guided_attrs.csv")
        assert len(guided) == 3
        for command in ("gen-data", "train", "train-classifiers", "sample", "eval"):
            assert (out / "manifest_{}.json".format(command)).exists()
        assert (out / "bound.json").exists()

    def test_eval_corpus_against_itself(self, tmp_path, tiny_config_file):
        out = tmp_path / "self"
        common = ["--config", tiny_config_file, "--output-dir", out]
        assert _cli("gen-data", *common) == 0
        assert _cli(
            "eval", *common,
            "--generated-edges", out / "corpus_edges.txt",
            "--generated-attrs", out / "corpus_attrs.csv",
            "--tag", "self",
        ) == 0
        report = load_report(out / "report_self.json")
        assert (report.rel_err_nodes, report.rel_err_edges, report.rel_err_density) == (0.0, 0.0, 0.0)
        assert report.mmd_clustering == 0.0

    def test_export_dot(self, tmp_path, tiny_config_file):
        out = tmp_path / "dot"
        common = ["--config", tiny_config_file, "--output-dir", out]
        assert _cli("gen-data", *common) == 0
        assert _cli("export-dot", *common, "--prefix", "g") == 0
        files = sorted((out / "dot").glob("g_*.dot"))
        assert len(files) == 30
        assert files[0].name == "g_0000.dot"

    def test_ego(self, tmp_path):
        star = CondGraph.from_edges(5, [(0, k) for k in range(1, 5)], [1] * 5, [1] * 5)
        edges, attrs = tmp_path / "big_edges.txt", tmp_path / "big_attrs.csv"
        edges.write_text("".join("{} {}\n".format(u, v) for u, v in star.edges()), encoding="utf-8")
        attrs.write_text("node,c1,c2\n" + "".join("{},1,1\n".format(i) for i in range(5)), encoding="utf-8")
        out = tmp_path / "ego"
        assert _cli("ego", "--edges", edges, "--attrs", attrs, "--output-dir", out) == 0
        corpus = load_dataset(out / "corpus_edges.txt", out / "corpus_attrs.csv")
        assert [g.n for g in corpus] == [5, 2, 2, 2, 2]

    def test_missing_corpus_is_io_error(self, tmp_path, tiny_config_file, capsys):
        code = _cli("train", "--config", tiny_config_file, "--output-dir", tmp_path / "empty")
        assert code == 2
        assert "error code=io_error" in capsys.readouterr().err

    def test_invalid_config(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schedule": {"T": 0}}), encoding="utf-8")
        assert _cli("gen-data", "--config", path, "--output-dir", tmp_path / "o") == 1
        err = capsys.readouterr().err.strip().splitlines()[-1]
        assert err.startswith("error code=invalid_config message=")

    def test_dataset_format_error(self, tmp_path, tiny_config_file, capsys):
        edges, attrs = tmp_path / "e.txt", tmp_path / "a.csv"
        edges.write_text("0 0\n", encoding="utf-8")
        attrs.write_text("node,c1,c2\n0,1,1\n", encoding="utf-8")
        code = _cli("train", "--config", tiny_config_file, "--output-dir", tmp_path / "o",
                    "--edges", edges, "--attrs", attrs)
        assert code == 1
        assert "error code=dataset_format" in capsys.readouterr().err

    def test_seed_override_recorded(self, tmp_path, tiny_config_file):
        out = tmp_path / "seed"
        assert _cli("gen-data", "--config", tiny_config_file, "--output-dir", out, "--seed", "9") == 0
        manifest = json.loads((out / "manifest_gen-data.json").read_text(encoding="utf-8"))
        assert manifest["seeds"] == {"train": 9, "sampling": 9, "synth": 9}
        assert manifest["args"]["config"] == str(tiny_config_file.resolve())


class TestReproduce:
    def test_reproduce_run(self, tmp_path, tiny_config_file):
        first, second = tmp_path / "first", tmp_path / "second"
        assert _cli("run", "--config", tiny_config_file, "--output-dir", first) == 0
        manifest = first / "manifest_run.json"
        assert _cli("reproduce", "--manifest", manifest, "--output-dir", second) == 0
        original = json.loads(manifest.read_text(encoding="utf-8"))
        replayed = json.loads((second / "manifest_run.json").read_text(encoding="utf-8"))
        assert replayed["artifacts"] == original["artifacts"]
        assert replayed["config_hash"] != ""

    def test_reproduce_gen_data(self, tmp_path, tiny_config_file):
        first, second = tmp_path / "first", tmp_path / "second"
        assert _cli("gen-data", "--config", tiny_config_file, "--output-dir", first) == 0
        assert _cli("reproduce", "--manifest", first / "manifest_gen-data.json", "--output-dir", second) == 0
        assert (second / "corpus_edges.txt").read_bytes() == (first / "corpus_edges.txt").read_bytes()

    def test_same_directory_rejected(self, tmp_path, tiny_config_file, capsys):
        first = tmp_path / "first"
        assert _cli("gen-data", "--config", tiny_config_file, "--output-dir", first) == 0
        code = _cli("reproduce", "--manifest", first / "manifest_gen-data.json", "--output-dir", first)
        assert code == 1
        assert "error code=invalid_config" in capsys.readouterr().err

    def test_tampered_artifact(self, tmp_path, tiny_config_file, capsys):
        first, second = tmp_path / "first", tmp_path / "second"
        assert _cli("gen-data", "--config", tiny_config_file, "--output-dir", first) == 0
        path = first / "manifest_gen-data.json"
        data = json.loads(path.read_text(encoding="utf-8"))
        data["artifacts"]["corpus_edges.txt"] = "0" * 64
        path.write_text(json.dumps(data), encoding="utf-8")
        assert _cli("reproduce", "--manifest", path, "--output-dir", second) == 1
        assert "error code=reproduction_mismatch" in capsys.readouterr().err
