"""配置、清单与日志"""

import json
import logging

import pytest

from src.config import RunConfig, SynthConfig, config_hash, correlation_bounds, load_config
from src.errors import ConfigError
from src.utils.file_ops import get_file_hash, safe_write_json
from src.utils.logger import ROOT_LOGGER, get_logger, setup_logger
from src.utils.manifest import (
    artifact_checksums,
    compare_checksums,
    load_manifest,
    manifest_path,
    write_manifest,
)


class TestRunConfig:
    def test_default(self):
        cfg = load_config(None)
        assert cfg.schedule.T == 50
        assert cfg.guidance.inner_condition == 1

    def test_round_trip(self, tmp_path):
        cfg = RunConfig.from_dict({"seed": 3, "synth": {"num_graphs": 10}, "output_dir": str(tmp_path)})
        again = RunConfig.from_dict(cfg.to_dict())
        assert again.to_dict() == cfg.to_dict()
        assert again.synth.num_graphs == 10

    def test_partial_section_keeps_run_defaults(self):
        cfg = RunConfig.from_dict({"classifier_optimizer": {"batch_size": 4}})
        assert cfg.classifier_optimizer.batch_size == 4
        assert cfg.classifier_optimizer.lr == RunConfig().classifier_optimizer.lr
        assert cfg.classifier_optimizer.steps == RunConfig().classifier_optimizer.steps

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"sed": 1})

    def test_unknown_section_field(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"schedule": {"steps": 10}})

    def test_bad_version(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"format_version": 2})

    @pytest.mark.parametrize(
        "data",
        [
            {"schedule": {"T": 0}},
            {"schedule": {"beta_min": 0.5, "beta_max": 0.1}},
            {"contagion_p": 0.5},
            {"guidance": {"gamma": -1}},
            {"sampling": {"num_graphs": 0}},
            {"eval": {"validity_mode": "any"}},
            {"synth": {"p_in": 0.1, "p_out": 0.3}},
            {"synth": {"base_rate": 0.2, "rho_target": -0.5}},
        ],
    )
    def test_invalid_values(self, data):
        with pytest.raises(ConfigError):
            RunConfig.from_dict(data)

    def test_dataset_paths_must_come_together(self, tmp_path):
        edges = tmp_path / "e.txt"
        edges.write_text("")
        with pytest.raises(ConfigError):
            RunConfig(dataset_edges=edges)

    def test_dataset_path_must_exist(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig(dataset_edges=tmp_path / "e.txt", dataset_attrs=tmp_path / "a.csv")

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "none.json")

    def test_hash_stable_and_sensitive(self):
        assert config_hash(RunConfig()) == config_hash(RunConfig())
        assert config_hash(RunConfig()) != config_hash(RunConfig(seed=1))

    def test_correlation_bounds(self):
        assert correlation_bounds(0.5) == (-1.0, 1.0)
        lo, hi = correlation_bounds(0.2)
        assert lo == pytest.approx(-0.25)
        assert hi == 1.0

    def test_synth_infeasible_target(self):
        with pytest.raises(ConfigError):
            SynthConfig(base_rate=0.2, rho_target=-0.4)


class TestManifest:
    def test_write_and_load(self, tmp_path):
        cfg = RunConfig(output_dir=tmp_path, seed=4)
        artifact = tmp_path / "sub" / "a.json"
        safe_write_json(artifact, {"x": 1})
        path = write_manifest("gen-data", {"seed": 4}, cfg, [artifact])
        assert path == manifest_path(tmp_path, "gen-data")
        data = load_manifest(path)
        assert data["command"] == "gen-data"
        assert data["seeds"] == {"train": 4, "sampling": 0, "synth": 0}
        assert data["config_hash"] == config_hash(cfg)
        assert data["artifacts"] == {"sub/a.json": get_file_hash(artifact)}

    def test_compare_checksums(self):
        expected = {"a": "1", "b": "2", "c": "3"}
        actual = {"a": "1", "b": "x"}
        assert compare_checksums(expected, actual) == ["b", "c"]
        assert compare_checksums(expected, dict(expected)) == []

    def test_checksums_keyed_by_relative_path(self, tmp_path):
        f = tmp_path / "x.txt"
        f.write_text("hi", encoding="utf-8")
        assert list(artifact_checksums(tmp_path, [f, f])) == ["x.txt"]

    def test_bad_format(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"format_version": 9}), encoding="utf-8")
        with pytest.raises(ConfigError):
            load_manifest(path)

    def test_missing(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_manifest(tmp_path / "m.json")


class TestLogger:
    def test_console_handler_not_duplicated(self):
        setup_logger(level="DEBUG")
        setup_logger(level="INFO")
        root = logging.getLogger(ROOT_LOGGER)
        consoles = [h for h in root.handlers if getattr(h, "_cdgraph_console", False)]
        assert len(consoles) == 1
        assert root.level == logging.INFO

    def test_file_handler(self, tmp_path):
        log_file = tmp_path / "logs" / "run.log"
        setup_logger(log_file=str(log_file))
        get_logger("src.test").info("写入日志")
        for h in logging.getLogger(ROOT_LOGGER).handlers:
            h.flush()
        assert "写入日志" in log_file.read_text(encoding="utf-8")
