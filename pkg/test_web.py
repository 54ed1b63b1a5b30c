"""Web 接口：上传、任务、进度、历史"""

import asyncio
import contextvars
import json
import logging
import time

import pytest
from fastapi.testclient import TestClient

from src.config import RunConfig
from src.diffusion.sampler import sample_unconditional
from src.diffusion.schedule import make_schedule
from src.models import SampleRun
from src.network.denoiser import DenoiserHyper, DenoiserModel
from src.web import app as web_app
from src.web.pipeline_wrapper import Job, ProgressHandler, _current_job

POLL_TIMEOUT = 60.0


@pytest.fixture
def client(tmp_path, monkeypatch):
    monkeypatch.setattr(web_app, "_UPLOAD_DIR", tmp_path / "uploads")
    monkeypatch.setattr(web_app, "_OUTPUT_DIR", tmp_path / "jobs")
    with TestClient(web_app.app) as c:
        yield c


def _upload(client, edges: str, attrs: str):
    files = {
        "edges": ("edges.txt", edges.encode("utf-8"), "text/plain"),
        "attrs": ("attrs.csv", attrs.encode("utf-8"), "text/csv"),
    }
    return client.post("/api/upload", files=files)


def _wait(client, job_id: str):
    deadline = time.monotonic() + POLL_TIMEOUT
    while True:
        resp = client.get("/api/results/{}".format(job_id))
        if resp.status_code != 202 or time.monotonic() > deadline:
            return resp
        time.sleep(0.2)


class TestUpload:
    def test_valid_dataset(self, client, tmp_path):
        resp = _upload(client, "0 1\n1 2\n", "node,c1,c2\n0,1,1\n1,1,0\n2,0,1\n")
        assert resp.status_code == 200
        body = resp.json()
        assert body["num_graphs"] == 1
        assert body["node_counts"] == [3]
        assert (tmp_path / "uploads" / body["dataset_id"] / "edges.txt").exists()

    def test_invalid_dataset(self, client, tmp_path):
        resp = _upload(client, "0 0\n", "node,c1,c2\n0,1,1\n")
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "dataset_format"
        assert list((tmp_path / "uploads").iterdir()) == []

    def test_not_utf8(self, client, tmp_path):
        files = {
            "edges": ("edges.txt", b"0 1\n", "text/plain"),
            "attrs": ("attrs.csv", b"\xff\xfe", "text/csv"),
        }
        resp = client.post("/api/upload", files=files)
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "dataset_format"
        assert list((tmp_path / "uploads").iterdir()) == []


class TestRun:
    def test_unknown_dataset(self, client):
        resp = client.post("/api/run", data={"dataset_id": "nope"})
        assert resp.status_code == 404

    def test_invalid_config(self, client):
        resp = client.post("/api/run", data={"config": json.dumps({"schedule": {"T": 0}})})
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "invalid_config"

    def test_config_not_json(self, client):
        resp = client.post("/api/run", data={"config": "{"})
        assert resp.status_code == 400

    def test_unknown_job(self, client):
        assert client.get("/api/results/missing").status_code == 404
        assert client.get("/api/progress/missing").status_code == 404

    def test_full_job(self, client, tiny_config_dict):
        resp = client.post("/api/run", data={"config": json.dumps(tiny_config_dict), "seed": "3", "gamma": "2.0"})
        assert resp.status_code == 200
        job_id = resp.json()["job_id"]

        result = _wait(client, job_id)
        assert result.status_code == 200
        body = result.json()
        assert body["status"] == "completed"
        assert body["corpus_size"] == 30
        assert set(body["reports"]) == {"unguided", "guided"}
        assert "report_guided.json" in body["artifacts"]
        assert "validity" in body["markdown"]["guided"]

        stream = client.get("/api/progress/{}".format(job_id))
        assert "event: done" in stream.text

        history = client.get("/api/history", params={"search": job_id}).json()
        assert history["total"] == 2
        item = history["items"][0]
        report = client.get("/api/history/{}".format(item["files"]["json"]))
        assert report.status_code == 200
        assert report.json()["tag"] == item["tag"]

        jobs = client.get("/api/jobs").json()["jobs"]
        assert job_id in {j["job_id"] for j in jobs}

        assert client.post("/api/history/delete", data={"job": job_id}).status_code == 200
        assert client.get("/api/history", params={"search": job_id}).json()["total"] == 0

    def test_failed_job(self, client, tiny_config_dict):
        # 所有节点都不满足 c2 时 outer 分类器没有正例
        edges = "0 1\n"
        attrs = "node,c1,c2\n0,1,0\n1,0,0\n"
        dataset_id = _upload(client, edges, attrs).json()["dataset_id"]
        resp = client.post("/api/run", data={"dataset_id": dataset_id, "config": json.dumps(tiny_config_dict)})
        result = _wait(client, resp.json()["job_id"])
        assert result.status_code == 500
        assert result.json()["error"]["code"] == "degenerate_labels"


class TestHistoryFiles:
    def test_path_traversal(self, client, tmp_path):
        (tmp_path / "jobs").mkdir()
        (tmp_path / "secret.txt").write_text("x", encoding="utf-8")
        assert client.get("/api/history/..%2Fsecret.txt").status_code in (403, 404)

    def test_empty_history(self, client):
        assert client.get("/api/history").json() == {"items": [], "total": 0, "page": 1, "page_size": 10}


class TestProgressParsing:
    @pytest.fixture
    def handler(self):
        loop = asyncio.new_event_loop()
        yield ProgressHandler(Job(job_id="t", config=RunConfig()), loop)
        loop.close()

    def test_stage_start(self, handler):
        event = handler._parse("=== 阶段2: 去噪网络训练 ===")
        assert event.stage == 2
        assert event.progress == pytest.approx(0.05)

    def test_denoiser_steps(self, handler):
        handler._parse("=== 阶段2: 去噪网络训练 ===")
        event = handler._parse("去噪网络 训练步 50/100 loss=0.6931 (近 50 步均值 0.6931)")
        assert event.step == 50
        assert event.progress == pytest.approx(0.275)

    def test_inner_classifier_second_half(self, handler):
        handler._parse("=== 阶段3: 引导分类器训练 ===")
        assert handler._parse("outer 分类器 (c2) 训练步 10/10 loss=0.5").progress == pytest.approx(0.625)
        assert handler._parse("inner 分类器 (c1) 训练步 10/10 loss=0.5").progress == pytest.approx(0.75)

    def test_train_step_outside_training_stage(self, handler):
        assert handler._parse("去噪网络 训练步 1/2 loss=0.1") is None

    def test_sampling(self, handler):
        assert handler._parse("无条件采样图 4/4 (n=5)").progress == pytest.approx(0.85)
        assert handler._parse("引导采样图 2/4 (n=5)").progress == pytest.approx(0.9)

    def test_done(self, handler):
        assert handler._parse("阶段5 完成: validity 无引导 0.1 → 引导 0.2").progress == pytest.approx(1.0)
        assert handler._parse("Pipeline 完成: 20 个产物 -> out").progress == 1.0


def _emit_as(job_id: str, handler: ProgressHandler, message: str) -> None:
    _current_job.set(job_id)
    handler.handle(logging.LogRecord("src.pipeline", logging.INFO, __file__, 1, message, None, None))


class TestJobIsolation:
    def test_handler_ignores_other_jobs(self):
        loop = asyncio.new_event_loop()
        try:
            job = Job(job_id="a", config=RunConfig())
            handler = ProgressHandler(job, loop)
            contextvars.copy_context().run(_emit_as, "b", handler, "=== 阶段2: 去噪网络训练 ===")
            assert job.last_progress is None
            contextvars.copy_context().run(_emit_as, "a", handler, "=== 阶段3: 引导分类器训练 ===")
            assert job.last_progress.stage == 3
        finally:
            loop.close()

    def test_records_outside_jobs_ignored(self):
        loop = asyncio.new_event_loop()
        try:
            job = Job(job_id="a", config=RunConfig())
            handler = ProgressHandler(job, loop)
            handler.handle(logging.LogRecord("src", logging.INFO, __file__, 1, "Pipeline 完成: 1 个产物", None, None))
            assert job.last_progress is None
        finally:
            loop.close()

    def test_sampler_workers_keep_job(self):
        seen = []

        class _Recorder(logging.Handler):
            def emit(self, record):
                seen.append(_current_job.get())

        recorder = _Recorder()
        src_logger = logging.getLogger("src")
        src_logger.setLevel(logging.INFO)
        src_logger.addHandler(recorder)
        try:
            def run():
                _current_job.set("a")
                model = DenoiserModel(DenoiserHyper(rounds=1, hidden=2))
                run_cfg = SampleRun(seed=0, num_graphs=4, node_counts=[3])
                sample_unconditional(model, make_schedule(T=2), run_cfg, workers=2)

            contextvars.copy_context().run(run)
        finally:
            src_logger.removeHandler(recorder)
        assert seen and set(seen) == {"a"}
