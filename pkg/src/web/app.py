"""FastAPI 主应用 - 数据集上传、流水线任务、SSE 进度、报告历史"""

from __future__ import annotations

import asyncio
import json
import shutil
import uuid
from pathlib import Path
from typing import Any, Dict, Optional

import uvicorn
from fastapi import FastAPI, File, Form, HTTPException, Query, UploadFile
from fastapi.responses import HTMLResponse, JSONResponse, PlainTextResponse
from sse_starlette.sse import EventSourceResponse

from src import __version__
from src.config import RunConfig
from src.errors import CDGraphError
from src.graph.io import load_dataset
from src.utils.logger import get_logger
from src.web.pipeline_wrapper import (
    JobStatus,
    get_job,
    job_summary,
    list_jobs,
    new_job_id,
    register_job,
    run_job,
)

logger = get_logger(__name__)

app = FastAPI(title="cdgraph", version=__version__)

# 上传目录（每个数据集一个子目录）
_UPLOAD_DIR = Path("cache/uploads")

# 任务输出目录（每个任务一个子目录）
_OUTPUT_DIR = Path("output/jobs")

_DATASET_EDGES = "edges.txt"
_DATASET_ATTRS = "attrs.csv"

_INDEX_HTML = """<!doctype html>
<html lang="zh">
<head><meta charset="utf-8"><title>cdgraph</title></head>
<body>
<h1>条件扩散图生成</h1>
<ul>
<li>POST /api/upload 上传数据集（edges + attrs）</li>
<li>POST /api/run 提交流水线任务</li>
<li>GET /api/progress/{job_id} SSE 实时进度</li>
<li>GET /api/results/{job_id} 任务结果</li>
<li>GET /api/history 历史评估报告</li>
</ul>
</body>
</html>
"""


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})


@app.get("/", response_class=HTMLResponse)
async def index():
    return _INDEX_HTML


@app.post("/api/upload")
async def upload_dataset(edges: UploadFile = File(...), attrs: UploadFile = File(...)):
    """上传边列表与属性表，解析校验通过后返回 dataset_id"""
    dataset_id = uuid.uuid4().hex[:12]
    dest = _UPLOAD_DIR / dataset_id
    dest.mkdir(parents=True, exist_ok=True)
    edge_path, attr_path = dest / _DATASET_EDGES, dest / _DATASET_ATTRS
    edge_path.write_bytes(await edges.read())
    attr_path.write_bytes(await attrs.read())

    try:
        corpus = load_dataset(edge_path, attr_path)
    except CDGraphError as e:
        shutil.rmtree(dest, ignore_errors=True)
        return _error(400, e.code, str(e))
    except Exception:
        shutil.rmtree(dest, ignore_errors=True)
        raise

    logger.info("数据集上传: %s (%d 张图)", dataset_id, len(corpus))
    return {
        "dataset_id": dataset_id,
        "num_graphs": len(corpus),
        "node_counts": [g.n for g in corpus],
    }


def _job_config(
    job_id: str,
    dataset_id: Optional[str],
    config_json: Optional[str],
    overrides: Dict[str, Any],
) -> RunConfig:
    data: Dict[str, Any] = json.loads(config_json) if config_json else {}
    if not isinstance(data, dict):
        raise ValueError("config 必须是 JSON 对象")
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, key = dotted.split(".") if "." in dotted else (None, dotted)
        target = data.setdefault(section, {}) if section else data
        target[key] = value
    data["output_dir"] = str(_OUTPUT_DIR / job_id)
    data["log_file"] = None
    if dataset_id:
        src = _UPLOAD_DIR / dataset_id
        if not src.is_dir():
            raise FileNotFoundError("数据集不存在: {}".format(dataset_id))
        data["dataset_edges"] = str(src / _DATASET_EDGES)
        data["dataset_attrs"] = str(src / _DATASET_ATTRS)
    return RunConfig.from_dict(data)


@app.post("/api/run")
async def start_run(
    dataset_id: Optional[str] = Form(None),
    config: Optional[str] = Form(None),  # JSON 配置，缺省用内置默认值
    seed: Optional[int] = Form(None),
    steps: Optional[int] = Form(None),
    classifier_steps: Optional[int] = Form(None),
    num_graphs: Optional[int] = Form(None),
    gamma: Optional[float] = Form(None),
):
    """提交一次完整流水线任务（未上传数据集时使用合成语料）"""
    job_id = new_job_id()
    overrides = {
        "seed": seed,
        "optimizer.steps": steps,
        "classifier_optimizer.steps": classifier_steps,
        "sampling.num_graphs": num_graphs,
        "guidance.gamma": gamma,
    }
    try:
        run_config = _job_config(job_id, dataset_id, config, overrides)
    except CDGraphError as e:
        return _error(400, e.code, str(e))
    except FileNotFoundError as e:
        return _error(404, "not_found", str(e))
    except ValueError as e:
        return _error(400, "invalid_value", str(e))

    job = register_job(job_id, run_config)
    asyncio.create_task(run_job(job))
    return {"job_id": job.job_id, "output_dir": str(run_config.output_dir)}


@app.get("/api/jobs")
async def jobs():
    return {"jobs": [job_summary(j) for j in list_jobs()]}


@app.get("/api/progress/{job_id}")
async def progress_stream(job_id: str):
    """SSE 实时进度流"""
    job = get_job(job_id)
    if not job:
        return _error(404, "not_found", "任务不存在")

    async def event_generator():
        # 任务已结束时立即返回（防止刷新后挂起）
        if job.status in (JobStatus.COMPLETED, JobStatus.FAILED):
            yield {"event": "done", "data": json.dumps({"status": job.status.value})}
            return

        while True:
            try:
                event = await asyncio.wait_for(job.queue.get(), timeout=15)
            except asyncio.TimeoutError:
                if job.status in (JobStatus.COMPLETED, JobStatus.FAILED):
                    yield {"event": "done", "data": json.dumps({"status": job.status.value})}
                    return
                yield {"event": "heartbeat", "data": "{}"}
                continue

            if event is None:
                yield {"event": "done", "data": json.dumps({"status": job.status.value})}
                break

            yield {"event": "progress", "data": json.dumps(event.to_dict(), ensure_ascii=False)}

    return EventSourceResponse(event_generator())


@app.get("/api/results/{job_id}")
async def get_results(job_id: str):
    """获取任务结果：运行中 202，失败 500，完成 200"""
    job = get_job(job_id)
    if not job:
        return _error(404, "not_found", "任务不存在")

    if job.status in (JobStatus.PENDING, JobStatus.RUNNING):
        return JSONResponse(status_code=202, content=job_summary(job))

    if job.status == JobStatus.FAILED:
        return JSONResponse(status_code=500, content=job_summary(job))

    result = job.result
    return {
        **job_summary(job),
        "corpus_size": result.corpus_size,
        "correlation": result.correlation,
        "bound": result.bound.to_dict() if result.bound else None,
        "reports": {tag: r.to_dict() for tag, r in result.reports.items()},
        "markdown": job.result_markdown,
        "artifacts": sorted(p.relative_to(result.output_dir).as_posix() for p in result.artifacts),
    }


@app.get("/api/history")
async def list_history(
    search: Optional[str] = Query(None, description="按任务编号或报告标签过滤"),
    sort: str = Query("validity_desc", description="排序: validity_desc, validity_asc, mmd_asc, name_asc"),
    page: int = Query(1, ge=1, description="页码"),
    page_size: int = Query(10, ge=1, le=100, description="每页条数"),
):
    """扫描任务输出目录下的 report_*.json，返回历史评估报告（分页）"""
    if not _OUTPUT_DIR.exists():
        return {"items": [], "total": 0, "page": page, "page_size": page_size}

    items = []
    for fp in sorted(_OUTPUT_DIR.glob("*/report_*.json")):
        try:
            data = json.loads(fp.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, OSError):
            continue
        job_dir = fp.parent.name
        items.append({
            "job": job_dir,
            "tag": data.get("tag", fp.stem.removeprefix("report_")),
            "validity": data.get("validity", 0.0),
            "mmd_clustering": data.get("mmd_clustering", 0.0),
            "rel_err_nodes": data.get("rel_err_nodes", 0.0),
            "files": {
                "json": "{}/{}".format(job_dir, fp.name),
                "markdown": "{}/{}".format(job_dir, fp.with_suffix(".md").name),
            },
        })

    if search:
        kw = search.lower()
        items = [it for it in items if kw in it["job"].lower() or kw in it["tag"].lower()]

    if sort == "validity_asc":
        items.sort(key=lambda x: x["validity"])
    elif sort == "mmd_asc":
        items.sort(key=lambda x: x["mmd_clustering"])
    elif sort == "name_asc":
        items.sort(key=lambda x: (x["job"], x["tag"]))
    else:
        items.sort(key=lambda x: x["validity"], reverse=True)

    total = len(items)
    start = (page - 1) * page_size
    return {"items": items[start:start + page_size], "total": total, "page": page, "page_size": page_size}


@app.post("/api/history/delete")
async def delete_history(job: str = Form(...)):
    """删除一个任务的输出目录"""
    target = (_OUTPUT_DIR / job).resolve()
    if target.parent != _OUTPUT_DIR.resolve():
        raise HTTPException(status_code=403, detail="禁止访问")
    if not target.is_dir():
        raise HTTPException(status_code=404, detail="任务目录不存在")
    shutil.rmtree(target)
    logger.info("已删除任务目录: %s", target)
    return {"message": "已删除 {}".format(job)}


@app.get("/api/history/{filename:path}")
async def get_history_file(filename: str):
    """读取任务输出目录下的单个文件（防止路径穿越）"""
    root = _OUTPUT_DIR.resolve()
    safe_path = (_OUTPUT_DIR / filename).resolve()
    if root not in safe_path.parents:
        raise HTTPException(status_code=403, detail="禁止访问")

    if not safe_path.is_file():
        raise HTTPException(status_code=404, detail="文件不存在")

    content = safe_path.read_text(encoding="utf-8")
    if safe_path.suffix == ".json":
        return JSONResponse(content=json.loads(content))
    return PlainTextResponse(content=content)


if __name__ == "__main__":
    uvicorn.run(
        "src.web.app:app",
        host="0.0.0.0",
        port=8000,
        reload=False,
    )
