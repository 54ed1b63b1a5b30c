"""Pipeline 异步包装器 - 拦截日志，推送 SSE 进度事件"""

from __future__ import annotations

import asyncio
import contextvars
import logging
import re
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional

from src.config import RunConfig
from src.errors import CDGraphError
from src.models import PipelineResult
from src.utils.logger import ROOT_LOGGER
from src.utils.report_generator import _build_markdown_report

_wrapper_logger = logging.getLogger("src.web.pipeline_wrapper")


class JobStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class ProgressEvent:
    stage: int = 0
    stage_name: str = ""
    detail: str = ""
    step: int = 0
    total_steps: int = 0
    progress: float = 0.0

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "stage_name": self.stage_name,
            "detail": self.detail,
            "step": self.step,
            "total_steps": self.total_steps,
            "progress": self.progress,
        }


@dataclass
class Job:
    job_id: str
    config: RunConfig
    status: JobStatus = JobStatus.PENDING
    queue: asyncio.Queue = field(default_factory=lambda: asyncio.Queue())
    last_progress: Optional[ProgressEvent] = None  # 最新进度快照（供刷新恢复）
    result: Optional[PipelineResult] = None
    result_markdown: Dict[str, str] = field(default_factory=dict)
    error: str = ""
    error_code: str = ""
    submitted_at: str = ""


# 全局任务存储
_jobs: Dict[str, Job] = {}
_executor = ThreadPoolExecutor(max_workers=2)

# 当前线程正在执行的任务，采样工作线程从提交线程继承
_current_job: contextvars.ContextVar[Optional[str]] = contextvars.ContextVar("cdgraph_job", default=None)

# 阶段权重，用于计算总进度
_STAGE_WEIGHTS = {1: 0.05, 2: 0.45, 3: 0.25, 4: 0.20, 5: 0.05}
_STAGE_NAMES = {1: "语料准备", 2: "去噪网络训练", 3: "引导分类器训练", 4: "采样", 5: "评估"}


def _base(stage: int) -> float:
    return sum(_STAGE_WEIGHTS.get(i, 0) for i in range(1, stage))


class _JobFilter(logging.Filter):
    """只放行本任务线程发出的日志"""

    def __init__(self, job_id: str) -> None:
        super().__init__()
        self.job_id = job_id

    def filter(self, record: logging.LogRecord) -> bool:
        return _current_job.get() == self.job_id


class ProgressHandler(logging.Handler):
    """拦截 pipeline 日志，解析为进度事件写入 asyncio.Queue。

    挂载到 "src" 父 logger，通过 propagation 捕获所有子模块日志。
    同时运行的其他任务的日志由 _JobFilter 滤掉。
    """

    _RE_STAGE = re.compile(r"=== 阶段(\d): (.+?) ===")
    _RE_STAGE_DONE = re.compile(r"阶段(\d) 完成")
    _RE_TRAIN_STEP = re.compile(r"训练步 (\d+)/(\d+)")
    _RE_SAMPLE = re.compile(r"(无条件|引导)采样图 (\d+)/(\d+)")
    _RE_PIPELINE_DONE = re.compile(r"Pipeline 完成")

    def __init__(self, job: Job, loop: asyncio.AbstractEventLoop):
        super().__init__(level=logging.DEBUG)
        self._job = job
        self._queue = job.queue
        self._loop = loop
        self._current_stage = 0
        self.addFilter(_JobFilter(job.job_id))

    def emit(self, record: logging.LogRecord) -> None:
        event = self._parse(record.getMessage())
        if event:
            self._job.last_progress = event
            try:
                self._loop.call_soon_threadsafe(self._queue.put_nowait, event)
            except RuntimeError:
                # loop 已关闭
                pass

    def _parse(self, msg: str) -> Optional[ProgressEvent]:
        m = self._RE_STAGE.search(msg)
        if m:
            self._current_stage = int(m.group(1))
            name = m.group(2)
            return ProgressEvent(
                stage=self._current_stage,
                stage_name=name,
                detail=f"开始{name}",
                progress=round(_base(self._current_stage), 3),
            )

        # 训练步日志只出现在阶段2（去噪网络）与阶段3（分类器 outer 再 inner）
        m = self._RE_TRAIN_STEP.search(msg)
        if m and self._current_stage in (2, 3):
            step, total = int(m.group(1)), int(m.group(2))
            stage = self._current_stage
            frac = step / total if total else 1.0
            if stage == 3:
                frac = frac * 0.5 + (0.5 if "inner" in msg else 0.0)
            return ProgressEvent(
                stage=stage,
                stage_name=_STAGE_NAMES[stage],
                detail=f"训练步 {step}/{total}",
                step=step,
                total_steps=total,
                progress=round(_base(stage) + _STAGE_WEIGHTS[stage] * frac, 3),
            )

        # 阶段4 先无条件再引导，各占一半
        m = self._RE_SAMPLE.search(msg)
        if m:
            i, total = int(m.group(2)), int(m.group(3))
            half = 0.0 if m.group(1) == "无条件" else 0.5
            frac = half + 0.5 * (i / total if total else 1.0)
            return ProgressEvent(
                stage=4,
                stage_name=_STAGE_NAMES[4],
                detail=f"{m.group(1)}采样 {i}/{total}",
                step=i,
                total_steps=total,
                progress=round(_base(4) + _STAGE_WEIGHTS[4] * frac, 3),
            )

        m = self._RE_STAGE_DONE.search(msg)
        if m:
            stage = int(m.group(1))
            return ProgressEvent(
                stage=stage,
                stage_name=_STAGE_NAMES.get(stage, ""),
                detail=f"阶段{stage}完成",
                progress=round(_base(stage + 1), 3),
            )

        if self._RE_PIPELINE_DONE.search(msg):
            return ProgressEvent(stage=5, stage_name="完成", detail="处理完成", progress=1.0)

        return None


def new_job_id() -> str:
    return uuid.uuid4().hex[:12]


def register_job(job_id: str, config: RunConfig) -> Job:
    """用预先确定的 job_id 登记任务（输出目录以 job_id 命名）"""
    job = Job(job_id=job_id, config=config, submitted_at=datetime.now().isoformat(timespec="seconds"))
    _jobs[job_id] = job
    return job


def get_job(job_id: str) -> Optional[Job]:
    return _jobs.get(job_id)


def list_jobs() -> List[Job]:
    return sorted(_jobs.values(), key=lambda j: j.submitted_at)


async def run_job(job: Job) -> None:
    """在线程池中执行 Pipeline，通过日志拦截推送进度"""
    loop = asyncio.get_running_loop()
    handler = ProgressHandler(job, loop)

    src_logger = logging.getLogger(ROOT_LOGGER)
    src_logger.setLevel(logging.DEBUG)
    src_logger.addHandler(handler)

    job.status = JobStatus.RUNNING
    job.queue.put_nowait(ProgressEvent(stage=0, stage_name="启动", detail="正在初始化 Pipeline...", progress=0.0))

    try:
        result = await loop.run_in_executor(_executor, _run_pipeline_sync, job)
        job.result = result
        job.result_markdown = {tag: _build_markdown_report(r, tag) for tag, r in result.reports.items()}
        job.status = JobStatus.COMPLETED
    except Exception as e:
        job.error = str(e)
        job.error_code = e.code if isinstance(e, CDGraphError) else type(e).__name__
        job.status = JobStatus.FAILED
        _wrapper_logger.exception("Pipeline 执行失败: %s", e)
        job.queue.put_nowait(ProgressEvent(stage=0, stage_name="错误", detail=str(e), progress=-1))
    finally:
        src_logger.removeHandler(handler)
        # 终止信号
        job.queue.put_nowait(None)


def _run_pipeline_sync(job: Job) -> PipelineResult:
    """同步执行 Pipeline（在线程池中调用）"""
    from src.pipeline import Pipeline

    token = _current_job.set(job.job_id)
    try:
        return Pipeline(job.config).run()
    finally:
        _current_job.reset(token)


def job_summary(job: Job) -> Dict[str, Any]:
    data: Dict[str, Any] = {
        "job_id": job.job_id,
        "status": job.status.value,
        "submitted_at": job.submitted_at,
        "output_dir": str(job.config.output_dir),
    }
    if job.last_progress:
        data["progress"] = job.last_progress.to_dict()
    if job.status == JobStatus.FAILED:
        data["error"] = {"code": job.error_code, "message": job.error}
    return data
