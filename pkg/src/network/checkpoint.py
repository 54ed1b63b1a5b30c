"""模型检查点（JSON，浮点数按 repr 写出，可精确往返）"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from src.errors import CheckpointError
from src.models import ClassifierRole
from src.network.denoiser import DenoiserHyper, DenoiserModel
from src.network.guidance import GraphClassifier, GuidanceClassifiers
from src.utils.file_ops import read_json, safe_write_json
from src.utils.logger import get_logger

logger = get_logger(__name__)

CHECKPOINT_FORMAT_VERSION = 1

KIND_DENOISER = "denoiser"
KIND_CLASSIFIER = "classifier"


def _payload(kind: str, hyper: DenoiserHyper, params: np.ndarray, seed: int, **extra: Any) -> Dict[str, Any]:
    return {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": kind,
        **extra,
        "hyper": hyper.to_dict(),
        "seed": int(seed),
        "num_params": int(params.size),
        "params": [float(v) for v in params],
    }


def _read(path: Path, kind: str) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError("检查点不存在: {}".format(path))
    try:
        data = read_json(path)
    except ValueError as e:
        raise CheckpointError("检查点不是合法 JSON: {} ({})".format(path, e))
    if not isinstance(data, dict):
        raise CheckpointError("检查点顶层必须是对象: {}".format(path))
    if data.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError("不支持的检查点版本: {}".format(data.get("format_version")))
    if data.get("kind") != kind:
        raise CheckpointError("检查点类型应为 {}，实际 {}".format(kind, data.get("kind")))
    for key in ("hyper", "seed", "params"):
        if key not in data:
            raise CheckpointError("检查点缺少字段: {}".format(key))
    return data


def _hyper(data: Dict[str, Any]) -> DenoiserHyper:
    try:
        return DenoiserHyper(**{k: int(v) for k, v in data["hyper"].items()})
    except TypeError as e:
        raise CheckpointError("检查点超参数非法: {}".format(e))


def save_denoiser(model: DenoiserModel, path: Path, seed: int) -> None:
    safe_write_json(Path(path), _payload(KIND_DENOISER, model.hyper, model.params, seed))
    logger.info("去噪网络检查点已保存: %s (%d 个参数)", path, model.num_params)


def load_denoiser(path: Path) -> DenoiserModel:
    data = _read(path, KIND_DENOISER)
    params = np.array(data["params"], dtype=np.float64)
    try:
        return DenoiserModel(_hyper(data), params)
    except ValueError as e:
        raise CheckpointError(str(e))


def save_classifier(clf: GraphClassifier, path: Path, seed: int) -> None:
    safe_write_json(
        Path(path),
        _payload(
            KIND_CLASSIFIER, clf.hyper, clf.params, seed,
            role=clf.role.value, condition=clf.condition,
        ),
    )
    logger.info("%s 分类器检查点已保存: %s", clf.role.value, path)


def load_classifier(path: Path, expected_role: Optional[ClassifierRole] = None) -> GraphClassifier:
    data = _read(path, KIND_CLASSIFIER)
    try:
        role = ClassifierRole(data.get("role"))
    except ValueError:
        raise CheckpointError("未知分类器角色: {}".format(data.get("role")))
    if expected_role is not None and role is not expected_role:
        raise CheckpointError("分类器角色应为 {}，实际 {}".format(expected_role.value, role.value))
    condition = data.get("condition")
    if condition not in (1, 2):
        raise CheckpointError("分类器条件编号非法: {}".format(condition))
    params = np.array(data["params"], dtype=np.float64)
    try:
        return GraphClassifier(_hyper(data), role, int(condition), params)
    except ValueError as e:
        raise CheckpointError(str(e))


def save_classifiers(classifiers: GuidanceClassifiers, outer_path: Path, inner_path: Path, seed: int) -> None:
    save_classifier(classifiers.outer, outer_path, seed)
    save_classifier(classifiers.inner, inner_path, seed)


def load_classifiers(outer_path: Path, inner_path: Path) -> GuidanceClassifiers:
    outer = load_classifier(outer_path, ClassifierRole.OUTER)
    inner = load_classifier(inner_path, ClassifierRole.INNER)
    if outer.condition == inner.condition:
        raise CheckpointError("outer 与 inner 分类器针对同一条件 c{}".format(outer.condition))
    return GuidanceClassifiers(outer=outer, inner=inner)
