"""运行清单：命令、参数、完整配置、配置哈希、种子与产物校验和"""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List

from src.config import RunConfig, config_hash
from src.errors import ConfigError
from src.utils.file_ops import get_file_hash, read_json, safe_write_json
from src.utils.logger import get_logger

logger = get_logger(__name__)

MANIFEST_FORMAT_VERSION = 1


def manifest_path(output_dir: Path, command: str) -> Path:
    return Path(output_dir) / "manifest_{}.json".format(command)


def artifact_checksums(output_dir: Path, artifacts: Iterable[Path]) -> Dict[str, str]:
    """以相对 output_dir 的路径为键的 SHA256"""
    output_dir = Path(output_dir).resolve()
    out: Dict[str, str] = {}
    for p in sorted({Path(a).resolve() for a in artifacts}):
        try:
            key = p.relative_to(output_dir).as_posix()
        except ValueError:
            key = p.as_posix()
        out[key] = get_file_hash(p)
    return out


def build_manifest(
    command: str, args: Dict[str, Any], config: RunConfig, artifacts: Iterable[Path]
) -> Dict[str, Any]:
    return {
        "format_version": MANIFEST_FORMAT_VERSION,
        "command": command,
        "args": args,
        "config": config.to_dict(),
        "config_hash": config_hash(config),
        "seeds": {
            "train": config.seed,
            "sampling": config.sampling.seed,
            "synth": config.synth.seed,
        },
        "artifacts": artifact_checksums(config.output_dir, artifacts),
        # 只有清单本身带时间戳
        "created_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def write_manifest(
    command: str, args: Dict[str, Any], config: RunConfig, artifacts: Iterable[Path]
) -> Path:
    data = build_manifest(command, args, config, artifacts)
    path = manifest_path(config.output_dir, command)
    safe_write_json(path, data)
    logger.info("清单已写入: %s (%d 个产物)", path, len(data["artifacts"]))
    return path


def load_manifest(path: Path) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError("清单不存在: {}".format(path))
    data = read_json(path)
    if not isinstance(data, dict) or data.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise ConfigError("不支持的清单格式: {}".format(path))
    for key in ("command", "args", "config", "artifacts"):
        if key not in data:
            raise ConfigError("清单缺少字段: {}".format(key))
    return data


def compare_checksums(expected: Dict[str, str], actual: Dict[str, str]) -> List[str]:
    """返回不一致的产物名（缺失或校验和不同）"""
    return sorted(k for k in expected if actual.get(k) != expected[k])
