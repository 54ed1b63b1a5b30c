"""产物读写

所有产物按 UTF-8、\\n 换行写出，先写临时文件再原子替换。
JSON 中的 numpy 标量/数组转成 Python 原生类型，同样的内容得到逐字节相同的文件，
清单里的 SHA256 才能用来校验复现。
"""

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np

from src.utils.logger import get_logger

logger = get_logger(__name__)

_HASH_CHUNK = 1 << 16


def get_file_hash(path: Path) -> str:
    """产物的 SHA256"""
    digest = hashlib.sha256()
    with Path(path).open("rb") as f:
        while True:
            chunk = f.read(_HASH_CHUNK)
            if not chunk:
                break
            digest.update(chunk)
    return digest.hexdigest()


def ensure_dir(path: Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _to_native(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, Path):
        return obj.as_posix()
    raise TypeError("无法写入 JSON 的类型: {}".format(type(obj).__name__))


def safe_write_text(path: Path, content: str) -> Path:
    """原子写入文本，返回写入的路径"""
    path = Path(path)
    ensure_dir(path.parent)
    tmp = path.with_name(path.name + ".tmp")
    # 直接写字节，绕开平台换行转换
    tmp.write_bytes(content.encode("utf-8"))
    tmp.replace(path)
    logger.debug("写入文件: %s (%d 字符)", path, len(content))
    return path


def safe_write_json(path: Path, data: Any, indent: int = 2) -> Path:
    """浮点数按 repr 输出，可由 read_json 精确读回"""
    text = json.dumps(data, ensure_ascii=False, indent=indent, default=_to_native)
    return safe_write_text(path, text + "\n")


def read_json(path: Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))
