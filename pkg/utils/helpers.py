#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
共通ヘルパー関数群
"""

import os
import re
import logging
import tempfile
import dataclasses
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import numpy as np

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """
    一時ファイルに書き込んでから置き換える

    Args:
        path: 出力ファイルのパス
        data: 書き込むバイト列

    Returns:
        Path: 書き込んだファイルのパス
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=str(target.parent))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return target


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def to_builtin(value: Any) -> Any:
    """
    numpy型やデータクラスを YAML 化できる組み込み型に変換する

    Args:
        value: 変換する値

    Returns:
        Any: 組み込み型のみからなる値
    """
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_builtin(getattr(value, f.name)) for f in dataclasses.fields(value)}
    if isinstance(value, dict):
        return {str(k): to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_builtin(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.complexfloating, complex)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, Path):
        return str(value)
    return value


def format_float(value: float) -> str:
    """完全精度の浮動小数点表記（repr）"""
    return repr(float(value))


def sanitize_filename(filename: str, max_length: int = 50) -> str:
    """
    ファイル名に使用できない文字を置換し、長さを制限する

    Args:
        filename: 元のファイル名
        max_length: ファイル名の最大長（デフォルト: 50文字）

    Returns:
        str: 安全なファイル名
    """
    sanitized = re.sub(r'[\\/*?:"<>|\s]', '_', filename)
    return sanitized[:max_length]


def allocate_run_directory(output_dir: PathLike, command: str) -> Path:
    """
    <output_dir>/<command>_NNNN/ の新しい実行ディレクトリを確保する

    既存のディレクトリは再利用しない。

    Args:
        output_dir: 出力ルート
        command: サブコマンド名

    Returns:
        Path: 作成したディレクトリ
    """
    root = Path(output_dir)
    root.mkdir(parents=True, exist_ok=True)
    prefix = sanitize_filename(command)
    pattern = re.compile(rf"^{re.escape(prefix)}_(\d{{4,}})$")
    used = [int(m.group(1)) for m in (pattern.match(p.name) for p in root.iterdir()) if m]
    counter = max(used, default=0) + 1
    while True:
        run_dir = root / f"{prefix}_{str(counter).zfill(4)}"
        try:
            run_dir.mkdir()
            return run_dir
        except FileExistsError:
            counter += 1


def write_csv(path: PathLike, header: List[str], rows: Iterable[Iterable[Any]]) -> Path:
    """
    カンマ区切りの表を完全精度で書き出す
    """
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, (float, np.floating)):
                cells.append(format_float(cell))
            else:
                cells.append(str(cell))
        lines.append(",".join(cells))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def validate_record_structure(data: Dict[str, Any]) -> bool:
    """
    結果レコードの構造の妥当性を検証する

    Args:
        data: 検証するデータ

    Returns:
        bool: 妥当性
    """
    try:
        for key in ("command", "software", "config", "payload", "timings"):
            if key not in data:
                logger.warning(f"結果レコードに必須フィールド '{key}' が見つかりません")
                return False

        software = data["software"]
        if not isinstance(software, dict) or "name" not in software or "version" not in software:
            logger.warning("software フィールドに name / version が見つかりません")
            return False

        if not isinstance(data["payload"], dict):
            logger.warning("payload が辞書形式ではありません")
            return False

        if not isinstance(data["timings"], dict):
            logger.warning("timings が辞書形式ではありません")
            return False

        return True

    except Exception as e:
        logger.error(f"結果レコードの検証中にエラーが発生しました: {e}")
        return False
