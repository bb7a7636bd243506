#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
格子データ磁場の入出力

バイナリ形式: ヘッダ（N: int64、L: float64、いずれもリトルエンディアン）の後に
Bx・By・Bz の成分ブロックを順に並べる（各ブロックは N^3 個の float64、x 最速）。
テキスト形式: 1行目 "N L"、以降1行に1格子点の (Bx, By, Bz)。
"""

import io
import logging
from pathlib import Path
from typing import Union

import numpy as np

from utils.helpers import atomic_write_bytes, atomic_write_text
from zeromode.errors import DivergenceError, FieldError, GridError
from zeromode.grid import GridSpec, VectorField

logger = logging.getLogger(__name__)

_HEADER = np.dtype([("n", "<i8"), ("half_width", "<f8")])
_FORMATS = ("binary", "text")

# 読み込み時に許容する相対発散残差
LOAD_DIVERGENCE_TOL = 1e-6


def _check_format(fmt: str):
    if fmt not in _FORMATS:
        raise FieldError(f"未対応の格子データ形式です: {fmt}（binary または text）")


def _component_blocks(field: VectorField) -> np.ndarray:
    """Bx・By・Bz の順の成分ブロック（各ブロックは x 最速）を連結した (3·N^3,)"""
    real = field.values.real
    return np.concatenate([real[c].ravel(order="F") for c in range(3)])


def save_grid_data(field: VectorField, path: Union[str, Path], format: str = "binary") -> Path:
    """
    磁場を格子データとして保存する

    Args:
        field: 保存する磁場（実部のみ保存）
        path: 出力パス
        format: "binary" または "text"

    Returns:
        Path: 書き込んだパス
    """
    _check_format(format)
    grid = field.grid
    if format == "binary":
        header = np.array([(grid.points_per_axis, grid.half_width)], dtype=_HEADER)
        payload = header.tobytes() + _component_blocks(field).astype("<f8").tobytes()
        target = atomic_write_bytes(path, payload)
    else:
        n = grid.points_per_axis
        columns = np.stack([field.values.real[c].ravel(order="F") for c in range(3)], axis=1)
        buffer = io.StringIO()
        buffer.write(f"{n} {grid.half_width!r}\n")
        np.savetxt(buffer, columns, fmt="%.17g")
        target = atomic_write_text(path, buffer.getvalue())
    logger.info(f"格子データを保存しました: {target} ({format})")
    return target


def _from_component_blocks(grid: GridSpec, flat: np.ndarray) -> VectorField:
    n = grid.points_per_axis
    blocks = flat.reshape(3, n ** 3)
    return VectorField(grid, np.stack([blocks[c].reshape((n, n, n), order="F") for c in range(3)]))


def load_grid_data(path: Union[str, Path], format: str = "binary",
                   divergence_tol: float = LOAD_DIVERGENCE_TOL) -> VectorField:
    """
    格子データを読み込み、発散ゼロ条件を検証する

    Args:
        path: 入力パス
        format: "binary" または "text"
        divergence_tol: 許容する相対発散残差

    Returns:
        VectorField: 読み込んだ磁場
    """
    from zeromode.fields import divergence_residual

    _check_format(format)
    source = Path(path)
    if not source.exists():
        raise FieldError(f"格子データファイルが見つかりません: {source}")

    try:
        if format == "binary":
            raw = source.read_bytes()
            if len(raw) < _HEADER.itemsize:
                raise FieldError(f"格子データのヘッダが不完全です: {source}")
            header = np.frombuffer(raw[:_HEADER.itemsize], dtype=_HEADER)[0]
            grid = GridSpec(float(header["half_width"]), int(header["n"]))
            flat = np.frombuffer(raw[_HEADER.itemsize:], dtype="<f8")
        else:
            with open(source, "r", encoding="utf-8") as f:
                first = f.readline().split()
                if len(first) != 2:
                    raise FieldError(f"格子データのヘッダが不正です: {source}")
                grid = GridSpec(float(first[1]), int(first[0]))
                flat = np.loadtxt(f, dtype=np.float64, ndmin=2).T.reshape(-1)
    except GridError as e:
        raise FieldError(f"格子データのヘッダが不正です: {e}") from e
    except ValueError as e:
        if isinstance(e, FieldError):
            raise
        raise FieldError(f"格子データを解析できません: {e}") from e

    expected = 3 * grid.points_per_axis ** 3
    if flat.size != expected:
        raise FieldError(f"格子データの値の数 {flat.size} が期待値 {expected} と一致しません")
    if not np.all(np.isfinite(flat)):
        raise FieldError("格子データに有限でない値が含まれています")

    field = _from_component_blocks(grid, np.array(flat, dtype=np.float64))
    residual = divergence_residual(field)
    if residual > divergence_tol:
        raise DivergenceError(f"格子データの発散残差 {residual:.3e} が許容値 {divergence_tol:.1e} を超えています",
                              residual)
    logger.info(f"格子データを読み込みました: {source} (N={grid.points_per_axis}, L={grid.half_width})")
    return field
