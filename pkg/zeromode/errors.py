#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
例外クラス群

ライブラリ内で発生するエラーを種類ごとに表現する
"""

from typing import List, Optional


class ZeroModeError(Exception):
    """ライブラリ共通の基底例外"""


class GridError(ZeroModeError, ValueError):
    """格子仕様の不正、または格子の不一致"""


class FieldError(ZeroModeError, ValueError):
    """磁場ソースの定義・読み込みエラー"""


class DivergenceError(ZeroModeError):
    """発散ゼロ条件を満たさない入力"""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class GaugeObstructionError(ZeroModeError):
    """トーラス上で周期的なベクトルポテンシャルが存在しない（正味の磁束がある）"""

    def __init__(self, message: str, mean_flux: float):
        super().__init__(message)
        self.mean_flux = mean_flux


class SolverError(ZeroModeError):
    """反復ソルバーが収束しなかった"""

    def __init__(self, message: str, residual_history: Optional[List[float]] = None,
                 iterations: int = 0):
        super().__init__(message)
        self.residual_history = list(residual_history or [])
        self.iterations = iterations


class SpectralError(ZeroModeError):
    """固有値計算の前提条件違反"""


class PreconditionError(ZeroModeError):
    """実験の前提条件（基準検出など）が満たされない"""


class ConfigError(ZeroModeError, ValueError):
    """設定ファイル・コマンドライン引数のエラー"""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key
