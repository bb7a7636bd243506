#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
実行設定（RunConfig）

YAML の設定ファイルとコマンドライン引数から実効設定を作る。
優先順位: 既定値 < 設定ファイル < コマンドライン引数
"""

import logging
from dataclasses import asdict, dataclass, fields
from dataclasses import field as dc_field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

from config import CG_MAXITER, CG_RTOL, EIG_MAXITER, EIG_TOL, BS_TOL, START_SEED
from zeromode.errors import ConfigError, GridError
from zeromode.fields import FieldSource, GridData, LossYau, RandomDivFree, Scaled, Sum, ZeroField
from zeromode.grid import GridSpec, make_grid
from zeromode.spectral import SpectralSettings, default_gap_tol

logger = logging.getLogger(__name__)

COMMANDS = ("gauge", "spectrum", "sweep", "perturb", "validate")
BS_METHODS = ("lanczos", "pencil")
VALIDATION_SUITES = ("field_source", "anticommutation", "hardy", "diamagnetic", "zeeman",
                     "oracle_equivalence", "gauge_invariance")


def _default_field() -> Dict[str, Any]:
    return {"kind": "loss_yau"}


@dataclass
class RunConfig:
    """
    1回の実行の実効設定

    Attributes:
        command: サブコマンド
        field: 磁場ソースの定義（kind と各種パラメータ）
        half_width: 箱の半幅 L
        points_per_axis: 一辺の格子点数 N
        t: spectrum の結合定数
        t_min, t_max, t_step: スイープ範囲
        resolution: 検出の括弧幅
        gap_tol: ゼロ判定閾値（省略時は 10·(π/(2L))^2 に確定する）
        suites: validate で実行するスイート（空ならすべて）
    """
    command: str = "spectrum"
    field: Dict[str, Any] = dc_field(default_factory=_default_field)
    half_width: float = 16.0
    points_per_axis: int = 64
    t: float = 1.0
    t_min: float = 0.6
    t_max: float = 2.0
    t_step: float = 0.05
    resolution: float = 0.02
    cg_rtol: float = CG_RTOL
    cg_maxiter: int = CG_MAXITER
    eig_tol: float = EIG_TOL
    eig_maxiter: int = EIG_MAXITER
    k: int = 6
    bs_k: int = 4
    gap_tol: Optional[float] = None
    bs_tol: float = BS_TOL
    bs_method: str = "lanczos"
    seed: int = 0
    eig_seed: int = START_SEED
    epsilon_relative: float = 0.1
    trials: int = 5
    correlation_length: float = 1.0
    require_base_detection: bool = True
    convergence_points: List[int] = dc_field(default_factory=list)
    export_field: Optional[str] = None
    validate_cases: int = 200
    oracle_cases: int = 10
    suites: List[str] = dc_field(default_factory=list)
    workers: int = 1
    output_dir: str = "results"

    @classmethod
    def keys(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def grid(self) -> GridSpec:
        return make_grid(self.half_width, self.points_per_axis)

    def spectral_settings(self) -> SpectralSettings:
        return SpectralSettings(k=self.k, bs_k=self.bs_k, eig_tol=self.eig_tol, maxiter=self.eig_maxiter,
                                gap_tol=self.gap_tol, bs_tol=self.bs_tol, bs_method=self.bs_method,
                                seed=self.eig_seed)

    def source(self) -> FieldSource:
        return source_from_config(self.field)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_yaml(self) -> str:
        return yaml.dump(self.to_dict(), default_flow_style=False, allow_unicode=True, indent=2,
                         width=1000, sort_keys=False)

    def materialize(self) -> "RunConfig":
        """派生する既定値を確定させる"""
        if self.gap_tol is None:
            self.gap_tol = default_gap_tol(self.grid())
        return self

    def validate(self) -> "RunConfig":
        """
        設定の妥当性を検証する。問題のあるキーを ConfigError で示す
        """
        if self.command not in COMMANDS:
            raise ConfigError(f"未知のコマンドです: {self.command}（{', '.join(COMMANDS)}）", key="command")
        try:
            self.grid()
        except GridError as e:
            key = "points_per_axis" if "格子点数" in str(e) else "half_width"
            raise ConfigError(str(e), key=key) from e
        _require(self.t >= 0, "t", f"結合定数は非負である必要があります: {self.t}")
        _require(0 < self.t_min < self.t_max, "t_min",
                 f"スイープ範囲は 0 < t_min < t_max である必要があります: ({self.t_min}, {self.t_max})")
        _require(self.t_step > 0, "t_step", f"刻み幅は正の値である必要があります: {self.t_step}")
        _require(self.resolution > 0, "resolution", f"分解能は正の値である必要があります: {self.resolution}")
        _require(self.cg_rtol > 0, "cg_rtol", "CG の許容誤差は正の値である必要があります")
        _require(self.cg_maxiter >= 1, "cg_maxiter", "CG の反復上限は1以上である必要があります")
        _require(self.eig_tol > 0, "eig_tol", "固有値の許容誤差は正の値である必要があります")
        _require(self.eig_maxiter >= 1, "eig_maxiter", "固有値ソルバーの反復上限は1以上である必要があります")
        _require(3 <= self.k <= 10, "k", f"k は 3〜10 である必要があります: {self.k}")
        _require(1 <= self.bs_k <= 10, "bs_k", f"bs_k は 1〜10 である必要があります: {self.bs_k}")
        _require(self.gap_tol is None or self.gap_tol > 0, "gap_tol", "gap_tol は正の値である必要があります")
        _require(0 < self.bs_tol < 1, "bs_tol", f"bs_tol は (0, 1) にある必要があります: {self.bs_tol}")
        _require(self.bs_method in BS_METHODS, "bs_method", f"bs_method は {BS_METHODS} のいずれかです")
        _require(self.epsilon_relative >= 0, "epsilon_relative", "epsilon_relative は非負である必要があります")
        _require(self.trials >= 1, "trials", "trials は1以上である必要があります")
        _require(self.correlation_length > 0, "correlation_length", "相関長は正の値である必要があります")
        _require(self.validate_cases >= 1, "validate_cases", "validate_cases は1以上である必要があります")
        _require(self.oracle_cases >= 1, "oracle_cases", "oracle_cases は1以上である必要があります")
        _require(self.workers >= 1, "workers", "workers は1以上である必要があります")
        unknown = [s for s in self.suites if s not in VALIDATION_SUITES]
        _require(not unknown, "suites", f"未知の検証スイートです: {unknown}")
        _require(len(self.convergence_points) != 1, "convergence_points",
                 "収束調査には2つ以上の格子点数が必要です")
        for n in self.convergence_points:
            _require(isinstance(n, int) and n >= 8 and n % 2 == 0, "convergence_points",
                     f"格子点数は8以上の偶数である必要があります: {n}")
        self.source()
        return self


def _require(condition: bool, key: str, message: str):
    if not condition:
        raise ConfigError(message, key=key)


def source_from_config(spec: Any, key: str = "field") -> FieldSource:
    """
    設定の磁場定義から FieldSource を作る

    Args:
        spec: {kind: ...} 形式の辞書
        key: エラーメッセージ用のキー

    Returns:
        FieldSource: 磁場ソース
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("磁場定義には kind が必要です", key=key)
    kind = spec["kind"]
    try:
        if kind == "loss_yau":
            return LossYau()
        if kind == "zero":
            return ZeroField()
        if kind == "scaled":
            return Scaled(base=source_from_config(spec["base"], f"{key}.base"), factor=float(spec["factor"]))
        if kind == "sum":
            terms = spec.get("terms") or []
            return Sum(tuple(source_from_config(t, f"{key}.terms[{i}]") for i, t in enumerate(terms)))
        if kind == "random":
            radius = spec.get("window_radius")
            source = RandomDivFree(seed=int(spec.get("seed", 0)), amplitude=float(spec["amplitude"]),
                                   correlation_length=float(spec.get("correlation_length", 1.0)),
                                   window_radius=float(radius) if radius is not None else None)
            _require(source.amplitude >= 0, f"{key}.amplitude", "振幅は非負である必要があります")
            _require(source.correlation_length > 0, f"{key}.correlation_length", "相関長は正の値である必要があります")
            return source
        if kind == "grid_data":
            fmt = spec.get("format", "binary")
            _require(fmt in ("binary", "text"), f"{key}.format", f"未対応の形式です: {fmt}")
            _require(bool(spec.get("path")), f"{key}.path", "格子データには path が必要です")
            return GridData(path=str(spec["path"]), format=fmt)
    except KeyError as e:
        raise ConfigError(f"必須パラメータ {e.args[0]} がありません", key=f"{key}.{e.args[0]}") from e
    except (TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"パラメータが不正です: {e}", key=key) from e
    raise ConfigError(f"未知の磁場の種類です: {kind}", key=f"{key}.kind")


def _coerce(name: str, value: Any, default: Any) -> Any:
    if value is None:
        return None
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                return value.lower() in ("true", "1", "t", "yes")
            return bool(value)
        if isinstance(default, int) and not isinstance(default, bool):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"整数ではありません: {value}")
            return int(value)
        if isinstance(default, float) or name in ("gap_tol",):
            return float(value)
        if isinstance(default, list):
            if not isinstance(value, list):
                raise ValueError(f"リストではありません: {value}")
            return [int(v) for v in value] if name == "convergence_points" else [str(v) for v in value]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"値を解釈できません: {value!r} ({e})", key=name) from e
    return value


def _apply(config: RunConfig, values: Dict[str, Any]) -> RunConfig:
    defaults = RunConfig()
    known = set(RunConfig.keys())
    for name, value in values.items():
        if name not in known:
            raise ConfigError("未知の設定キーです", key=name)
        setattr(config, name, _coerce(name, value, getattr(defaults, name)))
    return config


def load_run_config(path: Optional[Union[str, Path]] = None,
                    overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    設定ファイルと上書き値から実効設定を作る

    Args:
        path: YAML 設定ファイル（None なら既定値のみ）
        overrides: コマンドライン引数による上書き

    Returns:
        RunConfig: 検証・確定済みの設定
    """
    config = RunConfig()
    if path is not None:
        source = Path(path)
        if not source.exists():
            raise ConfigError(f"設定ファイルが見つかりません: {source}", key="config")
        try:
            with open(source, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"設定ファイルを解析できません: {e}", key="config") from e
        if not isinstance(data, dict):
            raise ConfigError("設定ファイルはキーと値の対応である必要があります", key="config")
        _apply(config, data)
        logger.info(f"設定ファイルを読み込みました: {source}")
    if overrides:
        _apply(config, {k: v for k, v in overrides.items() if v is not None})
    return config.validate().materialize()


def parse_coupling(text: str) -> Dict[str, float]:
    """
    --t の値を解釈する。"A:B:STEP" はスイープ範囲、単一の数値は t

    Args:
        text: 引数文字列

    Returns:
        Dict[str, float]: 上書き値
    """
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return {"t": float(parts[0])}
        if len(parts) == 3:
            a, b, step = (float(p) for p in parts)
            if not a < b:
                raise ConfigError(f"範囲は A < B である必要があります: {text}", key="t")
            return {"t_min": a, "t_max": b, "t_step": step}
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"数値として解釈できません: {text}", key="t") from e
    raise ConfigError(f"A:B:STEP または単一の数値で指定してください: {text}", key="t")
