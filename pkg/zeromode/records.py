#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
結果レコードの整形と保存

1回の実行の結果を record.yaml と平坦な CSV 表に書き出す
"""

import logging
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Sequence

import yaml

from config import SOFTWARE_NAME, SOFTWARE_VERSION
from utils.helpers import atomic_write_text, to_builtin, validate_record_structure, write_csv
from zeromode.sweep import Detection, SweepRecord

logger = logging.getLogger(__name__)

RECORD_FILE = "record.yaml"
SWEEP_FILE = "sweep.csv"
DETECTIONS_FILE = "detections.csv"


def _float_representer(dumper: yaml.SafeDumper, value: float) -> yaml.ScalarNode:
    if value != value:
        text = ".nan"
    elif value in (float("inf"), float("-inf")):
        text = ".inf" if value > 0 else "-.inf"
    else:
        text = repr(value)
        if "." not in text and "e" in text:
            # YAML 1.1 の浮動小数点は小数点が必須
            text = text.replace("e", ".0e", 1)
    return dumper.represent_scalar("tag:yaml.org,2002:float", text)


class _RecordDumper(yaml.SafeDumper):
    pass


_RecordDumper.add_representer(float, _float_representer)


def dump_yaml(data: Dict[str, Any]) -> str:
    """浮動小数点を repr の完全精度で書く YAML 文字列"""
    return yaml.dump(data, Dumper=_RecordDumper, default_flow_style=False, allow_unicode=True,
                     indent=2, width=1000, sort_keys=False)


@dataclass
class ResultRecord:
    """
    1回の実行の結果

    Attributes:
        command: サブコマンド
        config: 実効設定（既定値を確定したもの）
        payload: コマンドごとの結果
        timings: 段階ごとの経過時間（秒）
        status: "success" または "failed"
        exit_code: プロセスの終了コード
        error: 失敗時のメッセージ
    """
    command: str
    config: Dict[str, Any]
    payload: Dict[str, Any] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    status: str = "success"
    error: str = ""
    exit_code: int = 0

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "command": self.command,
            "status": self.status,
            "exit_code": self.exit_code,
            "software": {"name": SOFTWARE_NAME, "version": SOFTWARE_VERSION},
            "generated_at": datetime.now().isoformat(),
            "config": to_builtin(self.config),
            "payload": to_builtin(self.payload),
            "timings": to_builtin(self.timings),
        }
        if self.error:
            data["error"] = self.error
        return data


class RecordFormatter:
    """
    結果レコードの整形・保存

    実行ディレクトリに record.yaml と、スイープでは CSV 表を書き出す
    """

    def __init__(self):
        """初期化"""
        self.record_data: Dict[str, Any] = {}

    def format_record(self, record: ResultRecord) -> Dict[str, Any]:
        """
        レコードを YAML 構造に整形する

        Args:
            record: 結果レコード

        Returns:
            Dict[str, Any]: YAML 構造データ
        """
        data = record.to_dict()
        if validate_record_structure(data):
            logger.debug("結果レコードの構造の検証が成功しました")
        else:
            logger.warning("結果レコードの構造に問題があります")
        self.record_data = data
        return data

    def save_record(self, run_dir: Path, record: ResultRecord) -> Path:
        """
        record.yaml を書き出す

        Args:
            run_dir: 実行ディレクトリ
            record: 結果レコード

        Returns:
            Path: 書き出したファイル
        """
        path = atomic_write_text(Path(run_dir) / RECORD_FILE, dump_yaml(self.format_record(record)))
        logger.info(f"結果レコードを保存しました: {path}")
        return path

    def save_sweep_table(self, run_dir: Path, records: Sequence[SweepRecord], bs_k: int) -> Path:
        """
        スイープ表 sweep.csv を書き出す

        列: t, lambda_min, next_gap, bs_top_1..k, nullity, localization
        （BS 値は局在分岐の降順、足りない分は nan）
        """
        header = ["t", "lambda_min", "next_gap"] + [f"bs_top_{i + 1}" for i in range(bs_k)]
        header += ["nullity", "localization"]
        rows = []
        for r in records:
            bs = list(r.bs_top[:bs_k]) + [float("nan")] * max(0, bs_k - len(r.bs_top))
            rows.append([float(r.t), float(r.lambda_min), float(r.next_gap)] + [float(v) for v in bs]
                        + [int(r.nullity), float(r.localization)])
        path = write_csv(Path(run_dir) / SWEEP_FILE, header, rows)
        logger.info(f"スイープ表を保存しました: {path}（{len(rows)}行）")
        return path

    def save_detection_table(self, run_dir: Path, detections: Sequence[Detection]) -> Path:
        """検出表 detections.csv を書き出す"""
        header = ["t_star", "multiplicity", "bracket_lo", "bracket_hi", "lambda_min", "bs_top", "consistent"]
        rows = [[float(d.t_star), int(d.multiplicity), float(d.bracket[0]), float(d.bracket[1]),
                 float(d.lambda_min), float(d.bs_top), int(d.consistent)] for d in detections]
        return write_csv(Path(run_dir) / DETECTIONS_FILE, header, rows)

    def get_format_summary(self) -> Dict[str, Any]:
        if not self.record_data:
            return {"status": "no_data"}
        return {
            "status": self.record_data.get("status", ""),
            "command": self.record_data.get("command", ""),
            "payload_keys": list(self.record_data.get("payload", {}).keys()),
        }


def load_record(path: Path) -> Dict[str, Any]:
    """保存済みの record.yaml を読む"""
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f)


def sweep_payload(records: List[SweepRecord]) -> List[Dict[str, Any]]:
    return [to_builtin(r) for r in records]
