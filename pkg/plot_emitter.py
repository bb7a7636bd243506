#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Plot Emitter - スイープ結果の gnuplot スクリプト生成ツール
==================================================

sweep コマンドの実行ディレクトリにある sweep.csv と detections.csv から、
λ_min(t) と Birman-Schwinger 最大固有値 μ(t) を描く gnuplot スクリプト
sweep.gp を生成します。画像そのものは生成しません。

使用方法:
-------
```
python plot_emitter.py 実行ディレクトリ
```

例:
```
python plot_emitter.py results/sweep_0001
gnuplot results/sweep_0001/sweep.gp
```

注意事項:
-------
- 実行ディレクトリには record.yaml と sweep.csv が必要です
- スクリプトは同じ実行ディレクトリ内のファイルだけを参照します
"""

import os
import sys
from pathlib import Path
from typing import Union

import yaml

from utils.helpers import atomic_write_text
from zeromode.records import DETECTIONS_FILE, RECORD_FILE, SWEEP_FILE

PLOT_FILE = "sweep.gp"
IMAGE_FILE = "sweep.png"


def build_plot_script(gap_tol: float, bs_tol: float, title: str = "zero-mode sweep") -> str:
    """
    gnuplot スクリプトの本文を作る

    Args:
        gap_tol: 直接チャネルの閾値（参照線）
        bs_tol: BS チャネルの許容幅（参照線 1 − bs_tol）
        title: 図のタイトル

    Returns:
        str: スクリプト
    """
    safe_title = title.replace('"', "'")
    return "\n".join([
        "# sweep.csv と detections.csv のみを参照する",
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set terminal pngcairo size 900,1000",
        f"set output '{IMAGE_FILE}'",
        "set multiplot layout 2,1 title \"" + safe_title + "\"",
        "",
        "set xlabel 't'",
        "set ylabel 'lambda_min'",
        "set logscale y",
        f"gap_tol = {gap_tol!r}",
        f"plot '{SWEEP_FILE}' using 't':'lambda_min' with linespoints title 'lambda_min', \\",
        "     gap_tol with lines dashtype 2 title 'gap_tol', \\",
        f"     '{DETECTIONS_FILE}' using 't_star':'lambda_min' with points pointtype 7 title 'detections'",
        "unset logscale y",
        "",
        "set ylabel 'mu_1'",
        f"bs_line = 1.0 - {bs_tol!r}",
        f"plot '{SWEEP_FILE}' using 't':'bs_top_1' with linespoints title 'bs_top_1', \\",
        "     1.0 with lines dashtype 3 title '1', \\",
        "     bs_line with lines dashtype 2 title '1 - bs_tol', \\",
        f"     '{DETECTIONS_FILE}' using 't_star':'bs_top' with points pointtype 7 title 'detections'",
        "",
        "unset multiplot",
        "",
    ])


def emit_plot_script(run_dir: Union[str, Path], gap_tol: float, bs_tol: float,
                     title: str = "zero-mode sweep") -> Path:
    """
    実行ディレクトリに sweep.gp を書き出す

    Args:
        run_dir: 実行ディレクトリ
        gap_tol: 直接チャネルの閾値
        bs_tol: BS チャネルの許容幅
        title: 図のタイトル

    Returns:
        Path: 書き出したスクリプトのパス
    """
    return atomic_write_text(Path(run_dir) / PLOT_FILE, build_plot_script(gap_tol, bs_tol, title))


def process_run_directory(run_dir: str) -> Path:
    """
    record.yaml から閾値を読み、スクリプトを生成する

    Args:
        run_dir: 実行ディレクトリ

    Returns:
        Path: 書き出したスクリプトのパス
    """
    print(f"実行ディレクトリを処理中: {run_dir}")
    with open(os.path.join(run_dir, RECORD_FILE), "r", encoding="utf-8") as f:
        record = yaml.safe_load(f) or {}
    config = record.get("config", {})
    field_kind = config.get("field", {}).get("kind", "field")
    path = emit_plot_script(run_dir, float(config["gap_tol"]), float(config["bs_tol"]),
                            title=f"{field_kind} L={config.get('half_width')} N={config.get('points_per_axis')}")
    print(f"ファイル作成: {path}")
    return path


def main():
    """メイン関数"""
    if len(sys.argv) != 2:
        print("使用方法: python plot_emitter.py 実行ディレクトリ")
        sys.exit(1)

    run_dir = sys.argv[1]
    for name in (RECORD_FILE, SWEEP_FILE):
        if not os.path.exists(os.path.join(run_dir, name)):
            print(f"エラー: ファイルが見つかりません: {os.path.join(run_dir, name)}")
            sys.exit(1)

    try:
        process_run_directory(run_dir)
    except (KeyError, ValueError, yaml.YAMLError) as e:
        print(f"エラー: record.yaml から閾値を読み取れません: {e}")
        sys.exit(1)


if __name__ == "__main__":
    main()
