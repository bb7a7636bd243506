#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
パウリ作用素ゼロモード検出ツール設定ファイル
"""

import os
from dotenv import load_dotenv

# .envファイルから環境変数を読み込む
load_dotenv()

# ソフトウェア情報
SOFTWARE_NAME = "pauli_zero_modes"
SOFTWARE_VERSION = "1.0.0"

# ログ設定
DEBUG = os.getenv("DEBUG", "False").lower() in ("true", "1", "t")

# FFTのスレッド数（結果はスレッド数を固定すればビット単位で再現される）
NUM_THREADS = max(1, int(os.getenv("PAULI_NUM_THREADS", "1")))

# 共役勾配法の既定値
CG_RTOL = 1e-8
CG_MAXITER = 5000

# 固有値ソルバーの既定値
EIG_TOL = 1e-6
EIG_MAXITER = 500
START_SEED = 20240611  # 初期ブロック生成用の固定シード

# 局在フィルタ
SHELL_FRACTION = 0.1  # 半幅に対する境界殻の厚さ
LOCALIZATION_THRESHOLD = 0.05  # 境界殻の質量比の上限

# Birman-Schwinger 判定の許容幅
BS_TOL = 0.02
