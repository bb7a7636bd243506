#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
性質検証スイート

validate コマンドが実行する検証群。各スイートは小さな格子上で
作用素と不等式の性質を確かめ、最悪値と合否を返す。
"""

import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from zeromode.errors import ZeroModeError
from zeromode.fields import (
    RandomDivFree,
    divergence_residual,
    diamagnetic_gap,
    hardy_ratio,
    prepare_field,
    zeeman_form_bound,
)
from zeromode.gauge import biot_savart
from zeromode.grid import GridSpec, ScalarField, SpinorAlgebra, SpinorField, VectorField, ifft3, make_grid
from zeromode.pauli import fourier_preconditioner, spinor_operator
from zeromode.run_config import RunConfig
from zeromode.spectral import SpectralSettings, dense_oracle, smallest_eigs
from zeromode.sweep import build_context, gauge_invariance_check

logger = logging.getLogger(__name__)

HARDY_LIMIT = 4.05
DIAMAGNETIC_TOL = 1e-6
ORACLE_TOL = 1e-8
ORACLE_EIGENVALUES = 6
GAUGE_INVARIANCE_TOL = 1e-6
FIELD_DIVERGENCE_TOL = 1e-6
FIELD_CURL_TOL = 1e-6


@dataclass
class SuiteResult:
    """
    1つの検証スイートの結果

    Attributes:
        name: スイート名
        passed: 合否
        cases: 検証したケース数
        worst: 最悪値
        threshold: 合格の閾値
        message: 失敗理由など
        seconds: 所要時間
        values_checked: 比較した値の総数（0 ならケース数とみなす）
    """
    name: str
    passed: bool
    cases: int
    worst: float
    threshold: float
    message: str = ""
    seconds: float = 0.0
    values_checked: int = 0


def band_limited_spinor(grid: GridSpec, rng: np.random.Generator, max_mode: int = 3) -> SpinorField:
    """|n_i| ≤ max_mode のフーリエ係数だけを持つランダムなスピノル"""
    n = grid.points_per_axis
    hat = np.zeros((2,) + grid.shape, dtype=np.complex128)
    modes = np.arange(-max_mode, max_mode + 1) % n
    index = np.ix_(modes, modes, modes)
    size = (len(modes),) * 3
    for c in range(2):
        hat[c][index] = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return SpinorField(grid, ifft3(hat) * n ** 1.5)


def band_limited_potential(grid: GridSpec, rng: np.random.Generator, amplitude: float,
                           max_mode: int = 2) -> VectorField:
    """低周波の実ベクトルポテンシャル（最大値 amplitude）"""
    n = grid.points_per_axis
    hat = np.zeros((3,) + grid.shape, dtype=np.complex128)
    modes = np.arange(-max_mode, max_mode + 1) % n
    index = np.ix_(modes, modes, modes)
    size = (len(modes),) * 3
    for c in range(3):
        hat[c][index] = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    values = ifft3(hat).real
    peak = float(np.max(np.abs(values)))
    return VectorField(grid, values * (amplitude / peak if peak > 0 else 0.0))


def _anticommutation(config: RunConfig) -> SuiteResult:
    rng = np.random.default_rng(config.seed)
    worst = SpinorAlgebra.anticommutation_defect()
    for _ in range(config.validate_cases):
        a, b = rng.standard_normal(3), rng.standard_normal(3)
        sa, sb = SpinorAlgebra.contract(a), SpinorAlgebra.contract(b)
        defect = np.max(np.abs(sa @ sb + sb @ sa - 2.0 * np.dot(a, b) * np.eye(2)))
        worst = max(worst, float(defect) / (np.linalg.norm(a) * np.linalg.norm(b)))
    threshold = 1e-14
    return SuiteResult("anticommutation", worst <= threshold, config.validate_cases + 1, worst, threshold)


def _hardy(config: RunConfig) -> SuiteResult:
    grid = make_grid(6.0, 24)
    rng = np.random.default_rng(config.seed + 1)
    x = grid.mesh
    worst = 0.0
    for _ in range(config.validate_cases):
        values = np.zeros(grid.shape, dtype=np.complex128)
        for _ in range(rng.integers(1, 4)):
            center = rng.uniform(-1.0, 1.0, size=3).reshape(3, 1, 1, 1)
            width = rng.uniform(0.8, 1.5)
            weight = rng.standard_normal() + 1j * rng.standard_normal()
            values += weight * np.exp(-np.sum((x - center) ** 2, axis=0) / (2.0 * width ** 2))
        worst = max(worst, hardy_ratio(ScalarField(grid, values)))
    return SuiteResult("hardy", worst <= HARDY_LIMIT, config.validate_cases, worst, HARDY_LIMIT)


def random_gauge_potential(grid: GridSpec, rng: np.random.Generator) -> VectorField:
    """ランダムな RandomDivFree 磁場のクーロンゲージのポテンシャル"""
    source = RandomDivFree(seed=int(rng.integers(2 ** 31)), amplitude=float(rng.uniform(0.1, 5.0)),
                           correlation_length=float(rng.uniform(0.5, 1.5)))
    return biot_savart(prepare_field(source, grid)).A


def _diamagnetic(config: RunConfig) -> SuiteResult:
    grid = make_grid(4.0, 16)
    rng = np.random.default_rng(config.seed + 2)
    worst = -np.inf
    for _ in range(config.validate_cases):
        psi = band_limited_spinor(grid, rng)
        A = random_gauge_potential(grid, rng)
        # 負側の超過量を ‖ψ‖^2 で正規化する
        deficit = -diamagnetic_gap(psi, A) / psi.norm() ** 2
        worst = max(worst, deficit)
    return SuiteResult("diamagnetic", worst <= DIAMAGNETIC_TOL, config.validate_cases, float(worst),
                       DIAMAGNETIC_TOL)


def _zeeman(config: RunConfig) -> SuiteResult:
    grid = make_grid(4.0, 16)
    rng = np.random.default_rng(config.seed + 3)
    worst = 0.0
    for _ in range(config.validate_cases):
        psi = band_limited_spinor(grid, rng)
        B = band_limited_potential(grid, rng, amplitude=rng.uniform(0.1, 5.0))
        zeeman, weight = zeeman_form_bound(psi, B)
        worst = max(worst, (zeeman - weight) / weight)
    threshold = 1e-12
    return SuiteResult("zeeman", worst <= threshold, config.validate_cases, worst, threshold)


def _oracle_equivalence(config: RunConfig) -> SuiteResult:
    grid = make_grid(4.0, 8)
    rng = np.random.default_rng(config.seed + 4)
    scale = (np.pi / grid.half_width) ** 2
    worst = 0.0
    compared = 0
    for case in range(config.oracle_cases):
        source = RandomDivFree(seed=int(rng.integers(2 ** 31)), amplitude=float(rng.uniform(1.0, 5.0)),
                               correlation_length=1.0)
        ctx = build_context(source, grid, t=float(rng.uniform(0.5, 2.0)))
        shift = scale + ctx.t * ctx.mean_abs_b
        iterative = smallest_eigs(spinor_operator(ctx, "pauli"), ORACLE_EIGENVALUES, tol=1e-9,
                                  preconditioner=fourier_preconditioner(ctx, shift),
                                  maxiter=config.eig_maxiter, seed=config.eig_seed + case)
        exact = dense_oracle(ctx).eigenvalues[:ORACLE_EIGENVALUES]
        if len(iterative.eigenvalues) != len(exact):
            worst = float("inf")
            continue
        error = np.abs(iterative.eigenvalues - exact) / np.maximum(np.abs(exact), scale)
        worst = max(worst, float(np.max(error)))
        compared += len(exact)
    return SuiteResult("oracle_equivalence", worst <= ORACLE_TOL, config.oracle_cases, worst, ORACLE_TOL,
                       values_checked=compared)


def _gauge_invariance(config: RunConfig) -> SuiteResult:
    grid = make_grid(4.0, 16)
    source = RandomDivFree(seed=config.seed, amplitude=2.0, correlation_length=1.5)
    settings = SpectralSettings(k=3, eig_tol=1e-9, maxiter=config.eig_maxiter, seed=config.eig_seed)
    report = gauge_invariance_check(source, grid, t=1.0, shifts=5, seed=config.seed, settings=settings,
                                    amplitude=0.05, max_mode=1)
    worst = report.max_relative_change
    return SuiteResult("gauge_invariance", worst <= GAUGE_INVARIANCE_TOL, 5, worst, GAUGE_INVARIANCE_TOL)


def _field_source(config: RunConfig) -> SuiteResult:
    grid = config.grid()
    B = prepare_field(config.source(), grid)
    residual = divergence_residual(B)
    if residual > FIELD_DIVERGENCE_TOL:
        return SuiteResult("field_source", False, 1, residual, FIELD_DIVERGENCE_TOL,
                           message=f"準備した磁場の発散残差が大きすぎます: {residual:.3e}")
    gauge = biot_savart(B)
    worst = max(residual, gauge.curl_residual)
    return SuiteResult("field_source", gauge.curl_residual <= FIELD_CURL_TOL, 1, worst, FIELD_CURL_TOL)


SUITES: Dict[str, Callable[[RunConfig], SuiteResult]] = {
    "field_source": _field_source,
    "anticommutation": _anticommutation,
    "hardy": _hardy,
    "diamagnetic": _diamagnetic,
    "zeeman": _zeeman,
    "oracle_equivalence": _oracle_equivalence,
    "gauge_invariance": _gauge_invariance,
}


def run_validation(config: RunConfig) -> List[SuiteResult]:
    """
    検証スイートを実行する。例外は該当スイートの失敗として記録する

    Args:
        config: 実効設定（seed・件数・suites を用いる。suites が空ならすべて）

    Returns:
        List[SuiteResult]: スイートごとの結果
    """
    selected = config.suites or list(SUITES)
    results = []
    for name in selected:
        suite = SUITES[name]
        start = time.perf_counter()
        try:
            result = suite(config)
        except (ZeroModeError, ValueError) as e:
            logger.error(f"検証スイート {name} でエラーが発生しました: {e}")
            result = SuiteResult(name, False, 0, float("nan"), float("nan"), message=str(e))
        result.seconds = time.perf_counter() - start
        result.values_checked = result.values_checked or result.cases
        status = "合格" if result.passed else "不合格"
        log = logger.info if result.passed else logger.warning
        log(f"検証 {name}: {status}（{result.cases}件, 最悪値 {result.worst:.3e}, 閾値 {result.threshold:.3e}）")
        results.append(result)
    return results
