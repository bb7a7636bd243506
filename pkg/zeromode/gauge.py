#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
クーロンゲージのベクトルポテンシャル再構成

発散ゼロの磁場 B から、フーリエ記号 Â(k) = i k × B̂(k) / |k|^2 で
curl A = B、div A = 0 を満たす周期的な A を作る
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from zeromode.errors import DivergenceError, GaugeObstructionError
from zeromode.fields import divergence_residual, lp_norm, solenoidal_projection_values
from zeromode.grid import (
    ScalarField,
    VectorField,
    fft3,
    ifft3,
    spectral_curl,
    spectral_divergence,
    spectral_gradient,
)

logger = logging.getLogger(__name__)

# 入力の許容相対発散残差（これ以下なら射影してから再構成する）
INPUT_DIVERGENCE_TOL = 1e-3
# 許容する平均磁束（max|B| 比）
MEAN_FLUX_TOL = 1e-3


@dataclass
class GaugeData:
    """
    ベクトルポテンシャルと検証量

    Attributes:
        A: クーロンゲージのベクトルポテンシャル
        div_residual: max|div A| / (k_nyq·max|A|)
        curl_residual: ‖curl A − B‖ / ‖B‖（射影後の B に対して）
        l3_norm: ‖A‖_{L^3}
        l32_norm: ‖B‖_{L^{3/2}}
        flux_residual: 除去した平均磁束 |mean B| / max|B|
        input_divergence: 入力 B の相対発散残差
    """
    A: VectorField
    div_residual: float
    curl_residual: float
    l3_norm: float
    l32_norm: float = 0.0
    flux_residual: float = 0.0
    input_divergence: float = 0.0

    def summary(self) -> dict:
        return {
            "div_residual": self.div_residual,
            "curl_residual": self.curl_residual,
            "l3_norm": self.l3_norm,
            "l32_norm": self.l32_norm,
            "flux_residual": self.flux_residual,
            "input_divergence": self.input_divergence,
        }


def biot_savart(B: VectorField) -> GaugeData:
    """
    Biot-Savart 則の周期版でクーロンゲージのポテンシャルを求める

    Args:
        B: 発散ゼロの磁場

    Returns:
        GaugeData: ポテンシャルと残差
    """
    grid = B.grid
    scale = B.max_magnitude()
    if scale == 0.0:
        zero = VectorField(grid, np.zeros((3,) + grid.shape))
        return GaugeData(A=zero, div_residual=0.0, curl_residual=0.0, l3_norm=0.0)

    input_divergence = divergence_residual(B)
    if input_divergence > INPUT_DIVERGENCE_TOL:
        raise DivergenceError(
            f"磁場が発散ゼロではありません: 相対残差 {input_divergence:.3e} > {INPUT_DIVERGENCE_TOL:.1e}",
            input_divergence)

    mean = np.mean(B.values.real, axis=(1, 2, 3))
    flux = float(np.linalg.norm(mean) / scale)
    if flux > MEAN_FLUX_TOL:
        raise GaugeObstructionError(
            f"正味の磁束があるため周期的なポテンシャルが存在しません: |mean B|/max|B| = {flux:.3e}", flux)

    target = solenoidal_projection_values(grid, B.values.real, zero_mean=True)
    hat = fft3(target)
    k = grid.k_vectors
    k2 = grid.k_squared
    safe = np.where(k2 > 0, k2, 1.0)
    a_hat = 1j * np.stack([
        k[1] * hat[2] - k[2] * hat[1],
        k[2] * hat[0] - k[0] * hat[2],
        k[0] * hat[1] - k[1] * hat[0],
    ]) / safe
    a_hat[:, k2 == 0] = 0.0
    A = VectorField(grid, ifft3(a_hat).real)

    a_max = A.max_magnitude()
    div = spectral_divergence(A)
    div_residual = float(np.max(np.abs(div.values)) / (grid.k_nyquist * a_max)) if a_max > 0 else 0.0
    curl = spectral_curl(A)
    reference = VectorField(grid, target)
    ref_norm = reference.norm()
    curl_residual = (curl - reference).norm() / ref_norm if ref_norm > 0 else 0.0

    data = GaugeData(
        A=A,
        div_residual=div_residual,
        curl_residual=float(curl_residual),
        l3_norm=lp_norm(A, 3.0).value,
        l32_norm=lp_norm(B, 1.5).value,
        flux_residual=flux,
        input_divergence=input_divergence,
    )
    logger.info(f"ゲージ再構成: div残差 {div_residual:.2e}, curl残差 {curl_residual:.2e}, "
                f"‖A‖_3 = {data.l3_norm:.6g}, ‖B‖_3/2 = {data.l32_norm:.6g}")
    return data


def gauge_shift(A: VectorField, f: ScalarField) -> VectorField:
    """
    ゲージ変換 A -> A + ∇f

    Args:
        A: ベクトルポテンシャル
        f: ゲージ関数

    Returns:
        VectorField: 変換後のポテンシャル
    """
    A._check(f)
    return A + spectral_gradient(f)


def biot_savart_at(B: VectorField, point: Sequence[float], radius: Optional[float] = None) -> np.ndarray:
    """
    Biot-Savart 積分 (1/4π)∫ B(y) × (x−y)/|x−y|^3 dy を実空間で直接評価する

    評価点は格子点とし、その格子点自身は和から除く。

    Args:
        B: 磁場
        point: 評価点（格子点）
        radius: 積分する球の半径（None なら箱全体）

    Returns:
        np.ndarray: 点 x でのベクトルポテンシャル
    """
    grid = B.grid
    x = np.asarray(point, dtype=np.float64).reshape(3, 1, 1, 1)
    d = x - grid.mesh
    dist2 = np.sum(d ** 2, axis=0)
    mask = dist2 > (0.25 * grid.spacing) ** 2
    if radius is not None:
        mask &= np.sqrt(np.sum(grid.mesh ** 2, axis=0)) <= radius
    b = B.values.real
    # B(y) × (x − y)（FFT のシンボル i k×B̂/|k|^2 と同じ向き）
    cross = np.stack([
        b[1] * d[2] - b[2] * d[1],
        b[2] * d[0] - b[0] * d[2],
        b[0] * d[1] - b[1] * d[0],
    ])
    weight = np.where(mask, 1.0 / np.where(mask, dist2, 1.0) ** 1.5, 0.0)
    return np.sum(cross * weight, axis=(1, 2, 3)) * grid.cell_volume / (4.0 * np.pi)


def fit_gauge_constant(pairs: Iterable[Tuple[float, float]]) -> float:
    """
    ‖A‖_3 ≤ C‖B‖_{3/2} の経験的な定数 C = max ‖A‖_3/‖B‖_{3/2} を求める

    Args:
        pairs: (‖A‖_3, ‖B‖_{3/2}) の組

    Returns:
        float: 経験的な C（記録用、検証には用いない）
    """
    ratios = [a / b for a, b in pairs if b > 0]
    constant = max(ratios, default=0.0)
    logger.info(f"ゲージ定数の経験値: C = {constant:.6g}（{len(ratios)}件）")
    return constant
