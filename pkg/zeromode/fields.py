#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
磁場カタログと不等式チェック

Loss-Yau 磁場とその派生（スケール・和・ランダム発散ゼロ場・格子データ）を
格子上にサンプリングし、L^p ノルム、Hardy 比、反磁性ギャップなどの
診断量を計算する
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from zeromode.errors import FieldError, GridError
from zeromode.grid import (
    GridSpec,
    ScalarField,
    SpinorField,
    VectorField,
    fft3,
    gradient_values,
    ifft3,
    sigma_dot_values,
    spectral_divergence,
)

logger = logging.getLogger(__name__)

# Sobolev 埋め込み H^1 -> L^6 の最良定数の二乗
SOBOLEV_GAMMA_SQ = 1.0 / (3.0 * (np.pi / 2.0) ** (4.0 / 3.0))

# 単純立方格子の Σ'|n|^{-2} の解析接続値
LATTICE_ZETA = -8.913632917585

# ‖B_LY‖_{L^{3/2}} の閉形式
LOSS_YAU_L32_NORM = 12.0 * (np.pi / 2.0) ** (4.0 / 3.0)


@dataclass(frozen=True)
class LossYau:
    """Loss-Yau 磁場"""


@dataclass(frozen=True)
class Scaled:
    base: "FieldSource"
    factor: float


@dataclass(frozen=True)
class Sum:
    terms: Tuple["FieldSource", ...]


@dataclass(frozen=True)
class RandomDivFree:
    """
    周波数空間で生成する発散ゼロのランダム場

    Attributes:
        seed: 乱数シード
        amplitude: 生成後の L^{3/2} ノルム
        correlation_length: ガウス型スペクトル包絡の相関長
        window_radius: 実空間ガウス窓の半径（None なら L/4）
    """
    seed: int
    amplitude: float
    correlation_length: float
    window_radius: Optional[float] = None


@dataclass(frozen=True)
class GridData:
    """
    格子データの磁場。field を直接持つか、path から遅延読み込みする
    """
    field: Optional[VectorField] = None
    path: Optional[str] = None
    format: str = "binary"

    def load(self) -> VectorField:
        if self.field is not None:
            return self.field
        if not self.path:
            raise FieldError("格子データには field か path が必要です")
        from zeromode.field_io import load_grid_data
        return load_grid_data(self.path, self.format)


@dataclass(frozen=True)
class ZeroField:
    """恒等的にゼロの磁場"""


FieldSource = Union[LossYau, Scaled, Sum, RandomDivFree, GridData, ZeroField]


@dataclass
class NormReport:
    """L^p ノルムの計算結果"""
    p: float
    value: float
    quadrature: str = ""


def _loss_yau_vector(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    x1, x2, x3 = x[0], x[1], x[2]
    r2 = x1 ** 2 + x2 ** 2 + x3 ** 2
    w = np.array([
        2.0 * x1 * x3 - 2.0 * x2,
        2.0 * x2 * x3 + 2.0 * x1,
        1.0 - x1 ** 2 - x2 ** 2 + x3 ** 2,
    ])
    return w, r2


def eval_loss_yau(x) -> np.ndarray:
    """
    Loss-Yau 磁場 B(x) = 12/(1+r^2)^3 · w(x) を評価する

    Args:
        x: 形状 (3,) または (3, ...) の座標

    Returns:
        np.ndarray: 同じ形状の磁場
    """
    w, r2 = _loss_yau_vector(x)
    return 12.0 / (1.0 + r2) ** 3 * w


def loss_yau_potential(x) -> np.ndarray:
    """閉形式ポテンシャル A_LY = 3/(1+r^2)^2 · w（クーロンゲージではない）"""
    w, r2 = _loss_yau_vector(x)
    return 3.0 / (1.0 + r2) ** 2 * w


def _coulomb_profile(r: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """g(r) = 3(arctan r − r)/r^3 と h(r)/r = g'(r)/r"""
    r = np.asarray(r, dtype=np.float64)
    small = r < 0.02
    rs = np.where(small, 1.0, r)
    g = 3.0 * (np.arctan(rs) - rs) / rs ** 3
    h_over_r = (6.0 / rs ** 3 - 9.0 * np.arctan(rs) / rs ** 4 + 3.0 / (rs ** 3 * (1.0 + rs ** 2))) / rs
    r2 = r ** 2
    g_series = -1.0 + 3.0 * r2 / 5.0 - 3.0 * r2 ** 2 / 7.0 + r2 ** 3 / 3.0
    h_series = 6.0 / 5.0 - 12.0 * r2 / 7.0 + 2.0 * r2 ** 2
    return np.where(small, g_series, g), np.where(small, h_series, h_over_r)


def loss_yau_coulomb_potential(x) -> np.ndarray:
    """
    Loss-Yau 磁場のクーロンゲージポテンシャル

    A_C = A_LY − ∇(x3·g(r))、g(r) = 3(arctan r − r)/r^3。
    div A_C = 0、curl A_C = B_LY、A_C(0) = (0, 0, 4)。
    """
    x = np.asarray(x, dtype=np.float64)
    r = np.sqrt(np.sum(x ** 2, axis=0))
    g, h_over_r = _coulomb_profile(r)
    grad_chi = x[2] * h_over_r * x
    grad_chi[2] = grad_chi[2] + g
    return loss_yau_potential(x) - grad_chi


def eval_loss_yau_zero_mode(x, coulomb: bool = False) -> np.ndarray:
    """
    σ·((1/i)∇ + A) の核 ψ = (1+r^2)^{-3/2} (1 + i x·σ)(0, 1)^T を評価する

    Args:
        x: 形状 (3,) または (3, ...) の座標
        coulomb: True なら A_C = A_LY − ∇(x3·g) に合わせて位相 e^{i x3 g(r)} を掛ける

    Returns:
        np.ndarray: 形状 (2, ...) のスピノル値
    """
    x = np.asarray(x, dtype=np.float64)
    x1, x2, x3 = x[0], x[1], x[2]
    r2 = x1 ** 2 + x2 ** 2 + x3 ** 2
    weight = (1.0 + r2) ** -1.5
    psi = np.stack([weight * (x2 + 1j * x1), weight * (1.0 - 1j * x3)])
    if coulomb:
        g, _ = _coulomb_profile(np.sqrt(r2))
        psi = np.exp(1j * x3 * g) * psi
    return psi


def loss_yau_zero_mode(grid: GridSpec) -> SpinorField:
    return SpinorField(grid, eval_loss_yau_zero_mode(grid.mesh))


def loss_yau_coulomb_zero_mode(grid: GridSpec) -> SpinorField:
    """クーロンゲージでの Loss-Yau ゼロモード"""
    return SpinorField(grid, eval_loss_yau_zero_mode(grid.mesh, coulomb=True))


def solenoidal_projection_values(grid: GridSpec, values: np.ndarray, zero_mean: bool = False) -> np.ndarray:
    hat = fft3(values)
    k = grid.k_vectors
    k2 = grid.k_squared
    active = (k2 > 0) & ~grid.nyquist_mask
    safe = np.where(active, k2, 1.0)
    k_dot = np.sum(k * hat, axis=0) / safe
    hat = np.where(active, hat - k * k_dot, hat)
    hat[:, grid.nyquist_mask] = 0.0
    if zero_mean:
        hat[:, 0, 0, 0] = 0.0
    projected = ifft3(hat)
    if not np.any(np.iscomplex(values)):
        projected = projected.real
    return projected


def solenoidal_projection(B: VectorField, zero_mean: bool = False) -> VectorField:
    """
    発散ゼロ部分への射影 I − kk^T/|k|^2

    ナイキスト指数を含むモードは除去し、k = 0 は zero_mean でなければ残す。

    Args:
        B: ベクトル場
        zero_mean: 平均（k = 0 成分）も除去するか

    Returns:
        VectorField: 射影された場
    """
    return VectorField(B.grid, solenoidal_projection_values(B.grid, B.values, zero_mean))


def divergence_residual(B: VectorField) -> float:
    """相対発散残差 max|div B| / (k_nyq · max|B|)"""
    scale = B.max_magnitude()
    if scale == 0.0:
        return 0.0
    div = spectral_divergence(B)
    return float(np.max(np.abs(div.values)) / (B.grid.k_nyquist * scale))


def _sample_random(source: RandomDivFree, grid: GridSpec) -> np.ndarray:
    if source.correlation_length <= 0:
        raise FieldError(f"相関長は正の値である必要があります: {source.correlation_length}")
    if source.amplitude < 0:
        raise FieldError(f"振幅は非負である必要があります: {source.amplitude}")
    rng = np.random.default_rng(source.seed)
    noise = rng.standard_normal((3,) + grid.shape)
    k = grid.wavenumbers
    kx, ky, kz = np.meshgrid(k, k, k, indexing="ij")
    envelope = np.exp(-0.5 * (kx ** 2 + ky ** 2 + kz ** 2) * source.correlation_length ** 2)
    smooth = ifft3(fft3(noise) * envelope).real

    radius = source.window_radius or 0.25 * grid.half_width
    smooth *= np.exp(-0.5 * grid.radius ** 2 / radius ** 2)
    values = solenoidal_projection_values(grid, smooth, zero_mean=True)

    norm = _lp_value(grid, np.sqrt(np.sum(values ** 2, axis=0)), 1.5)
    if source.amplitude == 0.0 or norm == 0.0:
        return np.zeros_like(values)
    return values * (source.amplitude / norm)


def sample(source: FieldSource, grid: GridSpec) -> VectorField:
    """
    磁場ソースを格子点ごとに評価する

    解析的なソースは無加工で評価する。RandomDivFree は周波数空間で
    生成・射影するため、そのまま離散発散がゼロになる。

    Args:
        source: 磁場ソース
        grid: 格子仕様

    Returns:
        VectorField: サンプリングされた磁場
    """
    if isinstance(source, LossYau):
        return VectorField(grid, eval_loss_yau(grid.mesh))
    if isinstance(source, Scaled):
        return sample(source.base, grid) * float(source.factor)
    if isinstance(source, Sum):
        total = np.zeros((3,) + grid.shape, dtype=np.complex128)
        for term in source.terms:
            total = total + sample(term, grid).values
        return VectorField(grid, total)
    if isinstance(source, RandomDivFree):
        return VectorField(grid, _sample_random(source, grid))
    if isinstance(source, GridData):
        data = source.load()
        if data.grid != grid:
            raise GridError(f"格子データの格子 {data.grid} が指定の格子 {grid} と一致しません")
        return data
    if isinstance(source, ZeroField):
        return VectorField(grid, np.zeros((3,) + grid.shape))
    raise FieldError(f"未知の磁場ソースです: {source!r}")


def prepare_field(source: FieldSource, grid: GridSpec) -> VectorField:
    """
    サンプリングと発散ゼロ射影を行い、計算に用いる磁場を作る
    """
    raw = sample(source, grid)
    prepared = solenoidal_projection(raw)
    logger.debug(f"磁場準備: 発散残差 {divergence_residual(raw):.3e} -> {divergence_residual(prepared):.3e}")
    return prepared


def describe_source(source: FieldSource) -> str:
    if isinstance(source, Scaled):
        return f"{source.factor}*({describe_source(source.base)})"
    if isinstance(source, Sum):
        return " + ".join(describe_source(t) for t in source.terms) or "0"
    if isinstance(source, RandomDivFree):
        return f"random(seed={source.seed}, amplitude={source.amplitude})"
    if isinstance(source, GridData):
        return f"grid_data({source.path or 'memory'})"
    if isinstance(source, ZeroField):
        return "zero"
    return "loss_yau"


def _lp_value(grid: GridSpec, magnitude: np.ndarray, p: float) -> float:
    return float(np.sum(magnitude ** p) * grid.cell_volume) ** (1.0 / p)


def lp_norm(f: Union[VectorField, ScalarField], p: float) -> NormReport:
    """
    L^p ノルム (Σ |f|^p h^3)^{1/p} を計算する

    Args:
        f: ベクトル場またはスカラー場
        p: 指数（1以上）

    Returns:
        NormReport: 計算結果
    """
    if p < 1:
        raise FieldError(f"L^p ノルムの指数は1以上である必要があります: {p}")
    value = _lp_value(f.grid, f.magnitude(), p)
    return NormReport(p=float(p), value=value,
                      quadrature=f"h^3 sum, N={f.grid.points_per_axis}, L={f.grid.half_width}")


def lp_profile(f: Union[VectorField, ScalarField], exponents: Sequence[float]) -> List[NormReport]:
    """複数の指数に対する L^p 量（p < 1 では準ノルム）"""
    reports = []
    for p in exponents:
        if p <= 0:
            raise FieldError(f"指数は正の値である必要があります: {p}")
        reports.append(NormReport(p=float(p), value=_lp_value(f.grid, f.magnitude(), p),
                                  quadrature=f"h^3 sum, N={f.grid.points_per_axis}"))
    return reports


def hardy_ratio(phi: ScalarField, lattice_correction: bool = True) -> float:
    """
    Hardy 比 ∫|φ|^2/|x|^2 / ∫|∇φ|^2 を計算する

    原点の格子点は特異な和から除外し、除外による O(h) の誤差を
    格子ゼータ定数で補正する。補正は求積の補正であり 1/|x|^2 の正則化ではない。
    定数は固定値で、調整するパラメータはない。

    Args:
        phi: スカラー場
        lattice_correction: 格子ゼータ補正を適用するか

    Returns:
        float: Hardy 比（4 以下になるはず）
    """
    grid = phi.grid
    r2 = grid.radius ** 2
    density = np.abs(phi.values) ** 2
    puncture = r2 > 0
    numerator = float(np.sum(density[puncture] / r2[puncture]) * grid.cell_volume)
    if lattice_correction:
        numerator -= LATTICE_ZETA * grid.spacing * float(density[grid.origin_index])

    grad = gradient_values(grid, phi.values)
    denominator = float(np.sum(np.abs(grad) ** 2) * grid.cell_volume)
    if denominator <= 0.0:
        raise FieldError("Hardy 比の分母（勾配ノルム）がゼロです")
    return numerator / denominator


def diamagnetic_gap(psi: SpinorField, A: VectorField) -> float:
    """
    反磁性ギャップ ‖((1/i)∇ + A)ψ‖^2 − ‖∇|ψ|‖^2 を計算する

    |ψ| は ε = 1e-8·max|ψ| で平滑化し、∇|ψ| は連鎖律で求める。

    Args:
        psi: スピノル場
        A: ベクトルポテンシャル（実部を用いる）

    Returns:
        float: ギャップ（非負になるはず）
    """
    psi._check(A)
    grid = psi.grid
    grad = np.stack([gradient_values(grid, psi.values[c]) for c in range(2)])  # (2, 3, ...)
    a = A.values.real
    covariant = -1j * grad + a[None, :, :, :, :] * psi.values[:, None]
    kinetic = float(np.sum(np.abs(covariant) ** 2) * grid.cell_volume)

    density = np.sum(np.abs(psi.values) ** 2, axis=0)
    eps = 1e-8 * float(np.sqrt(np.max(density))) if density.size else 0.0
    smooth = np.sqrt(density + eps ** 2)
    if np.max(smooth) == 0.0:
        return kinetic
    grad_abs = np.sum(np.real(np.conj(psi.values)[:, None] * grad), axis=0) / smooth
    return kinetic - float(np.sum(grad_abs ** 2) * grid.cell_volume)


def zeeman_form_bound(psi: SpinorField, B: VectorField) -> Tuple[float, float]:
    """
    (|<σ·Bψ, ψ>|, <|B|ψ, ψ>) を返す。前者は後者を超えない
    """
    psi._check(B)
    zeeman = np.vdot(psi.values, sigma_dot_values(B.values.real, psi.values)) * psi.grid.cell_volume
    weight = np.sum(B.magnitude() * np.sum(np.abs(psi.values) ** 2, axis=0)) * psi.grid.cell_volume
    return abs(complex(zeeman)), float(weight)


def sobolev_ratio(phi: ScalarField, B: VectorField) -> float:
    """∫|B||φ|^2 / (‖B‖_{3/2} ‖∇φ‖^2)。最良定数 γ^2 以下になるはず"""
    phi._check(B)
    grid = phi.grid
    numerator = float(np.sum(B.magnitude() * np.abs(phi.values) ** 2) * grid.cell_volume)
    grad = gradient_values(grid, phi.values)
    denominator = lp_norm(B, 1.5).value * float(np.sum(np.abs(grad) ** 2) * grid.cell_volume)
    if denominator <= 0.0:
        raise FieldError("Sobolev 比の分母がゼロです")
    return numerator / denominator


def cross_term_ratio(f: ScalarField, A: VectorField) -> float:
    """|<(D·A + A·D)f, f>| / (2γ‖A‖_3‖∇f‖^2)、D = (1/i)∇。1 以下になるはず"""
    f._check(A)
    grid = f.grid
    grad = gradient_values(grid, f.values)
    a = A.values.real
    flux = fft3(a * f.values)
    div_af = ifft3(1j * np.sum(grid.k_vectors * flux, axis=0))
    cross = -1j * div_af - 1j * np.sum(a * grad, axis=0)
    numerator = abs(complex(np.vdot(f.values, cross) * grid.cell_volume))
    denominator = (2.0 * np.sqrt(SOBOLEV_GAMMA_SQ) * lp_norm(A, 3.0).value
                   * float(np.sum(np.abs(grad) ** 2) * grid.cell_volume))
    if denominator <= 0.0:
        raise FieldError("交差項比の分母がゼロです")
    return numerator / denominator
