#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
周期格子とスペクトル微分

箱 [-L, L)^3 を一辺 N 点で離散化し、全モジュールが共有する
場の型（スカラー・ベクトル・2成分スピノル）、FFTによる微分、
パウリ行列の代数を提供する
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
import scipy.fft

from config import NUM_THREADS
from zeromode.errors import GridError

logger = logging.getLogger(__name__)

_AXES = (-3, -2, -1)


@dataclass(frozen=True)
class GridSpec:
    """
    周期箱の仕様

    Attributes:
        half_width: 箱の半幅 L（箱は [-L, L)^3）
        points_per_axis: 一辺あたりの格子点数 N（偶数、8以上）
    """
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if not np.isfinite(self.half_width) or self.half_width <= 0:
            raise GridError(f"半幅は正の値である必要があります: {self.half_width}")
        if int(self.points_per_axis) != self.points_per_axis:
            raise GridError(f"格子点数は整数である必要があります: {self.points_per_axis}")
        if self.points_per_axis < 8 or self.points_per_axis % 2 != 0:
            raise GridError(f"格子点数は8以上の偶数である必要があります: {self.points_per_axis}")

    @property
    def shape(self) -> Tuple[int, int, int]:
        n = self.points_per_axis
        return (n, n, n)

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing ** 3

    @property
    def volume(self) -> float:
        return (2.0 * self.half_width) ** 3

    @property
    def k_nyquist(self) -> float:
        return np.pi * self.points_per_axis / (2.0 * self.half_width)

    @property
    def origin_index(self) -> Tuple[int, int, int]:
        m = self.points_per_axis // 2
        return (m, m, m)

    def frequency(self, n: int) -> float:
        """
        整数インデックス n の角波数 πn/L を返す

        Args:
            n: [-N/2, N/2) の整数

        Returns:
            float: 角波数
        """
        half = self.points_per_axis // 2
        if not -half <= n < half:
            raise GridError(f"周波数インデックスが範囲外です: {n}")
        return np.pi * n / self.half_width

    @cached_property
    def coordinates(self) -> np.ndarray:
        return -self.half_width + self.spacing * np.arange(self.points_per_axis)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * scipy.fft.fftfreq(self.points_per_axis, d=self.spacing)

    @cached_property
    def derivative_wavenumbers(self) -> np.ndarray:
        # ナイキストモードの微分はゼロ
        k = self.wavenumbers.copy()
        k[self.points_per_axis // 2] = 0.0
        return k

    @cached_property
    def mesh(self) -> np.ndarray:
        x = self.coordinates
        return np.array(np.meshgrid(x, x, x, indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(np.sum(self.mesh ** 2, axis=0))

    @cached_property
    def k_vectors(self) -> np.ndarray:
        k = self.derivative_wavenumbers
        return np.array(np.meshgrid(k, k, k, indexing="ij"))

    @cached_property
    def k_squared(self) -> np.ndarray:
        return np.sum(self.k_vectors ** 2, axis=0)

    @cached_property
    def kinetic_energy(self) -> np.ndarray:
        """ナイキスト波数も含めた |k|^2（ナイキスト以外では k_squared と一致）"""
        k = self.wavenumbers
        return np.sum(np.array(np.meshgrid(k, k, k, indexing="ij")) ** 2, axis=0)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        idx = np.arange(self.points_per_axis) == self.points_per_axis // 2
        i, j, k = np.meshgrid(idx, idx, idx, indexing="ij")
        return i | j | k

    def shell_mask(self, fraction: float) -> np.ndarray:
        """
        境界殻 max_i |x_i| >= (1 - fraction) L のマスクを返す
        """
        return np.max(np.abs(self.mesh), axis=0) >= (1.0 - fraction) * self.half_width - 1e-12


def make_grid(half_width: float, points_per_axis: int) -> GridSpec:
    """
    格子仕様を作成する

    Args:
        half_width: 箱の半幅 L
        points_per_axis: 一辺あたりの格子点数 N

    Returns:
        GridSpec: 格子仕様
    """
    grid = GridSpec(float(half_width), int(points_per_axis))
    logger.debug(f"格子作成: L={grid.half_width}, N={grid.points_per_axis}, h={grid.spacing}")
    return grid


def fft3(values: np.ndarray) -> np.ndarray:
    return scipy.fft.fftn(values, axes=_AXES, workers=NUM_THREADS)


def ifft3(values: np.ndarray) -> np.ndarray:
    return scipy.fft.ifftn(values, axes=_AXES, workers=NUM_THREADS)


@dataclass(frozen=True, eq=False)
class _SampledField:
    """格子上の複素サンプル（成分数はサブクラスで決まる）"""
    grid: GridSpec
    values: np.ndarray

    components = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        expected = ((self.components,) if self.components else ()) + self.grid.shape
        if values.shape != expected:
            raise GridError(f"配列形状 {values.shape} が格子 {expected} と一致しません")
        if not np.all(np.isfinite(values)):
            raise GridError(f"{type(self).__name__} に有限でない値が含まれています")
        object.__setattr__(self, "values", values)

    def _check(self, other: "_SampledField"):
        if other.grid != self.grid:
            raise GridError(f"格子が一致しません: {self.grid} と {other.grid}")

    def inner(self, other: "_SampledField") -> complex:
        """離散内積 <self, other> = h^3 Σ conj(self)·other"""
        self._check(other)
        return complex(np.vdot(self.values, other.values) * self.grid.cell_volume)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.values, self.values).real * self.grid.cell_volume))

    def magnitude(self) -> np.ndarray:
        """格子点ごとの大きさ"""
        if not self.components:
            return np.abs(self.values)
        return np.sqrt(np.sum(np.abs(self.values) ** 2, axis=0))

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    @classmethod
    def from_flat(cls, grid: GridSpec, vector: np.ndarray):
        shape = ((cls.components,) if cls.components else ()) + grid.shape
        return cls(grid, np.reshape(vector, shape))

    def __add__(self, other):
        self._check(other)
        return type(self)(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return type(self)(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return type(self)(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(self.grid, -self.values)


class ScalarField(_SampledField):
    """格子上の複素スカラー場"""
    components = 0


class VectorField(_SampledField):
    """3成分ベクトル場"""
    components = 3

    def real(self) -> "VectorField":
        return VectorField(self.grid, self.values.real)

    def max_magnitude(self) -> float:
        return float(np.max(self.magnitude()))


class SpinorField(_SampledField):
    """2成分スピノル場"""
    components = 2


class SpinorAlgebra:
    """
    パウリ行列 σ1, σ2, σ3 とその代数
    """

    SIGMA = np.array([
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ], dtype=np.complex128)

    @classmethod
    def anticommutator(cls, j: int, k: int) -> np.ndarray:
        return cls.SIGMA[j] @ cls.SIGMA[k] + cls.SIGMA[k] @ cls.SIGMA[j]

    @classmethod
    def anticommutation_defect(cls) -> float:
        """max_{j,k} |σ_jσ_k + σ_kσ_j − 2δ_jk I| を返す（厳密に0）"""
        defect = 0.0
        for j in range(3):
            for k in range(3):
                target = 2.0 * np.eye(2) if j == k else np.zeros((2, 2))
                defect = max(defect, float(np.max(np.abs(cls.anticommutator(j, k) - target))))
        return defect

    @classmethod
    def contract(cls, v: np.ndarray) -> np.ndarray:
        """定数3ベクトル v に対する 2x2 行列 σ·v"""
        return np.einsum("j,jab->ab", np.asarray(v, dtype=np.complex128), cls.SIGMA)


def sigma_dot_values(v: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """配列版 σ·v ψ（v: (3,...)、psi: (2,...)）"""
    shape = np.broadcast_shapes(np.shape(v[0]), np.shape(psi[0]))
    out = np.empty((2,) + shape, dtype=np.complex128)
    out[0] = v[2] * psi[0] + (v[0] - 1j * v[1]) * psi[1]
    out[1] = (v[0] + 1j * v[1]) * psi[0] - v[2] * psi[1]
    return out


def sigma_dot(v: VectorField, psi: SpinorField) -> SpinorField:
    """
    格子点ごとに (Σ_j v_j σ_j) をスピノルに作用させる

    Args:
        v: ベクトル場
        psi: スピノル場

    Returns:
        SpinorField: σ·v ψ
    """
    v._check(psi)
    return SpinorField(psi.grid, sigma_dot_values(v.values, psi.values))


def gradient_values(grid: GridSpec, values: np.ndarray) -> np.ndarray:
    """最後の3軸についての勾配。先頭に微分方向の軸を付けて返す"""
    hat = fft3(values)
    return np.stack([ifft3(1j * grid.k_vectors[j] * hat) for j in range(3)])


def spectral_gradient(f: ScalarField) -> VectorField:
    """
    スカラー場のスペクトル勾配 ∂_j f を計算する

    格子で表現できる三角多項式に対しては厳密。
    ナイキストモードの微分はゼロとする。

    Args:
        f: スカラー場

    Returns:
        VectorField: 勾配
    """
    return VectorField(f.grid, gradient_values(f.grid, f.values))


def spectral_divergence(v: VectorField) -> ScalarField:
    hat = fft3(v.values)
    k = v.grid.k_vectors
    return ScalarField(v.grid, ifft3(1j * np.sum(k * hat, axis=0)))


def spectral_curl(v: VectorField) -> VectorField:
    hat = fft3(v.values)
    k = v.grid.k_vectors
    curl_hat = 1j * np.stack([
        k[1] * hat[2] - k[2] * hat[1],
        k[2] * hat[0] - k[0] * hat[2],
        k[0] * hat[1] - k[1] * hat[0],
    ])
    return VectorField(v.grid, ifft3(curl_hat))
