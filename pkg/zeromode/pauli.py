#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ディラック・ワイル作用素とパウリ作用素の行列フリー適用

結合定数 t における
    D_t = σ·((1/i)∇ + tA)
    P_{tA} = D_t^2
    S_{tA} = −Δ + t(D·A + A·D) + t^2|A|^2
    P = P_{tA} + t|B|
と、P の前処理付き共役勾配法による逆作用を提供する。

スピノル配列は (2, ..., N, N, N) の形で、スピン軸と空間軸の間に
任意のバッチ軸を置ける。

D_t はナイキスト指標に触れないフーリエモードの部分空間で定義する。
ナイキストモードは二階の作用素の対角成分 |k|^2 としてだけ現れるので、
自由作用素の核は定数スピノルだけになる。
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator

from config import CG_MAXITER, CG_RTOL
from zeromode.errors import SolverError
from zeromode.gauge import GaugeData
from zeromode.grid import (
    GridSpec,
    ScalarField,
    SpinorField,
    VectorField,
    fft3,
    ifft3,
    sigma_dot_values,
)

logger = logging.getLogger(__name__)

# 真の残差を再計算する間隔
_RESIDUAL_REFRESH = 50


@dataclass
class SolverStats:
    """内部ソルバーの統計"""
    solves: int = 0
    iterations: int = 0
    max_iterations: int = 0
    worst_residual: float = 0.0

    def record(self, iterations: int, residual: float):
        self.solves += 1
        self.iterations += iterations
        self.max_iterations = max(self.max_iterations, iterations)
        self.worst_residual = max(self.worst_residual, residual)


@dataclass(frozen=True, eq=False)
class PauliContext:
    """
    結合定数 t における (A, B) の組と作用素適用の状態

    Attributes:
        A: ベクトルポテンシャル（実部を用いる）
        B: 磁場（実部を用いる）
        t: 結合定数
        rtol: 内部CGの相対許容誤差
        maxiter: 内部CGの反復上限
    """
    A: VectorField
    B: VectorField
    t: float = 1.0
    rtol: float = CG_RTOL
    maxiter: int = CG_MAXITER
    stats: SolverStats = field(default_factory=SolverStats)

    def __post_init__(self):
        self.A._check(self.B)
        if not np.isfinite(self.t) or self.t < 0:
            raise ValueError(f"結合定数は非負である必要があります: {self.t}")

    @classmethod
    def from_gauge(cls, gauge: GaugeData, B: VectorField, t: float = 1.0, **kwargs) -> "PauliContext":
        return cls(A=gauge.A, B=B, t=float(t), **kwargs)

    def with_coupling(self, t: float) -> "PauliContext":
        return PauliContext(A=self.A, B=self.B, t=float(t), rtol=self.rtol, maxiter=self.maxiter)

    @property
    def grid(self) -> GridSpec:
        return self.A.grid

    @property
    def dim(self) -> int:
        return 2 * self.grid.points_per_axis ** 3

    @cached_property
    def a(self) -> np.ndarray:
        return np.ascontiguousarray(self.A.values.real)

    @cached_property
    def b(self) -> np.ndarray:
        return np.ascontiguousarray(self.B.values.real)

    @cached_property
    def abs_b(self) -> ScalarField:
        return ScalarField(self.grid, np.sqrt(np.sum(self.b ** 2, axis=0)))

    @cached_property
    def mean_abs_b(self) -> float:
        return float(np.mean(self.abs_b.values.real))

    @cached_property
    def sqrt_tb(self) -> np.ndarray:
        """BS 作用素の乗数 √(t|B|)"""
        return np.sqrt(self.t * self.abs_b.values.real)

    @cached_property
    def resolved(self) -> np.ndarray:
        """ナイキスト指標に触れないフーリエモードで 1 となるマスク"""
        return (~self.grid.nyquist_mask).astype(np.float64)

    @cached_property
    def nyquist_energy(self) -> np.ndarray:
        """ナイキストモードに割り当てる自由粒子の |k|^2（それ以外は 0）"""
        return np.where(self.grid.nyquist_mask, self.grid.kinetic_energy, 0.0)

    # 配列版の作用素
    # D_t・S・ゼーマン項はナイキスト指標に触れないモードの部分空間に作用する。
    # 二階の作用素はナイキストモードに自由粒子の |k|^2 を与える

    def _dirac_hat(self, hat: np.ndarray) -> np.ndarray:
        """射影済みのフーリエ係数に D_t を作用させる（結果も射影済み）"""
        out = sigma_dot_values(self.grid.k_vectors, hat)
        if self.t:
            out += self.resolved * fft3(self.t * sigma_dot_values(self.a, ifft3(hat)))
        return out

    def dirac_values(self, psi: np.ndarray) -> np.ndarray:
        return ifft3(self._dirac_hat(self.resolved * fft3(psi)))

    def pauli_values(self, psi: np.ndarray) -> np.ndarray:
        full = fft3(psi)
        out = self._dirac_hat(self._dirac_hat(self.resolved * full))
        return ifft3(out + self.nyquist_energy * full)

    def schrodinger_values(self, psi: np.ndarray) -> np.ndarray:
        grid = self.grid
        k = grid.k_vectors
        full = fft3(psi)
        hat = self.resolved * full
        out = grid.k_squared * hat
        if self.t:
            a = self.a
            phi = ifft3(hat)
            local = sum(a[j] * ifft3(k[j] * hat) for j in range(3)) + self.t * np.sum(a ** 2, axis=0) * phi
            d_dot_a = sum(k[j] * fft3(a[j] * phi) for j in range(3))
            out += self.resolved * (self.t * (fft3(local) + d_dot_a))
        return ifft3(out + self.nyquist_energy * full)

    def zeeman_values(self, psi: np.ndarray) -> np.ndarray:
        phi = ifft3(self.resolved * fft3(psi))
        return ifft3(self.resolved * fft3(self.t * sigma_dot_values(self.b, phi)))

    def p_values(self, psi: np.ndarray) -> np.ndarray:
        return self.pauli_values(psi) + self.t * self.abs_b.values.real * psi

    def precondition_values(self, r: np.ndarray, shift: Optional[float] = None) -> np.ndarray:
        """フーリエ空間の対角前処理 1/(|k|^2 + shift)"""
        if shift is None:
            shift = self.t * self.mean_abs_b
        return ifft3(fft3(r) / (self.grid.kinetic_energy + shift))

    def require_invertible(self):
        if self.t <= 0:
            raise SolverError(f"t = {self.t} では P はトーラス上で特異です（定数スピノルが核に入る）")
        if self.mean_abs_b <= 0:
            raise SolverError("|B| が恒等的にゼロのため P はトーラス上で特異です")


def apply_dirac(ctx: PauliContext, psi: SpinorField) -> SpinorField:
    """
    ディラック・ワイル作用素 σ·((1/i)∇ + tA) を適用する

    Args:
        ctx: 作用素の状態
        psi: スピノル場

    Returns:
        SpinorField: D_t ψ
    """
    ctx.A._check(psi)
    return SpinorField(psi.grid, ctx.dirac_values(psi.values))


def apply_pauli(ctx: PauliContext, psi: SpinorField) -> SpinorField:
    """
    パウリ作用素 P_{tA} = D_t^2 を適用する（ナイキストモードでは |k|^2、厳密に半正定値）
    """
    ctx.A._check(psi)
    return SpinorField(psi.grid, ctx.pauli_values(psi.values))


def apply_schrodinger(ctx: PauliContext, psi: SpinorField) -> SpinorField:
    """磁場シュレディンガー作用素（ゼーマン項なし）を展開形で適用する"""
    ctx.A._check(psi)
    return SpinorField(psi.grid, ctx.schrodinger_values(psi.values))


def apply_zeeman(ctx: PauliContext, psi: SpinorField) -> SpinorField:
    ctx.A._check(psi)
    return SpinorField(psi.grid, ctx.zeeman_values(psi.values))


def apply_P(ctx: PauliContext, psi: SpinorField) -> SpinorField:
    """
    正則化作用素 P = P_{tA} + t|B| を適用する
    """
    ctx.A._check(psi)
    return SpinorField(psi.grid, ctx.p_values(psi.values))


def solve_P_values(ctx: PauliContext, b: np.ndarray, x0: Optional[np.ndarray] = None) -> np.ndarray:
    """
    前処理付き共役勾配法で P x = b を解く（配列版）

    Args:
        ctx: 作用素の状態
        b: 右辺
        x0: 初期値

    Returns:
        np.ndarray: 解
    """
    ctx.require_invertible()
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        ctx.stats.record(0, 0.0)
        return np.zeros_like(b, dtype=np.complex128)

    x = np.zeros_like(b, dtype=np.complex128) if x0 is None else np.array(x0, dtype=np.complex128)
    r = b - ctx.p_values(x)
    history: List[float] = [float(np.linalg.norm(r)) / b_norm]
    if history[-1] <= ctx.rtol:
        ctx.stats.record(0, history[-1])
        return x

    z = ctx.precondition_values(r)
    d = z
    rz = float(np.vdot(r, z).real)
    for iteration in range(1, ctx.maxiter + 1):
        q = ctx.p_values(d)
        alpha = rz / float(np.vdot(d, q).real)
        x = x + alpha * d
        if iteration % _RESIDUAL_REFRESH == 0:
            r = b - ctx.p_values(x)
        else:
            r = r - alpha * q
        history.append(float(np.linalg.norm(r)) / b_norm)
        if history[-1] <= ctx.rtol:
            logger.debug(f"CG収束: {iteration}回, 相対残差 {history[-1]:.2e}")
            ctx.stats.record(iteration, history[-1])
            return x
        z = ctx.precondition_values(r)
        rz_new = float(np.vdot(r, z).real)
        d = z + (rz_new / rz) * d
        rz = rz_new

    raise SolverError(
        f"CGが{ctx.maxiter}回以内に収束しませんでした（t = {ctx.t}, 相対残差 {history[-1]:.3e}）",
        residual_history=history, iterations=ctx.maxiter)


def solve_P(ctx: PauliContext, b: SpinorField, x0: Optional[SpinorField] = None) -> SpinorField:
    """
    P x = b を解く

    Args:
        ctx: 作用素の状態（t > 0、|B| が非ゼロ）
        b: 右辺
        x0: 初期値

    Returns:
        SpinorField: ‖Px − b‖ ≤ rtol‖b‖ を満たす解
    """
    ctx.A._check(b)
    start = None if x0 is None else x0.values
    return SpinorField(b.grid, solve_P_values(ctx, b.values, start))


def _to_batch(grid: GridSpec, X: np.ndarray) -> np.ndarray:
    m = X.shape[1]
    return X.T.reshape((m, 2) + grid.shape).swapaxes(0, 1)


def _from_batch(Y: np.ndarray) -> np.ndarray:
    m = Y.shape[1]
    return Y.swapaxes(0, 1).reshape(m, -1).T


def spinor_operator(ctx: PauliContext, kind: str = "pauli") -> LinearOperator:
    """
    作用素を scipy の LinearOperator として返す（列ベクトルは平坦化したスピノル）

    Args:
        ctx: 作用素の状態
        kind: "pauli"、"schrodinger"、"P" のいずれか

    Returns:
        LinearOperator: エルミート作用素
    """
    actions = {
        "pauli": ctx.pauli_values,
        "schrodinger": ctx.schrodinger_values,
        "P": ctx.p_values,
    }
    if kind not in actions:
        raise ValueError(f"未知の作用素です: {kind}")
    action = actions[kind]
    grid = ctx.grid

    def matmat(X):
        X = np.asarray(X, dtype=np.complex128).reshape(ctx.dim, -1)
        return _from_batch(action(_to_batch(grid, X)))

    def matvec(x):
        return matmat(np.reshape(x, (-1, 1)))[:, 0]

    return LinearOperator((ctx.dim, ctx.dim), matvec=matvec, matmat=matmat, rmatvec=matvec,
                          rmatmat=matmat, dtype=np.complex128)


def fourier_preconditioner(ctx: PauliContext, shift: float) -> LinearOperator:
    """固有値ソルバー用の前処理 1/(|k|^2 + shift)"""
    grid = ctx.grid

    def matmat(X):
        X = np.asarray(X, dtype=np.complex128).reshape(ctx.dim, -1)
        return _from_batch(ctx.precondition_values(_to_batch(grid, X), shift))

    def matvec(x):
        return matmat(np.reshape(x, (-1, 1)))[:, 0]

    return LinearOperator((ctx.dim, ctx.dim), matvec=matvec, matmat=matmat, dtype=np.complex128)
