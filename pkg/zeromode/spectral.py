#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
行列フリーのエルミート固有値ソルバーと Birman-Schwinger 作用素

- smallest_eigs: ブロック化レイリー商最小化（LOBPCG 型）で最小側の固有対を求める
- largest_eigs: BS 作用素 √(t|B|) P^{-1} √(t|B|) の最大側の固有対を求める
- dense_oracle: 8^3 以下の格子で作用素を組み立てて全固有分解する
- nullity_estimate: 局在フィルタを通したゼロモードの数を数える
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh, lobpcg

from config import (
    BS_TOL,
    EIG_MAXITER,
    EIG_TOL,
    LOCALIZATION_THRESHOLD,
    SHELL_FRACTION,
    START_SEED,
)
from zeromode.errors import SolverError, SpectralError
from zeromode.fields import SOBOLEV_GAMMA_SQ, lp_norm
from zeromode.grid import GridSpec, SpinorField
from zeromode.pauli import (
    PauliContext,
    fourier_preconditioner,
    solve_P_values,
    spinor_operator,
)

logger = logging.getLogger(__name__)

# 密行列オラクルの上限
DENSE_MAX_POINTS = 8
# これ以下の次元では反復法の代わりに密行列で解く
_DENSE_FALLBACK_DIM = 64


@dataclass
class SpectralResult:
    """
    固有値計算の結果

    Attributes:
        eigenvalues: 固有値（smallest は昇順、largest は降順）
        eigenvectors: 平坦化した固有ベクトルを列に持つ配列（ユークリッドノルム 1）
        residuals: ‖Av − λv‖
        iterations: 反復回数
        converged: 固有対ごとの収束フラグ
        method: 使用した手法
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    converged: np.ndarray
    method: str = ""

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


@dataclass
class SpectralSettings:
    """固有値計算・判定の設定"""
    k: int = 6
    bs_k: int = 4
    eig_tol: float = EIG_TOL
    maxiter: int = EIG_MAXITER
    gap_tol: Optional[float] = None
    bs_tol: float = BS_TOL
    bs_method: str = "lanczos"
    seed: int = START_SEED
    shell_fraction: float = SHELL_FRACTION
    localization_threshold: float = LOCALIZATION_THRESHOLD

    def resolved_gap_tol(self, grid: GridSpec) -> float:
        return self.gap_tol if self.gap_tol is not None else default_gap_tol(grid)


def default_gap_tol(grid: GridSpec) -> float:
    """既定のゼロ判定閾値 10·(π/(2L))^2"""
    return 10.0 * (np.pi / (2.0 * grid.half_width)) ** 2


def _hermitize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.conj().T)


def _orthonormalize(V: np.ndarray, against: Optional[np.ndarray] = None, drop: float = 1e-10) -> np.ndarray:
    """
    列を X に対して2回射影してから SVD で正規直交化し、小さな特異値の方向を捨てる
    """
    if V.shape[1] == 0:
        return V
    norms = np.linalg.norm(V, axis=0)
    V = V[:, norms > 0] / norms[norms > 0]
    if against is not None and against.shape[1]:
        for _ in range(2):
            V = V - against @ (against.conj().T @ V)
    if V.shape[1] == 0:
        return V
    U, s, _ = scipy.linalg.svd(V, full_matrices=False)
    return U[:, s > drop * max(1.0, s[0])] if s.size else U[:, :0]


def _as_operator(op) -> LinearOperator:
    if isinstance(op, LinearOperator):
        return op
    from scipy.sparse.linalg import aslinearoperator
    return aslinearoperator(op)


def _dense_smallest(op: LinearOperator, k: int, tol: float) -> SpectralResult:
    n = op.shape[0]
    M = _hermitize(np.asarray(op.matmat(np.eye(n, dtype=np.complex128))))
    values, vectors = scipy.linalg.eigh(M)
    values, vectors = values[:k], vectors[:, :k]
    residuals = np.linalg.norm(M @ vectors - vectors * values, axis=0)
    converged = residuals <= tol * np.maximum(1.0, np.abs(values))
    return SpectralResult(values, vectors, residuals, 0, converged, method="dense")


def smallest_eigs(op, k: int, tol: float = EIG_TOL, preconditioner: Optional[LinearOperator] = None,
                  maxiter: int = EIG_MAXITER, seed: int = START_SEED,
                  guard: Optional[int] = None) -> SpectralResult:
    """
    エルミート半正定値作用素の最小 k 個の固有対を求める

    シード付きの初期ブロック [X] から、[X, W = M(R), P] の部分空間で
    レイリー・リッツを繰り返す。収束しなかった固有対はフラグで示す。

    Args:
        op: エルミート作用素（LinearOperator または行列）
        k: 固有対の数（1〜10）
        tol: 収束判定 ‖Av − λv‖ ≤ tol·max(1, |λ|)
        preconditioner: 前処理 M
        maxiter: 反復上限
        seed: 初期ブロックの乱数シード
        guard: k に追加するガードベクトル数

    Returns:
        SpectralResult: 昇順の固有対
    """
    if not 1 <= k <= 10:
        raise SpectralError(f"k は 1〜10 である必要があります: {k}")
    A = _as_operator(op)
    n = A.shape[0]
    if k > n:
        raise SpectralError(f"k = {k} が作用素の次元 {n} を超えています")
    m = min(n, k + (guard if guard is not None else max(2, k // 2 + 1)))
    if n <= max(_DENSE_FALLBACK_DIM, 4 * m):
        return _dense_smallest(A, k, tol)

    rng = np.random.default_rng(seed)
    X = _orthonormalize(rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)))
    AX = A.matmat(X)
    theta, C = scipy.linalg.eigh(_hermitize(X.conj().T @ AX))
    X, AX = X @ C, AX @ C
    P = np.zeros((n, 0), dtype=np.complex128)

    iteration = 0
    residuals = np.full(m, np.inf)
    for iteration in range(1, maxiter + 1):
        R = AX - X * theta
        residuals = np.linalg.norm(R, axis=0)
        converged = residuals <= tol * np.maximum(1.0, np.abs(theta))
        if np.all(converged[:k]):
            break
        if iteration % 50 == 0:
            logger.debug(f"固有値反復 {iteration}: 最大残差 {np.max(residuals[:k]):.2e}")

        active = ~converged
        W = R[:, active]
        if preconditioner is not None and W.shape[1]:
            W = preconditioner.matmat(W)
        Z = _orthonormalize(np.hstack([W, P]), against=X)
        if Z.shape[1] == 0:
            break
        AZ = A.matmat(Z)
        Q = np.hstack([X, Z])
        AQ = np.hstack([AX, AZ])
        theta_all, V = scipy.linalg.eigh(_hermitize(Q.conj().T @ AQ))
        C = V[:, :m]
        theta = theta_all[:m]
        X, AX = Q @ C, AQ @ C
        P = Z @ C[m:, :]

        # 直交性の劣化を監視する
        if np.max(np.abs(X.conj().T @ X - np.eye(m))) > 1e-8:
            X = _orthonormalize(X)
            AX = A.matmat(X)
            theta, C = scipy.linalg.eigh(_hermitize(X.conj().T @ AX))
            X, AX = X @ C, AX @ C
            P = np.zeros((n, 0), dtype=np.complex128)

    R = AX - X * theta
    residuals = np.linalg.norm(R, axis=0)
    converged = residuals <= tol * np.maximum(1.0, np.abs(theta))
    if not np.all(converged[:k]):
        logger.warning(f"固有値ソルバーが{maxiter}回で収束しない固有対があります: "
                       f"残差 {residuals[:k][~converged[:k]]}")
    return SpectralResult(theta[:k], X[:, :k], residuals[:k], iteration, converged[:k], method="lobpcg")


def pauli_eigs(ctx: PauliContext, settings: SpectralSettings, kind: str = "pauli") -> SpectralResult:
    """パウリ作用素（またはシュレディンガー作用素）の最小側の固有対"""
    shift = (np.pi / ctx.grid.half_width) ** 2 + ctx.t * ctx.mean_abs_b
    return smallest_eigs(spinor_operator(ctx, kind), settings.k, tol=settings.eig_tol,
                         preconditioner=fourier_preconditioner(ctx, shift),
                         maxiter=settings.maxiter, seed=settings.seed)


class BSOperator:
    """
    Birman-Schwinger 作用素 K f = √(t|B|) P^{-1} (√(t|B|) f)

    固有値は [0, 1] にあり、1 はゼロモードに対応する。
    """

    def __init__(self, ctx: PauliContext):
        """
        初期化

        Args:
            ctx: 作用素の状態（t > 0、|B| 非ゼロ）
        """
        ctx.require_invertible()
        self.ctx = ctx
        self.multiplier = ctx.sqrt_tb[None]
        self.dim = ctx.dim
        self._norm_bound = None

    @property
    def norm_bound(self) -> float:
        """診断用の上界 γ^2·t·‖B‖_{3/2}（検証には用いない）"""
        if self._norm_bound is None:
            self._norm_bound = SOBOLEV_GAMMA_SQ * self.ctx.t * lp_norm(self.ctx.B, 1.5).value
        return self._norm_bound

    def state(self, f: np.ndarray) -> np.ndarray:
        """u = P^{-1} √(t|B|) f（形状 (2, N, N, N)）"""
        return solve_P_values(self.ctx, self.multiplier * f)

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.multiplier * self.state(f)

    def as_linear_operator(self) -> LinearOperator:
        shape = (2,) + self.ctx.grid.shape

        def matvec(x):
            return self.apply(np.reshape(x, shape)).reshape(-1)

        def matmat(X):
            X = np.asarray(X).reshape(self.dim, -1)
            return np.stack([matvec(X[:, j]) for j in range(X.shape[1])], axis=1)

        return LinearOperator((self.dim, self.dim), matvec=matvec, matmat=matmat,
                              rmatvec=matvec, dtype=np.complex128)


def _bs_pencil(op: BSOperator, k: int, tol: float, maxiter: int, seed: int) -> Tuple[np.ndarray, np.ndarray, int]:
    """t|B| u = μ P u を LOBPCG で解き、f = √(t|B|) u を返す"""
    ctx = op.ctx
    weight = (ctx.t * ctx.abs_b.values.real).reshape(1, -1)
    weight = np.concatenate([weight, weight]).reshape(-1)
    T = LinearOperator((op.dim, op.dim), matvec=lambda x: weight * np.reshape(x, -1),
                       matmat=lambda X: weight[:, None] * X, dtype=np.complex128)
    P = spinor_operator(ctx, "P")
    M = fourier_preconditioner(ctx, ctx.t * ctx.mean_abs_b)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((op.dim, k + 2)) + 1j * rng.standard_normal((op.dim, k + 2))
    values, U = lobpcg(T, X, B=P, M=M, largest=True, tol=tol, maxiter=maxiter)
    order = np.argsort(values)[::-1][:k]
    F = weight[:, None] ** 0.5 * U[:, order]
    F = F / np.linalg.norm(F, axis=0)
    return np.asarray(values)[order].real, F, maxiter


def largest_eigs(op: BSOperator, k: int, tol: float = EIG_TOL, method: str = "lanczos",
                 maxiter: int = EIG_MAXITER, seed: int = START_SEED) -> SpectralResult:
    """
    BS 作用素の最大 k 個の固有対を求める

    Args:
        op: BS 作用素
        k: 固有対の数
        tol: 固有値の相対精度
        method: "lanczos"（陰的再始動ランチョス）または "pencil"（一般化固有値問題）
        maxiter: 反復上限
        seed: 初期ベクトルの乱数シード

    Returns:
        SpectralResult: 降順の固有対
    """
    if not 1 <= k <= 10:
        raise SpectralError(f"k は 1〜10 である必要があります: {k}")
    try:
        if method == "lanczos":
            rng = np.random.default_rng(seed)
            v0 = rng.standard_normal(op.dim) + 1j * rng.standard_normal(op.dim)
            try:
                values, vectors = eigsh(op.as_linear_operator(), k=k, which="LA", tol=tol, v0=v0,
                                        ncv=min(op.dim - 1, max(2 * k + 1, 20)), maxiter=maxiter)
                iterations = maxiter
            except ArpackNoConvergence as e:
                logger.warning(f"ランチョス法が収束しませんでした: {len(e.eigenvalues)}個のみ取得")
                values, vectors = e.eigenvalues, e.eigenvectors
                iterations = maxiter
            order = np.argsort(values.real)[::-1]
            values, vectors = values.real[order], vectors[:, order]
        elif method == "pencil":
            values, vectors, iterations = _bs_pencil(op, k, tol, maxiter, seed)
        else:
            raise SpectralError(f"未知の BS 固有値手法です: {method}")
    except SolverError as e:
        raise SolverError(f"BS 作用素の内部ソルバーが失敗しました (t = {op.ctx.t}): {e}",
                          residual_history=e.residual_history, iterations=e.iterations) from e

    shape = (2,) + op.ctx.grid.shape
    residuals = np.array([
        np.linalg.norm(op.apply(vectors[:, i].reshape(shape)).reshape(-1) - values[i] * vectors[:, i])
        for i in range(vectors.shape[1])
    ])
    converged = residuals <= max(tol, 10 * op.ctx.rtol) * np.maximum(1.0, np.abs(values))
    if vectors.shape[1] < k:
        logger.warning(f"BS 固有対が {vectors.shape[1]}/{k} 個しか得られませんでした")
    return SpectralResult(values, vectors, residuals, iterations, converged, method=method)


def dense_matrix(ctx: PauliContext, kind: str = "pauli") -> np.ndarray:
    """
    作用素を基底ベクトルへの適用で列ごとに組み立てる（N ≤ 8）
    """
    if ctx.grid.points_per_axis > DENSE_MAX_POINTS:
        raise SpectralError(f"密行列オラクルは N ≤ {DENSE_MAX_POINTS} のみ対応です: N = {ctx.grid.points_per_axis}")
    op = spinor_operator(ctx, kind)
    return np.asarray(op.matmat(np.eye(ctx.dim, dtype=np.complex128)))


def dense_oracle(ctx: PauliContext, kind: str = "pauli") -> SpectralResult:
    """
    小さな格子での全固有分解（昇順）

    Args:
        ctx: 作用素の状態（N ≤ 8）
        kind: 作用素の種類

    Returns:
        SpectralResult: 全固有対
    """
    M = dense_matrix(ctx, kind)
    defect = float(np.max(np.abs(M - M.conj().T)))
    logger.debug(f"密行列のエルミート性の欠損: {defect:.2e}")
    values, vectors = scipy.linalg.eigh(_hermitize(M))
    residuals = np.linalg.norm(M @ vectors - vectors * values, axis=0)
    return SpectralResult(values, vectors, residuals, 0, np.ones(len(values), dtype=bool), method="dense")


def dense_bs_oracle(ctx: PauliContext) -> SpectralResult:
    """
    BS 作用素 √(t|B|) P^{-1} √(t|B|) を密行列で組み立てて全固有分解する（降順）
    """
    ctx.require_invertible()
    P = _hermitize(dense_matrix(ctx, "P"))
    s = np.concatenate([ctx.sqrt_tb.reshape(-1)] * 2)
    K = _hermitize(s[:, None] * scipy.linalg.solve(P, np.diag(s).astype(np.complex128), assume_a="her"))
    values, vectors = scipy.linalg.eigh(K)
    values, vectors = values[::-1], vectors[:, ::-1]
    residuals = np.linalg.norm(K @ vectors - vectors * values, axis=0)
    return SpectralResult(values, vectors, residuals, 0, np.ones(len(values), dtype=bool), method="dense")


def shell_fractions(grid: GridSpec, vectors: np.ndarray, fraction: float = SHELL_FRACTION) -> np.ndarray:
    """平坦化したスピノル列ごとの境界殻の質量比"""
    mask = np.concatenate([grid.shell_mask(fraction).reshape(-1)] * 2)
    mass = np.sum(np.abs(vectors) ** 2, axis=0)
    shell = np.sum(np.abs(vectors[mask]) ** 2, axis=0)
    return np.where(mass > 0, shell / np.where(mass > 0, mass, 1.0), 1.0)


def _clusters(values: np.ndarray, width: float) -> List[List[int]]:
    """隣り合う値の差が width 未満の添字をまとめる"""
    groups: List[List[int]] = []
    for i in range(len(values)):
        if groups and abs(values[i] - values[groups[-1][-1]]) < width:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


@dataclass
class LocalizedBranch:
    """
    クラスタごとに境界殻質量を対角化した後の固有ベクトル群

    Attributes:
        values: 回転後のレイリー商
        shell: 回転後の境界殻質量比
        coefficients: 元の固有ベクトルに対する係数（列）
        clusters: クラスタ（元の添字）
        localized: 局在フィルタを通過したか
    """
    values: np.ndarray
    shell: np.ndarray
    coefficients: np.ndarray
    clusters: List[List[int]]
    localized: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def localize_clusters(grid: GridSpec, values: np.ndarray, states: np.ndarray, width: float,
                      fraction: float = SHELL_FRACTION,
                      threshold: float = LOCALIZATION_THRESHOLD) -> LocalizedBranch:
    """
    近縮退クラスタ内で境界殻質量行列を対角化し、局在した組み合わせを取り出す

    Args:
        grid: 格子
        values: 固有値
        states: 局在を測る状態（列）
        width: クラスタ判定の幅
        fraction: 境界殻の厚さ
        threshold: 局在とみなす殻質量比の上限

    Returns:
        LocalizedBranch: 回転後の値と殻質量比
    """
    mask = np.concatenate([grid.shell_mask(fraction).reshape(-1)] * 2)
    n = len(values)
    coefficients = np.zeros((n, n), dtype=np.complex128)
    rotated_values = np.zeros(n)
    rotated_shell = np.zeros(n)
    clusters = _clusters(values, width)
    for group in clusters:
        S = states[:, group]
        gram = _hermitize(S.conj().T @ S)
        shell = _hermitize(S[mask].conj().T @ S[mask])
        fractions, C = scipy.linalg.eigh(shell, gram)
        for j, idx in enumerate(group):
            c = C[:, j]
            weights = np.abs(c) ** 2 / np.sum(np.abs(c) ** 2)
            coefficients[group, idx] = c
            rotated_values[idx] = float(np.sum(weights * values[group]))
            rotated_shell[idx] = float(fractions[j])
    return LocalizedBranch(rotated_values, rotated_shell, coefficients, clusters,
                           localized=rotated_shell <= threshold)


@dataclass
class NullityReport:
    """
    数値的なゼロモード数の推定結果

    Attributes:
        nullity: 局在し gap_tol 未満の固有ベクトルの数
        indeterminate: 判定が曖昧か
        reasons: 曖昧と判定した理由
        gap_tol: 閾値
        spectrum: 生の固有値計算結果
        branch: 局在化した分枝
        saturated: 計算した固有値がすべて gap_tol 未満か
    """
    nullity: int
    indeterminate: bool
    reasons: List[str]
    gap_tol: float
    spectrum: SpectralResult
    branch: LocalizedBranch
    saturated: bool = False

    @property
    def lambda_min(self) -> float:
        """局在分枝の最小値。局在ベクトルがなければ計算した最大固有値（下界）"""
        values = self.branch.values[self.branch.localized]
        return float(np.min(values)) if values.size else float(np.max(self.spectrum.eigenvalues))

    @property
    def next_gap(self) -> float:
        values = np.sort(self.branch.values[self.branch.localized])
        return float(values[1]) if values.size > 1 else float(np.max(self.spectrum.eigenvalues))

    @property
    def localization(self) -> float:
        """lambda_min を与えるベクトルの殻質量比（なければ最小の殻質量比）"""
        if np.any(self.branch.localized):
            idx = np.flatnonzero(self.branch.localized)
            return float(self.branch.shell[idx[np.argmin(self.branch.values[idx])]])
        return float(np.min(self.branch.shell))

    def localized_vectors(self, grid: GridSpec) -> List[SpinorField]:
        vectors = self.spectrum.eigenvectors @ self.branch.coefficients
        scale = 1.0 / np.sqrt(grid.cell_volume)
        picked = [i for i in np.flatnonzero(self.branch.localized)
                  if self.branch.values[i] < self.gap_tol]
        return [SpinorField.from_flat(grid, vectors[:, i] / np.linalg.norm(vectors[:, i]) * scale)
                for i in picked]


def nullity_estimate(ctx: PauliContext, gap_tol: Optional[float] = None,
                     settings: Optional[SpectralSettings] = None) -> NullityReport:
    """
    P_{tA} の数値的な核の次元を推定する

    gap_tol 未満で局在フィルタ（境界殻の質量比 ≤ 5%）を通過するベクトルを数える。
    gap_tol の 1/3〜3 倍に局在ベクトルがある場合や、核付近の固有対が
    収束しなかった場合は indeterminate とする。

    Args:
        ctx: 作用素の状態
        gap_tol: ゼロ判定閾値（None なら 10·(π/(2L))^2）
        settings: 固有値計算の設定

    Returns:
        NullityReport: 推定結果
    """
    settings = settings or SpectralSettings()
    if settings.k < 3:
        raise SpectralError(f"nullity の推定には k ≥ 3 が必要です: {settings.k}")
    grid = ctx.grid
    gap_tol = gap_tol if gap_tol is not None else settings.resolved_gap_tol(grid)
    result = pauli_eigs(ctx, settings)
    branch = localize_clusters(grid, result.eigenvalues, result.eigenvectors, gap_tol / 3.0,
                               settings.shell_fraction, settings.localization_threshold)

    reasons = []
    localized_values = branch.values[branch.localized]
    nullity = int(np.sum(localized_values < gap_tol))
    ambiguous = (localized_values >= gap_tol / 3.0) & (localized_values <= 3.0 * gap_tol)
    if np.any(ambiguous):
        reasons.append(f"局在ベクトルの固有値 {localized_values[ambiguous]} が gap_tol の1/3〜3倍にあります")
    near_kernel = result.eigenvalues < 3.0 * gap_tol
    if np.any(near_kernel & ~result.converged):
        reasons.append("核付近の固有対が収束していません")
    saturated = bool(np.all(result.eigenvalues < gap_tol))
    if saturated and nullity >= settings.k:
        reasons.append(f"計算した{settings.k}個の固有ベクトルがすべてゼロモードと判定されました（k が不足）")
    elif saturated:
        logger.debug(f"計算した{settings.k}個の固有値がすべて gap_tol 未満です")

    report = NullityReport(nullity=nullity, indeterminate=bool(reasons), reasons=reasons,
                           gap_tol=gap_tol, spectrum=result, branch=branch, saturated=saturated)
    if report.indeterminate:
        logger.warning(f"t = {ctx.t}: nullity の判定が曖昧です: {'; '.join(reasons)}")
    logger.info(f"t = {ctx.t}: nullity = {nullity}, λ_min = {report.lambda_min:.6e}")
    return report


@dataclass
class BSReport:
    """
    BS 作用素の最大側スペクトルと局在分枝

    Attributes:
        spectrum: 生の固有値計算結果（降順）
        branch: 状態 u = P^{-1}√(t|B|) f で局在化した分枝
        norm_bound: 上界 γ^2 t ‖B‖_{3/2}
    """
    spectrum: SpectralResult
    branch: LocalizedBranch
    norm_bound: float

    @property
    def raw_top(self) -> List[float]:
        return [float(v) for v in self.spectrum.eigenvalues]

    @property
    def localized_top(self) -> List[float]:
        values = self.branch.values[self.branch.localized]
        return [float(v) for v in np.sort(values)[::-1]]

    @property
    def top(self) -> float:
        values = self.localized_top
        return values[0] if values else 0.0


def bs_spectrum(ctx: PauliContext, settings: Optional[SpectralSettings] = None) -> BSReport:
    """
    BS 作用素の最大側の固有値を計算し、局在分枝を取り出す

    Args:
        ctx: 作用素の状態
        settings: 固有値計算の設定

    Returns:
        BSReport: 結果
    """
    settings = settings or SpectralSettings()
    op = BSOperator(ctx)
    result = largest_eigs(op, settings.bs_k, tol=settings.eig_tol, method=settings.bs_method,
                          maxiter=settings.maxiter, seed=settings.seed)
    shape = (2,) + ctx.grid.shape
    states = np.stack([op.state(result.eigenvectors[:, i].reshape(shape)).reshape(-1)
                       for i in range(result.eigenvectors.shape[1])], axis=1)
    branch = localize_clusters(ctx.grid, result.eigenvalues, states, settings.bs_tol,
                               settings.shell_fraction, settings.localization_threshold)
    report = BSReport(spectrum=result, branch=branch, norm_bound=op.norm_bound)
    logger.info(f"t = {ctx.t}: BS 最大固有値 {report.raw_top[:1]}, 局在分枝 {report.top:.6f}, "
                f"上界 {report.norm_bound:.4f}")
    return report


def zero_mode_overlap(vectors: Sequence[SpinorField], reference: SpinorField) -> float:
    """
    正規化した参照スピノルの、ベクトル群の張る空間への射影のノルム

    Args:
        vectors: 近核ベクトル
        reference: 参照（閉形式のゼロモードなど）

    Returns:
        float: 0〜1 の重なり
    """
    if not vectors:
        return 0.0
    for v in vectors:
        v._check(reference)
    basis = scipy.linalg.orth(np.stack([v.flat() for v in vectors], axis=1))
    r = reference.flat() / np.linalg.norm(reference.flat())
    return float(np.linalg.norm(basis.conj().T @ r))
