#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""固有値ソルバーと Birman-Schwinger 作用素のテスト"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from zeromode.errors import SolverError, SpectralError
from zeromode.fields import (
    LossYau,
    RandomDivFree,
    eval_loss_yau,
    loss_yau_coulomb_zero_mode,
    loss_yau_potential,
    loss_yau_zero_mode,
)
from zeromode.grid import SpinorField, VectorField, make_grid
from zeromode.pauli import PauliContext, apply_dirac
from zeromode.spectral import (
    BSOperator,
    SpectralSettings,
    bs_spectrum,
    default_gap_tol,
    dense_bs_oracle,
    dense_matrix,
    dense_oracle,
    largest_eigs,
    nullity_estimate,
    pauli_eigs,
    shell_fractions,
    smallest_eigs,
    zero_mode_overlap,
)
from zeromode.sweep import build_context


def _hermitian_with_spectrum(values, seed=0):
    rng = np.random.default_rng(seed)
    n = len(values)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    return (Q * values) @ Q.conj().T


@pytest.fixture(scope="module")
def random_context():
    """8^3 格子上のランダム磁場（t = 1.2）"""
    return build_context(RandomDivFree(seed=21, amplitude=3.0, correlation_length=1.0), make_grid(4.0, 8), t=1.2)


def test_block_iteration_matches_dense_eigh():
    values = np.concatenate([[0.1, 0.2, 0.3, 0.4], np.linspace(2.0, 10.0, 296)])
    M = _hermitian_with_spectrum(values)
    result = smallest_eigs(M, 4, tol=1e-9, maxiter=500, seed=3)
    assert result.method == "lobpcg"
    assert result.all_converged
    assert_allclose(result.eigenvalues, [0.1, 0.2, 0.3, 0.4], rtol=1e-8)
    for i in range(4):
        v = result.eigenvectors[:, i]
        assert np.linalg.norm(M @ v - result.eigenvalues[i] * v) <= 1e-8


def test_small_problem_uses_dense_fallback():
    M = _hermitian_with_spectrum(np.arange(1.0, 41.0), seed=1)
    result = smallest_eigs(M, 3)
    assert result.method == "dense"
    assert_allclose(result.eigenvalues, [1.0, 2.0, 3.0], rtol=1e-10)


@pytest.mark.parametrize("k", [0, 11])
def test_block_size_range(k):
    with pytest.raises(SpectralError):
        smallest_eigs(np.eye(100), k)


def test_block_size_cannot_exceed_dimension():
    with pytest.raises(SpectralError):
        smallest_eigs(np.eye(5), 6)


def test_iterative_pauli_spectrum_matches_dense_oracle(random_context):
    settings = SpectralSettings(k=6, eig_tol=1e-9)
    iterative = pauli_eigs(random_context, settings)
    exact = dense_oracle(random_context).eigenvalues[:6]
    scale = (np.pi / random_context.grid.half_width) ** 2
    assert iterative.all_converged
    assert np.max(np.abs(iterative.eigenvalues - exact) / np.maximum(np.abs(exact), scale)) < 1e-7


def test_dense_oracle_is_hermitian_and_nonnegative(random_context):
    M = dense_matrix(random_context)
    assert np.max(np.abs(M - M.conj().T)) < 1e-10 * np.max(np.abs(M))
    assert dense_oracle(random_context).eigenvalues[0] > -1e-10


def test_dense_matrix_is_limited_to_small_grids(small_grid):
    ctx = build_context(RandomDivFree(seed=1, amplitude=1.0, correlation_length=1.0), small_grid)
    with pytest.raises(SpectralError):
        dense_matrix(ctx)


def test_birman_schwinger_methods_agree_with_dense_oracle(random_context):
    exact = dense_bs_oracle(random_context).eigenvalues[:3]
    assert np.all(exact <= 1.0 + 1e-10) and np.all(exact >= -1e-10)

    op = BSOperator(random_context)
    lanczos = largest_eigs(op, 3, tol=1e-8, method="lanczos")
    assert_allclose(lanczos.eigenvalues, exact, rtol=1e-6)
    pencil = largest_eigs(op, 3, tol=1e-8, method="pencil")
    assert_allclose(pencil.eigenvalues, exact, rtol=1e-4)
    with pytest.raises(SpectralError):
        largest_eigs(op, 3, method="arnoldi")


def test_birman_schwinger_norm_bound_is_recorded(random_context):
    report = bs_spectrum(random_context, SpectralSettings(bs_k=2, eig_tol=1e-8))
    assert report.norm_bound > 0.0
    assert len(report.raw_top) == 2
    assert report.raw_top[0] >= report.raw_top[1]
    assert 0.0 <= report.top <= 1.0 + 1e-8


def test_birman_schwinger_requires_invertible_regularisation(tiny_grid):
    zero = VectorField(tiny_grid, np.zeros((3,) + tiny_grid.shape))
    with pytest.raises(SolverError):
        BSOperator(PauliContext(A=zero, B=zero, t=1.0))
    with pytest.raises(SolverError):
        BSOperator(PauliContext(A=zero, B=zero, t=0.0))


def test_free_operator_has_no_localized_kernel(tiny_grid):
    zero = VectorField(tiny_grid, np.zeros((3,) + tiny_grid.shape))
    report = nullity_estimate(PauliContext(A=zero, B=zero, t=1.0))
    assert report.nullity == 0
    assert report.saturated
    assert not report.indeterminate
    assert report.gap_tol == pytest.approx(default_gap_tol(tiny_grid))
    assert report.spectrum.eigenvalues[0] == pytest.approx(0.0, abs=1e-8)
    assert report.lambda_min == pytest.approx((np.pi / 4.0) ** 2, rel=1e-6)


def test_free_spectrum_has_only_constant_kernel(tiny_grid):
    zero = VectorField(tiny_grid, np.zeros((3,) + tiny_grid.shape))
    ctx = PauliContext(A=zero, B=zero, t=1.0)
    values = dense_oracle(ctx).eigenvalues
    gap = (np.pi / 4.0) ** 2
    assert np.count_nonzero(values < 1e-10) == 2
    assert_allclose(values[2:14], gap, rtol=1e-10)
    assert values[14] == pytest.approx(2.0 * gap, rel=1e-10)
    iterative = pauli_eigs(ctx, SpectralSettings(k=6, eig_tol=1e-9))
    assert_allclose(iterative.eigenvalues, values[:6], atol=1e-7 * gap)


def test_nullity_requires_three_vectors(random_context):
    with pytest.raises(SpectralError):
        nullity_estimate(random_context, settings=SpectralSettings(k=2))


def test_default_gap_tolerance():
    assert default_gap_tol(make_grid(16.0, 64)) == pytest.approx(10.0 * (np.pi / 32.0) ** 2)
    assert SpectralSettings(gap_tol=0.5).resolved_gap_tol(make_grid(16.0, 64)) == 0.5


def test_shell_fraction_of_constant_and_centered_vectors(tiny_grid):
    constant = np.ones(2 * 8 ** 3)
    centered = np.zeros((2,) + tiny_grid.shape)
    centered[(0,) + tiny_grid.origin_index] = 1.0
    fractions = shell_fractions(tiny_grid, np.stack([constant, centered.reshape(-1)], axis=1))
    assert fractions[0] == pytest.approx(1.0 - (7.0 / 8.0) ** 3)
    assert fractions[1] == 0.0


def test_overlap_of_span(tiny_grid, rng):
    a = SpinorField(tiny_grid, rng.standard_normal((2,) + tiny_grid.shape) + 0j)
    b = SpinorField(tiny_grid, rng.standard_normal((2,) + tiny_grid.shape) + 0j)
    assert zero_mode_overlap([a, b], a * 3.0) == pytest.approx(1.0)
    assert zero_mode_overlap([a], a + b) < 1.0
    assert zero_mode_overlap([], a) == 0.0


@pytest.mark.slow
def test_loss_yau_zero_mode_at_unit_coupling(loss_yau_context):
    settings = SpectralSettings(k=6, bs_k=2)
    report = nullity_estimate(loss_yau_context, settings=settings)
    assert report.nullity == 1
    assert not report.indeterminate
    vectors = report.localized_vectors(loss_yau_context.grid)
    assert zero_mode_overlap(vectors, loss_yau_coulomb_zero_mode(loss_yau_context.grid)) >= 0.98
    assert abs(bs_spectrum(loss_yau_context, settings).top - 1.0) <= 0.02


@pytest.mark.slow
@pytest.mark.parametrize("t", [0.5, 1.3])
def test_loss_yau_birman_schwinger_away_from_zero_modes(loss_yau_context, t):
    report = bs_spectrum(loss_yau_context.with_coupling(t), SpectralSettings(bs_k=2))
    assert abs(report.top - 1.0) >= 0.05


@pytest.mark.slow
def test_loss_yau_closed_form_is_dirac_kernel_on_inner_ball():
    grid = make_grid(16.0, 96)
    ctx = PauliContext(A=VectorField(grid, loss_yau_potential(grid.mesh)),
                       B=VectorField(grid, eval_loss_yau(grid.mesh)), t=1.0)
    psi = loss_yau_zero_mode(grid)
    ball = grid.radius <= 4.0
    residual = apply_dirac(ctx, psi).values[:, ball]
    assert np.linalg.norm(residual) / np.linalg.norm(psi.values[:, ball]) <= 1e-2


@pytest.mark.slow
def test_loss_yau_l32_norm_within_two_percent():
    from zeromode.fields import LOSS_YAU_L32_NORM, lp_norm, sample

    assert lp_norm(sample(LossYau(), make_grid(16.0, 64)), 1.5).value == pytest.approx(LOSS_YAU_L32_NORM, rel=0.02)


@pytest.mark.slow
@pytest.mark.parametrize("t", [0.5, 1.0, 1.3])
def test_loss_yau_birman_schwinger_spectrum_decays(loss_yau_context, t):
    report = bs_spectrum(loss_yau_context.with_coupling(t), SpectralSettings(bs_k=4))
    top = report.raw_top
    assert len(top) == 4
    assert all(a >= b for a, b in zip(top, top[1:]))
    assert top[-1] >= -1e-10
    assert top[0] <= report.norm_bound


@pytest.mark.slow
@pytest.mark.parametrize("t", [1.0, 1.3])
def test_removing_zeeman_term_does_not_lower_bottom_of_spectrum(loss_yau_context, t):
    ctx = loss_yau_context.with_coupling(t)
    settings = SpectralSettings(k=3, eig_tol=1e-9)
    pauli = pauli_eigs(ctx, settings).eigenvalues[0]
    schrodinger = pauli_eigs(ctx, settings, kind="schrodinger").eigenvalues[0]
    assert pauli <= schrodinger * (1.0 + 1e-3) + 1e-8


@pytest.mark.slow
def test_loss_yau_bottom_eigenvalue_is_gauge_invariant():
    from zeromode.sweep import gauge_invariance_check

    report = gauge_invariance_check(LossYau(), make_grid(16.0, 96), t=1.0, shifts=5, seed=17,
                                    settings=SpectralSettings(k=3, eig_tol=1e-9), amplitude=0.05, max_mode=1)
    assert len(report.lambda_shifted) == 5
    assert report.max_relative_change <= 1e-6
