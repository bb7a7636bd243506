#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""磁場カタログと不等式チェックのテスト"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from zeromode.errors import FieldError, GridError
from zeromode.fields import (
    LOSS_YAU_L32_NORM,
    SOBOLEV_GAMMA_SQ,
    GridData,
    LossYau,
    RandomDivFree,
    Scaled,
    Sum,
    ZeroField,
    cross_term_ratio,
    describe_source,
    diamagnetic_gap,
    divergence_residual,
    eval_loss_yau,
    eval_loss_yau_zero_mode,
    hardy_ratio,
    loss_yau_coulomb_potential,
    loss_yau_potential,
    lp_norm,
    lp_profile,
    prepare_field,
    sample,
    sobolev_ratio,
    zeeman_form_bound,
)
from zeromode.grid import ScalarField, SpinorAlgebra, VectorField, make_grid


def _central_jacobian(func, point, step=1e-5):
    """J[i, j] = ∂_j func_i（中心差分）"""
    point = np.asarray(point, dtype=np.float64)
    columns = []
    for j in range(3):
        e = np.zeros(3)
        e[j] = step
        columns.append((func(point + e) - func(point - e)) / (2 * step))
    return np.stack(columns, axis=1)


def _gaussian(grid, width=1.0, center=(0.0, 0.0, 0.0)):
    c = np.asarray(center).reshape(3, 1, 1, 1)
    return np.exp(-np.sum((grid.mesh - c) ** 2, axis=0) / (2 * width ** 2))


def test_loss_yau_closed_forms_at_origin():
    assert_allclose(eval_loss_yau(np.zeros(3)), [0.0, 0.0, 12.0])
    assert_allclose(loss_yau_potential(np.zeros(3)), [0.0, 0.0, 3.0])
    assert_allclose(loss_yau_coulomb_potential(np.zeros(3)), [0.0, 0.0, 4.0], atol=1e-12)


def test_loss_yau_magnitude_profile():
    x = np.array([0.3, -1.2, 0.7])
    r2 = np.dot(x, x)
    assert np.linalg.norm(eval_loss_yau(x)) == pytest.approx(12.0 / (1.0 + r2) ** 2)


@pytest.mark.parametrize("point", [(0.3, -0.4, 0.5), (1.5, 0.2, -0.8), (0.01, 0.0, 0.005)])
def test_closed_form_potentials_have_curl_b(point):
    B = eval_loss_yau(np.asarray(point))
    for potential in (loss_yau_potential, loss_yau_coulomb_potential):
        J = _central_jacobian(potential, point)
        curl = np.array([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])
        assert_allclose(curl, B, rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("coulomb", [False, True])
@pytest.mark.parametrize("point", [(0.3, -0.4, 0.5), (1.5, 0.2, -0.8), (-2.0, 1.0, 0.7)])
def test_closed_form_zero_mode_solves_dirac_equation(point, coulomb):
    potential = loss_yau_coulomb_potential if coulomb else loss_yau_potential
    psi = eval_loss_yau_zero_mode(np.asarray(point), coulomb=coulomb)
    J = _central_jacobian(lambda x: eval_loss_yau_zero_mode(x, coulomb=coulomb), point)
    momentum = -1j * J + np.outer(psi, potential(np.asarray(point)))
    residual = sum(SpinorAlgebra.SIGMA[j] @ momentum[:, j] for j in range(3))
    assert np.linalg.norm(residual) <= 1e-7 * np.linalg.norm(psi)


@pytest.mark.parametrize("point", [(0.3, -0.4, 0.5), (1.5, 0.2, -0.8)])
def test_divergence_of_closed_forms(point):
    assert np.trace(_central_jacobian(eval_loss_yau, point)) == pytest.approx(0.0, abs=1e-6)
    assert np.trace(_central_jacobian(loss_yau_coulomb_potential, point)) == pytest.approx(0.0, abs=1e-6)
    x3 = point[2]
    r2 = float(np.dot(point, point))
    div_a_ly = np.trace(_central_jacobian(loss_yau_potential, point))
    assert div_a_ly == pytest.approx(6.0 * x3 / (1.0 + r2) ** 2, rel=1e-6)


def test_prepared_loss_yau_is_solenoidal():
    grid = make_grid(8.0, 32)
    raw = sample(LossYau(), grid)
    prepared = prepare_field(LossYau(), grid)
    assert divergence_residual(prepared) < 1e-10
    assert divergence_residual(raw) >= divergence_residual(prepared)


def test_loss_yau_l32_norm_approaches_closed_form():
    value = lp_norm(sample(LossYau(), make_grid(16.0, 64)), 1.5).value
    assert value == pytest.approx(LOSS_YAU_L32_NORM, rel=0.05)


def test_random_field_is_deterministic_and_normalized(tiny_grid):
    source = RandomDivFree(seed=7, amplitude=2.5, correlation_length=1.0)
    first, second = sample(source, tiny_grid), sample(source, tiny_grid)
    assert_allclose(first.values, second.values)
    assert lp_norm(first, 1.5).value == pytest.approx(2.5)
    assert divergence_residual(first) < 1e-10
    assert_allclose(np.mean(first.values.real, axis=(1, 2, 3)), 0.0, atol=1e-12)

    other = sample(RandomDivFree(seed=8, amplitude=2.5, correlation_length=1.0), tiny_grid)
    assert not np.allclose(first.values, other.values)


def test_random_field_parameter_errors(tiny_grid):
    with pytest.raises(FieldError):
        sample(RandomDivFree(seed=0, amplitude=1.0, correlation_length=0.0), tiny_grid)
    with pytest.raises(FieldError):
        sample(RandomDivFree(seed=0, amplitude=-1.0, correlation_length=1.0), tiny_grid)
    zero = sample(RandomDivFree(seed=0, amplitude=0.0, correlation_length=1.0), tiny_grid)
    assert zero.max_magnitude() == 0.0


def test_scaled_and_sum_compose(tiny_grid):
    base = sample(LossYau(), tiny_grid)
    assert_allclose(sample(Scaled(LossYau(), 2.0), tiny_grid).values, 2.0 * base.values)
    total = sample(Sum((LossYau(), Scaled(LossYau(), -1.0), ZeroField())), tiny_grid)
    assert np.max(np.abs(total.values)) == 0.0
    assert describe_source(Sum((LossYau(), ZeroField()))) == "loss_yau + zero"


def test_grid_data_must_match_grid(tiny_grid):
    field = VectorField(make_grid(4.0, 10), np.zeros((3, 10, 10, 10)))
    with pytest.raises(GridError):
        sample(GridData(field=field), tiny_grid)
    with pytest.raises(FieldError):
        sample(GridData(), tiny_grid)


def test_lp_norm_exponent_range(tiny_grid):
    B = sample(LossYau(), tiny_grid)
    with pytest.raises(FieldError):
        lp_norm(B, 0.8)
    profile = lp_profile(B, [0.8, 1.5, 3.0])
    assert [r.p for r in profile] == [0.8, 1.5, 3.0]
    assert profile[1].value == pytest.approx(lp_norm(B, 1.5).value)
    with pytest.raises(FieldError):
        lp_profile(B, [0.0])


def test_lp_norm_of_constant(tiny_grid):
    f = ScalarField(tiny_grid, np.full(tiny_grid.shape, 2.0))
    assert lp_norm(f, 2.0).value == pytest.approx(2.0 * tiny_grid.volume ** 0.5)


def test_hardy_ratio_of_gaussian_is_four_thirds():
    grid = make_grid(6.0, 48)
    phi = ScalarField(grid, _gaussian(grid))
    corrected = hardy_ratio(phi)
    bare = hardy_ratio(phi, lattice_correction=False)
    assert corrected == pytest.approx(4.0 / 3.0, rel=0.03)
    assert abs(bare - 4.0 / 3.0) > abs(corrected - 4.0 / 3.0)
    assert corrected < 4.0


def test_hardy_ratio_rejects_constant_zero_gradient(tiny_grid):
    with pytest.raises(FieldError):
        hardy_ratio(ScalarField(tiny_grid, np.zeros(tiny_grid.shape)))


def test_diamagnetic_gap_is_nonnegative(random_spinor, trig_potential):
    for scale in (0.0, 1.0, 4.0):
        gap = diamagnetic_gap(random_spinor, trig_potential * scale)
        assert gap >= -1e-8 * random_spinor.norm() ** 2


def test_zeeman_form_bound_holds(random_spinor, trig_potential):
    zeeman, weight = zeeman_form_bound(random_spinor, trig_potential)
    assert zeeman <= weight * (1.0 + 1e-12)


def test_sobolev_ratio_below_sharp_constant():
    grid = make_grid(6.0, 32)
    B = sample(LossYau(), grid)
    for width in (0.5, 1.0, 1.5):
        ratio = sobolev_ratio(ScalarField(grid, _gaussian(grid, width)), B)
        assert 0.0 < ratio < SOBOLEV_GAMMA_SQ


def test_cross_term_ratio_at_most_one(small_grid, trig_potential):
    x = small_grid.mesh[0]
    f = ScalarField(small_grid, _gaussian(small_grid, 0.5) * np.exp(1j * x))
    ratio = cross_term_ratio(f, trig_potential)
    assert 0.0 < ratio <= 1.0
    real_f = ScalarField(small_grid, _gaussian(small_grid, 0.5))
    assert cross_term_ratio(real_f, trig_potential) == pytest.approx(0.0, abs=1e-10)
