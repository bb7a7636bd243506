#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""格子仕様とスペクトル微分のテスト"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from zeromode.errors import GridError
from zeromode.grid import (
    ScalarField,
    SpinorAlgebra,
    SpinorField,
    VectorField,
    make_grid,
    sigma_dot,
    spectral_curl,
    spectral_divergence,
    spectral_gradient,
)

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


@pytest.mark.parametrize("n", [7, 6, 0, -8, 9])
def test_points_per_axis_must_be_even_and_at_least_eight(n):
    with pytest.raises(GridError):
        make_grid(4.0, n)


@pytest.mark.parametrize("half_width", [0.0, -1.0, float("inf"), float("nan")])
def test_half_width_must_be_positive_and_finite(half_width):
    with pytest.raises(GridError):
        make_grid(half_width, 8)


def test_coordinates_start_at_minus_half_width_and_contain_origin():
    grid = make_grid(4.0, 8)
    assert grid.spacing == 1.0
    assert_allclose(grid.coordinates, np.arange(-4.0, 4.0))
    assert grid.coordinates[grid.origin_index[0]] == 0.0
    assert grid.volume == pytest.approx(512.0)


def test_frequency_range():
    grid = make_grid(np.pi, 16)
    assert grid.frequency(3) == pytest.approx(3.0)
    assert grid.frequency(-8) == pytest.approx(-8.0)
    with pytest.raises(GridError):
        grid.frequency(8)


def test_nyquist_derivative_is_zero():
    grid = make_grid(np.pi, 16)
    assert grid.derivative_wavenumbers[8] == 0.0
    assert grid.wavenumbers[8] != 0.0
    assert grid.k_nyquist == pytest.approx(8.0)


def test_kinetic_energy_keeps_nyquist_wavenumbers():
    grid = make_grid(np.pi, 16)
    off = ~grid.nyquist_mask
    assert_allclose(grid.kinetic_energy[off], grid.k_squared[off])
    assert grid.kinetic_energy[8, 0, 0] == pytest.approx(64.0)
    assert grid.kinetic_energy[8, 8, 8] == pytest.approx(192.0)
    assert grid.k_squared[8, 0, 0] == 0.0


def test_shell_mask_is_outer_tenth():
    grid = make_grid(10.0, 20)
    mask = grid.shell_mask(0.1)
    assert mask[0, 10, 10] and mask[1, 10, 10] and mask[19, 10, 10]
    assert not mask[2, 10, 10]
    assert not mask[10, 10, 10]


def test_field_shape_and_grid_mismatch(small_grid, tiny_grid):
    with pytest.raises(GridError):
        ScalarField(small_grid, np.zeros(tiny_grid.shape))
    with pytest.raises(GridError):
        ScalarField(small_grid, np.full(small_grid.shape, np.nan))
    a = ScalarField(small_grid, np.ones(small_grid.shape))
    b = ScalarField(tiny_grid, np.ones(tiny_grid.shape))
    with pytest.raises(GridError):
        a.inner(b)


def test_norm_uses_cell_volume(tiny_grid):
    f = ScalarField(tiny_grid, np.ones(tiny_grid.shape))
    assert f.norm() ** 2 == pytest.approx(tiny_grid.volume)
    assert f.inner(f) == pytest.approx(tiny_grid.volume)


def test_gradient_of_trigonometric_function_is_exact(small_grid):
    x, y, z = small_grid.mesh
    f = ScalarField(small_grid, np.sin(2 * x) * np.cos(3 * y) + np.cos(z))
    grad = spectral_gradient(f)
    expected = np.stack([2 * np.cos(2 * x) * np.cos(3 * y), -3 * np.sin(2 * x) * np.sin(3 * y), -np.sin(z)])
    assert_allclose(grad.values.real, expected, atol=1e-12)


def test_div_curl_is_zero_and_curl_of_gradient_is_zero(small_grid, rng):
    v = VectorField(small_grid, rng.standard_normal((3,) + small_grid.shape))
    assert np.max(np.abs(spectral_divergence(spectral_curl(v)).values)) < 1e-10
    f = ScalarField(small_grid, rng.standard_normal(small_grid.shape))
    assert np.max(np.abs(spectral_curl(spectral_gradient(f)).values)) < 1e-10


def test_sigma_matrices_anticommute():
    assert SpinorAlgebra.anticommutation_defect() == 0.0


@settings(max_examples=30, deadline=None)
@given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3))
def test_contracted_sigma_anticommutator(a, b):
    a, b = np.array(a), np.array(b)
    sa, sb = SpinorAlgebra.contract(a), SpinorAlgebra.contract(b)
    assert_allclose(sa @ sb + sb @ sa, 2.0 * np.dot(a, b) * np.eye(2), atol=1e-10 * (1 + np.dot(a, a) + np.dot(b, b)))


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=-5.0, max_value=5.0, allow_nan=False))
def test_sigma_dot_is_homogeneous(c):
    grid = make_grid(4.0, 8)
    rng = np.random.default_rng(0)
    v = VectorField(grid, rng.standard_normal((3,) + grid.shape))
    psi = SpinorField(grid, rng.standard_normal((2,) + grid.shape) + 1j * rng.standard_normal((2,) + grid.shape))
    assert_allclose(sigma_dot(v * c, psi).values, c * sigma_dot(v, psi).values, atol=1e-12)


def test_sigma_dot_squares_to_magnitude(tiny_grid, rng):
    v = VectorField(tiny_grid, rng.standard_normal((3,) + tiny_grid.shape))
    psi = SpinorField(tiny_grid, rng.standard_normal((2,) + tiny_grid.shape) + 0j)
    twice = sigma_dot(v, sigma_dot(v, psi))
    assert_allclose(twice.values, np.sum(v.values ** 2, axis=0) * psi.values, atol=1e-12)
