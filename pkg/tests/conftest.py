#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
共通フィクスチャ

小さな格子、帯域制限したスピノルとベクトルポテンシャル、
デスクスケールの Loss-Yau 作用素（slow のみ）を提供する
"""

import numpy as np
import pytest

from zeromode.fields import LossYau
from zeromode.grid import GridSpec, SpinorField, VectorField, make_grid
from zeromode.sweep import build_context
from zeromode.validation import band_limited_spinor


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="デスクスケールの受け入れテストも実行する")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="--runslow を指定したときのみ実行")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_grid() -> GridSpec:
    """L = π、N = 16（整数波数がそのまま格子波数になる）"""
    return make_grid(np.pi, 16)


@pytest.fixture
def tiny_grid() -> GridSpec:
    return make_grid(4.0, 8)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def random_spinor(small_grid, rng) -> SpinorField:
    return band_limited_spinor(small_grid, rng, max_mode=3)


def trigonometric_potential(grid: GridSpec) -> VectorField:
    """
    |n_i| ≤ 1 の三角多項式のポテンシャル

    |n_i| ≤ 3 のスピノルとの積がナイキスト未満に収まるので、
    積の微分の恒等式が丸め誤差の範囲で成り立つ
    """
    x, y, z = grid.mesh
    return VectorField(grid, np.stack([
        0.7 * np.sin(y) + 0.3 * np.cos(z),
        0.5 * np.cos(x) - 0.4 * np.sin(z),
        0.6 * np.sin(x) * np.cos(y) + 0.2,
    ]))


@pytest.fixture
def trig_potential(small_grid) -> VectorField:
    return trigonometric_potential(small_grid)


@pytest.fixture(scope="session")
def loss_yau_context():
    """L = 16、N = 48 の Loss-Yau 作用素（t = 1）"""
    return build_context(LossYau(), make_grid(16.0, 48), t=1.0)
