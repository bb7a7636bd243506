#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
ゼロモード検出ライブラリ

周期箱上の格子・磁場・ゲージ・パウリ作用素・固有値計算・スイープを提供する
"""

from .errors import (
    ConfigError,
    DivergenceError,
    FieldError,
    GaugeObstructionError,
    GridError,
    PreconditionError,
    SolverError,
    SpectralError,
    ZeroModeError,
)
from .grid import GridSpec, ScalarField, SpinorField, VectorField, make_grid
from .fields import GridData, LossYau, RandomDivFree, Scaled, Sum, ZeroField, prepare_field, sample
from .gauge import GaugeData, biot_savart
from .pauli import PauliContext, apply_P, apply_dirac, apply_pauli, apply_schrodinger, solve_P
from .spectral import SpectralSettings, bs_spectrum, largest_eigs, nullity_estimate, smallest_eigs
from .sweep import detect_zeros, perturb_experiment, run_sweep

__all__ = [
    'ConfigError',
    'DivergenceError',
    'FieldError',
    'GaugeObstructionError',
    'GridError',
    'PreconditionError',
    'SolverError',
    'SpectralError',
    'ZeroModeError',
    'GridSpec',
    'ScalarField',
    'SpinorField',
    'VectorField',
    'make_grid',
    'GridData',
    'LossYau',
    'RandomDivFree',
    'Scaled',
    'Sum',
    'ZeroField',
    'prepare_field',
    'sample',
    'GaugeData',
    'biot_savart',
    'PauliContext',
    'apply_P',
    'apply_dirac',
    'apply_pauli',
    'apply_schrodinger',
    'solve_P',
    'SpectralSettings',
    'bs_spectrum',
    'largest_eigs',
    'nullity_estimate',
    'smallest_eigs',
    'detect_zeros',
    'perturb_experiment',
    'run_sweep',
]
