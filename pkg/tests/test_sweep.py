#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""結合定数スイープと検出のテスト"""

from dataclasses import asdict

import numpy as np
import pytest

from zeromode.errors import PreconditionError
from zeromode.fields import LOSS_YAU_L32_NORM, LossYau, RandomDivFree, ZeroField
from zeromode.grid import make_grid
from zeromode.spectral import SpectralSettings
from zeromode.sweep import (
    SweepRecord,
    convergence_study,
    coupling_grid,
    detect_zeros,
    perturb_experiment,
    random_gauge_function,
    run_sweep,
    smoothness_diagnostic,
)

GAP_TOL = 0.01


def _synthetic(t: float, dips=(1.23,)) -> SweepRecord:
    """λ_min(t) = min_k (t − t_k)^2、μ(t) = 1 − λ_min(t) の合成レコード"""
    lam = min((t - d) ** 2 for d in dips)
    return SweepRecord(t=float(t), lambda_min=lam, bs_top=[1.0 - lam], bs_raw=[1.0 - lam],
                       nullity=int(lam < GAP_TOL))


def _records(dips=(1.23,)):
    return [_synthetic(t, dips) for t in coupling_grid((0.6, 2.0), 0.05)]


def test_coupling_grid_includes_both_ends():
    ts = coupling_grid((0.5, 2.0), 0.05)
    assert len(ts) == 31
    assert ts[0] == 0.5
    assert ts[-1] == pytest.approx(2.0)
    assert len(coupling_grid((1.0, 1.25), 0.1)) == 3


@pytest.mark.parametrize("t_range, step", [((0.0, 1.0), 0.1), ((2.0, 1.0), 0.1), ((1.0, 1.0), 0.1),
                                           ((0.5, 1.0), 0.0), ((0.5, 1.0), -0.1)])
def test_coupling_grid_rejects_bad_ranges(t_range, step):
    with pytest.raises(ValueError):
        coupling_grid(t_range, step)


def test_single_dip_gives_one_merged_detection():
    detections = detect_zeros(_records(), resolution=0.01, gap_tol=GAP_TOL)
    assert len(detections) == 1
    d = detections[0]
    assert d.bracket == pytest.approx((1.2, 1.3))
    assert d.channels == ["bs", "direct"]
    assert d.t_star == pytest.approx(1.25)
    assert d.multiplicity == 1
    assert d.consistent
    assert not d.refined


def test_golden_section_refines_inside_bracket():
    calls = []

    def evaluate(t):
        calls.append(t)
        return _synthetic(t)

    detections = detect_zeros(_records(), resolution=0.005, gap_tol=GAP_TOL, evaluate=evaluate)
    assert len(detections) == 1
    d = detections[0]
    assert d.refined
    assert abs(d.t_star - 1.23) < 0.01
    assert d.bracket[1] - d.bracket[0] <= 0.005
    assert 1.2 <= d.bracket[0] and d.bracket[1] <= 1.3
    assert len(d.history) == len(calls) > 2
    assert all(1.2 <= t <= 1.3 for t in calls)


def test_two_dips_are_detected_separately():
    detections = detect_zeros(_records(dips=(1.0, 5.0 / 3.0)), resolution=0.01, gap_tol=GAP_TOL)
    assert [d.t_star for d in detections] == pytest.approx([1.0, 1.65])
    assert all(d.consistent for d in detections)


@pytest.mark.parametrize("dip", [0.6, 2.0])
def test_dip_at_sweep_edge_stays_inside_bracket(dip):
    [d] = detect_zeros(_records(dips=(dip,)), resolution=0.01, gap_tol=GAP_TOL)
    assert d.t_star == pytest.approx(dip)
    assert d.bracket[0] < d.t_star < d.bracket[1]
    assert not d.refined


def test_channel_disagreement_is_reported_not_dropped():
    records = _records()
    for r in records:
        r.bs_top = [0.5]
    detections = detect_zeros(records, resolution=0.01, gap_tol=GAP_TOL)
    assert len(detections) == 1
    assert detections[0].channels == ["direct"]
    assert not detections[0].consistent


def test_failed_records_are_skipped():
    records = _records()
    records[4] = SweepRecord(t=records[4].t, error="CG が収束しませんでした", converged=False)
    detections = detect_zeros(records, resolution=0.01, gap_tol=GAP_TOL)
    assert [d.t_star for d in detections] == pytest.approx([1.25])


def test_no_records_no_detections():
    assert detect_zeros([], resolution=0.01, gap_tol=GAP_TOL) == []
    flat = [SweepRecord(t=t, lambda_min=1.0, bs_top=[0.2]) for t in coupling_grid((0.5, 1.0), 0.1)]
    assert detect_zeros(flat, resolution=0.01, gap_tol=GAP_TOL) == []


def test_smoothness_diagnostic():
    records = [SweepRecord(t=0.1 * i, bs_raw=[mu]) for i, mu in enumerate([0.1, 0.2, 0.4, 0.7])]
    diag = smoothness_diagnostic(records)
    assert diag["max_first"] == pytest.approx(0.3)
    assert diag["max_second"] == pytest.approx(0.1)
    assert diag["ratio"] == pytest.approx(1.0 / 3.0)
    assert np.isnan(smoothness_diagnostic(records[:2])["ratio"])


def test_random_gauge_function_is_real_low_mode_and_scaled(tiny_grid):
    f = random_gauge_function(tiny_grid, seed=4, amplitude=0.3, max_mode=1)
    assert np.max(np.abs(f.values.imag)) < 1e-12
    assert np.max(np.abs(f.values)) == pytest.approx(0.3)
    assert np.mean(f.values) == pytest.approx(0.0, abs=1e-12)
    again = random_gauge_function(tiny_grid, seed=4, amplitude=0.3, max_mode=1)
    assert np.array_equal(f.values, again.values)


def test_convergence_study_needs_two_grids(tiny_grid):
    with pytest.raises(ValueError):
        convergence_study(LossYau(), 1.0, [tiny_grid])


@pytest.fixture(scope="module")
def random_base():
    return RandomDivFree(seed=5, amplitude=2.0, correlation_length=1.0)


def test_zero_perturbation_leaves_spectrum_unchanged(random_base):
    grid = make_grid(4.0, 8)
    settings = SpectralSettings(k=4, bs_k=1, seed=2)
    reports = perturb_experiment(random_base, 0.0, trials=1, seed=3, grid=grid, settings=settings,
                                 require_base_detection=False)
    assert len(reports) == 1
    report = reports[0]
    assert report.measured_epsilon == 0.0
    assert report.nullity_after == report.nullity_before
    assert report.lambda_after == pytest.approx(report.lambda_before, rel=1e-6)
    assert not report.error


def test_perturbation_trials_are_reproducible(random_base):
    grid = make_grid(4.0, 8)
    settings = SpectralSettings(k=4, bs_k=1, seed=2)
    kwargs = dict(grid=grid, settings=settings, require_base_detection=False)
    first = perturb_experiment(random_base, 0.1, trials=2, seed=11, **kwargs)
    second = perturb_experiment(random_base, 0.1, trials=2, seed=11, **kwargs)
    assert [r.seed for r in first] == [r.seed for r in second]
    assert first[0].seed != first[1].seed
    assert [r.measured_epsilon for r in first] == pytest.approx([0.1, 0.1])
    assert [repr(asdict(r)) for r in first] == [repr(asdict(r)) for r in second]


def test_perturbation_requires_usable_base(tiny_grid):
    with pytest.raises(PreconditionError):
        perturb_experiment(ZeroField(), 0.1, trials=1, seed=0, grid=tiny_grid, require_base_detection=False)
    with pytest.raises(ValueError):
        perturb_experiment(ZeroField(), -0.1, trials=1, seed=0, grid=tiny_grid)
    with pytest.raises(ValueError):
        perturb_experiment(ZeroField(), 0.1, trials=0, seed=0, grid=tiny_grid)


def test_sweep_records_are_ordered_and_complete(random_base):
    settings = SpectralSettings(k=3, bs_k=1, seed=2)
    records = run_sweep(random_base, make_grid(4.0, 8), (0.5, 1.0), 0.25, settings=settings, workers=2)
    assert [r.t for r in records] == pytest.approx([0.5, 0.75, 1.0])
    for r in records:
        assert not r.failed
        assert len(r.lambda_raw) == 3
        assert 0.0 <= r.bs_localized <= 1.0 + 1e-8
        assert r.solver["solves"] > 0


@pytest.mark.slow
def test_loss_yau_sweep_finds_unit_coupling():
    from zeromode.sweep import build_context, detect_in_context, sweep_context

    settings = SpectralSettings(k=6, bs_k=2)
    ctx = build_context(LossYau(), make_grid(16.0, 48))
    records = sweep_context(ctx, coupling_grid((0.8, 1.2), 0.05), settings)
    consistent = [d for d in detect_in_context(ctx, records, 0.01, settings) if d.consistent]
    assert any(abs(d.t_star - 1.0) <= 0.02 and d.multiplicity == 1 for d in consistent)


@pytest.mark.slow
def test_loss_yau_refinement_is_self_consistent():
    grids = [make_grid(16.0, n) for n in (48, 64, 96)]
    table = convergence_study(LossYau(), 1.0, grids, settings=SpectralSettings(k=6, bs_k=2),
                              locate=(0.9, 1.1, 0.05), resolution=0.01)
    assert [row.nullity for row in table.rows] == [1, 1, 1]
    assert len(table.cauchy) == 2
    assert table.monotone
    assert table.t_star_drift is not None
    assert table.t_star_drift <= 0.02


@pytest.mark.slow
def test_loss_yau_perturbations_repeat_bit_for_bit():
    kwargs = dict(grid=make_grid(16.0, 48), settings=SpectralSettings(k=6, bs_k=2), t=1.0)
    epsilon = 0.1 * LOSS_YAU_L32_NORM
    first = perturb_experiment(LossYau(), epsilon, trials=5, seed=2024, **kwargs)
    second = perturb_experiment(LossYau(), epsilon, trials=5, seed=2024, **kwargs)
    assert len(first) == 5
    assert not any(r.error for r in first)
    assert [repr(asdict(r)) for r in first] == [repr(asdict(r)) for r in second]
