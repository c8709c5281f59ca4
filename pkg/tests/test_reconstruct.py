import csv
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cauchywave.errors import ConfigurationError, DataError
from cauchywave.forward import affine_field, plane_wave, point_source_3d, sample_cauchy_data
from cauchywave.geometry import ReconstructionTarget, ScattererBall, build_aperture, flat_profile
from cauchywave.kernel import make_kernel
from cauchywave.reconstruct import (
    ShiftedKernel,
    boundary_term,
    geometric_schedule,
    h_sweep,
    integral_term,
    reconstruct_at,
    select_limit,
    write_sweep_csv,
)

from conftest import BENCH_PULSE, BENCH_TARGET, bench_chart, bench_data


def null_data(kind, nodes=(64, 64)):
    model = affine_field(2, c0=1.0) if kind == "const" else affine_field(2, c_t=1.0)
    return sample_cauchy_data(model, bench_chart("flat", 0.5, nodes))


# ---------------------------------------------------------------- boundary term
def test_boundary_term_examples():
    assert boundary_term(null_data("const")) == 1.0
    assert boundary_term(null_data("t")) == 0.0
    data = bench_data(20.0)
    d = np.array([math.sin(math.radians(20)), math.cos(math.radians(20))])
    expected = 0.5 * (BENCH_PULSE.value(-1.0 - d[1]) + BENCH_PULSE.value(1.0 - d[1]))
    assert boundary_term(data) == pytest.approx(float(expected), rel=1e-15)


def test_boundary_term_missing_traces():
    with pytest.raises(DataError):
        boundary_term(replace(null_data("const"), trace_plus=None))


# ---------------------------------------------------------------- integral term
def test_shifted_kernel_matches_unshifted():
    k = make_kernel(h=0.3)
    target = ReconstructionTarget((0.4,), 0.2, 1.5)
    sk = ShiftedKernel(k, target)
    x, y, t = np.array([1.0]), 1.1, 1.9
    assert float(sk.w(x, y, t)) == float(k.w_eval(x - 0.4, y - 0.2, t - 1.5))


@pytest.mark.parametrize("kind", ["const", "t"])
def test_null_integral_decreases(kind):
    data = null_data(kind)
    vals = [abs(integral_term(data, make_kernel(h=h))) for h in (0.4, 0.2, 0.1)]
    if kind == "t":
        # the time-odd integrand cancels on the symmetric tau rule
        assert max(vals) <= 1e-14
    else:
        assert vals[2] < vals[1] < vals[0]


def test_integral_antisymmetry():
    data = bench_data(20.0)
    k = make_kernel(h=0.2)
    assert integral_term(data.scaled(-1.0), k) == -integral_term(data, k)


def test_linearity():
    a, b = bench_data(0.0), bench_data(20.0)
    mix = a.combined(b, 0.7, -1.3)
    for h in (0.4, 0.1):
        lhs = reconstruct_at(mix, h)
        rhs = 0.7 * reconstruct_at(a, h) - 1.3 * reconstruct_at(b, h)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_time_shift_equivariance():
    base_target = BENCH_TARGET
    shift = 3.7
    moved = ReconstructionTarget((0.0,), 0.0, shift)
    model = plane_wave([math.sin(0.3), math.cos(0.3)], BENCH_PULSE)
    shifted_model = plane_wave([math.sin(0.3), math.cos(0.3)], replace(BENCH_PULSE, delay=shift))
    d0 = sample_cauchy_data(model, build_aperture(flat_profile(1.0), base_target, 0.5, (48, 48)))
    d1 = sample_cauchy_data(shifted_model, build_aperture(flat_profile(1.0), moved, 0.5, (48, 48)))
    for h in (0.3, 0.1):
        assert reconstruct_at(d1, h) == pytest.approx(reconstruct_at(d0, h), abs=1e-12)


def test_dimension_and_chart_mismatch():
    data = bench_data(0.0)
    with pytest.raises(ConfigurationError):
        integral_term(data, make_kernel(h=0.2, dim_n=3))
    other = build_aperture(flat_profile(1.0), BENCH_TARGET, 0.5, (64, 64))
    with pytest.raises(DataError):
        integral_term(data, make_kernel(h=0.2), chart=other)


def test_workers_do_not_change_result_2d():
    data = bench_data(20.0)
    k = make_kernel(h=0.1)
    assert integral_term(data, k, workers=1) == integral_term(data, k, workers=4)


def test_workers_do_not_change_result_3d():
    target = ReconstructionTarget((0.0, 0.0), 0.0)
    ball = ScattererBall((1.2, 0.0, 0.3), 0.3)
    model = point_source_3d([1.2, 0.0, 0.3], BENCH_PULSE, ball)
    chart = build_aperture(flat_profile(1.0, 3), target, 0.5, (10, 12, 8))
    data = sample_cauchy_data(model, chart)
    k = make_kernel(h=0.2, dim_n=3)
    assert integral_term(data, k, workers=1) == integral_term(data, k, workers=3)


def test_quadrature_convergence_at_h02():
    base = reconstruct_at(bench_data(20.0), 0.2)
    fine = reconstruct_at(bench_data(20.0, nodes=(128, 128)), 0.2, kernel_settings={"s_nodes": 64})
    assert abs(fine - base) < 1e-4 * bench_data(20.0).scale


def test_margin_insensitivity():
    # node density is held fixed while the chart grows
    coarse = bench_data(20.0, margin=0.5, nodes=(64, 64))
    wide = bench_data(20.0, margin=1.0, nodes=(86, 64))
    sweep = h_sweep(coarse)
    diffs = sweep.diagnostics["differences"]
    for k, h in enumerate(sweep.h):
        if h < sweep.h_star:
            break
        change = abs(reconstruct_at(wide, h) - sweep.R[k])
        plateau = diffs[min(k, len(diffs) - 1)]
        assert change < plateau, (h, change, plateau)


# ---------------------------------------------------------------- schedule and selection
def test_geometric_schedule():
    assert geometric_schedule(0.4, 0.5, 3) == [0.4, 0.2, 0.1]
    for args in ((0.0, 0.5, 3), (0.4, 1.0, 3), (0.4, 0.5, 2), (0.4, 0.5, 3.5)):
        with pytest.raises(ConfigurationError):
            geometric_schedule(*args)


def test_select_limit_examples():
    est, h, diag = select_limit([2.0, 1.10, 1.01, 1.00, 1.30])
    assert est == 1.00 and diag["pair"] == [2, 3] and not diag["no_plateau"]
    est, h, diag = select_limit([0.5] * 4, h=[0.4, 0.2, 0.1, 0.05])
    assert est == 0.5 and h == 0.2 and diag["pair"] == [0, 1]
    est, h, diag = select_limit([1.0, 1.1, 1.3, 1.7, 2.5])
    assert diag["no_plateau"] and "warning" in diag and est == 1.1
    with pytest.raises(ValueError):
        select_limit([1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=10))
def test_select_limit_property(values):
    est, h, diag = select_limit(values)
    k = diag["pair"][0]
    assert est == values[k + 1]
    assert all(diag["differences"][k] <= d for d in diag["differences"])


def test_sweep_invariants():
    sweep = h_sweep(bench_data(0.0))
    assert all(b < a for a, b in zip(sweep.schedule, sweep.schedule[1:]))
    assert all(r == sweep.B + i for r, i in zip(sweep.R, sweep.I))
    assert sweep.selected_rel_err <= 0.05


def test_sweep_truncates_on_overflow():
    data = null_data("const", nodes=(16, 8))
    sweep = h_sweep(data, h_max=0.01, ratio=0.5, count=6)
    assert sweep.diagnostics["truncated"]
    assert sweep.h == sweep.schedule[:3]
    assert sweep.diagnostics["truncated_at_h"] == sweep.schedule[3]
    assert "exponent" in sweep.diagnostics["truncation_reason"]


def test_sweep_too_short_after_truncation():
    sweep = h_sweep(null_data("const", nodes=(16, 8)), h_max=0.003, ratio=0.5, count=4)
    assert sweep.estimate is None and "selection" in sweep.diagnostics


def test_sweep_csv(tmp_path):
    sweep = h_sweep(bench_data(0.0), count=4)
    path = tmp_path / "s.csv"
    write_sweep_csv(sweep, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["h", "B", "I", "R", "abs_err", "rel_err"]
    assert len(rows) == 5
    assert float(rows[1][3]) == sweep.R[0]
