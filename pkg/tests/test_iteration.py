from fractions import Fraction

import numpy as np
import pytest

from app.exceptions import ParameterError
from app.services.iteration import (
    STATED_LIMIT,
    direct_limit,
    identity_check,
    minimal_T,
    mu_ratio,
    run_iteration,
    schedule,
    series_sums,
    weighted_term,
)


def test_weighted_term_identity_is_exact():
    result = identity_check(200)
    assert result["exact"]
    assert result["max_relative_deviation"] < 1e-10
    assert weighted_term(3) == Fraction(1000, 1331)


def test_weighted_series_reaches_eleven():
    sums = series_sums(schedule("i", 1.0, 267))
    assert sums["weighted_partial"] == pytest.approx(11.0, abs=1e-10)
    assert sums["weighted_tail"] < 1e-10


def test_default_depth_leaves_visible_tail():
    sums = series_sums(schedule("i", 1.0, 200))
    assert sums["weighted_tail"] > 1e-10


def test_step_series_limit():
    sums = series_sums(schedule("i", 2.0, 200))
    assert sums["mu_limit"] == pytest.approx(21.297, abs=1e-3)
    assert sums["mu_bound_holds"]
    assert sums["rho_limit_lambda_units"] == pytest.approx(1.0 + sums["mu_limit"])
    assert sums["rho_limit"] == pytest.approx(sums["rho_limit_lambda_units"] / 2.0)
    assert sums["stated_limit_difference"] == pytest.approx(sums["rho_limit_lambda_units"] - STATED_LIMIT)


def test_direct_summation_matches_closed_form():
    result = direct_limit()
    assert result["difference"] == pytest.approx(0.0, abs=1e-9)
    assert mu_ratio() ** 4 == pytest.approx(33.0 / 40.0, rel=1e-14)


def test_minimal_depth():
    result = minimal_T(1e-10)
    assert result["weighted"] == 267
    assert result["mu"] > result["weighted"]


def test_radius_schedule():
    sched = schedule("ii", 2.0, 3)
    assert sched.rho0 == pytest.approx(0.02)
    assert sched.rho[1] == pytest.approx(0.02 + 2.0 / 25.0)
    assert len(sched.rho) == 4
    assert len(sched.mu) == 3
    assert sched.unit == 1.0


@pytest.mark.parametrize("case,value,T", [("iii", 1.0, 5), ("i", 0.0, 5), ("ii", -1.0, 5), ("i", 1.0, -1)])
def test_schedule_rejects(case, value, T):
    with pytest.raises(ParameterError):
        schedule(case, value, T)


def test_flat_iteration_is_trivial(flat_torus):
    trace = run_iteration(flat_torus, np.zeros(4), schedule("i", 1.0, 10))
    assert len(trace.steps) == 11
    assert trace.measured_constant == 0.0
    assert trace.tail_negligible
    assert all(s.residual == 0.0 for s in trace.steps[:-1])


def test_sphere_iteration_constant(sphere):
    # ⨍|Rm|² = 24, ⨍(R²/3 + 4|W⁺|²) = 48
    trace = run_iteration(sphere, np.array([1.0, 1.0, 1.0, 0.0]), schedule("i", 1.0, 5))
    assert trace.measured_constant == pytest.approx(6.0 / 49.0, rel=1e-12)
    assert all(s.residual <= 1e-12 for s in trace.steps[:-1])
    assert trace.steps[0].energy == pytest.approx(24.0)
    assert trace.steps[0].csc_weyl == pytest.approx(48.0)
