import functools
from dataclasses import replace

import numpy as np
import pytest

from errors import InvalidArgumentError
from potentials import Family, Potential, make_potential, scale_potential
from radial_quadrature import build_grid, kernel_matrix
from tc_solver import (
    _margin,
    bracket_monotone,
    critical_temperature,
    kt_dispersion,
    kt_from_xi,
    linearized_error_bar,
    lowest_eigenvalue_linearized,
)

GAUSSIAN = make_potential("gaussian", 1.0, 1.0)


@functools.lru_cache(maxsize=None)
def tc_result(mu: float):
    return critical_temperature(GAUSSIAN, mu)


def test_thermal_dispersion():
    T = 0.01
    assert float(kt_from_xi(0.0, T)) == pytest.approx(2.0 * T, rel=1e-15)
    tiny = 1e-9 * T
    assert float(kt_from_xi(tiny, T)) == pytest.approx(2.0 * T, rel=1e-12)
    just_above = 2e-8 * T
    assert float(kt_from_xi(just_above, T)) == pytest.approx(2.0 * T, rel=1e-12)
    xi = np.array([-5.0, -0.3, 0.3, 5.0]) * T
    assert np.allclose(kt_from_xi(xi, T), kt_from_xi(-xi, T), rtol=1e-15, atol=0.0)
    assert float(kt_from_xi(100.0 * T, T)) == pytest.approx(100.0 * T, rel=1e-15)
    assert float(kt_dispersion(1.0, 1.0, T)) == pytest.approx(2.0 * T)
    with pytest.raises(InvalidArgumentError):
        kt_from_xi(1.0, 0.0)


def test_free_case_lowest_eigenvalue():
    free = Potential(Family.GAUSSIAN, 0.0, 1.0)
    mu, T = 0.5, 1e-3
    grid = build_grid(mu, T / (10.0 * mu), 20.0)
    assert lowest_eigenvalue_linearized(free, mu, T, grid) == pytest.approx(2.0 * T, rel=1e-6)


def test_shell_must_be_resolved():
    grid = build_grid(0.5, 1e-2, 20.0)
    with pytest.raises(InvalidArgumentError):
        lowest_eigenvalue_linearized(GAUSSIAN, 0.5, 1e-6, grid)


def test_critical_temperature_bisection():
    result = tc_result(0.1)
    assert result.converged
    lo, hi = result.bracket
    assert lo <= result.tc <= hi
    assert hi - lo <= 1e-6 * hi
    for T, margin in result.margin_trace:
        if T <= lo:
            assert margin < 0.0
        if T >= hi:
            assert margin > 0.0
    # the two traces sample the same temperatures
    assert [T for T, _ in result.lambda_min_trace] == [T for T, _ in result.margin_trace]
    assert bracket_monotone(GAUSSIAN, result)


def test_bracket_monotone_uses_final_bracket():
    result = tc_result(0.1)
    lo, hi = result.bracket
    K = kernel_matrix(GAUSSIAN, result.grid)
    temps = np.geomspace(lo, hi, 10)
    margins = [_margin(K, result.grid.xi, T) for T in temps]
    assert margins[0] < 0.0 < margins[-1]
    assert np.all(np.diff(margins) > 0.0)
    with pytest.raises(InvalidArgumentError):
        bracket_monotone(GAUSSIAN, replace(result, grid=None))


def test_tc_reports_lambda_min_with_error_bar():
    result = tc_result(0.1)
    assert abs(result.lambda_min) <= 1e-3 * result.tc
    assert np.isfinite(result.lambda_min_error) and result.lambda_min_error >= 0.0
    assert result.lambda_min_error == pytest.approx(
        linearized_error_bar(GAUSSIAN, 0.1, result.tc, result.grid), rel=1e-12, abs=1e-15
    )
    data = result.to_dict()
    assert data["lambda_min_error"] == result.lambda_min_error
    assert "margin_trace" in data and "lambda_min_trace" in data
    assert "grid" in data and isinstance(data["grid"], str)


def test_tc_refined_inside_bracket():
    result = tc_result(0.1)
    lo, hi = result.bracket
    # a relative step of 1e-9 on either side of T_c flips the margin
    K = kernel_matrix(GAUSSIAN, result.grid)
    below = _margin(K, result.grid.xi, result.tc * (1.0 - 1e-9))
    above = _margin(K, result.grid.xi, result.tc * (1.0 + 1e-9))
    assert below < 0.0 < above
    assert lo < result.tc < hi


def test_tc_near_prediction():
    result = tc_result(0.1)
    assert 0.5 * result.tc_pred <= result.tc <= 2.0 * result.tc_pred


def test_tc_increases_with_depth():
    weak = critical_temperature(make_potential("gaussian", 0.9, 1.0), 0.1).tc
    strong = tc_result(0.1).tc
    assert weak < strong


def test_eigenvalue_sign_brackets_tc():
    mu = 0.1
    result = tc_result(mu)
    low_T, high_T = result.tc / 20.0, result.tc * 20.0
    grid = build_grid(mu, low_T / (10.0 * mu), 40.0)
    assert lowest_eigenvalue_linearized(GAUSSIAN, mu, low_T, grid) < 0.0
    assert lowest_eigenvalue_linearized(GAUSSIAN, mu, high_T, grid) > 0.0


def test_tc_scales_with_mu():
    mu = 0.25
    direct = critical_temperature(GAUSSIAN, mu).tc
    unit = critical_temperature(scale_potential(GAUSSIAN, mu), 1.0).tc
    assert direct == pytest.approx(mu * unit, rel=1e-5)


def test_tc_rejects_bound_states():
    with pytest.raises(InvalidArgumentError):
        critical_temperature(make_potential("gaussian", 2.0, 1.0), 0.1)


def main():
    print("--- Starting Critical Temperature Test Suite ---")
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    for name, fn in tests:
        print(f"\n--- {name} ---")
        fn()
        print("ok")
    print("\n--- All critical temperature tests passed ---")


if __name__ == "__main__":
    main()
