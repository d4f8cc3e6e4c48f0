import functools
import math

import numpy as np
import pytest

from errors import BelowFloorError, InvalidArgumentError, NonConvergenceError, RangeError
from gap_solver import (
    UNDERFLOW_FLOOR,
    GapOptions,
    GapSolution,
    bcs_functional,
    delta_at_fermi,
    energy_gap,
    euler_lagrange_defect,
    gap_map,
    seed_gap,
    solve_gap,
)
from potentials import make_potential, scale_potential
from radial_quadrature import build_grid, convolution_matrix

GAUSSIAN = make_potential("gaussian", 1.0, 1.0)


@functools.lru_cache(maxsize=None)
def solved(mu: float, depth: float = 1.0):
    return solve_gap(make_potential("gaussian", depth, 1.0), mu)


def test_solution_is_certified():
    for mu in (0.3, 0.1, 0.04):
        sol = solved(mu)
        assert sol.converged
        assert sol.residual <= 1e-9
        assert sol.iterations > 0
        assert np.all(sol.delta > 0.0)


def test_energy_gap_below_fermi_gap():
    for mu in (0.3, 0.1):
        sol = solved(mu)
        assert 0.0 < sol.xi <= sol.delta_fermi * (1.0 + 1e-12)
        assert sol.p_star > 0.0


def test_energy_gap_lower_bound():
    for mu in (0.3, 0.1):
        sol = solved(mu)
        band = np.abs(sol.grid.xi) <= sol.xi
        assert band.any()
        floor = float(np.min(sol.delta[band]))
        # band width Ξ times the Lipschitz constant of Δ in ξ, relative to the band minimum
        xi_band, delta_band = sol.grid.xi[band], sol.delta[band]
        slope = np.max(np.abs(np.diff(delta_band) / np.diff(xi_band))) if band.sum() > 1 else 0.0
        eps = 10.0 * slope * sol.xi / floor
        assert sol.xi >= (1.0 - eps) * floor


def test_scaled_gap_raises_functional():
    sol = solved(0.3)
    bumped = GapSolution.from_delta(sol.pot, sol.mu, sol.grid, 1.1 * sol.delta)
    assert bcs_functional(bumped) > bcs_functional(sol)
    shrunk = GapSolution.from_delta(sol.pot, sol.mu, sol.grid, sol.delta / 1.1)
    assert bcs_functional(shrunk) > bcs_functional(sol)


def test_gap_map_preserves_positivity():
    mu = 0.3
    grid = build_grid(mu, 1e-4, 40.0)
    A = convolution_matrix(GAUSSIAN, grid)
    assert np.all(A >= 0.0)
    rng = np.random.default_rng(7)
    for _ in range(5):
        delta = rng.uniform(1e-6, 1.0, size=grid.nodes.size)
        assert np.all(gap_map(A, grid.xi, delta) > 0.0)


def test_seed_units_keep_the_nontrivial_branch():
    # at small μ the seed is far below μ; the solve must not drift to Δ ≡ 0
    sol = solved(0.04)
    assert sol.converged
    assert sol.delta_fermi / sol.seed > 0.1
    assert np.all(sol.delta > 0.0)


def test_dispersion_is_consistent():
    sol = solved(0.3)
    assert np.array_equal(sol.dispersion, np.sqrt(sol.grid.xi**2 + sol.delta**2))


def test_functional_is_negative_and_stationary():
    sol = solved(0.3)
    assert bcs_functional(sol) < 0.0
    assert max(euler_lagrange_defect(sol)) <= 1e-8


def test_scaling_covariance():
    mu = 0.25
    sol = solve_gap(GAUSSIAN, mu)
    unit = solve_gap(scale_potential(GAUSSIAN, mu), 1.0)
    p = math.sqrt(mu) * np.geomspace(0.05, 10.0, 20)
    direct = sol.delta_at(p)
    scaled = mu * unit.delta_at(p / math.sqrt(mu))
    assert np.max(np.abs(direct - scaled)) <= 1e-6 * np.max(np.abs(direct))


def test_deeper_well_gives_larger_gap():
    assert solved(0.3, 1.01).delta_fermi > solved(0.3).delta_fermi


def test_gap_is_close_to_seed_shape():
    sol = solved(0.3)
    assert sol.seed == pytest.approx(seed_gap(0.3, sol.scattering_length))
    assert 0.1 < sol.delta_fermi / sol.seed < 10.0


def test_rejects_unsuitable_potentials():
    with pytest.raises(InvalidArgumentError):
        solve_gap(make_potential("squarewell", 1.0, 1.0), 0.3)
    with pytest.raises(InvalidArgumentError):
        solve_gap(make_potential("gaussian", 2.0, 1.0), 0.3)
    with pytest.raises(InvalidArgumentError):
        solve_gap(GAUSSIAN, -0.1)


def test_underflow_floor():
    assert UNDERFLOW_FLOOR == pytest.approx(0.05685, abs=1e-5)
    with pytest.raises(BelowFloorError) as info:
        solve_gap(GAUSSIAN, 1e-6)
    assert info.value.floor_mu > 1e-6


def test_iteration_budget():
    with pytest.raises(NonConvergenceError):
        solve_gap(GAUSSIAN, 0.3, GapOptions(max_iter=1))
    with pytest.raises(InvalidArgumentError):
        GapOptions(damping=0.0)


def test_constant_gap_readouts():
    mu, delta = 1.0, 1e-4
    grid = build_grid(mu, delta, 40.0)
    sol = GapSolution.from_delta(GAUSSIAN, mu, grid, np.full(len(grid), delta))
    assert delta_at_fermi(sol) == pytest.approx(delta, rel=1e-14)
    xi, p_star = energy_gap(sol)
    assert xi == pytest.approx(delta, rel=1e-7)
    assert p_star == pytest.approx(1.0, abs=1e-6)


def test_smooth_gap_interpolation():
    mu = 0.01
    grid = build_grid(mu, 1e-4, 40.0)
    shape = GAUSSIAN.vhat(grid.nodes) / float(GAUSSIAN.vhat(0.0))
    sol = GapSolution.from_delta(GAUSSIAN, mu, grid, 1e-3 * shape)
    assert sol.delta_fermi == pytest.approx(1e-3 * math.exp(-0.5 * mu), rel=1e-12)
    probe = np.array([0.05, 0.3, 2.0])
    assert np.allclose(sol.delta_at(probe), 1e-3 * np.exp(-0.5 * probe**2), rtol=1e-2)


def test_zero_gap_has_zero_energy():
    grid = build_grid(0.3, 1e-3, 40.0)
    sol = GapSolution.from_delta(GAUSSIAN, 0.3, grid, np.zeros(len(grid)))
    assert bcs_functional(sol) == 0.0


def test_interpolation_range():
    sol = solved(0.3)
    with pytest.raises(RangeError):
        sol.delta_at_s(-2.0)
    far = sol.delta_at(np.array([100.0]))
    assert np.all(far >= 0.0)


def main():
    print("--- Starting Gap Solver Test Suite ---")
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    for name, fn in tests:
        print(f"\n--- {name} ---")
        fn()
        print("ok")
    print("\n--- All gap solver tests passed ---")


if __name__ == "__main__":
    main()
