# tc_solver.py
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg, optimize

import config
import scattering
from asymptotics import tc_pred
from errors import BracketingError, InvalidArgumentError
from gap_solver import DEFAULT_P_MAX_SIGMA, check_floor
from potentials import Potential
from radial_quadrature import RadialGrid, build_grid, kernel_matrix

logger = logging.getLogger(__name__)

BRACKET_FACTOR = 20.0
WIDEN_FACTOR = 10.0
MAX_WIDENINGS = 2
BISECTION_TOL = 1e-6
REFINE_XTOL = 1e-13


@dataclass
class TcResult:
    mu: float
    tc: float
    tc_pred: float
    bracket: Tuple[float, float]
    lambda_min_trace: List[Tuple[float, float]] = field(default_factory=list)
    margin_trace: List[Tuple[float, float]] = field(default_factory=list)
    converged: bool = False
    grid_meta: str = ""
    lambda_min: float = float("nan")
    lambda_min_error: float = float("nan")
    grid: Optional[RadialGrid] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mu": self.mu,
            "tc": self.tc,
            "tc_pred": self.tc_pred,
            "bracket": list(self.bracket),
            "lambda_min_trace": [list(pair) for pair in self.lambda_min_trace],
            "margin_trace": [list(pair) for pair in self.margin_trace],
            "lambda_min": self.lambda_min,
            "lambda_min_error": self.lambda_min_error,
            "converged": self.converged,
            "grid": self.grid_meta,
        }


def kt_from_xi(xi, T: float):
    """ξ / tanh(ξ/2T), equal to 2T(1 + (ξ/2T)²/3) near ξ = 0."""
    if not T > 0.0:
        raise InvalidArgumentError(f"T must be > 0, got {T}")
    xi = np.asarray(xi, dtype=float)
    small = np.abs(xi) < 1e-8 * T
    safe = np.where(small, T, xi)
    x = xi / (2.0 * T)
    return np.where(small, 2.0 * T * (1.0 + x * x / 3.0), safe / np.tanh(safe / (2.0 * T)))


def kt_dispersion(p, mu: float, T: float):
    p = np.asarray(p, dtype=float)
    return kt_from_xi(p * p - mu, T)


def _check_shell(grid: RadialGrid, T: float):
    if grid.inner_scale > T / (10.0 * grid.mu):
        raise InvalidArgumentError(
            f"grid inner scale {grid.inner_scale:.3g} does not resolve the thermal shell at T={T:.3g}"
        )


def _lowest(H: np.ndarray) -> float:
    return float(linalg.eigh(H, eigvals_only=True, subset_by_index=[0, 0])[0])


def _linearized(K: np.ndarray, xi: np.ndarray, T: float) -> np.ndarray:
    H = K.copy()
    H[np.diag_indices_from(H)] += kt_from_xi(xi, T)
    return H


def lowest_eigenvalue_linearized(pot: Potential, mu: float, T: float, grid: RadialGrid) -> float:
    """Smallest eigenvalue of diag(K_T) + K on the grid."""
    _check_shell(grid, T)
    return _lowest(_linearized(kernel_matrix(pot, grid), grid.xi, T))


def linearized_error_bar(pot: Potential, mu: float, T: float, grid: RadialGrid) -> float:
    """|λ_min(grid) − λ_min(doubled grid)|."""
    coarse = lowest_eigenvalue_linearized(pot, mu, T, grid)
    fine = lowest_eigenvalue_linearized(pot, mu, T, grid.refined())
    return abs(fine - coarse)


def _margin(K: np.ndarray, xi: np.ndarray, T: float) -> float:
    """1 + lowest eigenvalue of K_T^{-1/2} K K_T^{-1/2}; same sign as λ_min, increasing in T."""
    scale = 1.0 / np.sqrt(kt_from_xi(xi, T))
    B = scale[:, None] * K * scale[None, :]
    return 1.0 + _lowest(B)


def critical_temperature(
    pot: Potential,
    mu: float,
    scattering_length: Optional[float] = None,
    n_inner: int = 64,
    n_wing: int = 64,
    n_tail: int = 64,
    p_max: Optional[float] = None,
) -> TcResult:
    """Locate the temperature where the linearized gap operator loses positivity.

    Bisection in log T narrows the bracket to BISECTION_TOL; brentq then pins
    the root inside it to REFINE_XTOL so ratios built on T_c are not dominated
    by the bracket width.
    """
    if not mu > 0.0:
        raise InvalidArgumentError(f"mu must be > 0, got {mu}")
    a = scattering.scattering_length(pot) if scattering_length is None else scattering_length
    if not a < 0.0:
        raise InvalidArgumentError(f"{pot.label()}: scattering length {a:.6g} must be negative")
    check_floor(mu, a)
    predicted = tc_pred(mu, a)

    lowest_T = predicted / (BRACKET_FACTOR * WIDEN_FACTOR**MAX_WIDENINGS)
    inner_scale = max(lowest_T / (10.0 * mu), 1e-16)
    grid = build_grid(mu, inner_scale, p_max or DEFAULT_P_MAX_SIGMA / pot.range_, n_inner, n_wing, n_tail)
    K = kernel_matrix(pot, grid)
    trace: List[Tuple[float, float]] = []
    lambda_trace: List[Tuple[float, float]] = []

    def evaluate(T: float) -> Tuple[float, float]:
        return _margin(K, grid.xi, T), _lowest(_linearized(K, grid.xi, T))

    def margin(T: float) -> float:
        value, lam = evaluate(T)
        trace.append((T, value))
        lambda_trace.append((T, lam))
        return value

    lo, hi = predicted / BRACKET_FACTOR, predicted * BRACKET_FACTOR
    with ThreadPoolExecutor(max_workers=config.threads()) as pool:
        (m_lo, l_lo), (m_hi, l_hi) = pool.map(evaluate, [lo, hi])
    trace.extend([(lo, m_lo), (hi, m_hi)])
    lambda_trace.extend([(lo, l_lo), (hi, l_hi)])
    widenings = 0
    while not (m_lo < 0.0 < m_hi):
        if widenings == MAX_WIDENINGS:
            raise BracketingError(f"no sign change of the linearized margin around tc_pred={predicted:.3g}", lambda_trace)
        widenings += 1
        logger.warning(f"[Tc Solver] widening bracket (attempt {widenings})")
        if m_lo >= 0.0:
            lo /= WIDEN_FACTOR
            m_lo = margin(lo)
        if m_hi <= 0.0:
            hi *= WIDEN_FACTOR
            m_hi = margin(hi)

    while hi - lo > BISECTION_TOL * hi:
        mid = math.sqrt(lo * hi)
        if margin(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    # the margin keeps its sign at lo and hi, so brentq has a valid bracket in log T
    log_tc = optimize.brentq(lambda s: margin(math.exp(s)), math.log(lo), math.log(hi), xtol=REFINE_XTOL)
    tc = math.exp(log_tc)
    error = linearized_error_bar(pot, mu, tc, grid)
    logger.info(
        f"[Tc Solver] mu={mu:.6g}: Tc={tc:.12g} (prediction {predicted:.6g}, "
        f"lambda_min error {error:.2e}) after {len(trace)} evaluations"
    )
    return TcResult(
        mu=mu,
        tc=tc,
        tc_pred=predicted,
        bracket=(lo, hi),
        lambda_min_trace=lambda_trace,
        margin_trace=trace,
        converged=True,
        grid_meta=grid.meta(),
        lambda_min=lowest_eigenvalue_linearized(pot, mu, tc, grid),
        lambda_min_error=error,
        grid=grid,
    )


def bracket_monotone(pot: Potential, result: TcResult, samples: int = 8) -> bool:
    """The margin increases with T at `samples` interior points of the final bracket, on the solve grid."""
    if result.grid is None:
        raise InvalidArgumentError("result carries no grid; pass a TcResult from critical_temperature")
    lo, hi = result.bracket
    K = kernel_matrix(pot, result.grid)
    temps = np.geomspace(lo, hi, samples + 2)
    margins = [_margin(K, result.grid.xi, T) for T in temps]
    return bool(np.all(np.diff(margins) > 0.0))
