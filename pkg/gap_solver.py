# gap_solver.py
import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import BarycentricInterpolator, PchipInterpolator

import config
import scattering
from errors import (
    BelowFloorError,
    InconsistentSolutionError,
    InvalidArgumentError,
    NonConvergenceError,
    RangeError,
    TrivialSolutionError,
)
from potentials import Potential, vhat_nonpositive
from radial_quadrature import RadialGrid, build_grid, convolution_matrix, kernel_matrix

logger = logging.getLogger(__name__)

# exp(π/(2√μ a)) must stay above 1e-12 for the gap to be resolvable.
UNDERFLOW_FLOOR = math.pi / (2.0 * math.log(1e12))
TRIVIAL_FRACTION = 1e-3
TRIVIAL_PATIENCE = 20
DEFAULT_P_MAX_SIGMA = 40.0


def seed_gap(mu: float, a: float) -> float:
    """Leading-order gap 8e^{-2} μ exp(π/(2√μ a))."""
    return 8.0 * math.exp(-2.0) * mu * math.exp(math.pi / (2.0 * math.sqrt(mu) * a))


def check_floor(mu: float, a: float):
    if math.sqrt(mu) * abs(a) < UNDERFLOW_FLOOR:
        raise BelowFloorError(mu, (UNDERFLOW_FLOOR / abs(a)) ** 2, UNDERFLOW_FLOOR)


@dataclass
class GapOptions:
    tol: float = field(default_factory=lambda: config.TOL)
    max_iter: int = field(default_factory=lambda: config.MAX_ITER)
    damping: float = field(default_factory=lambda: config.DAMPING)
    n_inner: int = 64
    n_wing: int = 64
    n_tail: int = 64
    p_max: Optional[float] = None
    inner_scale: Optional[float] = None
    certify: bool = True

    def __post_init__(self):
        if not self.tol > 0.0:
            raise InvalidArgumentError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise InvalidArgumentError(f"max_iter must be >= 1, got {self.max_iter}")
        if not 0.0 < self.damping <= 1.0:
            raise InvalidArgumentError(f"damping must be in (0, 1], got {self.damping}")


@dataclass
class GapSolution:
    pot: Potential
    mu: float
    grid: RadialGrid
    delta: np.ndarray
    dispersion: np.ndarray
    delta_fermi: float
    delta_fermi_error: float
    xi: float
    p_star: float
    residual: float = float("nan")
    iterations: int = 0
    converged: bool = False
    scattering_length: float = float("nan")
    seed: float = float("nan")

    @classmethod
    def from_delta(cls, pot: Potential, mu: float, grid: RadialGrid, delta) -> "GapSolution":
        """Wrap a given Δ on a grid; used for synthetic inputs and checks."""
        delta = np.asarray(delta, dtype=float)
        if delta.shape != grid.nodes.shape:
            raise InvalidArgumentError("delta must have one value per grid node")
        dispersion = np.sqrt(grid.xi**2 + delta**2)
        value, error = _fermi_interpolation(grid, delta)
        xi, p_star = _energy_gap(grid, dispersion)
        return cls(pot, mu, grid, delta, dispersion, value, error, xi, p_star)

    @functools.cached_property
    def kernel(self) -> np.ndarray:
        return kernel_matrix(self.pot, self.grid)

    @functools.cached_property
    def _interpolant(self) -> PchipInterpolator:
        return PchipInterpolator(self.grid.s, self.delta, extrapolate=True)

    def delta_at_s(self, s) -> np.ndarray:
        """Δ at p = √μ √(1+s). Beyond the last node Δ follows the shape of V̂."""
        s = np.asarray(s, dtype=float)
        if np.any(s < -1.0):
            raise RangeError("s < -1 lies outside p >= 0")
        out = self._interpolant(np.minimum(s, self.grid.s[-1]))
        beyond = s > self.grid.s[-1]
        if np.any(beyond):
            p_last = self.grid.nodes[-1]
            v_last = float(self.pot.vhat(p_last))
            p = math.sqrt(self.mu) * np.sqrt(1.0 + s[beyond])
            out = np.array(out, dtype=float)
            out[beyond] = 0.0 if v_last == 0.0 else self.delta[-1] * self.pot.vhat(p) / v_last
        return out

    def delta_at(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if np.any(p < 0.0):
            raise RangeError("p must be >= 0")
        return self.delta_at_s((p * p - self.mu) / self.mu)

    def to_frame(self) -> pd.DataFrame:
        """One row per grid node: momentum, gap and quasiparticle energy."""
        return pd.DataFrame({"mu": self.mu, "p": self.grid.nodes, "delta": self.delta, "E": self.dispersion})

    def summary(self) -> Dict[str, Any]:
        return {
            "mu": self.mu,
            "a": self.scattering_length,
            "delta_fermi": self.delta_fermi,
            "delta_fermi_error": self.delta_fermi_error,
            "xi": self.xi,
            "p_star": self.p_star,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "grid": self.grid.meta(),
        }


# === Readouts ===

def _fermi_interpolation(grid: RadialGrid, delta: np.ndarray) -> Tuple[float, float]:
    """Cubic interpolation in s at s = 0 through the four nearest nodes."""
    k = int(np.searchsorted(grid.s, 0.0))
    lo = min(max(k - 2, 0), len(grid) - 4)
    scale = grid.inner_scale
    value = float(BarycentricInterpolator(grid.s[lo:lo + 4] / scale, delta[lo:lo + 4])(0.0))
    shifted = lo + 1 if lo + 5 <= len(grid) else lo - 1
    other = float(BarycentricInterpolator(grid.s[shifted:shifted + 4] / scale, delta[shifted:shifted + 4])(0.0))
    return value, abs(value - other)


def delta_at_fermi(sol: GapSolution) -> float:
    return _fermi_interpolation(sol.grid, sol.delta)[0]


def _energy_gap(grid: RadialGrid, dispersion: np.ndarray) -> Tuple[float, float]:
    energy_sq = dispersion**2
    k = int(np.argmin(energy_sq))
    s_star, e_sq = grid.s[k], energy_sq[k]
    if 0 < k < len(grid) - 1:
        x0, x1, x2 = grid.s[k - 1:k + 2] / grid.inner_scale
        y0, y1, y2 = energy_sq[k - 1:k + 2] - energy_sq[k]
        denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
        A = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
        B = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
        C = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / denom
        if A > 0.0:
            vertex = -B / (2.0 * A)
            if x0 <= vertex <= x2:
                fitted = energy_sq[k] + C - B * B / (4.0 * A)
                e_sq = min(max(fitted, 0.0), energy_sq[k])
                s_star = vertex * grid.inner_scale
    return math.sqrt(e_sq), math.sqrt(grid.mu) * math.sqrt(1.0 + s_star)


def energy_gap(sol: GapSolution) -> Tuple[float, float]:
    """Ξ = inf_p E(p) and the minimizing momentum p*."""
    return _energy_gap(sol.grid, sol.dispersion)


# === Solver ===

def gap_map(A: np.ndarray, xi: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """G(Δ) = A(Δ/E). A is non-negative, so G keeps Δ > 0 positive."""
    return A @ (delta / np.hypot(xi, delta))


def _iterate(A: np.ndarray, xi_scaled: np.ndarray, phi: np.ndarray, opts: GapOptions) -> Tuple[np.ndarray, float, int, bool]:
    """Damped fixed point φ ← (1-ω)φ + ω G(φ) in units of the seed.

    A must already be divided by the seed, like xi_scaled. Returns the
    iterate, its undamped defect, the iteration count and whether the trivial
    branch was detected.
    """
    omega, small_run = opts.damping, 0
    defect = float("inf")
    for it in range(1, opts.max_iter + 1):
        mapped = gap_map(A, xi_scaled, phi)
        top = np.max(np.abs(phi))
        defect = float(np.max(np.abs(mapped - phi)) / top) if top > 0.0 else float("inf")
        if defect <= opts.tol / 10.0:
            return mapped, defect, it, False
        phi = (1.0 - omega) * phi + omega * mapped
        small_run = small_run + 1 if np.max(phi) < TRIVIAL_FRACTION else 0
        if small_run >= TRIVIAL_PATIENCE:
            return phi, defect, it, True
        if it % 100 == 0:
            logger.debug(f"[Gap Solver] iteration {it}: defect {defect:.3e}")
    raise NonConvergenceError("gap iteration did not converge", defect, opts.max_iter)


def certify_residual(pot: Potential, grid: RadialGrid, delta: np.ndarray) -> float:
    """Residual of the Nyström extension of Δ on the refined grid."""
    fine = grid.refined()
    extended = gap_map(convolution_matrix(pot, grid, targets=fine.nodes), grid.xi, delta)
    top = np.max(np.abs(extended))
    if top == 0.0:
        return float("inf")
    mapped = gap_map(convolution_matrix(pot, fine), fine.xi, extended)
    return float(np.max(np.abs(mapped - extended)) / top)


def solve_gap(
    pot: Potential,
    mu: float,
    opts: Optional[GapOptions] = None,
    scattering_length: Optional[float] = None,
) -> GapSolution:
    """Solve Δ(p) = -(2π)^{-3/2} ∫ V̂(p-q) Δ(q)/E(q) dq for the positive branch."""
    opts = opts or GapOptions()
    if not (np.isfinite(mu) and mu > 0.0):
        raise InvalidArgumentError(f"mu must be > 0, got {mu}")
    if not float(pot.vhat(0.0)) < 0.0:
        raise InvalidArgumentError(f"{pot.label()}: the gap equation needs V̂(0) < 0")
    if not vhat_nonpositive(pot):
        raise InvalidArgumentError(f"{pot.label()}: V̂ must be non-positive")
    a = scattering.scattering_length(pot) if scattering_length is None else scattering_length
    if not a < 0.0:
        raise InvalidArgumentError(f"{pot.label()}: scattering length {a:.6g} must be negative")
    check_floor(mu, a)

    seed = seed_gap(mu, a)
    inner_scale = opts.inner_scale or max(seed / mu * 1e-2, 1e-12)
    p_max = opts.p_max or DEFAULT_P_MAX_SIGMA / pot.range_
    grid = build_grid(mu, inner_scale, p_max, opts.n_inner, opts.n_wing, opts.n_tail)
    # seed units: φ = Δ/ξ₀ and G(φ) = A(φ/E)/ξ₀
    A = convolution_matrix(pot, grid) / seed
    xi_scaled = grid.xi / seed
    shape = pot.vhat(grid.nodes) / float(pot.vhat(0.0))
    logger.info(f"[Gap Solver] mu={mu:.6g}, a={a:.6g}, seed={seed:.6g}, grid {grid.meta()}")

    phi, defect, iterations, trivial = _iterate(A, xi_scaled, shape, opts)
    if trivial:
        logger.warning("[Gap Solver] iterate collapsing towards zero, restarting from a 10x seed")
        phi, defect, more, trivial = _iterate(A, xi_scaled, 10.0 * shape, opts)
        iterations += more
        if trivial:
            raise TrivialSolutionError("gap iteration collapsed to the trivial solution", float(np.max(phi)) * seed, seed)

    delta = seed * phi
    dispersion = np.sqrt(grid.xi**2 + delta**2)
    residual = certify_residual(pot, grid, delta) if opts.certify else defect
    fermi, fermi_error = _fermi_interpolation(grid, delta)
    xi, p_star = _energy_gap(grid, dispersion)
    converged = defect <= opts.tol / 10.0 and residual <= opts.tol
    if not converged:
        logger.warning(f"[Gap Solver] certified residual {residual:.3e} exceeds tol {opts.tol:.1e}")
    logger.info(f"[Gap Solver] Δ(√μ)={fermi:.10g}, Ξ={xi:.10g} after {iterations} iterations")
    return GapSolution(
        pot=pot,
        mu=mu,
        grid=grid,
        delta=delta,
        dispersion=dispersion,
        delta_fermi=fermi,
        delta_fermi_error=fermi_error,
        xi=xi,
        p_star=p_star,
        residual=residual,
        iterations=iterations,
        converged=converged,
        scattering_length=a,
        seed=seed,
    )


# === BCS functional ===

def _alpha(sol: GapSolution) -> np.ndarray:
    alpha = np.divide(sol.delta, 2.0 * sol.dispersion, out=np.zeros_like(sol.delta), where=sol.dispersion > 0.0)
    if np.any(np.abs(2.0 * alpha) > 1.0 + 1e-15):
        raise InconsistentSolutionError("|Δ/E| exceeds 1 somewhere on the grid")
    return np.clip(alpha, -0.5, 0.5)


def bcs_functional(sol: GapSolution) -> float:
    """𝓕 = ∫|ξ|(1 - √(1-4α̂²)) dp + ∫∫ α̂ V̂ α̂, with α̂ = Δ/(2E)."""
    alpha = _alpha(sol)
    measure = sol.grid.measure
    four_a2 = 4.0 * alpha**2
    kinetic = 0.5 * np.sum(measure * np.abs(sol.grid.xi) * four_a2 / (1.0 + np.sqrt(1.0 - four_a2)))
    u = alpha * np.sqrt(measure)
    interaction = float(u @ sol.kernel @ u)
    return float(4.0 * math.pi * (kinetic + interaction))


def euler_lagrange_defect(sol: GapSolution, directions: Optional[Iterable[np.ndarray]] = None, seed: int = 0) -> List[float]:
    """|d𝓕(α̂ + tη)/dt| at t = 0 for smooth radial η, relative to the size of its terms."""
    alpha = _alpha(sol)
    p = sol.grid.nodes
    if directions is None:
        rng = np.random.default_rng(seed)
        envelope = np.exp(-0.5 * (p * sol.pot.range_) ** 2)
        directions = [envelope * np.polyval(rng.normal(size=3), p * sol.pot.range_) for _ in range(5)]
    measure = sol.grid.measure
    # √(1-4α̂²) = |ξ|/E under α̂ = Δ/(2E); forming 1-4α̂² loses digits at the Fermi surface.
    root = np.divide(np.abs(sol.grid.xi), sol.dispersion, out=np.zeros_like(alpha), where=sol.dispersion > 0.0)
    kinetic = np.divide(2.0 * np.abs(sol.grid.xi) * alpha, root, out=np.zeros_like(alpha), where=root > 0.0)
    coupled = (sol.kernel @ (alpha * np.sqrt(measure))) / np.sqrt(measure)
    gradient = 4.0 * math.pi * measure * (kinetic + 2.0 * coupled)
    scale = 4.0 * math.pi * np.max(np.abs(sol.delta))
    defects = []
    for eta in directions:
        eta = np.asarray(eta, dtype=float)
        norm = scale * np.sum(measure * np.abs(eta))
        defects.append(float(abs(np.dot(gradient, eta)) / norm))
    return defects
