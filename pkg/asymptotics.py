# asymptotics.py
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import legendre
from scipy import linalg
from scipy.interpolate import CubicSpline

from errors import BudgetExceededError, InvalidArgumentError
from gap_solver import GapSolution
from potentials import Family, Potential
from radial_quadrature import build_grid

logger = logging.getLogger(__name__)

EULER_GAMMA = float(np.euler_gamma)
D_TARGET = 2.0 - math.log(8.0)
RATIO_TARGET = math.pi * math.exp(-EULER_GAMMA)
GL_ORDER = 16
HS_MAX_OUTER = 48
_GL_X, _GL_W = legendre.leggauss(GL_ORDER)


@dataclass
class AsymptoticsReport:
    m_mu: float
    m_mu_direct: float
    m_pred: float
    m_closed: float
    D: float
    D_target: float
    xi_pred: float
    tc_pred: float
    ratio: float = float("nan")
    ratio_target: float = RATIO_TARGET
    a_hs_ratio: float = float("nan")
    a_hs_error: float = float("nan")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# === Predictions ===

def xi_pred(mu: float, a: float) -> float:
    return 8.0 * math.exp(-2.0) * mu * math.exp(math.pi / (2.0 * math.sqrt(mu) * a))


def tc_pred(mu: float, a: float) -> float:
    return (8.0 / math.pi) * math.exp(EULER_GAMMA - 2.0) * mu * math.exp(math.pi / (2.0 * math.sqrt(mu) * a))


def predictions(mu: float, a: float) -> Dict[str, float]:
    """Low-density limits at chemical potential μ for scattering length a < 0."""
    if not mu > 0.0:
        raise InvalidArgumentError(f"mu must be > 0, got {mu}")
    if not a < 0.0:
        raise InvalidArgumentError(f"scattering length must be negative, got {a}")
    return {
        "xi_pred": xi_pred(mu, a),
        "tc_pred": tc_pred(mu, a),
        "m_closed_target": -1.0 / (4.0 * math.pi * a),
        "D_target": D_TARGET,
        "ratio_target": RATIO_TARGET,
    }


def m_closed(mu: float, delta_fermi: float) -> float:
    """√μ/(2π²)(ln(μ/Δ(√μ)) - 2 + ln 8), the small-Δ form of m_μ."""
    return math.sqrt(mu) / (2.0 * math.pi**2) * (math.log(mu / delta_fermi) - D_TARGET)


def diagnostic_D(mu: float, xi: float, a: float) -> float:
    """ln(μ/Ξ) + π/(2√μ a); tends to 2 - ln 8 as μ → 0."""
    if not xi > 0.0:
        raise InvalidArgumentError(f"Ξ must be > 0, got {xi}")
    return math.log(mu / xi) + math.pi / (2.0 * math.sqrt(mu) * a)


# === m_μ ===

def _clustered_panels(lo: float, hi: float, smallest: float, ratio: float = 4.0) -> List[Tuple[float, float]]:
    """[lo, lo+smallest] then geometric panels up to hi."""
    span = hi - lo
    smallest = min(smallest, span / 2.0)
    count = max(1, int(math.ceil(math.log(span / smallest) / math.log(ratio))))
    edges = [lo] + [lo + smallest * (span / smallest) ** (k / count) for k in range(count + 1)]
    edges[-1] = hi
    return list(zip(edges[:-1], edges[1:]))


def _gauss(panels: Sequence[Tuple[float, float]]) -> Tuple[np.ndarray, np.ndarray]:
    lo = np.array([a for a, _ in panels])
    hi = np.array([b for _, b in panels])
    half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
    return (mid[:, None] + half[:, None] * _GL_X).ravel(), (half[:, None] * _GL_W).ravel()


def split_integrals(sol: GapSolution) -> Dict[str, float]:
    """The three pieces of 4π² m_μ/√μ in the variable s = p²/μ - 1, plus the analytic tail."""
    mu = sol.mu
    x0 = sol.delta_fermi / mu
    if not x0 > 0.0:
        raise InvalidArgumentError("m_mu needs Δ(√μ) > 0")

    def x_minus(s):
        return sol.delta_at_s(-s) / mu

    def x_plus(s):
        return sol.delta_at_s(s) / mu

    # [0, 1/2] in s, clustered at the Fermi surface
    s, w = _gauss(_clustered_panels(0.0, 0.5, x0 * 1e-4))
    root_m, root_p = np.sqrt(1.0 - s), np.sqrt(1.0 + s)
    den_m, den_p = np.hypot(s, x_minus(s)), np.hypot(s, x_plus(s))
    i1_near = np.dot(w, -s / (1.0 + root_m) / den_m + s / (1.0 + root_p) / den_p - 1.0 / root_m - 1.0 / root_p)
    i2_near = np.dot(w, 1.0 / den_m + 1.0 / den_p)

    # [1/2, 1] through s = 1 - t², which removes the √(1-s) endpoint
    t, wt = _gauss([(k / 4.0 / math.sqrt(2.0), (k + 1) / 4.0 / math.sqrt(2.0)) for k in range(4)])
    s = 1.0 - t * t
    jac = 2.0 * t * wt
    root_p = np.sqrt(1.0 + s)
    den_m, den_p = np.hypot(s, x_minus(s)), np.hypot(s, x_plus(s))
    i1_far = np.dot(jac, (t - 1.0) / den_m + s / (1.0 + root_p) / den_p - 1.0 / root_p) - np.dot(2.0 * wt, np.ones_like(t))
    i2_far = np.dot(jac, 1.0 / den_m + 1.0 / den_p)

    # [1, s_max] with the integrand in a cancellation-free form
    s_max = sol.grid.p_max**2 / mu - 1.0
    panels = []
    lo = 1.0
    while lo < s_max:
        hi = min(2.0 * lo, s_max)
        panels.append((lo, hi))
        lo = hi
    s, w = _gauss(panels)
    x = x_plus(s)
    root_sx = np.hypot(s, x)
    i3 = np.dot(w, (1.0 - x * x / (s + root_sx)) / (np.sqrt(1.0 + s) * root_sx))
    big = math.sqrt(1.0 + s_max)
    tail = math.log((big + 1.0) / (big - 1.0))
    return {"I1": float(i1_near + i1_far), "I2": float(i2_near + i2_far), "I3": float(i3), "tail": tail}


def m_mu_split(sol: GapSolution) -> float:
    """m_μ = (2π)^{-3} ∫ (1/E(p) - 1/p²) dp, through the split integrals."""
    parts = split_integrals(sol)
    return math.sqrt(sol.mu) / (4.0 * math.pi**2) * sum(parts.values())


def m_mu_direct(sol: GapSolution) -> float:
    """Same quantity summed on the refined p-grid, used as a cross-check."""
    if not sol.delta_fermi > 0.0:
        raise InvalidArgumentError("m_mu needs Δ(√μ) > 0")
    fine = sol.grid.refined()
    delta = sol.delta_at_s(fine.s)
    energy = np.hypot(fine.xi, delta)
    body = fine.integrate(fine.nodes**2 / energy - 1.0)
    root_mu, P = math.sqrt(sol.mu), fine.p_max
    tail = 0.5 * root_mu * math.log((P + root_mu) / (P - root_mu))
    return (body + tail) / (2.0 * math.pi**2)


def constant_gap_solution(pot, mu: float, x: float, p_max_sigma: float = 40.0) -> GapSolution:
    """Synthetic Δ ≡ xμ on a grid resolving |s| ~ x."""
    grid = build_grid(mu, x, p_max_sigma / pot.range_)
    return GapSolution.from_delta(pot, mu, grid, np.full(len(grid), x * mu))


def closed_form_defect(x: float, mu: float = 1.0, pot=None) -> float:
    """m_μ·2π²/√μ - (ln(1/x) - 2 + ln 8) for constant Δ = xμ."""
    pot = pot or Potential(Family.GAUSSIAN, 1.0, 1.0)
    sol = constant_gap_solution(pot, mu, x)
    return m_mu_split(sol) * 2.0 * math.pi**2 / math.sqrt(mu) - (math.log(1.0 / x) - D_TARGET)


def delta_scaling_ratio(sol: GapSolution) -> Dict[str, float]:
    """Δ(√μ)/μ (tends to 0), Δ(√μ)/μ^{3/4} (stays bounded) and Ξ over its prediction (tends to 1)."""
    return {
        "delta_fermi_over_mu": sol.delta_fermi / sol.mu,
        "delta_fermi_over_mu34": sol.delta_fermi / sol.mu**0.75,
        "xi_over_pred": sol.xi / xi_pred(sol.mu, sol.scattering_length),
    }


# === Hilbert-Schmidt diagnostic ===

def _g_table(sol: GapSolution, radius: float, n_rho: int = 257) -> CubicSpline:
    """g(ρ) = (1/2π²) ∫ (sinc(pρ) - 1)(p²/E - 1) dp on [0, radius]."""
    fine = sol.grid.refined()
    delta = sol.delta_at_s(fine.s)
    weight = fine.weights * (fine.nodes**2 / np.hypot(fine.xi, delta) - 1.0)
    root_mu, P = math.sqrt(sol.mu), fine.p_max
    tail = -0.5 * root_mu * math.log((P + root_mu) / (P - root_mu))
    rho = np.linspace(0.0, radius, n_rho)
    table = np.array([np.dot(weight, np.sinc(fine.nodes * r / math.pi) - 1.0) for r in rho])
    table[1:] += tail
    return CubicSpline(rho, table / (2.0 * math.pi**2))


def _hs_norm_squared(sol: GapSolution, g: CubicSpline, n_outer: int) -> float:
    R = sol.pot.cutoff_radius()
    x, w = legendre.leggauss(n_outer)
    r, wr = 0.5 * R * (x + 1.0), 0.5 * R * w
    u, wu = legendre.leggauss(n_outer)
    radial = wr * r**2 * np.abs(sol.pot.v(r))
    rho = np.sqrt(np.clip(r[:, None, None] ** 2 + r[None, :, None] ** 2 - 2.0 * r[:, None, None] * r[None, :, None] * u[None, None, :], 0.0, None))
    inner = np.sum(g(rho) ** 2 * wu[None, None, :], axis=2)
    return float(8.0 * math.pi**2 * radial @ inner @ radial)


def a_hs_norm(sol: GapSolution, n_outer: int = 24) -> Tuple[float, float]:
    """‖A‖₂ / m_μ with A(x,y) = |V(x)|^{1/2} g(|x-y|) |V(y)|^{1/2}.

    g is the (1/E - 1/p²) kernel with its value at the origin, m_μ, removed.
    Returns the ratio and the change when the outer grid is halved.
    """
    budget_hit = n_outer > HS_MAX_OUTER
    n_outer = min(n_outer, HS_MAX_OUTER)
    m = m_mu_split(sol)
    g = _g_table(sol, 2.0 * sol.pot.cutoff_radius())
    norm = math.sqrt(_hs_norm_squared(sol, g, n_outer))
    coarse = math.sqrt(_hs_norm_squared(sol, g, max(n_outer // 2, 2)))
    ratio, error = norm / m, abs(norm - coarse) / m
    if budget_hit:
        raise BudgetExceededError(
            f"outer grid capped at {HS_MAX_OUTER} points per dimension",
            partial={"ratio": ratio, "n_outer": n_outer},
            bound=error,
        )
    logger.debug(f"[Asymptotics] HS ratio {ratio:.6g} (±{error:.2g})")
    return ratio, error


# === Supplementary diagnostics ===

def pairing_ground_energy(sol: GapSolution) -> Tuple[float, float]:
    """Lowest eigenvalue of E + V̂* on the solution grid, over μ, and its overlap with α̂.

    A vanishing eigenvalue with eigenvector α̂ = Δ/(2E) is the linear form of the gap equation.
    """
    H = np.diag(sol.dispersion) + sol.kernel
    values, vectors = linalg.eigh(H, subset_by_index=[0, 0])
    alpha = sol.delta / (2.0 * sol.dispersion) * np.sqrt(sol.grid.measure)
    overlap = abs(float(vectors[:, 0] @ alpha)) / np.linalg.norm(alpha)
    return float(values[0]) / sol.mu, overlap


def fit_limit(mus: Sequence[float], values: Sequence[float], order: int = 1) -> Tuple[float, float]:
    """Fit values(μ) with a polynomial in √μ; returns (intercept, slope), the μ → 0 limit and the √μ coefficient."""
    mus, values = np.asarray(mus, dtype=float), np.asarray(values, dtype=float)
    keep = np.isfinite(values)
    if keep.sum() < order + 1:
        raise InvalidArgumentError(f"need at least {order + 1} finite points to fit")
    coeffs = np.polyfit(np.sqrt(mus[keep]), values[keep], order)
    return float(coeffs[-1]), float(coeffs[-2])


def analyze(sol: GapSolution, hs_diagnostic: bool = False, tc: Optional[float] = None) -> AsymptoticsReport:
    preds = predictions(sol.mu, sol.scattering_length)
    report = AsymptoticsReport(
        m_mu=m_mu_split(sol),
        m_mu_direct=m_mu_direct(sol),
        m_pred=preds["m_closed_target"],
        m_closed=m_closed(sol.mu, sol.delta_fermi),
        D=diagnostic_D(sol.mu, sol.xi, sol.scattering_length),
        D_target=D_TARGET,
        xi_pred=preds["xi_pred"],
        tc_pred=preds["tc_pred"],
        ratio=sol.xi / tc if tc else float("nan"),
    )
    if abs(report.m_mu - report.m_mu_direct) > 1e-6 * abs(report.m_mu):
        logger.warning(f"[Asymptotics] split and direct m_mu disagree: {report.m_mu:.10g} vs {report.m_mu_direct:.10g}")
    if hs_diagnostic:
        report.a_hs_ratio, report.a_hs_error = a_hs_norm(sol)
    return report
