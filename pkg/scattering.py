# scattering.py
import functools
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Tuple

import numpy as np
from numpy.polynomial import legendre
from scipy import linalg
from scipy.integrate import solve_ivp

from errors import BoundStateError, NumericalError, QuadratureError, ResonanceError
from potentials import Family, Potential

logger = logging.getLogger(__name__)

GL_ORDER = 16
MAX_NODES = 2048
REFINE_TOL = 1e-8
ODE_TOL = 1e-9
SINGULAR_TOL = 1e-10


# === Radius grid ===

@dataclass(frozen=True, eq=False)
class RadiusGrid:
    nodes: np.ndarray
    weights: np.ndarray
    panel_index: np.ndarray
    edges: np.ndarray

    def __len__(self) -> int:
        return len(self.nodes)


def build_radius_grid(pot: Potential, level: int = 0) -> RadiusGrid:
    """GL-16 panels of width about σ/2^level on [0, R_big], split at breakpoints."""
    R = pot.cutoff_radius()
    cuts = sorted({0.0, R, *[b for b in pot.breakpoints() if 0.0 < b < R]})
    edges: List[float] = [0.0]
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        count = max(1, int(math.ceil((hi - lo) / pot.range_ - 1e-12))) * 2**level
        if pot.family is Family.SQUARE_WELL:
            count *= 2
        edges.extend(np.linspace(lo, hi, count + 1)[1:].tolist())
    edges_arr = np.asarray(edges)
    x, w = legendre.leggauss(GL_ORDER)
    half = 0.5 * np.diff(edges_arr)
    mid = 0.5 * (edges_arr[1:] + edges_arr[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    panel_index = np.repeat(np.arange(len(half)), GL_ORDER)
    return RadiusGrid(nodes, weights, panel_index, edges_arr)


@functools.lru_cache(maxsize=None)
def _spectral_integration(order: int) -> np.ndarray:
    """S[k, l] = ∫_{-1}^{x_k} ℓ_l(t) dt for the Lagrange basis through the GL nodes."""
    x, _ = legendre.leggauss(order)
    coeffs = np.linalg.inv(legendre.legvander(x, order - 1))
    S = np.empty((order, order))
    for l in range(order):
        S[:, l] = legendre.legval(x, legendre.legint(coeffs[:, l], lbnd=-1))
    return S


def green_matrix(grid: RadiusGrid) -> np.ndarray:
    """G with (G f)_k ≈ ∫₀^∞ s² f(s) / max(r_k, s) ds.

    The kink of 1/max(r,s) is handled by splitting at r_k and integrating each
    side spectrally on the panel that contains r_k.
    """
    r, w, panel = grid.nodes, grid.weights, grid.panel_index
    before = panel[None, :] < panel[:, None]
    after = panel[None, :] > panel[:, None]
    lower = np.where(before, w[None, :], 0.0)
    upper = np.where(after, w[None, :], 0.0)
    S = _spectral_integration(GL_ORDER)
    for j in range(len(grid.edges) - 1):
        idx = slice(j * GL_ORDER, (j + 1) * GL_ORDER)
        half = 0.5 * (grid.edges[j + 1] - grid.edges[j])
        local = half * S
        lower[idx, idx] = local
        upper[idx, idx] = w[None, idx] - local
    return lower * (r**2)[None, :] / r[:, None] + upper * r[None, :]


def bs_matrix(pot: Potential, grid: RadiusGrid) -> np.ndarray:
    """Weight-symmetrized discretization of V^{1/2} (1/|x-y| angular average) |V|^{1/2}."""
    v = pot.v(grid.nodes)
    root_abs = np.sqrt(np.abs(v))
    root_signed = np.sign(v) * root_abs
    B = root_signed[:, None] * green_matrix(grid) * root_abs[None, :]
    d = np.sqrt(grid.weights * grid.nodes**2)
    B = d[:, None] * B / d[None, :]
    return 0.5 * (B + B.T)


def _solve_level(pot: Potential, level: int) -> Tuple[float, np.ndarray, RadiusGrid]:
    grid = build_radius_grid(pot, level)
    B = bs_matrix(pot, grid)
    v = pot.v(grid.nodes)
    root_abs = np.sqrt(np.abs(v))
    d = np.sqrt(grid.weights * grid.nodes**2)
    # symmetrized unknowns y = d·g
    rhs = d * np.sign(v) * root_abs
    y = linalg.solve(np.eye(len(grid)) + B, rhs, assume_a="sym")
    a = float(np.dot(d * root_abs, y))
    return a, B, grid


@dataclass
class ScatteringResult:
    a_bs: float
    a_ode: float
    a_born: float
    lowest_bs_eigenvalue: float
    nodes: int
    refinement_error: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _bs_scattering(pot: Potential) -> Tuple[float, float, int, float]:
    if pot.depth == 0.0:
        return 0.0, 0.0, 0, 0.0
    previous, level = None, 0
    while True:
        a, B, grid = _solve_level(pot, level)
        if previous is not None:
            change = abs(a - previous) / max(abs(a), pot.range_)
            if change <= REFINE_TOL:
                break
        if len(grid) * 2 > MAX_NODES:
            change = float("nan") if previous is None else abs(a - previous) / max(abs(a), pot.range_)
            raise QuadratureError(f"scattering length not stable at {len(grid)} nodes", change)
        previous, level = a, level + 1
    spectrum = linalg.eigvalsh(B)
    if np.min(np.abs(1.0 + spectrum)) < SINGULAR_TOL:
        raise BoundStateError(f"1 + B is singular for {pot.label()}: -1 is a Birman-Schwinger eigenvalue")
    logger.debug(f"[Scattering] {pot.label()}: a={a:.12g} with {len(grid)} nodes")
    return a, float(spectrum[0]), len(grid), change


def scattering_length(pot: Potential) -> float:
    """a(V) = (1/4π) ⟨|V|^{1/2}, (1 + B)^{-1} V^{1/2}⟩, refined until stable to 1e-8."""
    return _bs_scattering(pot)[0]


def lowest_bs_eigenvalue(pot: Potential) -> float:
    return _bs_scattering(pot)[1]


# === ODE oracle ===

def _integrate_zero_energy(pot: Potential, rtol: float, max_step: float, dense: bool = False):
    cuts = sorted({0.0, pot.cutoff_radius(), *pot.breakpoints()})
    y = np.array([0.0, 1.0])
    pieces = []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        sol = solve_ivp(
            lambda r, u: [u[1], float(pot.v(r)) * u[0]],
            (lo, hi),
            y,
            method="DOP853",
            rtol=rtol,
            atol=rtol * 1e-3,
            max_step=max_step,
            dense_output=dense,
        )
        if not sol.success:
            raise NumericalError(f"zero-energy ODE failed on [{lo:g}, {hi:g}]: {sol.message}")
        y = sol.y[:, -1]
        pieces.append(sol)
    return y, pieces


def scattering_length_ode(pot: Potential) -> float:
    """Independent check: integrate u'' = V u from u(0)=0, u'(0)=1 and match u ∝ r - a."""
    if pot.depth == 0.0:
        return 0.0
    R = pot.cutoff_radius()
    rtol, max_step, previous = 1e-10, pot.range_ / 4.0, None
    for _ in range(6):
        (u, du), _ = _integrate_zero_energy(pot, rtol, max_step)
        if abs(du) * R <= 1e-12 * abs(u):
            raise ResonanceError(f"u'(R) vanishes for {pot.label()}: zero-energy resonance")
        a = R - u / du
        if previous is not None and abs(a - previous) <= ODE_TOL * max(abs(a), pot.range_):
            return a
        previous, rtol, max_step = a, max(rtol * 0.1, 1e-13), max_step * 0.5
    raise NumericalError(f"ODE scattering length for {pot.label()} not stable to {ODE_TOL:g}")


def count_bound_states(pot: Potential) -> int:
    """Nodes of the zero-energy solution on (0, ∞), i.e. the number of s-wave bound states."""
    if pot.depth == 0.0:
        return 0
    (u, du), pieces = _integrate_zero_energy(pot, 1e-11, pot.range_ / 8.0, dense=True)
    values = np.concatenate([sol.sol(np.linspace(sol.t[0], sol.t[-1], 4001)[1:])[0] for sol in pieces])
    count = int(np.count_nonzero(np.signbit(values[1:]) != np.signbit(values[:-1])))
    R = pot.cutoff_radius()
    if du != 0.0 and R - u / du > R:
        count += 1
    return count


# === Born series ===

def born_term(pot: Potential) -> float:
    """First Born approximation (1/4π)∫V = -‖V‖₁/(4π) for an attractive well."""
    return -pot.cached_norms["l1"] / (4.0 * math.pi)


def second_born_term(pot: Potential) -> float:
    """-(1/4π)(1/4π)∫∫ V(x)V(y)/|x-y|, reduced to -∫∫ r²s² V(r)V(s)/max(r,s) dr ds."""
    if pot.depth == 0.0:
        return 0.0
    grid = build_radius_grid(pot, 1)
    v = pot.v(grid.nodes)
    return float(-np.dot(grid.weights * grid.nodes**2 * v, green_matrix(grid) @ v))


@functools.lru_cache(maxsize=64)
def scattering_result(pot: Potential) -> ScatteringResult:
    a, lowest, nodes, change = _bs_scattering(pot)
    return ScatteringResult(
        a_bs=a,
        a_ode=scattering_length_ode(pot),
        a_born=born_term(pot),
        lowest_bs_eigenvalue=lowest,
        nodes=nodes,
        refinement_error=change,
    )
