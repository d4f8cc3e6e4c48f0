# radial_quadrature.py
import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import integrate

from errors import InvalidArgumentError, QuadratureError
from potentials import FT_PREFACTOR, Family, Potential

logger = logging.getLogger(__name__)

GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)
INNER_RATIO = 4.0
WING_RATIO = 2.0


class Panel(NamedTuple):
    """One Gauss-Legendre panel. var is 's' (s = (p²-μ)/μ) or 'p'."""

    lo: float
    hi: float
    var: str
    tag: str


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Composite Gauss-Legendre rule for ∫₀^{p_max} f(p) dp.

    Each node keeps its exact s = (p²-μ)/μ, so p²-μ = μ·s is never formed by
    subtraction near the Fermi surface.
    """

    nodes: np.ndarray
    weights: np.ndarray
    s: np.ndarray
    tags: np.ndarray
    panels: Tuple[Panel, ...]
    mu: float
    inner_scale: float
    p_max: float

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def xi(self) -> np.ndarray:
        """p² - μ at every node."""
        return self.mu * self.s

    @property
    def measure(self) -> np.ndarray:
        """w·p², the radial measure of ∫ f(|p|) d³p / (4π)."""
        return self.weights * self.nodes**2

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def refined(self) -> "RadialGrid":
        """Split every panel in two; geometric midpoints where both edges share a sign."""
        halves: List[Panel] = []
        for panel in self.panels:
            a, b = panel.lo, panel.hi
            if a * b > 0.0:
                mid = math.copysign(math.sqrt(a * b), a)
            else:
                mid = 0.5 * (a + b)
            halves.append(Panel(a, mid, panel.var, panel.tag))
            halves.append(Panel(mid, b, panel.var, panel.tag))
        return _assemble(halves, self.mu, self.inner_scale, self.p_max)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"node": self.nodes, "weight": self.weights, "s": self.s, "tag": self.tags})

    def meta(self) -> str:
        return f"n={len(self)};inner={self.inner_scale:.3g};pmax={self.p_max:.3g}"


def _assemble(panels: List[Panel], mu: float, inner_scale: float, p_max: float) -> RadialGrid:
    nodes, weights, svals, tags = [], [], [], []
    sqrt_mu = math.sqrt(mu)
    for panel in panels:
        half = 0.5 * (panel.hi - panel.lo)
        mid = 0.5 * (panel.hi + panel.lo)
        t = mid + half * _GL_X
        if panel.var == "s":
            p = sqrt_mu * np.sqrt(1.0 + t)
            w = half * _GL_W * mu / (2.0 * p)
            s = t
        else:
            p = t
            w = half * _GL_W
            s = (p * p - mu) / mu
        nodes.append(p)
        weights.append(w)
        svals.append(s)
        tags.append(np.full(GL_ORDER, panel.tag))
    return RadialGrid(
        nodes=np.concatenate(nodes),
        weights=np.concatenate(weights),
        s=np.concatenate(svals),
        tags=np.concatenate(tags),
        panels=tuple(panels),
        mu=mu,
        inner_scale=inner_scale,
        p_max=p_max,
    )


def _split_wide(edges: List[float], max_width: float) -> List[Tuple[float, float]]:
    pieces = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        count = max(1, int(math.ceil((hi - lo) / max_width - 1e-12)))
        sub = np.linspace(lo, hi, count + 1)
        pieces.extend(zip(sub[:-1], sub[1:]))
    return pieces


def build_grid(
    mu: float,
    inner_scale: float,
    p_max: float,
    n_inner: int = 64,
    n_wing: int = 64,
    n_tail: int = 64,
    max_width: Optional[float] = None,
) -> RadialGrid:
    """Fermi-surface-adapted grid on [0, p_max].

    Inner region |s| <= 1: a [0, s_min] panel and geometric panels (ratio <= 4)
    from s_min = inner_scale/100 up to 1 on each side of the Fermi surface.
    Wing: geometric panels in p from √(2μ) to max(p_max/8, 2√μ).
    Tail: uniform panels up to p_max. No panel is wider than max_width.
    """
    if not mu > 0.0:
        raise InvalidArgumentError(f"mu must be > 0, got {mu}")
    if not 0.0 < inner_scale <= 1.0:
        raise InvalidArgumentError(f"inner_scale must lie in (0, 1], got {inner_scale}")
    if not p_max**2 > 4.0 * mu:
        raise InvalidArgumentError(f"p_max={p_max:g} must exceed 2*sqrt(mu)={2 * math.sqrt(mu):g}")
    if min(n_inner, n_wing, n_tail) < 1:
        raise InvalidArgumentError("node counts must be positive")
    max_width = max_width or p_max / 20.0
    sqrt_mu = math.sqrt(mu)

    s_min = min(inner_scale / 100.0, 0.25)
    n_geo = max(int(math.ceil(math.log(1.0 / s_min) / math.log(INNER_RATIO))), int(math.ceil(n_inner / GL_ORDER)))
    geo = [s_min * (1.0 / s_min) ** (k / n_geo) for k in range(n_geo + 1)]
    geo[-1] = 1.0

    panels: List[Panel] = []
    # Below the Fermi surface, the panel reaching p = 0 is laid out in p.
    p_first = sqrt_mu * math.sqrt(1.0 - geo[-2])
    for lo, hi in _split_wide([0.0, p_first], max_width):
        panels.append(Panel(lo, hi, "p", "inner"))
    for k in range(n_geo - 2, -1, -1):
        panels.append(Panel(-geo[k + 1], -geo[k], "s", "inner"))
    panels.append(Panel(-s_min, 0.0, "s", "inner"))
    panels.append(Panel(0.0, s_min, "s", "inner"))
    for k in range(n_geo):
        panels.append(Panel(geo[k], geo[k + 1], "s", "inner"))

    p_lo = math.sqrt(2.0) * sqrt_mu
    p_wing = max(p_max / 8.0, 2.0 * sqrt_mu)
    n_w = max(int(math.ceil(math.log(p_wing / p_lo) / math.log(WING_RATIO))), int(math.ceil(n_wing / GL_ORDER)))
    wing_edges = [p_lo * (p_wing / p_lo) ** (k / n_w) for k in range(n_w + 1)]
    wing_edges[-1] = p_wing
    for lo, hi in _split_wide(wing_edges, max_width):
        panels.append(Panel(lo, hi, "p", "wing"))

    n_t = max(int(math.ceil((p_max - p_wing) / max_width - 1e-12)), int(math.ceil(n_tail / GL_ORDER)))
    tail_edges = np.linspace(p_wing, p_max, n_t + 1)
    for lo, hi in zip(tail_edges[:-1], tail_edges[1:]):
        panels.append(Panel(float(lo), float(hi), "p", "tail"))

    grid = _assemble(panels, mu, inner_scale, p_max)
    logger.debug(f"[Radial Grid] built {grid.meta()} with {len(panels)} panels")
    return grid


# === Angular kernel ===

def _h(x):
    """(1 - e^{-2x}) / (2x), continuous at 0."""
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 0.0, x, 1.0)
    return np.where(x > 0.0, -np.expm1(-2.0 * safe) / (2.0 * safe), 1.0)


def _kernel_by_quadrature(pot: Potential, p: float, q: float) -> float:
    if p * q == 0.0:
        return FT_PREFACTOR * 4.0 * math.pi * float(pot.vhat(max(p, q)))
    lo, hi = abs(p - q), p + q
    value, err = integrate.quad(lambda t: t * float(pot.vhat(t)), lo, hi, epsabs=0.0, epsrel=1e-11, limit=200)
    if err > 1e-8 * abs(value) and err > 1e-15:
        raise QuadratureError(f"angular kernel at p={p:g}, q={q:g} did not converge", err)
    return FT_PREFACTOR * 2.0 * math.pi / (p * q) * value


def angular_kernel(pot: Potential, p, q):
    """k(p,q) = (2π)^{-3/2} ∫_{S²} V̂(|p - q|) dΩ for radial arguments.

    Closed forms for the Gaussian and Exponential families; adaptive
    quadrature of t·V̂(t) over [|p-q|, p+q] otherwise.
    """
    p, q = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(q, dtype=float))
    if np.any(p < 0.0) or np.any(q < 0.0):
        raise InvalidArgumentError("angular kernel needs p, q >= 0")
    if pot.depth == 0.0:
        return np.zeros(p.shape)
    lam, sig = pot.depth, pot.range_
    if pot.family is Family.GAUSSIAN:
        prefactor = FT_PREFACTOR * 4.0 * math.pi * lam * sig**3
        return -prefactor * np.exp(-0.5 * sig**2 * (p - q) ** 2) * _h(sig**2 * p * q)
    if pot.family is Family.EXPONENTIAL:
        vhat0 = FT_PREFACTOR * 8.0 * math.pi * lam * sig**3
        return -FT_PREFACTOR * 4.0 * math.pi * vhat0 / ((1.0 + sig**2 * (p - q) ** 2) * (1.0 + sig**2 * (p + q) ** 2))
    out = np.empty(p.shape)
    for index in np.ndindex(p.shape):
        pi, qi = float(p[index]), float(q[index])
        out[index] = _kernel_by_quadrature(pot, min(pi, qi), max(pi, qi))
    return out


def kernel_matrix(pot: Potential, grid: RadialGrid) -> np.ndarray:
    """K_ij = k(p_i,p_j) √(w_i p_i²) √(w_j p_j²), symmetric by construction."""
    k = angular_kernel(pot, grid.nodes[:, None], grid.nodes[None, :])
    root = np.sqrt(grid.measure)
    K = k * root[:, None] * root[None, :]
    return 0.5 * (K + K.T)


def convolution_matrix(pot: Potential, grid: RadialGrid, targets=None) -> np.ndarray:
    """A_ij = -k(t_i, p_j) w_j p_j², so that (A f)_i ≈ -∫ k(t_i,q) f(q) q² dq."""
    targets = grid.nodes if targets is None else np.asarray(targets, dtype=float)
    k = angular_kernel(pot, targets[:, None], grid.nodes[None, :])
    return -k * grid.measure[None, :]
