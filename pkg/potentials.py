# potentials.py
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np
from scipy import integrate

from errors import InvalidArgumentError, QuadratureError

logger = logging.getLogger(__name__)

# Natural units throughout: hbar = 1, 2m = 1, so the kinetic energy is p^2.
FT_PREFACTOR = (2.0 * math.pi) ** -1.5
# Best constant in Sobolev's inequality in three dimensions.
S3 = 0.75 * 2.0 ** (2.0 / 3.0) * math.pi ** (4.0 / 3.0)
# |V| drops below this fraction of the depth at the cutoff radius.
CUTOFF_FRACTION = 1e-14
VHAT_SAMPLES = 10_000
VHAT_SAMPLE_RANGE = 50.0


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    EXPONENTIAL = "exponential"
    SQUARE_WELL = "squarewell"


_ALIASES = {
    "gaussian": Family.GAUSSIAN,
    "gauss": Family.GAUSSIAN,
    "exponential": Family.EXPONENTIAL,
    "exp": Family.EXPONENTIAL,
    "squarewell": Family.SQUARE_WELL,
    "square_well": Family.SQUARE_WELL,
    "square": Family.SQUARE_WELL,
}


def _family(value: Any) -> Family:
    if isinstance(value, Family):
        return value
    key = str(value).strip().lower().replace("-", "_")
    if key not in _ALIASES:
        raise InvalidArgumentError(f"unknown potential family '{value}' (catalog: gaussian, exponential, squarewell)")
    return _ALIASES[key]


@dataclass(frozen=True)
class Potential:
    """A radial attractive well V(r) = -depth * profile(r / range_).

    depth == 0 is accepted here and stands for the free case; make_potential
    insists on a strictly positive depth.
    """

    family: Family
    depth: float
    range_: float
    cached_norms: Dict[str, float] = field(default_factory=dict, compare=False, hash=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "family", _family(self.family))
        if not (np.isfinite(self.depth) and self.depth >= 0.0):
            raise InvalidArgumentError(f"depth must be >= 0, got {self.depth}")
        if not (np.isfinite(self.range_) and self.range_ > 0.0):
            raise InvalidArgumentError(f"range must be > 0, got {self.range_}")
        object.__setattr__(self, "cached_norms", self._closed_form_norms())

    # --- Position space ---

    def profile(self, r):
        """|V(r)| / depth."""
        r = np.asarray(r, dtype=float)
        x = r / self.range_
        if self.family is Family.GAUSSIAN:
            return np.exp(-0.5 * x * x)
        if self.family is Family.EXPONENTIAL:
            return np.exp(-x)
        return np.where(x < 1.0, 1.0, 0.0)

    def v(self, r):
        return -self.depth * self.profile(r)

    # --- Momentum space ---

    def vhat(self, p):
        """V̂(p) = (2π)^{-3/2} ∫ V(x) e^{-ipx} dx in closed form."""
        p = np.asarray(p, dtype=float)
        lam, sig = self.depth, self.range_
        if self.family is Family.GAUSSIAN:
            return -lam * sig**3 * np.exp(-0.5 * (sig * p) ** 2)
        if self.family is Family.EXPONENTIAL:
            return -FT_PREFACTOR * 8.0 * math.pi * lam * sig**3 / (1.0 + (sig * p) ** 2) ** 2
        x = sig * p
        small = np.abs(x) < 1e-3
        xs = np.where(small, 1.0, x)
        shape = np.where(
            small,
            1.0 / 3.0 - x * x / 30.0 + x**4 / 840.0,
            (np.sin(xs) - xs * np.cos(xs)) / xs**3,
        )
        return -FT_PREFACTOR * 4.0 * math.pi * lam * sig**3 * shape

    # --- Geometry used by the quadrature layers ---

    def cutoff_radius(self) -> float:
        """Radius beyond which |V| < CUTOFF_FRACTION * depth."""
        if self.family is Family.SQUARE_WELL:
            return self.range_
        if self.family is Family.GAUSSIAN:
            return self.range_ * math.sqrt(2.0 * math.log(1.0 / CUTOFF_FRACTION))
        return self.range_ * math.log(1.0 / CUTOFF_FRACTION)

    def breakpoints(self) -> List[float]:
        """Radii where V is not smooth."""
        if self.family is Family.SQUARE_WELL:
            return [self.range_]
        return []

    def _closed_form_norms(self) -> Dict[str, float]:
        lam, sig = self.depth, self.range_
        if self.family is Family.GAUSSIAN:
            l1 = lam * (2.0 * math.pi * sig**2) ** 1.5
            l32 = lam * (2.0 * math.pi * sig**2 / 1.5)
            first_moment = 8.0 * math.pi * lam * sig**4
        elif self.family is Family.EXPONENTIAL:
            l1 = lam * 8.0 * math.pi * sig**3
            l32 = lam * (8.0 * math.pi * sig**3 / 1.5**3) ** (2.0 / 3.0)
            first_moment = 24.0 * math.pi * lam * sig**4
        else:
            volume = 4.0 * math.pi * sig**3 / 3.0
            l1 = lam * volume
            l32 = lam * volume ** (2.0 / 3.0)
            first_moment = math.pi * lam * sig**4
        return {"l1": l1, "l32": l32, "l1_weighted": l1 + first_moment}

    def to_dict(self) -> Dict[str, Any]:
        return {"family": self.family.value, "depth": self.depth, "range": self.range_}

    def label(self) -> str:
        return f"{self.family.value}:{self.depth:g}:{self.range_:g}"


# === Construction ===

def make_potential(family: Any, depth: float, range_: float) -> Potential:
    """Instantiate a catalog potential.

    Gaussian      V(r) = -λ exp(-r²/(2σ²)),   V̂(p) = -λσ³ exp(-σ²p²/2)
    Exponential   V(r) = -λ exp(-r/σ),        V̂(p) = -8πλσ³(2π)^{-3/2} / (1+σ²p²)²
    SquareWell    V(r) = -λ 1_{r<σ}           (V̂ changes sign; scattering checks only)
    """
    fam = _family(family)
    if not depth > 0.0:
        raise InvalidArgumentError(f"depth must be > 0, got {depth}")
    if not range_ > 0.0:
        raise InvalidArgumentError(f"range must be > 0, got {range_}")
    return Potential(fam, float(depth), float(range_))


def parse_potential(text: str) -> Potential:
    """Parse a `family:depth:range` string such as 'gaussian:1.0:1.0'."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise InvalidArgumentError(f"potential must look like family:depth:range, got '{text}'")
    try:
        depth, range_ = float(parts[1]), float(parts[2])
    except ValueError:
        raise InvalidArgumentError(f"depth and range must be numbers in '{text}'")
    return make_potential(parts[0], depth, range_)


def potential_from_dict(data: Dict[str, Any]) -> Potential:
    try:
        return make_potential(data["family"], data["depth"], data["range"])
    except KeyError as missing:
        raise InvalidArgumentError(f"potential record is missing {missing}")


def evaluate_v(pot: Potential, r):
    if np.any(np.asarray(r) < 0):
        raise InvalidArgumentError("r must be >= 0")
    return pot.v(r)


def evaluate_vhat(pot: Potential, p):
    if np.any(np.asarray(p) < 0):
        raise InvalidArgumentError("p must be >= 0")
    return pot.vhat(p)


# === Quadrature checks ===

def _radial_integral(pot: Potential, integrand, epsrel: float = 1e-12) -> float:
    """∫₀^∞ integrand(r) dr, split at the breakpoints and the cutoff radius."""
    edges = [0.0] + [b for b in pot.breakpoints() if b > 0.0] + [pot.cutoff_radius()]
    edges = sorted(set(edges))
    total, error = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        value, err = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=epsrel, limit=200)
        total += value
        error += err
    if pot.family is not Family.SQUARE_WELL:
        value, err = integrate.quad(integrand, edges[-1], np.inf, epsabs=0.0, epsrel=epsrel, limit=200)
        total += value
        error += err
    if error > 1e-10 * abs(total) and error > 1e-300:
        raise QuadratureError("radial quadrature did not converge", error / max(abs(total), 1e-300))
    return total


def lp_norm(pot: Potential, q: float) -> float:
    """(4π ∫₀^∞ r²|V(r)|^q dr)^{1/q} by adaptive quadrature, q ∈ {1, 3/2}."""
    if q not in (1, 1.0, 1.5):
        raise InvalidArgumentError(f"q must be 1 or 3/2, got {q}")
    if pot.depth == 0.0:
        return 0.0
    shape_integral = _radial_integral(pot, lambda r: r * r * float(pot.profile(r)) ** q)
    return pot.depth * (4.0 * math.pi * shape_integral) ** (1.0 / q)


def weighted_l1_norm(pot: Potential) -> float:
    """∫|V(x)|(1 + |x|) dx."""
    if pot.depth == 0.0:
        return 0.0
    shape_integral = _radial_integral(pot, lambda r: r * r * (1.0 + r) * float(pot.profile(r)))
    return pot.depth * 4.0 * math.pi * shape_integral


def vhat_by_quadrature(pot: Potential, p: float) -> float:
    """V̂(p) = √(2/π) p^{-1} ∫₀^∞ r V(r) sin(pr) dr, evaluated numerically."""
    R = pot.cutoff_radius()
    if p == 0.0:
        return math.sqrt(2.0 / math.pi) * _radial_integral(pot, lambda r: r * r * float(pot.v(r)))
    value, err = integrate.quad(
        lambda r: r * float(pot.v(r)), 0.0, R, weight="sin", wvar=p, epsabs=0.0, epsrel=1e-12, limit=400
    )
    if err > 1e-9 * abs(value) and err > 1e-14 * pot.depth * pot.range_**2:
        raise QuadratureError(f"sine transform at p={p:g} did not converge", err)
    return math.sqrt(2.0 / math.pi) * value / p


def sample_vhat(pot: Potential, n: int = VHAT_SAMPLES) -> np.ndarray:
    p = np.linspace(0.0, VHAT_SAMPLE_RANGE / pot.range_, n)
    return pot.vhat(p)


def vhat_nonpositive(pot: Potential) -> bool:
    """V̂ ≤ 0 on the sample grid, with |V̂| non-increasing over the last tenth."""
    values = sample_vhat(pot)
    if np.any(values > 0.0):
        return False
    tail = values[-len(values) // 10:]
    return bool(np.all(np.diff(tail) >= 0.0))


# === Scaling ===

def scale_potential(pot: Potential, mu: float) -> Potential:
    """√μ·V_{√μ}(x) = μ^{-1} V(x/√μ): depth λ/μ, range σ√μ.

    Keeps ‖·‖_{L^{3/2}} fixed; the gap equation at (μ, V) maps onto (1, this).
    """
    if not mu > 0.0:
        raise InvalidArgumentError(f"mu must be > 0, got {mu}")
    return Potential(pot.family, pot.depth / mu, pot.range_ * math.sqrt(mu))


def dilate_potential(pot: Potential, mu: float) -> Potential:
    """V_{√μ}(x) = μ^{-3/2} V(x/√μ), which keeps ‖·‖_{L¹} fixed."""
    if not mu > 0.0:
        raise InvalidArgumentError(f"mu must be > 0, got {mu}")
    return Potential(pot.family, pot.depth * mu**-1.5, pot.range_ * math.sqrt(mu))


# === Admissibility ===

@dataclass
class AdmissibilityReport:
    l1_finite: bool
    weighted_l1_finite: bool
    sobolev_ok: bool
    vhat_nonpositive: bool
    vhat0_negative: bool
    scattering_length: float
    a_negative: bool
    bs_spectrum_ok: bool
    evidence: Dict[str, float] = field(default_factory=dict)

    @property
    def admissible(self) -> bool:
        return all(
            [
                self.l1_finite,
                self.weighted_l1_finite,
                self.sobolev_ok,
                self.vhat_nonpositive,
                self.vhat0_negative,
                self.a_negative,
                self.bs_spectrum_ok,
            ]
        )

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["admissible"] = self.admissible
        return data


def check_admissible(pot: Potential, scattering: Optional[Any] = None) -> AdmissibilityReport:
    """Numerically checkable conditions for the low-density gap asymptotics.

    Failures are report entries, never exceptions.
    """
    import scattering as scattering_module

    l1 = lp_norm(pot, 1)
    l32 = lp_norm(pot, 1.5)
    weighted = weighted_l1_norm(pot)
    vhat0 = float(pot.vhat(0.0))
    result = scattering or scattering_module.scattering_result(pot)

    report = AdmissibilityReport(
        l1_finite=bool(np.isfinite(l1)),
        weighted_l1_finite=bool(np.isfinite(weighted)),
        sobolev_ok=bool(l32 < S3),
        vhat_nonpositive=vhat_nonpositive(pot),
        vhat0_negative=bool(vhat0 < 0.0),
        scattering_length=result.a_bs,
        a_negative=bool(result.a_bs < 0.0),
        bs_spectrum_ok=bool(result.lowest_bs_eigenvalue > -1.0),
        evidence={
            "l1": l1,
            "l32": l32,
            "l1_weighted": weighted,
            "sobolev_constant": S3,
            "vhat0": vhat0,
            "vhat_max_sampled": float(np.max(sample_vhat(pot))),
            "lowest_bs_eigenvalue": result.lowest_bs_eigenvalue,
        },
    )
    logger.info(f"[Potentials] {pot.label()} admissible={report.admissible} (l32={l32:.6g} vs S3={S3:.6g})")
    return report
