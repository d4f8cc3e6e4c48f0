import functools
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

import config
import scattering
from asymptotics import D_TARGET, RATIO_TARGET, closed_form_defect, fit_limit, m_mu_direct, m_mu_split
from errors import BcsGapError, InvalidArgumentError
from gap_solver import DEFAULT_P_MAX_SIGMA, UNDERFLOW_FLOOR, GapOptions, GapSolution, bcs_functional, solve_gap
from potentials import Family, Potential, lp_norm, make_potential, parse_potential, scale_potential
from radial_quadrature import angular_kernel
from sweep import sweep, trend_decreasing
from tc_solver import BISECTION_TOL, REFINE_XTOL, TcResult, critical_temperature
from utils import load_golden, read_json

logger = logging.getLogger(__name__)

PROFILES = ("quick", "full")
GAP_MUS = {"quick": [0.3], "full": [0.3, 0.1, 0.04]}
SCALING_MUS = {"quick": [0.25], "full": [0.25, 0.04]}
ORACLE_DEPTHS = {
    Family.GAUSSIAN: [0.5, 1.0, 1.2],
    Family.EXPONENTIAL: [0.5, 1.0, 1.3],
    Family.SQUARE_WELL: [0.5, 1.0, 2.0],
}
SWEEP_POINTS = 8
# relative resolution of Ξ/T_c; gaps below it count as settled
RATIO_RESOLUTION = 1e-6


@dataclass
class Criterion:
    name: str
    measured: float
    target: float
    tolerance: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["pass"] = data.pop("passed")
        return data


@dataclass
class VerifyReport:
    profile: str
    entries: List[Criterion] = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return all(entry.passed for entry in self.entries)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "profile": self.profile,
            "criteria": [entry.to_dict() for entry in self.entries],
            "overall": self.overall,
        }


def _within(name: str, measured: float, target: float, tolerance: float, detail: str = "") -> Criterion:
    ok = bool(math.isfinite(measured) and abs(measured - target) <= tolerance)
    return Criterion(name, float(measured), float(target), float(tolerance), ok, detail)


def _at_most(name: str, measured: float, bound: float, detail: str = "") -> Criterion:
    ok = bool(math.isfinite(measured) and measured <= bound)
    return Criterion(name, float(measured), 0.0, float(bound), ok, detail)


# === Golden values ===

def _derived_runs(derived: Dict[str, Any]):
    """Gap solve at μ = 0.3 and gap plus T_c at μ = 0.1, with the settings stored next to the values."""
    pot = parse_potential(derived.get("potential", "gaussian:1:1"))
    counts = {key: int(derived.get(key, 64)) for key in ("n_inner", "n_wing", "n_tail")}
    p_max = float(derived.get("p_max_sigma", DEFAULT_P_MAX_SIGMA)) / pot.range_
    tol, damping = float(derived.get("gap_tol", config.TOL)), float(derived.get("damping", config.DAMPING))
    opts = GapOptions(tol=tol, damping=damping, p_max=p_max, **counts)
    stored = (derived.get("tc_bisection_tol", BISECTION_TOL), derived.get("tc_refine_xtol", REFINE_XTOL))
    if stored != (BISECTION_TOL, REFINE_XTOL):
        logger.warning("[Verify] golden T_c tolerances differ from the solver's; derived values may drift")

    @functools.lru_cache(maxsize=None)
    def gap(mu: float) -> GapSolution:
        return solve_gap(pot, mu, opts)

    @functools.lru_cache(maxsize=None)
    def tc(mu: float) -> TcResult:
        return critical_temperature(pot, mu, p_max=p_max, **counts)

    return gap, tc


def golden_measurements(settings: Optional[Dict[str, Any]] = None) -> Dict[str, Callable[[], float]]:
    gaussian = make_potential("gaussian", 1.0, 1.0)
    gap, tc = _derived_runs((settings or {}).get("derived", {}))
    return {
        "square_well_scattering_length": lambda: scattering.scattering_length(make_potential("squarewell", 1.0, 1.0)),
        "gaussian_born_term": lambda: scattering.born_term(gaussian),
        "exponential_born_term": lambda: scattering.born_term(make_potential("exponential", 1.0, 1.0)),
        "gaussian_l32_norm": lambda: lp_norm(gaussian, 1.5),
        "gaussian_kernel_origin": lambda: float(angular_kernel(gaussian, 0.0, 0.0)),
        "d_target": lambda: D_TARGET,
        "universal_ratio": lambda: RATIO_TARGET,
        "gap_functional_sign_mu_0.3": lambda: float(np.sign(bcs_functional(gap(0.3)))),
        "universal_ratio_mu_0.1": lambda: gap(0.1).xi / tc(0.1).tc,
        "tc_log2_over_prediction_mu_0.1": lambda: math.log2(tc(0.1).tc / tc(0.1).tc_pred),
    }


def check_golden(path: str) -> List[Criterion]:
    values = load_golden(path)
    measure = golden_measurements(read_json(path).get("settings"))
    out = []
    for name, entry in values.items():
        if name not in measure:
            out.append(Criterion(f"golden:{name}", float("nan"), entry["value"], entry["tolerance"], False, "unknown entry"))
            continue
        out.append(_within(f"golden:{name}", measure[name](), entry["value"], entry["tolerance"]))
    return out


# === Criteria ===

def check_scattering_oracle(profile: str) -> List[Criterion]:
    out = []
    for family, depths in ORACLE_DEPTHS.items():
        for depth in depths:
            pot = make_potential(family, depth, 1.0)
            a_bs = scattering.scattering_length(pot)
            a_ode = scattering.scattering_length_ode(pot)
            gap = abs(a_bs - a_ode) / max(abs(a_bs), pot.range_)
            out.append(_at_most(f"scattering_oracle:{pot.label()}", gap, 1e-6, f"a_bs={a_bs:.12g} a_ode={a_ode:.12g}"))
            if family is Family.SQUARE_WELL:
                k = math.sqrt(depth)
                exact = 1.0 - math.tan(k) / k
                out.append(_within(f"square_well_analytic:{pot.label()}", a_bs, exact, 1e-8))
    return out


def _gap_checks(sol: GapSolution, tol: float) -> List[Criterion]:
    tag = f"mu={sol.mu:g}"
    return [
        _at_most(f"gap_residual:{tag}", sol.residual, tol),
        Criterion(f"gap_positive:{tag}", float(np.min(sol.delta)), 0.0, 0.0, bool(np.all(sol.delta > 0.0))),
        _at_most(f"functional_negative:{tag}", bcs_functional(sol), 0.0),
        _at_most(f"energy_gap_below_fermi_gap:{tag}", sol.xi - sol.delta_fermi, 0.0),
        _at_most(
            f"m_mu_routes:{tag}",
            abs(m_mu_split(sol) - m_mu_direct(sol)) / abs(m_mu_split(sol)),
            1e-6,
        ),
    ]


def check_scaling(pot: Potential, mu: float) -> Criterion:
    sol = solve_gap(pot, mu)
    unit = solve_gap(scale_potential(pot, mu), 1.0)
    p = math.sqrt(mu) * np.geomspace(0.05, 10.0, 20)
    direct = sol.delta_at(p)
    scaled = mu * unit.delta_at(p / math.sqrt(mu))
    gap = float(np.max(np.abs(direct - scaled)) / np.max(np.abs(direct)))
    return _at_most(f"scaling_covariance:mu={mu:g}", gap, 1e-6)


def check_constant_gap() -> Criterion:
    defects = [abs(closed_form_defect(x)) for x in (1e-3, 1e-5, 1e-7)]
    ok = defects[0] > defects[1] > defects[2]
    return Criterion("m_mu_closed_form_trend", defects[-1], 0.0, defects[0], bool(ok), f"defects={defects}")


def floor_mu(pot: Potential) -> float:
    a = scattering.scattering_length(pot)
    return (UNDERFLOW_FLOOR / abs(a)) ** 2 * 1.0001


def check_sweep(pot: Potential, hs_diagnostic: bool = False) -> List[Criterion]:
    mus = np.geomspace(0.3, floor_mu(pot), SWEEP_POINTS).tolist()
    rows = [row for row in sweep(pot, mus, hs_diagnostic=hs_diagnostic) if not row.failed]
    if len(rows) < 4:
        return [Criterion("sweep", float(len(rows)), 4.0, 0.0, False, "fewer than four converged rows")]
    mu = [r.mu for r in rows]
    out = []

    D_limit, _ = fit_limit(mu[-4:], [r.D for r in rows[-4:]])
    out.append(_within("d_target_extrapolated", D_limit, D_TARGET, 0.05))
    out.append(_within("d_target_smallest_mu", rows[-1].D, D_TARGET, 0.15))

    ratio_limit, _ = fit_limit(mu[-4:], [r.ratio for r in rows[-4:]])
    out.append(_within("universal_ratio_extrapolated", ratio_limit, RATIO_TARGET, 0.05 * RATIO_TARGET))
    ratio_gaps = [abs(r.ratio - RATIO_TARGET) for r in rows]
    settled = trend_decreasing(ratio_gaps, floor=RATIO_RESOLUTION * RATIO_TARGET)
    out.append(Criterion("universal_ratio_trend", ratio_gaps[-1], 0.0, RATIO_RESOLUTION * RATIO_TARGET, settled))

    link = [abs(r.m_mu - r.m_pred) / abs(r.m_pred) for r in rows]
    out.append(Criterion("birman_schwinger_link_trend", link[-1], 0.0, 0.0, trend_decreasing(link)))

    decay = [r.delta_fermi_over_mu for r in rows]
    out.append(Criterion("delta_over_mu_decay", decay[-1], 0.0, 0.0, trend_decreasing(decay)))
    if hs_diagnostic:
        hs = [r.hs_ratio for r in rows]
        out.append(Criterion("hs_ratio_decay", hs[-1], 0.0, 0.0, trend_decreasing(hs)))
    return out


def verify(
    pot: Potential,
    profile: str = "quick",
    golden_path: Optional[str] = None,
    only: Optional[Sequence[str]] = None,
    hs_diagnostic: bool = False,
) -> VerifyReport:
    """Run the acceptance checks. Each failure becomes a failing entry."""
    if profile not in PROFILES:
        raise InvalidArgumentError(f"profile must be one of {PROFILES}, got '{profile}'")
    golden_path = golden_path or config.GOLDEN
    report = VerifyReport(profile)
    groups: Dict[str, Callable[[], List[Criterion]]] = {
        "golden": lambda: check_golden(golden_path),
        "scattering": lambda: check_scattering_oracle(profile),
        "gap": lambda: [c for mu in GAP_MUS[profile] for c in _gap_checks(solve_gap(pot, mu), config.TOL)],
        "scaling": lambda: [check_scaling(pot, mu) for mu in SCALING_MUS[profile]],
        "m_mu": lambda: [check_constant_gap()],
    }
    if profile == "full":
        groups["sweep"] = lambda: check_sweep(pot, hs_diagnostic)
    selected = list(only) if only else list(groups)
    for name in selected:
        if name not in groups:
            raise InvalidArgumentError(f"unknown check group '{name}' (available: {', '.join(groups)})")
        logger.info(f"[Verify] running {name}")
        try:
            report.entries.extend(groups[name]())
        except BcsGapError as e:
            report.entries.append(Criterion(name, float("nan"), float("nan"), float("nan"), False, str(e)))
    logger.info(f"[Verify] overall pass: {report.overall}")
    return report
