import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

import config
import scattering
from asymptotics import D_TARGET, RATIO_TARGET, a_hs_norm, analyze, delta_scaling_ratio, predictions
from errors import BcsGapError, InvalidArgumentError
from gap_solver import GapOptions, solve_gap
from potentials import Potential
from tc_solver import critical_temperature

logger = logging.getLogger(__name__)

NAN = float("nan")


@dataclass
class SweepRow:
    mu: float
    a: float
    delta_fermi: float = NAN
    xi: float = NAN
    tc: float = NAN
    m_mu: float = NAN
    m_pred: float = NAN
    D: float = NAN
    D_target: float = D_TARGET
    ratio: float = NAN
    ratio_target: float = RATIO_TARGET
    xi_pred: float = NAN
    tc_pred: float = NAN
    residual: float = NAN
    iterations: int = 0
    grid_meta: str = ""
    delta_fermi_over_mu: float = NAN
    delta_fermi_over_mu34: float = NAN
    hs_ratio: float = NAN
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


COLUMNS = [f.name for f in fields(SweepRow)]


def parse_mu_range(text: str) -> List[float]:
    """'a:b:n' -> n geometrically spaced values from a to b."""
    parts = str(text).split(":")
    if len(parts) != 3:
        raise InvalidArgumentError(f"--mu-range must look like a:b:n, got '{text}'")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InvalidArgumentError(f"bad numbers in --mu-range '{text}'")
    if start <= 0.0 or stop <= 0.0 or count < 0:
        raise InvalidArgumentError("--mu-range needs positive endpoints and n >= 0")
    if count == 0:
        return []
    if count == 1:
        return [start]
    return np.geomspace(start, stop, count).tolist()


def sweep_row(
    pot: Potential,
    mu: float,
    a: float,
    opts: Optional[GapOptions] = None,
    with_tc: bool = True,
    hs_diagnostic: bool = False,
) -> SweepRow:
    """One μ of a sweep. Library errors are recorded in the row, not raised."""
    row = SweepRow(mu=mu, a=a)
    try:
        preds = predictions(mu, a)
        row.xi_pred, row.tc_pred, row.m_pred = preds["xi_pred"], preds["tc_pred"], preds["m_closed_target"]
        sol = solve_gap(pot, mu, opts, scattering_length=a)
        tc = critical_temperature(pot, mu, scattering_length=a).tc if with_tc else None
        report = analyze(sol, tc=tc)
        row.delta_fermi, row.xi = sol.delta_fermi, sol.xi
        row.residual, row.iterations, row.grid_meta = sol.residual, sol.iterations, sol.grid.meta()
        row.m_mu, row.D, row.ratio = report.m_mu, report.D, report.ratio
        row.tc = NAN if tc is None else tc
        ratios = delta_scaling_ratio(sol)
        row.delta_fermi_over_mu = ratios["delta_fermi_over_mu"]
        row.delta_fermi_over_mu34 = ratios["delta_fermi_over_mu34"]
        if hs_diagnostic:
            row.hs_ratio = a_hs_norm(sol)[0]
        if not sol.converged:
            row.error = f"residual {sol.residual:.3g} above tolerance"
    except BcsGapError as e:
        logger.error(f"[Sweep] mu={mu:.6g} failed: {e}")
        row.error = f"{type(e).__name__}: {e}"
    return row


def sweep(
    pot: Potential,
    mu_list: Sequence[float],
    opts: Optional[GapOptions] = None,
    with_tc: bool = True,
    hs_diagnostic: bool = False,
    on_row: Optional[Callable[[SweepRow], None]] = None,
) -> List[SweepRow]:
    """Solve at every μ, in parallel up to BCSGAP_THREADS, emitting rows in μ order."""
    if not mu_list:
        return []
    a = scattering.scattering_length(pot)
    logger.info(f"[Sweep] {pot.label()}: {len(mu_list)} values of mu, a={a:.10g}, {config.threads()} thread(s)")
    rows: List[SweepRow] = []
    with ThreadPoolExecutor(max_workers=config.threads()) as pool:
        results = pool.map(lambda mu: sweep_row(pot, mu, a, opts, with_tc, hs_diagnostic), mu_list)
        for row in results:
            rows.append(row)
            if on_row is not None:
                on_row(row)
    return rows


def trend_decreasing(values: Sequence[float], count: int = 3, floor: float = 0.0) -> bool:
    """The last `count` entries are finite and strictly decreasing.

    Two neighbours both at or below `floor` are below resolution and count as settled.
    """
    tail = list(values)[-count:]
    if len(tail) < count or not all(math.isfinite(v) for v in tail):
        return False
    return all(later < earlier or max(earlier, later) <= floor for earlier, later in zip(tail[:-1], tail[1:]))
