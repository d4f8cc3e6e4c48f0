import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

import pandas as pd

import config
import scattering
from asymptotics import a_hs_norm, analyze
from errors import EXIT_NUMERIC_FAILURE, EXIT_OK, EXIT_VERIFY_FAILED, BcsGapError, InvalidArgumentError
from gap_solver import DEFAULT_P_MAX_SIGMA, GapOptions, solve_gap
from potentials import check_admissible, parse_potential
from radial_quadrature import build_grid
from sweep import COLUMNS, parse_mu_range, sweep
from tc_solver import critical_temperature
from utils import CsvRowWriter, dump_json
from verify import PROFILES, verify

logger = logging.getLogger("bcsgap")

DEFAULT_POTENTIAL = "gaussian:1:1"
GAP_COLUMNS = ["mu", "p", "delta", "E"]


def _potential_spec(args: argparse.Namespace) -> Optional[str]:
    """POTENTIAL or --potential; both given must agree. None for commands without a potential."""
    if not hasattr(args, "potential"):
        return None
    positional, flag = args.potential_arg, args.potential
    if positional and flag and positional != flag:
        raise InvalidArgumentError(f"conflicting potentials '{positional}' and --potential '{flag}'")
    return positional or flag or DEFAULT_POTENTIAL


class BcsGapRunner:
    """Dispatches one CLI subcommand and returns (result dict, exit code).

    Each handler returns a plain dict; output formatting happens in one place.
    """

    def __init__(self, args: argparse.Namespace):
        self.args = args
        spec = _potential_spec(args)
        self.pot = parse_potential(spec) if spec else None

    def _opts(self) -> GapOptions:
        return GapOptions(n_inner=self.args.n_inner)

    def _mus(self) -> List[float]:
        if self.args.mu_range:
            return parse_mu_range(self.args.mu_range)
        return [self.args.mu] if self.args.mu is not None else []

    def run(self) -> int:
        handler = getattr(self, "cmd_" + self.args.command.replace("-", "_"))
        return handler()

    def _emit(self, data: Dict[str, Any]):
        if self.args.out:
            with open(self.args.out, "w") as f:
                dump_json(data, f)
        else:
            dump_json(data)

    def cmd_scatlen(self) -> int:
        result = scattering.scattering_result(self.pot)
        data = {"potential": self.pot.to_dict(), **result.to_dict()}
        data["bound_states"] = scattering.count_bound_states(self.pot)
        data["second_born"] = scattering.second_born_term(self.pot)
        self._emit(data)
        return EXIT_OK

    def cmd_check_potential(self) -> int:
        report = check_admissible(self.pot)
        self._emit({"potential": self.pot.to_dict(), **report.to_dict()})
        return EXIT_OK

    def cmd_gap(self) -> int:
        solutions = [solve_gap(self.pot, mu, self._opts()) for mu in self._mus()]
        if self.args.format == "csv":
            frames = [sol.to_frame() for sol in solutions]
            frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=GAP_COLUMNS)
            frame.to_csv(self.args.out or sys.stdout, index=False, float_format="%.17g")
            return EXIT_OK
        results = []
        for sol in solutions:
            entry = sol.summary()
            entry["asymptotics"] = analyze(sol).to_dict()
            if self.args.hs_diagnostic:
                entry["asymptotics"]["a_hs_ratio"], entry["asymptotics"]["a_hs_error"] = a_hs_norm(sol)
            results.append(entry)
        self._emit({"potential": self.pot.to_dict(), "solutions": results})
        return EXIT_OK

    def cmd_tc(self) -> int:
        results = [critical_temperature(self.pot, mu, n_inner=self.args.n_inner).to_dict() for mu in self._mus()]
        self._emit({"potential": self.pot.to_dict(), "results": results})
        return EXIT_OK

    def cmd_sweep(self) -> int:
        mus = self._mus()
        if self.args.format == "json":
            rows = sweep(self.pot, mus, self._opts(), with_tc=not self.args.no_tc, hs_diagnostic=self.args.hs_diagnostic)
            self._emit({"potential": self.pot.to_dict(), "rows": [row.to_dict() for row in rows]})
            return EXIT_OK
        stream = open(self.args.out, "w") if self.args.out else sys.stdout
        try:
            writer = CsvRowWriter(stream, COLUMNS)
            sweep(
                self.pot,
                mus,
                self._opts(),
                with_tc=not self.args.no_tc,
                hs_diagnostic=self.args.hs_diagnostic,
                on_row=lambda row: writer.write([row.to_dict()]),
            )
        finally:
            if stream is not sys.stdout:
                stream.close()
        return EXIT_OK

    def cmd_verify(self) -> int:
        report = verify(
            self.pot,
            self.args.profile,
            golden_path=self.args.golden,
            only=self.args.only,
            hs_diagnostic=self.args.hs_diagnostic,
        )
        self._emit(report.to_dict())
        return EXIT_OK if report.overall else EXIT_VERIFY_FAILED

    def cmd_grid_dump(self) -> int:
        mu = self.args.mu if self.args.mu is not None else 1.0
        grid = build_grid(mu, self.args.inner_scale, self.args.p_max or DEFAULT_P_MAX_SIGMA, self.args.n_inner)
        grid.to_frame().to_csv(self.args.out or sys.stdout, index=False, float_format="%.17g")
        return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bcsgap", description="BCS gap equation at low density.")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING (default from BCSGAP_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, needs_potential: bool = True):
        if needs_potential:
            p.add_argument("potential_arg", nargs="?", default=None, metavar="POTENTIAL", help="family:depth:range")
            p.add_argument("--potential", default=None, help=f"same as POTENTIAL (default {DEFAULT_POTENTIAL})")
        p.add_argument("--mu", type=float, default=None)
        p.add_argument("--mu-range", default=None, help="a:b:n, geometric")
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--max-iter", type=int, default=None)
        p.add_argument("--damping", type=float, default=None)
        p.add_argument("--n-inner", type=int, default=64)
        p.add_argument("--out", default=None)
        p.add_argument("--format", choices=["csv", "json"], default="json")
        p.add_argument("--hs-diagnostic", action="store_true")

    for name in ("scatlen", "check-potential", "gap", "tc"):
        common(sub.add_parser(name))
    p = sub.add_parser("sweep")
    common(p)
    p.add_argument("--no-tc", action="store_true", help="skip the critical temperature")
    p.set_defaults(format="csv")
    p = sub.add_parser("verify")
    common(p)
    p.add_argument("--profile", choices=PROFILES, default="quick")
    p.add_argument("--golden", default=None)
    p.add_argument("--only", action="append", default=None, help="run only this check group (repeatable)")
    p = sub.add_parser("grid-dump")
    common(p, needs_potential=False)
    p.add_argument("--inner-scale", type=float, default=1e-3)
    p.add_argument("--p-max", type=float, default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    config.configure(tol=args.tol, max_iter=args.max_iter, damping=args.damping, log_level=args.log_level)
    logging.basicConfig(level=str(config.LOG_LEVEL).upper(), format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return BcsGapRunner(args).run()
    except BcsGapError as e:
        logger.error(f"[CLI] {type(e).__name__}: {e}")
        return e.exit_code
    except (FloatingPointError, ArithmeticError) as e:
        logger.error(f"[CLI] numeric failure: {e}")
        return EXIT_NUMERIC_FAILURE


if __name__ == "__main__":
    sys.exit(main())
