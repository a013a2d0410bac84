"""``carbon`` command line.

Exit codes: 0 success, 1 invalid input (bad case, bad options, missing file),
2 numerical or I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import report
from .cases import BUILTIN_CASES, builtin_case
from .cef import cef_solve, compute_flows
from .clearing import clear_market
from .emissions import (
    DEFAULT_SEED_POINTS,
    case_lmce,
    compute_lace,
    compute_lace_riemann,
    total_emission,
    verify_conservation,
)
from .errors import CaseValidationError, NumericalError
from .grid import CaseData, load_case
from .sensitivity import DEFAULT_SVD_TOL

COMMANDS = ("clear", "lmce", "lace", "cef", "compare", "heatmap")
DEFAULT_OUT = "carbon_out"


@dataclass(frozen=True)
class RunConfig:
    case_path: str
    command: str
    out_dir: Path
    svd_tol: float = DEFAULT_SVD_TOL
    sigma_seed_points: int = DEFAULT_SEED_POINTS
    riemann_points: int | None = None
    format: str = "csv"

    def validate(self):
        if self.command not in COMMANDS:
            raise CaseValidationError(f"unknown command {self.command!r}")
        if not self.svd_tol > 0:
            raise CaseValidationError("--svd-tol must be positive")
        if self.sigma_seed_points < 1:
            raise CaseValidationError("--sigma-seeds must be positive")
        if self.riemann_points is not None and self.riemann_points < 1:
            raise CaseValidationError("--riemann must be positive")
        if self.format not in ("csv", "md"):
            raise CaseValidationError("--format must be csv or md")


def resolve_case(spec: str) -> CaseData:
    if spec in BUILTIN_CASES:
        return builtin_case(spec)
    return load_case(spec)


def _flow_rate(case, clearing):
    inc = case.generator_incidence()
    flows = compute_flows(clearing.ptdf, clearing.dispatch @ inc.T, clearing.loads)
    return flows, 100.0 * np.abs(flows) / case.line_capacities()


def _cef(case, clearing):
    flows, _ = _flow_rate(case, clearing)
    return cef_solve(case, clearing.dispatch, flows, clearing.loads)


def _lace(case, clearing, cfg, out):
    lace = compute_lace(
        case, clearing.loads, svd_tol=cfg.svd_tol, ptdf=clearing.ptdf, seed_points=cfg.sigma_seed_points
    )
    actual = total_emission(case.emission_factors(), clearing.dispatch)
    rep = verify_conservation(lace, clearing.loads, actual)
    out.write(
        f"LACE allocation {rep.allocated:.6g} t vs generation emission {rep.actual:.6g} t "
        f"(relative gap {rep.relative_gap:.2e})\n"
    )
    return lace


def run_pipeline(cfg: RunConfig, out=None) -> int:
    """Run one command end to end; returns the process exit code."""
    out = sys.stdout if out is None else out
    err = sys.stderr
    try:
        cfg.validate()
        case = resolve_case(cfg.case_path)
    except FileNotFoundError:
        err.write(f"error: case file not found: {cfg.case_path}\n")
        return 1
    except CaseValidationError as exc:
        err.write(f"error: {exc}\n")
        return 1

    try:
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        clearing = clear_market(case)
        bus_ids = case.bus_ids
        written = []
        cmd = cfg.command
        if cmd == "clear":
            rows = report.dispatch_rows(case, clearing.dispatch)
            written.append(report.write_table(cfg.out_dir / "dispatch", report.DISPATCH_HEADER, rows, cfg.format))
            out.write(f"objective {clearing.objective:.6g}, total emission "
                      f"{total_emission(case.emission_factors(), clearing.dispatch):.6g} t\n")
        elif cmd == "lmce":
            rows = report.lmce_rows(bus_ids, case_lmce(clearing, cfg.svd_tol))
            written.append(report.write_table(cfg.out_dir / "lmce", report.LMCE_HEADER, rows, cfg.format))
            out.write(report.render_markdown(report.LMCE_HEADER, rows))
        elif cmd == "lace":
            lace = _lace(case, clearing, cfg, out)
            rows = report.lace_rows(bus_ids, lace)
            written.append(report.write_table(cfg.out_dir / "lace", report.LACE_HEADER, rows, cfg.format))
            out.write(report.render_markdown(report.LACE_HEADER, rows))
            if cfg.riemann_points:
                riem = compute_lace_riemann(case, clearing.loads, cfg.riemann_points, cfg.svd_tol, clearing.ptdf)
                diff = float(np.max(np.abs(riem.value - lace.value)))
                rrows = [
                    [str(t + 1), str(b), report.fmt(riem.value[t, i]), report.fmt(riem.value[t, i] - lace.value[t, i])]
                    for t in range(riem.value.shape[0])
                    for i, b in enumerate(bus_ids)
                ]
                written.append(
                    report.write_table(
                        cfg.out_dir / "lace_riemann",
                        ["period", "bus", "lace_riemann_t_per_mwh", "difference"],
                        rrows,
                        cfg.format,
                    )
                )
                out.write(f"Riemann cross-check ({cfg.riemann_points} points): max |difference| {diff:.3g}\n")
        elif cmd == "cef":
            rows = report.cef_rows(bus_ids, _cef(case, clearing))
            written.append(report.write_table(cfg.out_dir / "cef", report.CEF_HEADER, rows, cfg.format))
            out.write(report.render_markdown(report.CEF_HEADER, rows))
        elif cmd == "compare":
            cef = _cef(case, clearing)
            lace = _lace(case, clearing, cfg, out)
            rows = report.compare_rows(bus_ids, clearing.loads, cef, lace)
            written.append(report.write_table(cfg.out_dir / "compare", report.COMPARE_HEADER, rows, cfg.format))
            out.write(report.render_markdown(report.COMPARE_HEADER, rows))
        elif cmd == "heatmap":
            _, rate = _flow_rate(case, clearing)
            lmce = case_lmce(clearing, cfg.svd_tol)
            labels = [ln.label for ln in case.lines]
            written.append(report.write_heatmap_svg(cfg.out_dir / "heatmap.svg", rate, lmce.value, labels, bus_ids))
        for path in written:
            out.write(f"wrote {path}\n")
    except NumericalError as exc:
        err.write(f"error: {exc}\n")
        return 2
    except OSError as exc:
        err.write(f"error: cannot write output: {exc}\n")
        return 2
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="carbon", description="Locational marginal / average carbon emission from DC market clearing.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--case", required=True, help="case JSON path or builtin name (%s)" % ", ".join(BUILTIN_CASES))
    parser.add_argument("--out", default=None, help="output directory (default: $CARBON_OUT or ./carbon_out)")
    parser.add_argument("--svd-tol", type=float, default=DEFAULT_SVD_TOL, help="relative SVD truncation")
    parser.add_argument("--sigma-seeds", type=int, default=DEFAULT_SEED_POINTS, help="breakpoint scan seed points")
    parser.add_argument("--riemann", type=int, default=None, help="also compute a Riemann-sum LACE with N points")
    parser.add_argument("--format", choices=("csv", "md"), default="csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = args.out or os.environ.get("CARBON_OUT") or DEFAULT_OUT
    cfg = RunConfig(
        case_path=args.case,
        command=args.command,
        out_dir=Path(out_dir),
        svd_tol=args.svd_tol,
        sigma_seed_points=args.sigma_seeds,
        riemann_points=args.riemann,
        format=args.format,
    )
    return run_pipeline(cfg)


if __name__ == "__main__":
    sys.exit(main())
