"""Locational marginal and average carbon emission from DC market clearing."""

from .cases import builtin_case
from .cef import CefResult, cef_solve, compute_flows
from .clearing import (
    ClearingProblem,
    ClearingSolution,
    MarketClearing,
    assemble_clearing_lp,
    clear_market,
    solve_lp,
)
from .emissions import (
    LaceResult,
    LmceResult,
    case_lmce,
    compute_lace,
    compute_lace_riemann,
    compute_lmce,
    decompose_lmce,
    find_breakpoints,
    total_emission,
    verify_conservation,
)
from .errors import (
    BreakpointStraddleError,
    CarbonError,
    CaseValidationError,
    DegeneracyError,
    InfeasibleError,
    KktConsistencyError,
    NumericalError,
)
from .grid import CaseData, PtdfMatrix, build_ptdf, load_case
from .sensitivity import (
    KktSystem,
    SensitivityResult,
    assemble_kkt_lp,
    assemble_kkt_qp,
    build_perturbation_rhs,
    finite_diff_sensitivity,
    solve_sensitivity,
)

__version__ = "0.1.0"
