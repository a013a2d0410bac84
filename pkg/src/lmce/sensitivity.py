"""Demand sensitivities of the clearing solution from the differentiated KKT system.

For one period with decision vector ``z = (pi, x, psi, phi)`` the linear
system solved is::

    [ 0     A     0    0  ] [dpi ]   [ e            ]
    [ A.T  -Q   -B.T  B.T ] [dx  ] = [ 0            ]
    [ 0    Psi B -W1   0  ] [dpsi]   [ Psi du/db_i  ]
    [ 0    Phi B  0    W2 ] [dphi]   [ Phi dv/db_i  ]

with ``Q = 0`` for the LP.  Inactive rows are kept, so their complementarity
equations pin ``dpsi``/``dphi`` to zero.  The system is solved with a
truncated SVD pseudoinverse so degenerate (rank-deficient) points still get
the minimum-norm answer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clearing import ClearingProblem, ClearingSolution, assemble_period_lp, binding_key, solve_lp
from .errors import BreakpointStraddleError, KktConsistencyError
from .grid import CaseData, PtdfMatrix, build_ptdf
from .linalg import jacobi_svd, pinv_from_svd

__all__ = [
    "KktSystem",
    "SvdDiagnostics",
    "SensitivityResult",
    "build_perturbation_rhs",
    "assemble_kkt_lp",
    "assemble_kkt_qp",
    "solve_sensitivity",
    "finite_diff_sensitivity",
    "DEFAULT_SVD_TOL",
    "KKT_TOL",
]

DEFAULT_SVD_TOL = 1e-9
KKT_TOL = 1e-8


@dataclass(frozen=True)
class KktSystem:
    H: np.ndarray
    rhs_energy: np.ndarray
    rhs_network: np.ndarray
    blocks: dict
    bus_ids: tuple[int, ...]
    period: int

    @property
    def rhs(self) -> np.ndarray:
        """One perturbation column per bus."""
        return self.rhs_energy + self.rhs_network

    @property
    def dimension(self) -> int:
        return self.H.shape[1]


@dataclass(frozen=True)
class SvdDiagnostics:
    singular_values: np.ndarray
    rank: int
    truncation_tol: float
    condition_estimate: float

    @property
    def full_rank(self) -> bool:
        return self.rank == self.singular_values.size


@dataclass(frozen=True)
class SensitivityResult:
    dz: np.ndarray
    dx_db: np.ndarray
    dpi_db: np.ndarray
    dpsi_db: np.ndarray
    dphi_db: np.ndarray
    svd: SvdDiagnostics
    pinv: np.ndarray
    blocks: dict
    bus_ids: tuple[int, ...]

    def column(self, bus: int) -> np.ndarray:
        return self.dx_db[:, self.bus_ids.index(bus)]

    def apply(self, rhs: np.ndarray) -> np.ndarray:
        """Map any right-hand side (vector or column stack) to ``dz``."""
        return self.pinv @ rhs


def _rhs_parts(problem: ClearingProblem, solution: ClearingSolution):
    n_eq, n, m = problem.A.shape[0], problem.n_vars, problem.n_ineq
    nb = len(problem.bus_ids)
    energy = np.zeros((n_eq + n + 2 * m, nb))
    # a bus perturbation changes this period's single balance right-hand side
    energy[:n_eq, :] = 1.0
    network = np.zeros_like(energy)
    network[n_eq + n : n_eq + n + m, :] = solution.psi[:, None] * problem.du_db
    network[n_eq + n + m :, :] = solution.phi[:, None] * problem.dv_db
    return energy, network


def build_perturbation_rhs(
    problem: ClearingProblem, solution: ClearingSolution, bus: int, period: int | None = None
) -> np.ndarray:
    """Right-hand side column for a 1 MW demand perturbation at ``bus``."""
    if bus not in problem.bus_ids:
        raise KeyError(f"unknown bus {bus}")
    if period is not None and period != problem.period:
        raise KeyError(f"unknown period {period}: problem covers period {problem.period}")
    energy, network = _rhs_parts(problem, solution)
    i = problem.bus_ids.index(bus)
    return energy[:, i] + network[:, i]


def _assemble(problem, solution, Q):
    A, B = problem.A, problem.B
    n_eq, n, m = A.shape[0], problem.n_vars, problem.n_ineq
    dim = n_eq + n + 2 * m
    H = np.zeros((dim, dim))
    sp, sx = slice(0, n_eq), slice(n_eq, n_eq + n)
    su, sl = slice(n_eq + n, n_eq + n + m), slice(n_eq + n + m, dim)
    H[sp, sx] = A
    H[sx, sp] = A.T
    H[sx, sx] = -Q
    H[sx, su] = -B.T
    H[sx, sl] = B.T
    H[su, sx] = solution.psi[:, None] * B
    H[su, su] = -np.diag(solution.w1)
    H[sl, sx] = solution.phi[:, None] * B
    H[sl, sl] = np.diag(solution.w2)
    energy, network = _rhs_parts(problem, solution)
    blocks = {"pi": sp, "x": sx, "psi": su, "phi": sl}
    return KktSystem(H, energy, network, blocks, problem.bus_ids, problem.period)


def _check_kkt(problem, solution, Q=None):
    resid = solution.stationarity_residual(problem, Q)
    scale = max(1.0, float(np.max(np.abs(problem.c))) if problem.c.size else 1.0)
    worst = float(np.max(np.abs(resid))) if resid.size else 0.0
    if worst > KKT_TOL * scale:
        raise KktConsistencyError(f"solution not KKT-consistent (stationarity residual {worst:.3g})")


def assemble_kkt_lp(problem: ClearingProblem, solution: ClearingSolution) -> KktSystem:
    _check_kkt(problem, solution)
    return _assemble(problem, solution, np.zeros((problem.n_vars, problem.n_vars)))


def assemble_kkt_qp(Q, problem: ClearingProblem, solution: ClearingSolution) -> KktSystem:
    """KKT system of ``min 0.5 x'Qx + c'x`` under the clearing constraints.

    Identical to :func:`assemble_kkt_lp` except that the stationarity/x block
    holds ``-Q``.
    """
    Q = np.asarray(Q, dtype=float)
    n = problem.n_vars
    if Q.shape != (n, n):
        raise ValueError(f"Q must be {n}x{n}, got {Q.shape}")
    scale = max(1.0, float(np.max(np.abs(Q)))) if Q.size else 1.0
    if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-12 * scale:
        raise ValueError("Q must be symmetric")
    if n and np.min(np.linalg.eigvalsh(Q)) < -1e-10 * scale:
        raise ValueError("Q must be positive semidefinite")
    _check_kkt(problem, solution, Q)
    return _assemble(problem, solution, Q)


def solve_sensitivity(system: KktSystem, tol: float = DEFAULT_SVD_TOL) -> SensitivityResult:
    """Solve every perturbation column through one truncated SVD of ``H``."""
    u, s, vt = jacobi_svd(system.H)
    pinv, rank = pinv_from_svd(u, s, vt, tol)
    cond = float(s[0] / s[rank - 1]) if rank else float("inf")
    diag = SvdDiagnostics(singular_values=s, rank=rank, truncation_tol=tol, condition_estimate=cond)
    dz = pinv @ system.rhs
    b = system.blocks
    return SensitivityResult(
        dz=dz,
        dx_db=dz[b["x"]],
        dpi_db=dz[b["pi"]],
        dpsi_db=dz[b["psi"]],
        dphi_db=dz[b["phi"]],
        svd=diag,
        pinv=pinv,
        blocks=b,
        bus_ids=system.bus_ids,
    )


def period_sensitivity(
    case: CaseData, ptdf: PtdfMatrix, demand: np.ndarray, tol: float = DEFAULT_SVD_TOL, period: int = 0
):
    """Clear one period at ``demand`` and return ``(problem, solution, kkt, sensitivity)``."""
    problem = assemble_period_lp(case, ptdf, demand, period)
    solution = solve_lp(problem)
    kkt = assemble_kkt_lp(problem, solution)
    return problem, solution, kkt, solve_sensitivity(kkt, tol)


def finite_diff_sensitivity(
    case: CaseData,
    loads=None,
    bus: int | None = None,
    period: int = 0,
    eps: float = 1e-4,
    ptdf: PtdfMatrix | None = None,
) -> np.ndarray:
    """Central-difference ``dx/db`` column from two full re-solves.

    ``period`` is zero-based.  Where the bus demand is below ``eps`` the
    stencil moves to ``(b + eps, b + 3 eps)``.  Raises :class:`BreakpointStraddleError` when
    the two solves do not share a binding set.
    """
    ptdf = build_ptdf(case) if ptdf is None else ptdf
    loads = case.load_matrix() if loads is None else np.atleast_2d(np.asarray(loads, dtype=float))
    idx = case.bus_index
    if bus not in idx:
        raise KeyError(f"unknown bus {bus}")
    if not 0 <= period < loads.shape[0]:
        raise KeyError(f"unknown period {period}")
    step = np.zeros(case.n_buses)
    step[idx[bus]] = eps
    base = loads[period]
    if base[idx[bus]] >= eps:
        below, above = base - step, base + step
    else:
        # no demand to take away: forward stencil on (b + eps, b + 3 eps)
        below, above = base + step, base + 3.0 * step
    lo = solve_lp(assemble_period_lp(case, ptdf, below, period))
    hi = solve_lp(assemble_period_lp(case, ptdf, above, period))
    if binding_key(lo) != binding_key(hi):
        raise BreakpointStraddleError(
            f"breakpoint straddled at bus {bus}, period {period + 1}: reduce eps or move base point"
        )
    return (hi.x - lo.x) / (2.0 * eps)
