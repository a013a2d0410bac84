"""Bid-cost-minimizing DC market clearing.

Each period is an independent LP over the generator dispatch ``x``::

    min  c @ x
    s.t. A @ x = b                      (power balance, dual pi)
         v(b) <= B @ x <= u(b)          (lines, then generator capacity;
                                         duals phi for the lower side,
                                         psi for the upper side)

Line rows are ``PTDF @ gen_incidence`` with bounds ``+/-capacity +
PTDF @ demand``; capacity rows are ``0 <= x_g <= pmax_g`` and do not move
with demand.  Stationarity is ``c = A.T pi - B.T psi + B.T phi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError
from .grid import CaseData, PtdfMatrix, build_ptdf
from .simplex import solve_bounded_lp

__all__ = [
    "ClearingProblem",
    "ClearingSolution",
    "MarketClearing",
    "assemble_clearing_lp",
    "assemble_period_lp",
    "solve_lp",
    "clear_market",
    "binding_key",
]

BINDING_RTOL = 1e-7


@dataclass(frozen=True)
class ClearingProblem:
    """One period of the clearing LP plus the bound sensitivities.

    ``du_db`` and ``dv_db`` have one column per bus: the derivative of the
    upper and lower inequality bounds with respect to that bus's demand.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    B: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    du_db: np.ndarray
    dv_db: np.ndarray
    period: int
    n_lines: int
    bus_ids: tuple[int, ...]
    generator_ids: tuple[str, ...]
    row_labels: tuple[str, ...]

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_ineq(self) -> int:
        return self.B.shape[0]


@dataclass(frozen=True)
class ClearingSolution:
    x: np.ndarray
    pi: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    objective: float
    binding_upper: np.ndarray
    binding_lower: np.ndarray
    basis: tuple[int, ...] = ()

    def dual_objective(self, problem: ClearingProblem) -> float:
        total = float(problem.b @ self.pi)
        up = self.psi > 0
        lo = self.phi > 0
        total -= float(problem.upper[up] @ self.psi[up])
        total += float(problem.lower[lo] @ self.phi[lo])
        return total

    def stationarity_residual(self, problem: ClearingProblem, Q=None) -> np.ndarray:
        r = problem.c - problem.A.T @ self.pi + problem.B.T @ (self.psi - self.phi)
        if Q is not None:
            r = r + np.asarray(Q) @ self.x
        return r


@dataclass(frozen=True)
class MarketClearing:
    """Per-period problems and solutions of a whole case."""

    case: CaseData
    ptdf: PtdfMatrix
    loads: np.ndarray
    problems: tuple[ClearingProblem, ...]
    solutions: tuple[ClearingSolution, ...]

    @property
    def dispatch(self) -> np.ndarray:
        """Array of shape ``(periods, n_generators)``."""
        return np.array([s.x for s in self.solutions])

    @property
    def objective(self) -> float:
        return float(sum(s.objective for s in self.solutions))


def assemble_period_lp(
    case: CaseData, ptdf: PtdfMatrix, demand: np.ndarray, period: int = 0
) -> ClearingProblem:
    demand = np.asarray(demand, dtype=float)
    if demand.shape != (case.n_buses,):
        raise ValueError(f"demand must have shape ({case.n_buses},), got {demand.shape}")
    G = len(case.generators)
    nl = len(case.lines)
    inc = case.generator_incidence()
    shift = ptdf.entries @ demand
    cap_l = case.line_capacities()

    B = np.vstack([ptdf.entries @ inc, np.eye(G)])
    upper = np.concatenate([cap_l + shift, case.capacities()])
    lower = np.concatenate([-cap_l + shift, np.zeros(G)])
    dbound = np.vstack([ptdf.entries, np.zeros((G, case.n_buses))])
    labels = tuple(f"line {ln.label}" for ln in case.lines) + tuple(f"capacity {g.id}" for g in case.generators)
    return ClearingProblem(
        c=case.bids(),
        A=np.ones((1, G)),
        b=np.array([demand.sum()]),
        B=B,
        lower=lower,
        upper=upper,
        du_db=dbound,
        dv_db=dbound.copy(),
        period=period,
        n_lines=nl,
        bus_ids=tuple(case.bus_ids),
        generator_ids=tuple(case.generator_ids),
        row_labels=labels,
    )


def assemble_clearing_lp(case: CaseData, ptdf: PtdfMatrix | None = None, loads=None) -> list[ClearingProblem]:
    """Assemble one :class:`ClearingProblem` per period.

    The multi-period problem is block diagonal, so it is kept as a list of
    independent blocks.  ``loads`` defaults to the case's own profiles and
    must have shape ``(periods, n_buses)``.
    """
    ptdf = build_ptdf(case) if ptdf is None else ptdf
    loads = case.load_matrix() if loads is None else np.atleast_2d(np.asarray(loads, dtype=float))
    if loads.shape[1] != case.n_buses:
        raise ValueError(f"loads must have {case.n_buses} columns, got {loads.shape[1]}")
    return [assemble_period_lp(case, ptdf, loads[t], t) for t in range(loads.shape[0])]


def solve_lp(problem: ClearingProblem, warm_basis=None, warm_bases=()) -> ClearingSolution:
    """Solve one clearing block and extract multipliers and slacks.

    Inequality rows become bounded slack columns ``s = B x``; the sign of
    each row dual then separates into the upper (psi) and lower (phi)
    multipliers.
    """
    n = problem.n_vars
    m_eq = problem.A.shape[0]
    m = problem.n_ineq
    M = np.zeros((m_eq + m, n + m))
    M[:m_eq, :n] = problem.A
    M[m_eq:, :n] = problem.B
    M[m_eq:, n:] = -np.eye(m)
    r = np.concatenate([problem.b, np.zeros(m)])
    lo = np.concatenate([np.full(n, -np.inf), problem.lower])
    hi = np.concatenate([np.full(n, np.inf), problem.upper])
    cost = np.concatenate([problem.c, np.zeros(m)])
    try:
        res = solve_bounded_lp(cost, M, r, lo, hi, warm_basis=warm_basis, warm_bases=warm_bases)
    except InfeasibleError as exc:
        row = exc.row
        label = "power balance" if row < m_eq else problem.row_labels[row - m_eq]
        raise InfeasibleError(
            f"period {problem.period + 1}: clearing infeasible, cannot satisfy {label}", row=row
        ) from None

    x = res.y[:n]
    pi = res.duals[:m_eq]
    mu = res.duals[m_eq:]
    psi = np.maximum(-mu, 0.0)
    phi = np.maximum(mu, 0.0)
    flow = problem.B @ x
    w1 = np.maximum(problem.upper - flow, 0.0)
    w2 = np.maximum(flow - problem.lower, 0.0)
    tol_u = BINDING_RTOL * np.maximum(1.0, np.abs(problem.upper))
    tol_l = BINDING_RTOL * np.maximum(1.0, np.abs(problem.lower))
    return ClearingSolution(
        x=x,
        pi=pi,
        psi=psi,
        phi=phi,
        w1=w1,
        w2=w2,
        objective=float(problem.c @ x),
        binding_upper=w1 < tol_u,
        binding_lower=w2 < tol_l,
        basis=res.basis,
    )


def binding_key(solution: ClearingSolution) -> tuple:
    """Hashable description of the binding set of a solution."""
    return tuple(np.flatnonzero(solution.binding_upper)), tuple(np.flatnonzero(solution.binding_lower))


def clear_market(case: CaseData, loads=None, ptdf: PtdfMatrix | None = None) -> MarketClearing:
    """Clear every period of ``case`` block by block."""
    ptdf = build_ptdf(case) if ptdf is None else ptdf
    loads = case.load_matrix() if loads is None else np.atleast_2d(np.asarray(loads, dtype=float))
    problems = assemble_clearing_lp(case, ptdf, loads)
    solutions = [solve_lp(p) for p in problems]
    return MarketClearing(case, ptdf, loads, tuple(problems), tuple(solutions))
