"""Dense bounded-variable primal simplex with Bland's rule.

Solves::

    min  c @ y   s.t.  M @ y = r,   lo <= y <= hi

where bounds may be infinite.  A two-phase method with one artificial per
row is used; entering and leaving choices follow Bland's smallest-index rule
so the pivot sequence is deterministic and cannot cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, NumericalError, UnboundedError

_FEAS_TOL = 1e-9
_OPT_TOL = 1e-10
_PIVOT_TOL = 1e-11


@dataclass
class SimplexResult:
    y: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    basis: tuple[int, ...]
    iterations: int


def _nonbasic_start(lo, hi):
    y = np.zeros_like(lo)
    fin_lo = np.isfinite(lo)
    fin_hi = np.isfinite(hi)
    y[fin_lo] = lo[fin_lo]
    only_hi = ~fin_lo & fin_hi
    y[only_hi] = hi[only_hi]
    return y


class _Simplex:
    def __init__(self, M, r, lo, hi):
        self.M = M
        self.r = r
        self.lo = lo
        self.hi = hi
        self.m, self.n = M.shape
        self.iterations = 0

    def basic_values(self, basis, y):
        nb = np.ones(self.n, dtype=bool)
        nb[basis] = False
        rhs = self.r - self.M[:, nb] @ y[nb]
        return np.linalg.solve(self.M[:, basis], rhs)

    def run(self, cost, basis, y, max_iter):
        """Iterate from a primal-feasible basis until optimal."""
        M, lo, hi = self.M, self.lo, self.hi
        scale = max(1.0, float(np.max(np.abs(cost)))) if cost.size else 1.0
        basis = list(basis)
        for _ in range(max_iter):
            Bm = M[:, basis]
            duals = np.linalg.solve(Bm.T, cost[basis])
            d = cost - M.T @ duals
            d[basis] = 0.0

            entering, direction = -1, 0
            tol = _OPT_TOL * scale
            for j in range(self.n):
                if lo[j] == hi[j] or d[j] == 0.0:
                    continue
                at_lo = np.isfinite(lo[j]) and y[j] <= lo[j]
                at_hi = np.isfinite(hi[j]) and y[j] >= hi[j]
                free = not at_lo and not at_hi
                if d[j] < -tol and (at_lo or free):
                    entering, direction = j, 1
                    break
                if d[j] > tol and (at_hi or free):
                    entering, direction = j, -1
                    break
            if entering < 0:
                return basis, y, duals, d

            alpha = np.linalg.solve(Bm, M[:, entering])
            yb = y[basis]
            step = np.inf
            leave_pos, leave_bound = -1, None
            if np.isfinite(lo[entering]) and np.isfinite(hi[entering]):
                step = hi[entering] - lo[entering]
            # basic change per unit step: -direction * alpha
            rate = -direction * alpha
            for pos in range(self.m):
                a = rate[pos]
                if abs(a) <= _PIVOT_TOL:
                    continue
                b = basis[pos]
                if a < 0:
                    if not np.isfinite(lo[b]):
                        continue
                    t, bound = max(yb[pos] - lo[b], 0.0) / -a, lo[b]
                else:
                    if not np.isfinite(hi[b]):
                        continue
                    t, bound = max(hi[b] - yb[pos], 0.0) / a, hi[b]
                if t < step - 1e-12 or (
                    leave_pos >= 0 and abs(t - step) <= 1e-12 and b < basis[leave_pos]
                ):
                    step, leave_pos, leave_bound = t, pos, bound
            if not np.isfinite(step):
                raise UnboundedError("clearing LP is unbounded")

            y = y.copy()
            y[basis] = yb + step * rate
            y[entering] = y[entering] + direction * step
            if leave_pos >= 0:
                leaving = basis[leave_pos]
                y[leaving] = leave_bound
                basis[leave_pos] = entering
            else:
                y[entering] = hi[entering] if direction > 0 else lo[entering]
            self.iterations += 1
        raise NumericalError("simplex iteration limit reached")


def solve_bounded_lp(c, M, r, lo, hi, *, warm_basis=None, warm_bases=(), max_iter=5000) -> SimplexResult:
    """Solve the bounded-variable LP described in the module docstring.

    ``warm_basis`` (a tuple of column indices from an earlier solve of a
    problem with the same matrix) is tried first, then each of
    ``warm_bases`` in order; if none is primal feasible and dual optimal for
    the new data, a cold two-phase solve runs.

    Raises
    ------
    InfeasibleError
        With ``row`` set to the equality row carrying the largest residual
        artificial after phase one.
    """
    c = np.asarray(c, dtype=float)
    M = np.asarray(M, dtype=float)
    r = np.asarray(r, dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    m, n = M.shape

    crossed = np.flatnonzero(lo > hi)
    if crossed.size:
        j = int(crossed[0])
        rows = np.flatnonzero(M[:, j])
        raise InfeasibleError(
            f"clearing LP infeasible (variable {j} has lower bound above upper bound)",
            row=int(rows[0]) if rows.size else 0,
        )

    candidates = ([warm_basis] if warm_basis is not None else []) + list(warm_bases)
    for basis in candidates:
        res = _try_warm(c, M, r, lo, hi, basis)
        if res is not None:
            return res

    y0 = _nonbasic_start(lo, hi)
    resid = r - M @ y0
    signs = np.where(resid < 0, -1.0, 1.0)
    Mx = np.hstack([M, np.diag(signs)])
    lo_x = np.concatenate([lo, np.zeros(m)])
    hi_x = np.concatenate([hi, np.full(m, np.inf)])
    y = np.concatenate([y0, np.abs(resid)])
    basis = list(range(n, n + m))

    solver = _Simplex(Mx, r, lo_x, hi_x)
    phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
    basis, y, _, _ = solver.run(phase1_cost, basis, y, max_iter)
    y[basis] = solver.basic_values(basis, y)
    art = y[n:]
    scale = max(1.0, float(np.max(np.abs(r)))) if m else 1.0
    if np.sum(art) > _FEAS_TOL * scale * max(1, m):
        row = int(np.argmax(art))
        raise InfeasibleError(f"clearing LP infeasible (row {row} cannot be satisfied)", row=row)

    # artificials stay in the problem fixed at zero
    solver.hi = np.concatenate([hi, np.zeros(m)])
    y[n:] = 0.0
    phase2_cost = np.concatenate([c, np.zeros(m)])
    basis, y, duals, d = solver.run(phase2_cost, basis, y, max_iter)
    y[basis] = solver.basic_values(basis, y)
    return SimplexResult(
        y=y[:n].copy(),
        duals=duals,
        reduced_costs=d[:n].copy(),
        basis=tuple(basis),
        iterations=solver.iterations,
    )


def _try_warm(c, M, r, lo, hi, basis):
    m, n = M.shape
    basis = list(basis)
    if len(basis) != m or any(b >= n + m for b in basis):
        return None
    Mx = np.hstack([M, np.eye(m)])
    lo_x = np.concatenate([lo, np.zeros(m)])
    hi_x = np.concatenate([hi, np.zeros(m)])
    cost = np.concatenate([c, np.zeros(m)])
    Bm = Mx[:, basis]
    try:
        duals = np.linalg.solve(Bm.T, cost[basis])
    except np.linalg.LinAlgError:
        return None
    d = cost - Mx.T @ duals
    d[basis] = 0.0
    scale = max(1.0, float(np.max(np.abs(c)))) if c.size else 1.0
    tol = _OPT_TOL * scale

    # nonbasics sit at the bound consistent with their reduced-cost sign
    nb = np.ones(n + m, dtype=bool)
    nb[basis] = False
    fixed = lo_x == hi_x
    at_lo = nb & ~fixed & (d > tol)
    at_hi = nb & ~fixed & (d < -tol)
    if np.any(~np.isfinite(lo_x[at_lo])) or np.any(~np.isfinite(hi_x[at_hi])):
        return None
    free = nb & ~fixed & ~at_lo & ~at_hi
    y = np.zeros(n + m)
    y[fixed] = lo_x[fixed]
    y[at_lo] = lo_x[at_lo]
    y[at_hi] = hi_x[at_hi]
    lo_ok = free & np.isfinite(lo_x)
    hi_ok = free & ~lo_ok & np.isfinite(hi_x)
    y[lo_ok] = lo_x[lo_ok]
    y[hi_ok] = hi_x[hi_ok]
    y[basis] = 0.0
    y[basis] = np.linalg.solve(Bm, r - Mx[:, nb] @ y[nb])
    yb = y[basis]
    ftol = _FEAS_TOL * max(1.0, float(np.max(np.abs(r)))) if m else _FEAS_TOL
    if np.any(yb < lo_x[basis] - ftol) or np.any(yb > hi_x[basis] + ftol):
        return None
    return SimplexResult(y=y[:n].copy(), duals=duals, reduced_costs=d[:n].copy(), basis=tuple(basis), iterations=0)
