"""Test-only utilities: random small grids and a brute-force QP solver."""

from __future__ import annotations

import itertools

import numpy as np

from lmce.clearing import ClearingProblem, ClearingSolution, clear_market
from lmce.errors import InfeasibleError
from lmce.grid import Bus, CaseData, Generator, Line, LoadProfile


def random_case(seed: int) -> CaseData:
    """Connected 3-6 bus, 2-4 generator single-period case that clears feasibly."""
    rng = np.random.default_rng(seed)
    n_bus = int(rng.integers(3, 7))
    n_gen = int(rng.integers(2, 5))
    edges = {(int(rng.integers(0, i)), i) for i in range(1, n_bus)}
    for _ in range(int(rng.integers(0, n_bus))):
        a, b = sorted(rng.choice(n_bus, 2, replace=False).tolist())
        edges.add((a, b))
    lines = tuple(
        Line(a + 1, b + 1, float(rng.uniform(0.05, 0.5)), float(rng.uniform(20, 120)))
        for a, b in sorted(edges)
    )
    bids = rng.permutation(np.linspace(8, 60, n_gen)) + rng.uniform(0, 1, n_gen)
    gens = tuple(
        Generator(
            f"G{g + 1}",
            int(rng.integers(1, n_bus + 1)),
            float(rng.uniform(50, 200)),
            float(bids[g]),
            float(rng.uniform(0.0, 1.2)),
        )
        for g in range(n_gen)
    )
    demand = np.where(rng.random(n_bus) < 0.75, rng.uniform(5, 60, n_bus), 0.0)
    if demand.sum() == 0:
        demand[-1] = 20.0
    cap = sum(g.pmax_mw for g in gens)
    demand *= min(1.0, 0.8 * cap / demand.sum())
    base = CaseData(
        name=f"random-{seed}",
        periods=1,
        slack_bus=1,
        buses=tuple(Bus(i + 1) for i in range(n_bus)),
        lines=lines,
        generators=gens,
        loads=(),
    )
    for _ in range(30):
        case = base.with_loads(demand[None, :], name=base.name)
        try:
            clear_market(case)
            return case
        except InfeasibleError:
            demand *= 0.7
    raise RuntimeError("could not build a feasible random case")


def solve_qp_enumeration(Q, problem: ClearingProblem, tol=1e-9) -> ClearingSolution:
    """Solve ``min 0.5 x'Qx + c'x`` over the clearing constraints by trying every active set.

    Each inequality row is treated as inactive, at its upper bound or at its
    lower bound; the equality-constrained KKT system of each combination is
    solved and the best primal/dual-feasible candidate kept.  Only usable for
    a handful of rows.
    """
    Q = np.asarray(Q, dtype=float)
    A, B, c = problem.A, problem.B, problem.c
    n, me, m = c.size, A.shape[0], B.shape[0]
    best = None
    for pattern in itertools.product((0, 1, -1), repeat=m):
        up = [j for j, s in enumerate(pattern) if s == 1]
        lo = [j for j, s in enumerate(pattern) if s == -1]
        k = me + len(up) + len(lo)
        K = np.zeros((n + k, n + k))
        rhs = np.zeros(n + k)
        K[:n, :n] = Q
        rhs[:n] = -c
        rows = [(A[i], problem.b[i], -1.0) for i in range(me)]
        rows += [(B[j], problem.upper[j], 1.0) for j in up]
        rows += [(B[j], problem.lower[j], -1.0) for j in lo]
        for r, (row, bound, sign) in enumerate(rows):
            # stationarity: Qx + c - A'pi + B_U' psi - B_L' phi = 0
            K[:n, n + r] = sign * row
            K[n + r, :n] = row
            rhs[n + r] = bound
        sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
        if np.max(np.abs(K @ sol - rhs)) > 1e-8:
            continue
        x = sol[:n]
        mult = sol[n:]
        psi = np.zeros(m)
        phi = np.zeros(m)
        psi[up] = mult[me : me + len(up)]
        phi[lo] = mult[me + len(up) :]
        flow = B @ x
        if np.any(flow > problem.upper + tol) or np.any(flow < problem.lower - tol):
            continue
        if np.any(psi < -tol) or np.any(phi < -tol):
            continue
        obj = 0.5 * x @ Q @ x + c @ x
        if best is None or obj < best[0] - 1e-12:
            best = (obj, x, mult[:me], np.maximum(psi, 0), np.maximum(phi, 0))
    if best is None:
        raise InfeasibleError("QP infeasible")
    obj, x, pi, psi, phi = best
    flow = B @ x
    w1 = np.maximum(problem.upper - flow, 0.0)
    w2 = np.maximum(flow - problem.lower, 0.0)
    return ClearingSolution(
        x=x,
        pi=pi,
        psi=psi,
        phi=phi,
        w1=w1,
        w2=w2,
        objective=float(obj),
        binding_upper=w1 < 1e-7,
        binding_lower=w2 < 1e-7,
    )
