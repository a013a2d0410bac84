"""Marginal and average locational emission metrics.

LMCE is the emission-weighted demand sensitivity ``K @ dx/db``.  LACE is the
average of LMCE along the ray ``sigma * b*`` for ``sigma`` in ``[0, 1]``; since
LMCE is piecewise constant on that ray, the average is an exact weighted sum
once the critical-region boundaries (breakpoints) are known.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .clearing import MarketClearing, assemble_period_lp, binding_key, solve_lp
from .errors import DegeneracyError
from .grid import CaseData, PtdfMatrix, build_ptdf
from .sensitivity import (
    DEFAULT_SVD_TOL,
    KktSystem,
    SensitivityResult,
    SvdDiagnostics,
    assemble_kkt_lp,
    solve_sensitivity,
)

__all__ = [
    "LmceResult",
    "LaceResult",
    "ConservationReport",
    "total_emission",
    "compute_lmce",
    "decompose_lmce",
    "case_lmce",
    "find_breakpoints",
    "compute_lace",
    "compute_lace_riemann",
    "verify_conservation",
]

DEFAULT_SIGMA_TOL = 1e-7
DEFAULT_SEED_POINTS = 64
DEFAULT_MAX_BREAKPOINTS = 64
# smallest load scale probed; critical regions narrower than this at the origin are not resolved
_SIGMA_FLOOR = 1e-6
# slack test for region identification, far tighter than the reporting flags so that
# a row about to bind is not seen as a separate region just before the breakpoint
_REGION_RTOL = 1e-11
_KEEP_BASES = 6


@dataclass(frozen=True)
class LmceResult:
    """LMCE in tCO2/MWh; arrays are ``(n_buses,)`` for one period or ``(periods, n_buses)``."""

    value: np.ndarray
    energy_part: np.ndarray | None = None
    network_part: np.ndarray | None = None
    diagnostics: tuple[SvdDiagnostics, ...] = ()


@dataclass(frozen=True)
class LaceResult:
    value: np.ndarray
    allocation: np.ndarray
    breakpoints: list = field(default_factory=list)
    segment_lmce: list = field(default_factory=list)


@dataclass(frozen=True)
class ConservationReport:
    allocated: float
    actual: float
    relative_gap: float

    @property
    def absolute_gap(self) -> float:
        return abs(self.allocated - self.actual)


def total_emission(K, x) -> float:
    """Total emission ``sum K_g x_g`` (tCO2); ``x`` may stack several periods."""
    K = np.asarray(K, dtype=float)
    x = np.asarray(x, dtype=float)
    return float(np.sum(x @ K)) if x.ndim > 1 else float(K @ x)


def compute_lmce(K, sensitivity: SensitivityResult) -> np.ndarray:
    """LMCE per bus for one period."""
    return np.asarray(K, dtype=float) @ sensitivity.dx_db


def decompose_lmce(K, kkt: KktSystem, sensitivity: SensitivityResult) -> LmceResult:
    """Split LMCE into a balance-driven and a congestion-driven part.

    Both parts reuse the pseudoinverse already held by ``sensitivity``; the
    energy part answers the balance-only right-hand side, the network part
    answers the bound-shift terms.
    """
    K = np.asarray(K, dtype=float)
    sx = kkt.blocks["x"]
    energy = K @ sensitivity.apply(kkt.rhs_energy)[sx]
    network = K @ sensitivity.apply(kkt.rhs_network)[sx]
    return LmceResult(
        value=compute_lmce(K, sensitivity),
        energy_part=energy,
        network_part=network,
        diagnostics=(sensitivity.svd,),
    )


def case_lmce(clearing: MarketClearing, svd_tol: float = DEFAULT_SVD_TOL) -> LmceResult:
    """Decomposed LMCE for every period of a cleared case."""
    K = clearing.case.emission_factors()
    parts = []
    for problem, solution in zip(clearing.problems, clearing.solutions):
        kkt = assemble_kkt_lp(problem, solution)
        parts.append(decompose_lmce(K, kkt, solve_sensitivity(kkt, svd_tol)))
    return LmceResult(
        value=np.array([p.value for p in parts]),
        energy_part=np.array([p.energy_part for p in parts]),
        network_part=np.array([p.network_part for p in parts]),
        diagnostics=tuple(p.diagnostics[0] for p in parts),
    )


def _region_key(problem, solution):
    tol_u = _REGION_RTOL * np.maximum(1.0, np.abs(problem.upper))
    tol_l = _REGION_RTOL * np.maximum(1.0, np.abs(problem.lower))
    return tuple(np.flatnonzero(solution.w1 <= tol_u)), tuple(np.flatnonzero(solution.w2 <= tol_l))


class _Ray:
    """Clears one period along ``sigma * demand`` and memoizes LMCE per critical region."""

    def __init__(self, case, ptdf, demand, period, svd_tol):
        self.case = case
        self.ptdf = ptdf
        self.demand = np.asarray(demand, dtype=float)
        self.period = period
        self.svd_tol = svd_tol
        self.K = case.emission_factors()
        self._bases = []
        self._lmce_cache = {}
        # bounds and balance are affine in sigma; the matrices never change
        self._base = assemble_period_lp(case, ptdf, np.zeros_like(self.demand), period)
        full = assemble_period_lp(case, ptdf, self.demand, period)
        self._slope = (full.b, full.upper - self._base.upper, full.lower - self._base.lower)

    def problem(self, sigma):
        db, du, dl = self._slope
        p = self._base
        return replace(p, b=sigma * db, upper=p.upper + sigma * du, lower=p.lower + sigma * dl)

    def solve(self, sigma):
        problem = self.problem(sigma)
        solution = solve_lp(problem, warm_bases=self._bases)
        # most recent first; bisection alternates between a handful of regions
        self._bases = [solution.basis] + [b for b in self._bases if b != solution.basis][: _KEEP_BASES - 1]
        return problem, solution

    def key(self, sigma):
        return _region_key(*self.solve(sigma))

    def lmce(self, sigma):
        problem, solution = self.solve(sigma)
        # dx/db depends on the multipliers only through which of them are positive
        key = (binding_key(solution), tuple(solution.psi > 0), tuple(solution.phi > 0))
        if key not in self._lmce_cache:
            kkt = assemble_kkt_lp(problem, solution)
            self._lmce_cache[key] = compute_lmce(self.K, solve_sensitivity(kkt, self.svd_tol))
        return self._lmce_cache[key]


def _intersect(left_anchor, left, right, right_anchor):
    """Load scale where the affine dispatch pieces on either side of a bracket meet.

    Each argument is ``(sigma, x)``.  Falls back to the bracket midpoint when
    a slope is unavailable or both sides share the same slope.
    """
    (a, xa), (lo, xlo), (hi, xhi), (b, xb) = left_anchor, left, right, right_anchor
    mid = 0.5 * (lo + hi)
    if lo - a <= 0 or b - hi <= 0:
        return mid
    gl = (xlo - xa) / (lo - a)
    gr = (xb - xhi) / (b - hi)
    dg = gl - gr
    denom = float(dg @ dg)
    if denom <= 1e-18 * max(1.0, float(gl @ gl)):
        return mid
    num = xhi - xlo + lo * gl - hi * gr
    sigma = float(dg @ num) / denom
    return sigma if lo <= sigma <= hi else mid


def _ray_breakpoints(ray: _Ray, tol, seed_points, cap):
    seeds = [_SIGMA_FLOOR] + [k / seed_points for k in range(1, seed_points + 1)]
    points = []
    for sig in seeds:
        problem, sol = ray.solve(sig)
        points.append((sig, _region_key(problem, sol), sol.x))
    found = []

    # lo/hi are (sigma, key, x); la/rb are the farthest known points sharing lo's / hi's key
    def refine(lo, hi, la, rb):
        if len(found) > cap:
            return
        if hi[0] - lo[0] <= tol:
            found.append(_intersect((la[0], la[2]), (lo[0], lo[2]), (hi[0], hi[2]), (rb[0], rb[2])))
            return
        sig = 0.5 * (lo[0] + hi[0])
        problem, sol = ray.solve(sig)
        mid = (sig, _region_key(problem, sol), sol.x)
        if mid[1] == lo[1]:
            refine(mid, hi, la, rb)
        elif mid[1] == hi[1]:
            refine(lo, mid, la, rb)
        else:
            refine(lo, mid, la, mid)
            refine(mid, hi, mid, rb)

    for lo, hi in zip(points, points[1:]):
        if lo[1] != hi[1]:
            refine(lo, hi, lo, hi)
        if len(found) > cap:
            break

    merged = []
    for bp in sorted(found):
        if bp <= tol or bp >= 1.0 - tol:
            continue
        if merged and bp - merged[-1] <= 2 * tol:
            continue
        merged.append(bp)
    if len(merged) > cap:
        raise DegeneracyError(
            f"excessive degeneracy: more than {cap} breakpoints in period {ray.period + 1}"
        )
    return np.array([0.0] + merged + [1.0])


def find_breakpoints(
    case: CaseData,
    loads=None,
    tol_sigma: float = DEFAULT_SIGMA_TOL,
    seed_points: int = DEFAULT_SEED_POINTS,
    max_breakpoints: int = DEFAULT_MAX_BREAKPOINTS,
    ptdf: PtdfMatrix | None = None,
) -> list[np.ndarray]:
    """Load-scale values where the optimal binding set changes, one array per period.

    The ray ``sigma * b*`` is scanned on a uniform seed grid (plus a point
    just above zero); every seed interval whose end points disagree on the
    binding set is bisected down to ``tol_sigma``, then the breakpoint is placed
where the affine dispatch pieces of the two neighbouring regions intersect
(dispatch is piecewise affine in ``sigma``).  Each returned array starts
    at 0 and ends at 1.  Two region changes inside one seed interval that
    restore the original binding set are not detected.
    """
    if seed_points < 1:
        raise ValueError("seed_points must be positive")
    ptdf = build_ptdf(case) if ptdf is None else ptdf
    loads = case.load_matrix() if loads is None else np.atleast_2d(np.asarray(loads, dtype=float))
    return [
        _ray_breakpoints(_Ray(case, ptdf, loads[t], t, DEFAULT_SVD_TOL), tol_sigma, seed_points, max_breakpoints)
        for t in range(loads.shape[0])
    ]


def _finish_lace(value, loads, breakpoints, segments):
    allocation = np.where(loads > 0, value * loads, 0.0)
    return LaceResult(value=value, allocation=allocation, breakpoints=breakpoints, segment_lmce=segments)


def compute_lace(
    case: CaseData,
    loads=None,
    breakpoints: list | None = None,
    svd_tol: float = DEFAULT_SVD_TOL,
    ptdf: PtdfMatrix | None = None,
    **breakpoint_options,
) -> LaceResult:
    """LACE as the breakpoint-weighted sum of segment LMCE.

    Each segment's LMCE is evaluated at its midpoint.  For a bus without
    demand the allocation is 0 and the value is the same weighted sum
    (the limit of the average as the bus demand tends to zero).
    """
    ptdf = build_ptdf(case) if ptdf is None else ptdf
    loads = case.load_matrix() if loads is None else np.atleast_2d(np.asarray(loads, dtype=float))
    if breakpoints is None:
        breakpoints = find_breakpoints(case, loads, ptdf=ptdf, **breakpoint_options)
    value = np.zeros_like(loads)
    segments = []
    for t in range(loads.shape[0]):
        ray = _Ray(case, ptdf, loads[t], t, svd_tol)
        y = np.asarray(breakpoints[t], dtype=float)
        seg = np.array([ray.lmce(0.5 * (a + b)) for a, b in zip(y[:-1], y[1:])])
        value[t] = np.diff(y) @ seg
        segments.append(seg)
    return _finish_lace(value, loads, list(breakpoints), segments)


def compute_lace_riemann(
    case: CaseData,
    loads=None,
    n_points: int = 10_000,
    svd_tol: float = DEFAULT_SVD_TOL,
    ptdf: PtdfMatrix | None = None,
) -> LaceResult:
    """Midpoint-rule average of LMCE over a uniform grid of ``n_points`` load scales."""
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    ptdf = build_ptdf(case) if ptdf is None else ptdf
    loads = case.load_matrix() if loads is None else np.atleast_2d(np.asarray(loads, dtype=float))
    grid = (np.arange(n_points) + 0.5) / n_points
    value = np.zeros_like(loads)
    segments = []
    for t in range(loads.shape[0]):
        ray = _Ray(case, ptdf, loads[t], t, svd_tol)
        samples = np.array([ray.lmce(s) for s in grid])
        value[t] = samples.mean(axis=0)
        segments.append(samples)
    edges = np.linspace(0.0, 1.0, n_points + 1)
    return _finish_lace(value, loads, [edges] * loads.shape[0], segments)


def verify_conservation(lace: LaceResult, loads, actual: float) -> ConservationReport:
    """Compare the demand-side LACE allocation with the generation-side emission."""
    allocated = float(np.sum(np.asarray(lace.value) * np.asarray(loads)))
    gap = abs(allocated - actual) / max(abs(actual), 1e-12) if actual != 0 else abs(allocated)
    return ConservationReport(allocated=allocated, actual=float(actual), relative_gap=gap)
