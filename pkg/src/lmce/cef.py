"""Carbon emission flow baseline under proportional sharing.

Every bus is a perfect mixer: the carbon intensity of the power leaving a
bus (to lines or to its load) equals the intensity of everything entering it
(local generation plus inflows).  Branch intensity is the intensity of the
sending bus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .grid import CaseData, PtdfMatrix

__all__ = ["CefResult", "compute_flows", "cef_solve"]

_ZERO_MW = 1e-9


@dataclass(frozen=True)
class CefResult:
    """Arrays are ``(periods, n_buses)`` or ``(periods, n_lines)``."""

    nci: np.ndarray
    bci: np.ndarray
    allocation: np.ndarray
    flows: np.ndarray


def compute_flows(ptdf: PtdfMatrix, generation, loads) -> np.ndarray:
    """Signed line flows (from -> to) for nodal generation and demand.

    ``generation`` and ``loads`` are per-bus MW, shape ``(n_buses,)`` or
    ``(periods, n_buses)``.
    """
    generation = np.asarray(generation, dtype=float)
    loads = np.asarray(loads, dtype=float)
    injection = generation - loads
    imbalance = np.abs(injection.sum(axis=-1))
    scale = np.maximum(1.0, np.abs(loads).sum(axis=-1))
    if np.any(imbalance > 1e-8 * scale):
        raise ValueError(f"injections are not balanced (mismatch {float(np.max(imbalance)):.3g} MW)")
    return ptdf.flows(injection)


def _period_nci(case, gen_mw, gen_emission, flows, demand):
    n = case.n_buses
    idx = case.bus_index
    mixing = np.diag(gen_mw.copy())
    for l, ln in enumerate(case.lines):
        f = flows[l]
        if f > 0:
            src, dst = idx[ln.from_bus], idx[ln.to_bus]
        elif f < 0:
            src, dst = idx[ln.to_bus], idx[ln.from_bus]
        else:
            continue
        mixing[dst, dst] += abs(f)
        mixing[dst, src] -= abs(f)
    rhs = gen_emission.copy()
    throughput = np.diag(mixing).copy()
    idle = throughput <= _ZERO_MW
    for i in np.flatnonzero(idle):
        if demand[i] > _ZERO_MW:
            raise NumericalError(f"singular mixing system: bus {case.bus_ids[i]} has load but no supply")
        # nothing passes through: intensity is undefined, report 0
        mixing[i, :] = 0.0
        mixing[i, i] = 1.0
        rhs[i] = 0.0
    try:
        return np.linalg.solve(mixing, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular mixing system") from exc


def cef_solve(case: CaseData, dispatch, flows, loads=None) -> CefResult:
    """Nodal and branch carbon intensities for a dispatch and its flows.

    Parameters
    ----------
    dispatch : array, shape (periods, n_generators)
    flows : array, shape (periods, n_lines)
    loads : array, shape (periods, n_buses), optional
        Defaults to the case profiles.
    """
    dispatch = np.atleast_2d(np.asarray(dispatch, dtype=float))
    flows = np.atleast_2d(np.asarray(flows, dtype=float))
    loads = case.load_matrix() if loads is None else np.atleast_2d(np.asarray(loads, dtype=float))
    inc = case.generator_incidence()
    k = case.emission_factors()
    idx = case.bus_index
    send = np.array([[idx[ln.from_bus], idx[ln.to_bus]] for ln in case.lines], dtype=int).reshape(-1, 2)

    T = dispatch.shape[0]
    nci = np.zeros((T, case.n_buses))
    bci = np.zeros((T, len(case.lines)))
    for t in range(T):
        nci[t] = _period_nci(case, inc @ dispatch[t], inc @ (k * dispatch[t]), flows[t], loads[t])
        if len(case.lines):
            sender = np.where(flows[t] >= 0, send[:, 0], send[:, 1])
            bci[t] = np.where(np.abs(flows[t]) > _ZERO_MW, nci[t][sender], 0.0)
    return CefResult(nci=nci, bci=bci, allocation=nci * loads, flows=flows)
