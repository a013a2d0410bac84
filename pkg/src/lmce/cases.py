"""Built-in study cases.

``paper-3bus``
    Three buses in a triangle.  G1 (bus 1): 200 MW, 10/MWh, 0.2 tCO2/MWh.
    G3 (bus 3): 100 MW, 30/MWh, 0.8 tCO2/MWh.  Reactances x12 = 2, x23 = 1,
    x13 = 1 (only the ratios x12 = 2 x23, x23 = x13 are fixed).  Line 2-3 is
    limited to 25 MW; lines 1-2 and 1-3 get 1000 MW so they never bind.
    Demand 10 MW at bus 2 and 150 MW at bus 3 for a single period.  Slack is
    bus 1.

``synthetic-6bus-24h``
    The 11-line, 6-bus topology of the classic Wood & Wollenberg test system
    (reactances in ohm-like units) with this package's own ratings, bids and
    emission factors.  Three units: G1 at bus 1 is cheap and carbon-heavy
    (260 MW, 12/MWh, 0.95 t/MWh), G2 at bus 2 is mid-merit and clean
    (150 MW, 22/MWh, 0.40 t/MWh), G3 at bus 3 is expensive peaker
    (180 MW, 38/MWh, 0.62 t/MWh).  Demand sits at buses 4-6 and follows a
    daily shape.  Lines 1-2 (80 MW) and 1-4 (86 MW) are the bottlenecks:
    overnight hours (1-8, 23-24) clear without congestion and G1 is
    marginal everywhere; hours 9-22 congest one of the two lines, pulling G2
    in and spreading LMCE across buses.
"""

from __future__ import annotations

from .errors import CaseValidationError
from .grid import Bus, CaseData, Generator, Line, LoadProfile

__all__ = ["BUILTIN_CASES", "builtin_case"]


def _paper_3bus() -> CaseData:
    return CaseData(
        name="paper-3bus",
        periods=1,
        slack_bus=1,
        buses=(Bus(1), Bus(2), Bus(3)),
        lines=(
            Line(1, 2, 2.0, 1000.0),
            Line(2, 3, 1.0, 25.0),
            Line(1, 3, 1.0, 1000.0),
        ),
        generators=(
            Generator("G1", 1, 200.0, 10.0, 0.2),
            Generator("G3", 3, 100.0, 30.0, 0.8),
        ),
        loads=(LoadProfile(2, (10.0,)), LoadProfile(3, (150.0,))),
    )


_SIX_LINES = (
    (1, 2, 0.20, 80.0),
    (1, 4, 0.20, 86.0),
    (1, 5, 0.30, 90.0),
    (2, 3, 0.25, 60.0),
    (2, 4, 0.10, 100.0),
    (2, 5, 0.30, 60.0),
    (2, 6, 0.20, 90.0),
    (3, 5, 0.26, 70.0),
    (3, 6, 0.10, 100.0),
    (4, 5, 0.40, 40.0),
    (5, 6, 0.30, 40.0),
)

_SIX_LOADS = {
    4: (55.8, 52.9, 51.7, 51.3, 52.6, 56.6, 66.1, 77.4, 86.4, 91.3, 92.2, 93.0,
        90.0, 87.1, 85.1, 85.9, 89.5, 94.2, 95.8, 92.5, 86.1, 78.1, 68.4, 60.4),
    5: (58.9, 56.5, 55.5, 54.9, 55.5, 58.4, 66.5, 76.0, 83.6, 88.4, 90.9, 94.5,
        95.0, 95.4, 96.1, 98.8, 103.1, 107.1, 106.4, 100.0, 90.9, 81.2, 70.9, 63.0),
    6: (52.7, 51.0, 50.0, 48.4, 47.6, 49.2, 56.5, 67.2, 78.2, 86.2, 89.2, 89.8,
        85.0, 80.4, 78.3, 81.2, 88.4, 96.8, 100.0, 95.0, 85.0, 73.8, 63.0, 55.8),
}


def _synthetic_6bus() -> CaseData:
    return CaseData(
        name="synthetic-6bus-24h",
        periods=24,
        slack_bus=1,
        buses=tuple(Bus(i) for i in range(1, 7)),
        lines=tuple(Line(*spec) for spec in _SIX_LINES),
        generators=(
            Generator("G1", 1, 260.0, 12.0, 0.95),
            Generator("G2", 2, 150.0, 22.0, 0.40),
            Generator("G3", 3, 180.0, 38.0, 0.62),
        ),
        loads=tuple(LoadProfile(bus, mw) for bus, mw in _SIX_LOADS.items()),
    )


BUILTIN_CASES = {
    "paper-3bus": _paper_3bus,
    "synthetic-6bus-24h": _synthetic_6bus,
}


def builtin_case(name: str) -> CaseData:
    try:
        factory = BUILTIN_CASES[name]
    except KeyError:
        raise CaseValidationError(
            f"unknown builtin case {name!r}; choose from {sorted(BUILTIN_CASES)}"
        ) from None
    return factory()
