"""Grid data model, JSON case ingestion and DC PTDF construction.

All quantities are in natural units (MW, tCO2/MWh, currency/MWh); there is
no per-unit base because a DC power flow only depends on reactance ratios.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CaseValidationError

__all__ = [
    "Bus",
    "Line",
    "Generator",
    "LoadProfile",
    "CaseData",
    "PtdfMatrix",
    "load_case",
    "parse_case",
    "case_to_dict",
    "dump_case",
    "build_ptdf",
]

_TOP_KEYS = {"name", "periods", "slack_bus", "buses", "lines", "generators", "loads"}
_BUS_KEYS = {"id"}
_LINE_KEYS = {"from", "to", "reactance", "capacity_mw"}
_GEN_KEYS = {"id", "bus", "pmax_mw", "bid_per_mwh", "emission_t_per_mwh"}
_LOAD_KEYS = {"bus", "mw"}


@dataclass(frozen=True)
class Bus:
    id: int


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    reactance: float
    capacity_mw: float

    @property
    def label(self) -> str:
        return f"{self.from_bus}-{self.to_bus}"


@dataclass(frozen=True)
class Generator:
    id: str
    bus: int
    pmax_mw: float
    bid_per_mwh: float
    emission_t_per_mwh: float
    pmin_mw: float = 0.0


@dataclass(frozen=True)
class LoadProfile:
    bus: int
    mw: tuple[float, ...]


@dataclass(frozen=True)
class CaseData:
    """Static description of a grid study case.

    Construction validates every invariant and raises
    :class:`CaseValidationError` naming the first one violated.
    """

    name: str
    periods: int
    slack_bus: int
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    loads: tuple[LoadProfile, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(
            self, "loads", tuple(LoadProfile(lp.bus, tuple(float(v) for v in lp.mw)) for lp in self.loads)
        )
        _validate(self)

    @property
    def bus_ids(self) -> list[int]:
        return [b.id for b in self.buses]

    @property
    def bus_index(self) -> dict[int, int]:
        return {b.id: i for i, b in enumerate(self.buses)}

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    @property
    def generator_ids(self) -> list[str]:
        return [g.id for g in self.generators]

    def load_matrix(self) -> np.ndarray:
        """Nodal demand as an array of shape ``(periods, n_buses)``."""
        out = np.zeros((self.periods, self.n_buses))
        idx = self.bus_index
        for lp in self.loads:
            out[:, idx[lp.bus]] = lp.mw
        return out

    def generator_incidence(self) -> np.ndarray:
        """Bus-by-generator 0/1 matrix mapping dispatch to nodal injection."""
        out = np.zeros((self.n_buses, len(self.generators)))
        idx = self.bus_index
        for g, gen in enumerate(self.generators):
            out[idx[gen.bus], g] = 1.0
        return out

    def emission_factors(self) -> np.ndarray:
        return np.array([g.emission_t_per_mwh for g in self.generators], dtype=float)

    def bids(self) -> np.ndarray:
        return np.array([g.bid_per_mwh for g in self.generators], dtype=float)

    def capacities(self) -> np.ndarray:
        return np.array([g.pmax_mw for g in self.generators], dtype=float)

    def line_capacities(self) -> np.ndarray:
        return np.array([ln.capacity_mw for ln in self.lines], dtype=float)

    def with_loads(self, loads: np.ndarray, name: str | None = None) -> "CaseData":
        """Copy of the case with a new ``(periods, n_buses)`` demand array."""
        loads = np.atleast_2d(np.asarray(loads, dtype=float))
        profiles = tuple(
            LoadProfile(bus_id, tuple(loads[:, i])) for i, bus_id in enumerate(self.bus_ids)
        )
        return CaseData(
            name=name or self.name,
            periods=loads.shape[0],
            slack_bus=self.slack_bus,
            buses=self.buses,
            lines=self.lines,
            generators=self.generators,
            loads=profiles,
        )

    def with_emission_factors(self, k) -> "CaseData":
        gens = tuple(
            Generator(g.id, g.bus, g.pmax_mw, g.bid_per_mwh, float(kg)) for g, kg in zip(self.generators, k)
        )
        return CaseData(self.name, self.periods, self.slack_bus, self.buses, self.lines, gens, self.loads)

    def with_slack(self, slack_bus: int) -> "CaseData":
        return CaseData(
            self.name, self.periods, slack_bus, self.buses, self.lines, self.generators, self.loads
        )


def _fail(msg):
    raise CaseValidationError(msg)


def _validate(case: CaseData) -> None:
    if not isinstance(case.periods, int) or isinstance(case.periods, bool) or case.periods < 1:
        _fail("periods must be a positive integer")
    if not case.buses:
        _fail("case must contain at least one bus")
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        _fail("bus ids must be unique")
    known = set(ids)
    if case.slack_bus not in known:
        _fail(f"slack bus {case.slack_bus} is not a bus of the case")

    for ln in case.lines:
        if not ln.reactance > 0:
            _fail(f"line {ln.label}: reactance must be positive")
        if not ln.capacity_mw > 0:
            _fail(f"line {ln.label}: capacity_mw must be positive")
        if ln.from_bus == ln.to_bus:
            _fail(f"line {ln.label}: from_bus and to_bus must differ")
        for end in (ln.from_bus, ln.to_bus):
            if end not in known:
                _fail(f"line {ln.label}: unknown bus {end}")

    gen_ids = [g.id for g in case.generators]
    if len(set(gen_ids)) != len(gen_ids):
        _fail("generator ids must be unique")
    for g in case.generators:
        if g.bus not in known:
            _fail(f"generator {g.id}: unknown bus {g.bus}")
        if not g.pmax_mw >= 0:
            _fail(f"generator {g.id}: pmax_mw must be non-negative")
        if g.pmin_mw != 0:
            _fail(f"generator {g.id}: pmin_mw is fixed at 0")
        if not g.emission_t_per_mwh >= 0:
            _fail(f"generator {g.id}: emission_t_per_mwh must be non-negative")
        if not np.isfinite(g.bid_per_mwh):
            _fail(f"generator {g.id}: bid_per_mwh must be finite")

    seen = set()
    for lp in case.loads:
        if lp.bus not in known:
            _fail(f"load: unknown bus {lp.bus}")
        if lp.bus in seen:
            _fail(f"load: more than one profile for bus {lp.bus}")
        seen.add(lp.bus)
        if len(lp.mw) != case.periods:
            _fail(f"load at bus {lp.bus}: expected {case.periods} values, got {len(lp.mw)}")
        if any(not (v >= 0) or not np.isfinite(v) for v in lp.mw):
            _fail(f"load at bus {lp.bus}: entries must be non-negative")

    total_cap = sum(g.pmax_mw for g in case.generators)
    for t in range(case.periods):
        demand = sum(lp.mw[t] for lp in case.loads)
        if demand > total_cap:
            _fail(f"infeasible capacity: period {t + 1} demand {demand:g} MW exceeds {total_cap:g} MW")

    adj = {b: set() for b in ids}
    for ln in case.lines:
        adj[ln.from_bus].add(ln.to_bus)
        adj[ln.to_bus].add(ln.from_bus)
    reached = {ids[0]}
    queue = deque([ids[0]])
    while queue:
        for nb in adj[queue.popleft()]:
            if nb not in reached:
                reached.add(nb)
                queue.append(nb)
    if len(reached) != len(ids):
        _fail("network is not connected")


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        _fail(f"{where}: expected an object")
    extra = set(obj) - allowed
    if extra:
        _fail(f"{where}: unknown key(s) {sorted(extra)}")
    missing = allowed - set(obj)
    if missing:
        _fail(f"{where}: missing key(s) {sorted(missing)}")


def _num(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(f"{where}: expected a number")
    return float(value)


def _int(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(f"{where}: expected an integer")
    return value


def parse_case(data: dict) -> CaseData:
    """Build a validated :class:`CaseData` from the decoded JSON schema."""
    _check_keys(data, _TOP_KEYS, "case")
    buses = []
    for i, b in enumerate(data["buses"]):
        _check_keys(b, _BUS_KEYS, f"buses[{i}]")
        buses.append(Bus(_int(b["id"], f"buses[{i}].id")))
    lines = []
    for i, ln in enumerate(data["lines"]):
        _check_keys(ln, _LINE_KEYS, f"lines[{i}]")
        lines.append(
            Line(
                _int(ln["from"], f"lines[{i}].from"),
                _int(ln["to"], f"lines[{i}].to"),
                _num(ln["reactance"], f"lines[{i}].reactance"),
                _num(ln["capacity_mw"], f"lines[{i}].capacity_mw"),
            )
        )
    gens = []
    for i, g in enumerate(data["generators"]):
        _check_keys(g, _GEN_KEYS, f"generators[{i}]")
        if not isinstance(g["id"], str):
            _fail(f"generators[{i}].id: expected a string")
        gens.append(
            Generator(
                g["id"],
                _int(g["bus"], f"generators[{i}].bus"),
                _num(g["pmax_mw"], f"generators[{i}].pmax_mw"),
                _num(g["bid_per_mwh"], f"generators[{i}].bid_per_mwh"),
                _num(g["emission_t_per_mwh"], f"generators[{i}].emission_t_per_mwh"),
            )
        )
    loads = []
    for i, lp in enumerate(data["loads"]):
        _check_keys(lp, _LOAD_KEYS, f"loads[{i}]")
        if not isinstance(lp["mw"], list):
            _fail(f"loads[{i}].mw: expected a list")
        loads.append(
            LoadProfile(
                _int(lp["bus"], f"loads[{i}].bus"),
                tuple(_num(v, f"loads[{i}].mw") for v in lp["mw"]),
            )
        )
    if not isinstance(data["name"], str):
        _fail("case.name: expected a string")
    return CaseData(
        name=data["name"],
        periods=_int(data["periods"], "case.periods"),
        slack_bus=_int(data["slack_bus"], "case.slack_bus"),
        buses=tuple(buses),
        lines=tuple(lines),
        generators=tuple(gens),
        loads=tuple(loads),
    )


def load_case(path) -> CaseData:
    """Read and validate a JSON case file.

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    CaseValidationError
        On malformed JSON or any violated invariant.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"case file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CaseValidationError(f"malformed case file {path}: {exc}") from exc
    return parse_case(data)


def case_to_dict(case: CaseData) -> dict:
    return {
        "name": case.name,
        "periods": case.periods,
        "slack_bus": case.slack_bus,
        "buses": [{"id": b.id} for b in case.buses],
        "lines": [
            {"from": ln.from_bus, "to": ln.to_bus, "reactance": ln.reactance, "capacity_mw": ln.capacity_mw}
            for ln in case.lines
        ],
        "generators": [
            {
                "id": g.id,
                "bus": g.bus,
                "pmax_mw": g.pmax_mw,
                "bid_per_mwh": g.bid_per_mwh,
                "emission_t_per_mwh": g.emission_t_per_mwh,
            }
            for g in case.generators
        ],
        "loads": [{"bus": lp.bus, "mw": list(lp.mw)} for lp in case.loads],
    }


def dump_case(case: CaseData, path) -> None:
    Path(path).write_text(json.dumps(case_to_dict(case), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class PtdfMatrix:
    """Line-by-bus power transfer distribution factors.

    ``entries[l, i]`` is the flow on line ``l`` (from -> to) caused by
    injecting 1 MW at bus ``i`` and withdrawing it at the slack bus.
    """

    entries: np.ndarray
    slack_bus: int
    bus_ids: tuple[int, ...]
    line_labels: tuple[str, ...]

    def flows(self, injections: np.ndarray) -> np.ndarray:
        """Line flows for nodal injections of shape ``(..., n_buses)``."""
        return np.asarray(injections) @ self.entries.T


def build_ptdf(case: CaseData, slack_bus: int | None = None) -> PtdfMatrix:
    """Compute the dense PTDF from the reduced nodal susceptance matrix."""
    slack = case.slack_bus if slack_bus is None else slack_bus
    idx = case.bus_index
    if slack not in idx:
        raise CaseValidationError(f"slack bus {slack} is not a bus of the case")
    n, nl = case.n_buses, len(case.lines)
    incidence = np.zeros((nl, n))
    for l, ln in enumerate(case.lines):
        incidence[l, idx[ln.from_bus]] = 1.0
        incidence[l, idx[ln.to_bus]] = -1.0
    susceptance = 1.0 / np.array([ln.reactance for ln in case.lines], dtype=float)
    bbus = incidence.T @ (susceptance[:, None] * incidence)

    keep = [i for i in range(n) if i != idx[slack]]
    entries = np.zeros((nl, n))
    if keep:
        reduced = bbus[np.ix_(keep, keep)]
        try:
            theta = np.linalg.solve(reduced, np.eye(len(keep)))
        except np.linalg.LinAlgError as exc:
            raise CaseValidationError("singular network matrix: network is not connected") from exc
        if not np.all(np.isfinite(theta)) or np.linalg.cond(reduced) > 1e14:
            raise CaseValidationError("singular network matrix: network is not connected")
        entries[:, keep] = susceptance[:, None] * (incidence[:, keep] @ theta)
    return PtdfMatrix(entries, slack, tuple(case.bus_ids), tuple(ln.label for ln in case.lines))
