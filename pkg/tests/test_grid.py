import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lmce.cases import builtin_case
from lmce.clearing import clear_market
from lmce.errors import CaseValidationError
from lmce.grid import Bus, CaseData, Generator, Line, build_ptdf, case_to_dict, load_case

from helpers import random_case


def laplacian_ptdf(case, slack):
    """Independent DC flow oracle: unit injection at each bus against the slack via pinv(L)."""
    idx = case.bus_index
    n = case.n_buses
    L = np.zeros((n, n))
    for ln in case.lines:
        f, t, b = idx[ln.from_bus], idx[ln.to_bus], 1.0 / ln.reactance
        L[f, f] += b
        L[t, t] += b
        L[f, t] -= b
        L[t, f] -= b
    Lp = np.linalg.pinv(L)
    out = np.zeros((len(case.lines), n))
    for i in range(n):
        inj = np.zeros(n)
        inj[i] += 1.0
        inj[idx[slack]] -= 1.0
        theta = Lp @ inj
        for l, ln in enumerate(case.lines):
            out[l, i] = (theta[idx[ln.from_bus]] - theta[idx[ln.to_bus]]) / ln.reactance
    return out


class TestLoadCase:
    def test_paper_roundtrip(self, paper_json):
        case = load_case(paper_json())
        assert len(case.generators) == 2
        assert len(case.lines) == 3
        loads = {lp.bus: lp.mw for lp in case.loads}
        assert loads == {2: (10.0,), 3: (150.0,)}

    def test_zero_reactance(self, paper_json, paper_case):
        lines = case_to_dict(paper_case)["lines"]
        lines[0]["reactance"] = 0
        with pytest.raises(CaseValidationError, match="reactance must be positive"):
            load_case(paper_json(lines=lines))

    def test_load_exceeds_capacity(self, paper_json):
        with pytest.raises(CaseValidationError, match="infeasible capacity"):
            load_case(paper_json(loads=[{"bus": 3, "mw": [400.0]}]))

    def test_unknown_key_rejected(self, paper_json):
        with pytest.raises(CaseValidationError, match="unknown key"):
            load_case(paper_json(comment="nope"))

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(CaseValidationError, match="malformed"):
            load_case(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="case file not found"):
            load_case(tmp_path / "missing.json")

    def test_wrong_profile_length(self, paper_json):
        with pytest.raises(CaseValidationError, match="expected 1 values"):
            load_case(paper_json(loads=[{"bus": 3, "mw": [1.0, 2.0]}]))

    @pytest.mark.parametrize(
        "mutate, message",
        [
            (lambda d: d["lines"].append({"from": 1, "to": 1, "reactance": 1, "capacity_mw": 5}), "must differ"),
            (lambda d: d["lines"].__setitem__(0, {**d["lines"][0], "capacity_mw": -1}), "capacity_mw"),
            (lambda d: d["generators"][0].__setitem__("emission_t_per_mwh", -0.1), "emission"),
            (lambda d: d["generators"][0].__setitem__("bus", 9), "unknown bus"),
            (lambda d: d.__setitem__("slack_bus", 7), "slack bus"),
            (lambda d: d["buses"].append({"id": 1}), "unique"),
            (lambda d: d["loads"].append({"bus": 2, "mw": [1.0]}), "more than one profile"),
            (lambda d: d["loads"][0].__setitem__("mw", [-1.0]), "non-negative"),
        ],
    )
    def test_invariants(self, tmp_path, paper_case, mutate, message):
        data = case_to_dict(paper_case)
        mutate(data)
        path = tmp_path / "c.json"
        path.write_text(json.dumps(data))
        with pytest.raises(CaseValidationError, match=message):
            load_case(path)

    def test_disconnected(self):
        with pytest.raises(CaseValidationError, match="not connected"):
            CaseData("x", 1, 1, (Bus(1), Bus(2), Bus(3)), (Line(1, 2, 1.0, 10.0),),
                     (Generator("G", 1, 10.0, 1.0, 0.1),), ())


class TestBuiltin:
    def test_paper_values(self, paper_case):
        g1 = paper_case.generators[0]
        assert (g1.pmax_mw, g1.emission_t_per_mwh, g1.bid_per_mwh) == (200.0, 0.2, 10.0)
        g3 = paper_case.generators[1]
        assert (g3.bus, g3.pmax_mw, g3.emission_t_per_mwh, g3.bid_per_mwh) == (3, 100.0, 0.8, 30.0)
        lines = {ln.label: ln for ln in paper_case.lines}
        assert lines["2-3"].capacity_mw == 25.0
        assert lines["1-2"].reactance == 2 * lines["2-3"].reactance
        assert lines["2-3"].reactance == lines["1-3"].reactance

    def test_six_bus_has_both_regimes(self, six_bus):
        assert six_bus.periods == 24
        clearing = clear_market(six_bus)
        congested = [bool(s.binding_upper[:11].any() or s.binding_lower[:11].any()) for s in clearing.solutions]
        assert any(congested) and not all(congested)

    def test_unknown(self):
        with pytest.raises(CaseValidationError, match="unknown builtin"):
            builtin_case("ieee-118")


class TestPtdf:
    def test_paper_line_23_row(self, paper_case):
        ptdf = build_ptdf(paper_case)
        row = ptdf.entries[1]
        np.testing.assert_allclose(row, [0.0, 0.5, -0.25], atol=1e-14)
        np.testing.assert_allclose(ptdf.entries, laplacian_ptdf(paper_case, 1), atol=1e-12)

    def test_slack_column_zero(self, paper_case):
        ptdf = build_ptdf(paper_case)
        assert np.all(ptdf.entries[:, 0] == 0.0)

    def test_two_bus(self):
        case = CaseData("two", 1, 1, (Bus(1), Bus(2)), (Line(1, 2, 0.3, 50.0),),
                        (Generator("G", 1, 10.0, 1.0, 0.1),), ())
        np.testing.assert_allclose(build_ptdf(case).entries, [[0.0, -1.0]], atol=1e-15)

    def test_base_flow_at_limit(self, paper_case):
        flows = build_ptdf(paper_case).flows(np.array([130.0, -10.0, -120.0]))
        assert flows[1] == pytest.approx(25.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_laplacian_oracle(self, seed):
        case = random_case(seed)
        for slack in case.bus_ids:
            np.testing.assert_allclose(build_ptdf(case, slack).entries, laplacian_ptdf(case, slack), atol=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10_000), data=st.data())
    def test_flows_invariant_to_slack(self, seed, data):
        case = random_case(seed)
        inj = np.array(data.draw(st.lists(st.floats(-100, 100), min_size=case.n_buses, max_size=case.n_buses)))
        inj -= inj.mean()
        flows = [build_ptdf(case, s).flows(inj) for s in case.bus_ids]
        for f in flows[1:]:
            np.testing.assert_allclose(f, flows[0], atol=1e-10)

    def test_transfer_between_buses_bounded(self, six_bus):
        P = build_ptdf(six_bus).entries
        diffs = P[:, :, None] - P[:, None, :]
        assert np.all(np.abs(diffs) <= 1 + 1e-12)
