from dataclasses import replace

import numpy as np
import pytest

from lmce.clearing import assemble_period_lp, clear_market
from lmce.errors import BreakpointStraddleError, KktConsistencyError
from lmce.grid import Bus, CaseData, Generator, build_ptdf
from lmce.sensitivity import (
    assemble_kkt_lp,
    assemble_kkt_qp,
    build_perturbation_rhs,
    finite_diff_sensitivity,
    solve_sensitivity,
)

from helpers import random_case, solve_qp_enumeration


def one_bus(demand, *gens):
    case = CaseData("one-bus", 1, 1, (Bus(1),), (), tuple(gens), ())
    return case.with_loads(np.array([[demand]]))


@pytest.fixture
def paper_kkt(paper_case):
    clearing = clear_market(paper_case)
    problem, solution = clearing.problems[0], clearing.solutions[0]
    return problem, solution, assemble_kkt_lp(problem, solution)


class TestAssembly:
    def test_dimension(self, paper_kkt):
        _, _, kkt = paper_kkt
        # 1 balance + 2 generators + 2 x (3 lines + 2 capacities)
        assert kkt.dimension == 13
        assert kkt.H.shape == (13, 13)

    def test_rhs_columns(self, paper_kkt):
        problem, solution, kkt = paper_kkt
        rhs = build_perturbation_rhs(problem, solution, bus=2)
        expected = np.zeros(13)
        expected[0] = 1.0
        # line 2-3 upper multiplier (80) times its bound shift per MW at bus 2 (0.5)
        expected[3 + 1] = 40.0
        np.testing.assert_allclose(rhs, expected, atol=1e-12)
        np.testing.assert_allclose(kkt.rhs[:, 1], expected, atol=1e-12)
        assert kkt.rhs_energy[0].tolist() == [1.0, 1.0, 1.0]
        assert not kkt.rhs_energy[1:].any()

    def test_rhs_unknown_bus_or_period(self, paper_kkt):
        problem, solution, _ = paper_kkt
        with pytest.raises(KeyError):
            build_perturbation_rhs(problem, solution, bus=9)
        with pytest.raises(KeyError):
            build_perturbation_rhs(problem, solution, bus=1, period=4)

    def test_zero_quadratic_matches_lp(self, paper_kkt):
        problem, solution, kkt = paper_kkt
        qp = assemble_kkt_qp(np.zeros((2, 2)), problem, solution)
        assert np.array_equal(qp.H, kkt.H)
        assert np.array_equal(qp.rhs, kkt.rhs)

    def test_inconsistent_solution_rejected(self, paper_kkt):
        problem, solution, _ = paper_kkt
        bad = replace(solution, pi=solution.pi + 1.0)
        with pytest.raises(KktConsistencyError, match="not KKT-consistent"):
            assemble_kkt_lp(problem, bad)

    @pytest.mark.parametrize("Q, message", [([[1.0, 0.5], [0.0, 1.0]], "symmetric"), ([[-1.0, 0], [0, 1.0]], "semidefinite")])
    def test_quadratic_validation(self, paper_kkt, Q, message):
        problem, solution, _ = paper_kkt
        with pytest.raises(ValueError, match=message):
            assemble_kkt_qp(np.array(Q), problem, solution)


class TestSolve:
    def test_paper_columns(self, paper_kkt):
        _, _, kkt = paper_kkt
        sens = solve_sensitivity(kkt)
        assert sens.svd.full_rank
        np.testing.assert_allclose(sens.dx_db, [[1.0, 3.0, 0.0], [0.0, -2.0, 1.0]], atol=1e-10)
        np.testing.assert_allclose(sens.column(2), [3.0, -2.0], atol=1e-10)

    def test_full_rank_residual(self, paper_kkt):
        _, _, kkt = paper_kkt
        sens = solve_sensitivity(kkt)
        np.testing.assert_allclose(kkt.H @ sens.dz, kkt.rhs, atol=1e-9)

    @pytest.mark.parametrize("seed", range(15))
    def test_columns_sum_to_one(self, seed):
        clearing = clear_market(random_case(seed))
        sens = solve_sensitivity(assemble_kkt_lp(clearing.problems[0], clearing.solutions[0]))
        np.testing.assert_allclose(sens.dx_db.sum(axis=0), 1.0, atol=1e-9)

    @pytest.mark.parametrize("seed", range(15))
    def test_matches_finite_difference(self, seed):
        case = random_case(seed)
        clearing = clear_market(case)
        sens = solve_sensitivity(assemble_kkt_lp(clearing.problems[0], clearing.solutions[0]))
        for bus in case.bus_ids:
            try:
                fd = finite_diff_sensitivity(case, bus=bus, ptdf=clearing.ptdf)
            except BreakpointStraddleError:
                continue
            np.testing.assert_allclose(sens.column(bus), fd, atol=1e-6)

    def test_degenerate_is_rank_deficient(self):
        case = one_bus(50.0, Generator("G1", 1, 50.0, 5.0, 0.3), Generator("G2", 1, 50.0, 9.0, 0.6))
        clearing = clear_market(case)
        kkt = assemble_kkt_lp(clearing.problems[0], clearing.solutions[0])
        sens = solve_sensitivity(kkt)
        assert sens.svd.rank < kkt.dimension
        assert not sens.svd.full_rank
        # the minimum-norm answer is still a valid redispatch: G2 picks up the increment
        np.testing.assert_allclose(sens.dx_db[:, 0], [0.0, 1.0], atol=1e-9)

    def test_truncation_tolerance_reported(self, paper_kkt):
        _, _, kkt = paper_kkt
        sens = solve_sensitivity(kkt, tol=1e-6)
        assert sens.svd.truncation_tol == 1e-6
        assert sens.svd.condition_estimate >= 1.0


class TestQuadratic:
    def _solve(self, case, Q, demand):
        problem = assemble_period_lp(case, build_ptdf(case), np.array([demand]))
        return problem, solve_qp_enumeration(Q, problem)

    def test_single_generator(self):
        case = one_bus(0.0, Generator("G1", 1, 500.0, 10.0, 0.5))
        Q = np.array([[0.04]])
        problem, sol = self._solve(case, Q, 120.0)
        sens = solve_sensitivity(assemble_kkt_qp(Q, problem, sol))
        assert sens.column(1)[0] == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("q1, q2", [(0.02, 0.05), (0.1, 0.1), (0.3, 0.01)])
    def test_two_generators_share(self, q1, q2):
        case = one_bus(0.0, Generator("G1", 1, 1000.0, 10.0, 0.5), Generator("G2", 1, 1000.0, 11.0, 0.9))
        Q = np.diag([q1, q2])
        problem, sol = self._solve(case, Q, 300.0)
        assert np.all(sol.x > 0)
        sens = solve_sensitivity(assemble_kkt_qp(Q, problem, sol))
        assert sens.column(1)[0] == pytest.approx(q2 / (q1 + q2), abs=1e-8)
        lo = self._solve(case, Q, 300.0 - 1e-3)[1].x
        hi = self._solve(case, Q, 300.0 + 1e-3)[1].x
        np.testing.assert_allclose(sens.column(1), (hi - lo) / 2e-3, atol=1e-7)


class TestFiniteDifference:
    def test_paper(self, paper_case):
        np.testing.assert_allclose(finite_diff_sensitivity(paper_case, bus=2), [3.0, -2.0], atol=1e-8)

    def test_zero_load_bus_uses_forward_stencil(self, paper_case):
        # bus 1 carries no demand
        np.testing.assert_allclose(finite_diff_sensitivity(paper_case, bus=1), [1.0, 0.0], atol=1e-8)

    def test_straddle_detected(self, paper_case):
        at_breakpoint = paper_case.load_matrix() * (10.0 / 13.0)
        with pytest.raises(BreakpointStraddleError, match="straddled"):
            finite_diff_sensitivity(paper_case, at_breakpoint, bus=3)

    def test_unknown_bus(self, paper_case):
        with pytest.raises(KeyError):
            finite_diff_sensitivity(paper_case, bus=7)
