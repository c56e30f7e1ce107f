import math
from fractions import Fraction

import pytest

from secagg import analysis
from secagg.analysis import (
    DomainError,
    communication_cost,
    dof_formula,
    gap_ratio,
    ndt_achievable,
    ndt_lower,
    ndt_report,
    single_server_ndt,
    sweep_csv,
    sweep_reports,
)


class TestAchievable:
    def test_golden_instance(self):
        assert ndt_achievable(5, 4, 3) == (Fraction(10, 3), Fraction(8, 3))

    def test_k2_branch(self):
        assert ndt_achievable(5, 2, 1)[0] == Fraction(25, 4)

    def test_m3_k3_r2(self):
        assert ndt_achievable(3, 3, 2) == (Fraction(15, 4), Fraction(5, 2))

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            ndt_achievable(2, 4, 1)
        with pytest.raises(DomainError):
            ndt_achievable(5, 4, 4)
        with pytest.raises(DomainError):
            ndt_achievable(5, 4, 0)


class TestLowerBound:
    def test_values(self):
        assert ndt_lower(5, 4) == (Fraction(5, 3), Fraction(4, 3))
        assert ndt_lower(3, 3) == (Fraction(3, 2), Fraction(3, 2))

    def test_monotone_decreasing_in_k(self):
        ups = [ndt_lower(6, K)[0] for K in range(2, 40)]
        downs = [ndt_lower(6, K)[1] for K in range(2, 40)]
        assert all(a >= b for a, b in zip(ups, ups[1:]))
        assert all(a >= b for a, b in zip(downs, downs[1:]))
        assert ndt_lower(6, 4096)[1] == Fraction(4096, 4095)  # -> 1

    def test_k1_rejected(self):
        with pytest.raises(DomainError):
            ndt_lower(5, 1)


class TestGap:
    def test_sweep_bounded_by_four(self):
        worst = max(gap_ratio(M, K)[0] for M in range(3, 65) for K in range(2, 65))
        assert worst <= Fraction(4)

    def test_large_k_downlink_asymptote(self):
        _, down = gap_ratio(3, 1000)
        assert down <= Fraction(101, 100) * Fraction(1003, 1000)

    def test_k_much_larger_than_m(self):
        up, _ = gap_ratio(64, 4096)
        assert up < Fraction(105, 100)
        assert abs(float(up) - 1.0) < 0.05


class TestDof:
    def test_golden_values(self):
        assert dof_formula(5, 4, "up") == Fraction(2)
        assert dof_formula(5, 4, "down") == Fraction(1, 2)

    def test_k2_branch(self):
        for M in (2, 3, 5, 9):
            assert dof_formula(M, 2, "up") == Fraction(2 * (M - 1), M)

    def test_bad_direction(self):
        with pytest.raises(DomainError):
            dof_formula(3, 3, "sideways")


def test_single_server_baseline():
    assert single_server_ndt(7) == (Fraction(7), Fraction(1))


def test_communication_cost_at_r_k_minus_1():
    up, down = communication_cost(5, 4, 3)
    assert up == Fraction(4, 3) * 5
    assert down == Fraction(4, 3)


class TestReportAndSweep:
    def test_report_consistency(self):
        rep = ndt_report(5, 4, 3)
        assert rep.uplink_gap == Fraction(2) and rep.downlink_gap == Fraction(2)
        assert rep.single_server_up == 5 and rep.single_server_down == 1

    def test_sweep_invariants(self):
        reports = sweep_reports(range(3, 33), (2, 4, 8))
        for rep in reports:
            assert rep.uplink_achievable >= rep.uplink_lb
            assert rep.downlink_achievable >= rep.downlink_lb
            assert rep.uplink_gap <= 4
        # downlink NDT strictly increasing in M at fixed K
        for K in (2, 4, 8):
            downs = [r.downlink_achievable for r in reports if r.K == K]
            assert all(a < b for a, b in zip(downs, downs[1:]))
        # both NDTs strictly decreasing in K at fixed M (K >= 3 branch shares r rule)
        for M in (3, 10, 32):
            cells = sorted((r.K, r) for r in reports if r.M == M)
            ups = [r.uplink_achievable for _, r in cells if r.K >= 3]
            downs = [r.downlink_achievable for _, r in cells if r.K >= 3]
            assert all(a > b for a, b in zip(ups, ups[1:]))
            assert all(a > b for a, b in zip(downs, downs[1:]))

    def test_uplink_increases_in_m_past_threshold(self):
        # At K=4 the uplink NDT grows once M exceeds sqrt(K) + 1.
        threshold = math.isqrt(4) + 2
        ups = {M: ndt_achievable(M, 4, 3)[0] for M in range(3, 20)}
        for M in range(threshold, 19):
            assert ups[M + 1] > ups[M]

    def test_csv_golden_row(self):
        csv = sweep_csv(sweep_reports([5], [4]))
        lines = csv.strip().splitlines()
        assert lines[0] == analysis.SWEEP_CSV_HEADER
        assert lines[1] == (
            "5,4,3,3.333333333,2.666666667,1.666666667,1.333333333,"
            "2,2,2,0.5,5,1,6.666666667,1.333333333"
        )

    def test_csv_without_single_server_columns(self):
        csv = sweep_csv(sweep_reports([5], [4]), include_single=False)
        header = csv.splitlines()[0]
        assert "single_up" not in header
        assert header.count(",") == analysis.SWEEP_CSV_HEADER.count(",") - 2

    def test_empty_sweep_is_header_only(self):
        assert sweep_csv(sweep_reports([], [4])) == analysis.SWEEP_CSV_HEADER + "\n"

    def test_deterministic_ordering(self):
        a = sweep_csv(sweep_reports([4, 3, 5], [8, 2]))
        b = sweep_csv(sweep_reports([5, 3, 4], [2, 8]))
        assert a == b
