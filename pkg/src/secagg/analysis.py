"""Closed-form delivery-time and degrees-of-freedom analysis.

Everything is computed in exact rational arithmetic; floats appear only
when rows are rendered to CSV. NDT (normalized delivery time) is channel
uses divided by gradient bits per log-power; lower is better.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


class DomainError(ValueError):
    """Parameters outside the regime the formulas cover."""


def _check_topology(M: int, K: int) -> None:
    if M < 3:
        raise DomainError(f"need M >= 3 users, got {M}")
    if K < 2:
        raise DomainError(f"need K >= 2 servers, got {K}")


def ndt_achievable(M: int, K: int, r: int) -> tuple[Fraction, Fraction]:
    """Achievable (uplink, downlink) NDT of the coded aggregation scheme."""
    _check_topology(M, K)
    if not 1 <= r <= K - 1:
        raise DomainError(f"need 1 <= r <= K-1, got r={r}, K={K}")
    if K == 2:
        up = Fraction(M, r) * Fraction(M, M - 1)
    else:
        up = Fraction(K + M - 1, r) * Fraction(M, M - 1)
    down = Fraction(K + M - 1, r)
    return up, down


def ndt_lower(M: int, K: int) -> tuple[Fraction, Fraction]:
    """Information-theoretic (uplink, downlink) NDT lower bounds."""
    _check_topology(M, K)
    return Fraction(max(M, K), K - 1), Fraction(K, K - 1)


def gap_ratio(M: int, K: int) -> tuple[Fraction, Fraction]:
    """Achievable/lower-bound ratios at the latency-optimal choice r = K-1."""
    up, down = ndt_achievable(M, K, K - 1)
    up_lb, down_lb = ndt_lower(M, K)
    return up / up_lb, down / down_lb


def dof_formula(M: int, K: int, direction: str) -> Fraction:
    """Asymptotic sum DoF of the uplink or downlink transmission."""
    if M < 2:
        raise DomainError(f"need M >= 2 users, got {M}")
    if direction == "up":
        if K == 2:
            return Fraction(K * (M - 1), K + M - 2)
        return Fraction(K * (M - 1), K + M - 1)
    if direction == "down":
        return Fraction(K, M + K - 1)
    raise DomainError(f"direction must be 'up' or 'down', got {direction!r}")


def single_server_ndt(M: int) -> tuple[Fraction, Fraction]:
    """TDMA uplink / broadcast downlink baseline with one server."""
    return Fraction(M), Fraction(1)


def communication_cost(M: int, K: int, r: int) -> tuple[Fraction, Fraction]:
    """(uplink, downlink) message bits per gradient bit: K*M/r and K/r."""
    return Fraction(K * M, r), Fraction(K, r)


@dataclass(frozen=True)
class NdtReport:
    """All closed-form quantities for one (M, K, r) cell."""

    M: int
    K: int
    r: int
    uplink_achievable: Fraction
    downlink_achievable: Fraction
    uplink_lb: Fraction
    downlink_lb: Fraction
    uplink_gap: Fraction
    downlink_gap: Fraction
    dof_up: Fraction
    dof_down: Fraction
    single_server_up: Fraction
    single_server_down: Fraction
    comm_up: Fraction  # per unit gradient bit-length
    comm_down: Fraction

    def __post_init__(self):
        if self.uplink_gap < 1 or self.downlink_gap < 1:
            raise AssertionError(
                f"achievable NDT fell below lower bound at M={self.M}, K={self.K}"
            )


def ndt_report(M: int, K: int, r: int) -> NdtReport:
    up, down = ndt_achievable(M, K, r)
    up_lb, down_lb = ndt_lower(M, K)
    comm_up, comm_down = communication_cost(M, K, r)
    single_up, single_down = single_server_ndt(M)
    return NdtReport(
        M=M, K=K, r=r,
        uplink_achievable=up, downlink_achievable=down,
        uplink_lb=up_lb, downlink_lb=down_lb,
        uplink_gap=up / up_lb, downlink_gap=down / down_lb,
        dof_up=dof_formula(M, K, "up"), dof_down=dof_formula(M, K, "down"),
        single_server_up=single_up, single_server_down=single_down,
        comm_up=comm_up, comm_down=comm_down,
    )


SWEEP_CSV_HEADER = (
    "M,K,r,ndt_up,ndt_down,ndt_up_lb,ndt_down_lb,gap_up,gap_down,"
    "dof_up,dof_down,single_up,single_down,comm_up,comm_down"
)

DEFAULT_SWEEP_M = tuple(range(3, 33))
DEFAULT_SWEEP_K = (2, 4, 8)


def sweep_reports(Ms, Ks, r_for=None) -> list[NdtReport]:
    """One report per (M, K), ordered by (M, K); default r rule is K-1."""
    r_for = (lambda M, K: K - 1) if r_for is None else r_for
    return [
        ndt_report(M, K, r_for(M, K))
        for M in sorted(set(Ms))
        for K in sorted(set(Ks))
    ]


def _fmt(x: Fraction) -> str:
    return f"{float(x):.10g}"


def sweep_csv(reports: list[NdtReport], include_single: bool = True) -> str:
    """Render reports to the fixed CSV schema.

    include_single=False drops the single-server baseline columns.
    """
    header = SWEEP_CSV_HEADER
    if not include_single:
        header = header.replace("single_up,single_down,", "")
    lines = [header]
    for rep in reports:
        cells = [
            str(rep.M), str(rep.K), str(rep.r),
            _fmt(rep.uplink_achievable), _fmt(rep.downlink_achievable),
            _fmt(rep.uplink_lb), _fmt(rep.downlink_lb),
            _fmt(rep.uplink_gap), _fmt(rep.downlink_gap),
            _fmt(rep.dof_up), _fmt(rep.dof_down),
        ]
        if include_single:
            cells += [_fmt(rep.single_server_up), _fmt(rep.single_server_down)]
        cells += [_fmt(rep.comm_up), _fmt(rep.comm_down)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
