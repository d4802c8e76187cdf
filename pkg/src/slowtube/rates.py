"""Rate constants, smoothness orders, and M-cone conditions over a block.

The augmented field keeps the chart coordinates (a, b), the slow variables y,
and a normalized parameter coordinate eta in [0, 1] with eps = eps0 * eta and
eta' = 0.  The normalization matters: derivative columns with respect to eta
carry a factor eps0, which keeps the center-block norms small enough for the
rate inequalities to have content.  All eight constants are one-sided bounds
valid over block x cell x [0, eps0]; each combines a logarithmic-norm bound
of a diagonal sub-block with a weighted spectral-norm bound of a coupling
block, exactly one constant per inequality family.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .block import AffineChart, BlockBox, ChartJacobian, FastSaddleBlock, transformed_jacobian
from .interval import IMatrix, Interval
from .linalg import log_norm_bounds, op_norm_upper, submatrix
from .system import FastSlowSystem

__all__ = [
    "RateConstants",
    "RateStatus",
    "RateOrder",
    "ConeKind",
    "ConeCertificate",
    "augmented_jacobian",
    "compute_rates",
    "rate_order",
    "cone_check",
]

K_MAX = 64


@dataclass(frozen=True)
class RateConstants:
    """One-sided bounds of the eight local rates at cone slope M."""

    M: float
    mu_s1: float
    mu_s2: float
    xi_u1: float
    xi_u2: float
    mu_ss1: float
    mu_ss2: float
    xi_su1: float
    xi_su2: float


class RateStatus(Enum):
    OK = "ok"
    NO_HYPERBOLICITY = "no_hyperbolicity"
    NO_ORDER = "no_order"


@dataclass(frozen=True)
class RateOrder:
    status: RateStatus
    k: int
    # raw floor-formula ratios reported for comparison with the scan;
    # they are not authoritative and may be negative
    k_su_ratio: float | None
    k_ss_ratio: float | None


class ConeKind(Enum):
    UNSTABLE = "unstable"
    STABLE = "stable"


@dataclass(frozen=True)
class ConeCertificate:
    kind: ConeKind
    M: float
    holds: bool
    margin_graph: float
    margin_cone: float


def augmented_jacobian(
    system: FastSlowSystem,
    chart: AffineChart,
    box: BlockBox,
    eps0: float,
    cj: ChartJacobian | None = None,
) -> IMatrix:
    """Interval Jacobian of the augmented field (a, b, y, eta) over the block.

    Ordering: fast chart coordinates first, then slow variables, then eta.
    The eta row is identically zero; eps-columns are scaled by eps0.
    """
    eps_iv = Interval(0.0, eps0)
    if cj is None:
        cj = transformed_jacobian(system, chart, box.z_ranges, box.cell, eps_iv)
    n = chart.n
    l = system.l
    size = n + l + 1
    zero = Interval(0.0, 0.0)
    rows = [[zero] * size for _ in range(size)]
    eps0_iv = Interval.point(eps0)
    for i in range(n):
        for j in range(n):
            rows[i][j] = cj.J_zz[i, j]
        for k in range(l):
            rows[i][n + k] = cj.J_zw[i, k]
        rows[i][n + l] = eps0_iv * cj.J_zeps[i]
    if l:
        P = chart.P
        # slow rows: d(eps g)/d(z, w, eta)
        gxP = cj.gx.matmul(IMatrix.from_point(P))
        S = IMatrix.from_point(chart.slope)
        gw = cj.gx.matmul(S) + cj.gy
        for k in range(l):
            for j in range(n):
                rows[n + k][j] = eps_iv * gxP[k, j]
            for m in range(l):
                rows[n + k][n + m] = eps_iv * gw[k, m]
            rows[n + k][n + l] = eps0_iv * (cj.g[k] + eps_iv * cj.geps[k])
    return IMatrix(rows)


def _ratio_upper(norm: float, M: float, weight_up: bool) -> Interval:
    m = Interval.point(M)
    nv = Interval(0.0, norm)
    return nv * m if weight_up else nv / m


def compute_rates(
    J: IMatrix, n_u: int, n_s: int, l: int, M: float
) -> RateConstants:
    """The eight local rates from an augmented Jacobian enclosure."""
    if M <= 1.0:
        raise ValueError("cone slope M must exceed 1")
    n = n_u + n_s
    a_idx = list(range(n_u))
    b_idx = list(range(n_u, n))
    cen_idx = list(range(n, n + l + 1))
    ay = a_idx + cen_idx
    by = b_idx + cen_idx

    J_bb = submatrix(J, b_idx, b_idx)
    J_aa = submatrix(J, a_idx, a_idx)
    l_bb = log_norm_bounds(J_bb)
    ml_aa = log_norm_bounds(J_aa)
    l_byy = log_norm_bounds(submatrix(J, by, by))
    ml_ayy = log_norm_bounds(submatrix(J, ay, ay))

    n_b_ay = op_norm_upper(submatrix(J, b_idx, ay))   # dF_b / d(a,y)
    n_ay_b = op_norm_upper(submatrix(J, ay, b_idx))   # dF_(a,y) / d b
    n_a_by = op_norm_upper(submatrix(J, a_idx, by))   # dF_a / d(b,y)
    n_by_a = op_norm_upper(submatrix(J, by, a_idx))   # dF_(b,y) / d a

    mu_s1 = (Interval.point(l_bb.l_upper) + _ratio_upper(n_b_ay, M, False)).hi
    mu_s2 = (Interval.point(l_bb.l_upper) + _ratio_upper(n_ay_b, M, True)).hi
    xi_u1 = (Interval.point(ml_aa.ml_lower) - _ratio_upper(n_a_by, M, False)).lo
    xi_u2 = (Interval.point(ml_aa.ml_lower) - _ratio_upper(n_a_by, M, True)).lo
    mu_ss1 = (Interval.point(l_byy.l_upper) + _ratio_upper(n_by_a, M, True)).hi
    mu_ss2 = (Interval.point(l_byy.l_upper) + _ratio_upper(n_a_by, M, False)).hi
    xi_su1 = (Interval.point(ml_ayy.ml_lower) - _ratio_upper(n_ay_b, M, True)).lo
    xi_su2 = (Interval.point(ml_ayy.ml_lower) - _ratio_upper(n_b_ay, M, False)).lo
    return RateConstants(
        M=M,
        mu_s1=mu_s1,
        mu_s2=mu_s2,
        xi_u1=xi_u1,
        xi_u2=xi_u2,
        mu_ss1=mu_ss1,
        mu_ss2=mu_ss2,
        xi_su1=xi_su1,
        xi_su2=xi_su2,
    )


def rates_for_block(
    system: FastSlowSystem,
    block: FastSaddleBlock,
    M: float,
    eps0: float,
    cj: ChartJacobian | None = None,
) -> RateConstants:
    if cj is None and block.cj is not None and block.cj.covers(block.box.z_ranges):
        cj = block.cj
    J = augmented_jacobian(system, block.chart, block.box, eps0, cj=cj)
    return compute_rates(J, block.chart.n_u, block.chart.n_s, system.l, M)


def rate_order(r: RateConstants, k_max: int = K_MAX) -> RateOrder:
    """Largest k whose inequality families all hold, by direct scan.

    The floor-formula shortcuts mu_s2/xi_su1 and mu_ss2/xi_su1 mix
    numerator/denominator pairs inconsistently with the scanned inequalities,
    so the scan is authoritative; the raw ratios are reported alongside.
    """
    k_su = (r.mu_s2 / r.xi_su1) if r.xi_su1 != 0.0 else None
    k_ss = (r.mu_ss2 / r.xi_su1) if r.xi_su1 != 0.0 else None
    if not (r.mu_s1 < 0.0 < r.xi_u1):
        return RateOrder(RateStatus.NO_HYPERBOLICITY, -1, k_su, k_ss)
    if not (r.mu_ss1 < r.xi_u1 and r.mu_s1 < r.xi_su1):
        return RateOrder(RateStatus.NO_ORDER, -1, k_su, k_ss)
    if not (r.mu_s1 < r.xi_su2 and r.mu_ss2 < r.xi_u1):
        return RateOrder(RateStatus.OK, 0, k_su, k_ss)
    k = 0
    for j in range(1, k_max + 1):
        if (j + 1) * r.mu_ss1 < r.xi_u2 and r.mu_s2 < (j + 1) * r.xi_su1:
            k = j
        else:
            break
    return RateOrder(RateStatus.OK, k, k_su, k_ss)


def cone_check(r: RateConstants, kind: ConeKind) -> ConeCertificate:
    """M-cone condition from the rates over the (possibly inflated) block.

    Unstable: xi_u1 > 0 and xi_u1 - mu_ss1 > 0.  Stable: mu_s1 < 0 and
    xi_su1 - mu_s1 > 0.  The complementary-block upper rates stand in for
    the undefined lower-rate symbols of the source inequalities; this matches
    the derivation of the cone-boundary differential inequality.
    """
    if kind == ConeKind.UNSTABLE:
        graph = r.xi_u1
        cone = r.xi_u1 - r.mu_ss1
    else:
        graph = -r.mu_s1
        cone = r.xi_su1 - r.mu_s1
    return ConeCertificate(
        kind=kind,
        M=r.M,
        holds=(graph > 0.0 and cone > 0.0),
        margin_graph=float(graph),
        margin_cone=float(cone),
    )
