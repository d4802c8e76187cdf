"""Interval linear algebra: inverses, Gershgorin disks, logarithmic norms.

Floating-point work (LU, eigendecompositions) is delegated to scipy/numpy and
is never trusted on its own; rigor is recovered either through Krawczyk-style
contraction downstream or through residual bounds with geometric-series
inflation here.  Eigenvalue bounds for symmetric parts use Gershgorin disks,
which over-estimate but never break soundness; cell refinement compensates.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .interval import IMatrix, Interval, IVector, intersect

__all__ = [
    "NumericallySingular",
    "GershgorinDisk",
    "LogNormBounds",
    "approx_inverse",
    "inverse_enclosure",
    "gershgorin",
    "log_norm_bounds",
    "op_norm_upper",
]


class NumericallySingular(ArithmeticError):
    """Floating LU pivoting failed or a residual contraction bound is >= 1."""


_PIVOT_FLOOR = 1e-14


def approx_inverse(A: np.ndarray) -> np.ndarray:
    """Non-rigorous floating inverse; raises when pivots fall below 1e-14."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("approx_inverse requires a square matrix")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LinAlgWarning)
            lu, piv = lu_factor(A)
    except Exception as exc:  # LinAlgError from scipy
        raise NumericallySingular(str(exc)) from exc
    diag = np.abs(np.diag(lu))
    scale = max(1.0, float(np.max(np.abs(A))))
    if np.any(diag < _PIVOT_FLOOR * scale):
        raise NumericallySingular(
            f"pivot magnitude {diag.min():.3e} below threshold"
        )
    return lu_solve((lu, piv), np.eye(A.shape[0]))


def _abs_hi_sum(values) -> Interval:
    """Outward-rounded accumulation of upper bounds of magnitudes."""
    acc = Interval(0.0, 0.0)
    for v in values:
        acc = acc + Interval(0.0, v.abs_hi)
    return acc


def _nonneg(iv: Interval) -> Interval:
    """Clamp the lower bound at zero; sound for enclosures of squares."""
    return iv if iv.lo >= 0.0 else Interval(0.0, max(0.0, iv.hi))


def inf_norm_upper(A: IMatrix) -> float:
    """Rigorous upper bound of the max-row-sum norm over the enclosure."""
    best = 0.0
    for r in A.rows:
        best = max(best, _abs_hi_sum(r).hi)
    return best


def one_norm_upper(A: IMatrix) -> float:
    return inf_norm_upper(A.transpose())


def frobenius_upper(A: IMatrix) -> float:
    acc = Interval(0.0, 0.0)
    for r in A.rows:
        for e in r:
            m = e.abs_hi
            acc = acc + Interval(0.0, m) * Interval(0.0, m)
    return _nonneg(acc).sqrt().hi


def op_norm_upper(A: IMatrix) -> float:
    """Upper bound of the spectral norm, valid for every point matrix in A.

    Minimum of the Holder interpolation bound sqrt(norm1 * normInf) and the
    Frobenius bound, each accumulated with outward rounding.
    """
    holder = _nonneg(
        Interval(0.0, one_norm_upper(A)) * Interval(0.0, inf_norm_upper(A))
    ).sqrt().hi
    return min(holder, frobenius_upper(A))


def inverse_enclosure(A: IMatrix) -> IMatrix:
    """Rigorous enclosure of {M^-1 : M in A} via residual series inflation.

    Computes C ~= mid(A)^-1, bounds r = ||I - C*A||_inf < 1, and inflates C
    entrywise by ||C||_inf * r / (1 - r).
    """
    n = A.nrows
    if n != A.ncols:
        raise ValueError("inverse_enclosure requires a square matrix")
    C = approx_inverse(np.array(A.mids()))
    Ci = IMatrix.from_point(C)
    R = IMatrix.identity(n) - Ci.matmul(A)
    r = inf_norm_upper(R)
    if r >= 1.0:
        raise NumericallySingular(
            f"residual bound {r:.3e} >= 1; enclosure too wide to invert"
        )
    c_norm = inf_norm_upper(Ci)
    beta = (
        Interval(0.0, c_norm) * Interval(0.0, r) / Interval(1.0 - r, 1.0 - r)
    ).hi
    pad = Interval(-beta, beta)
    return IMatrix([[e + pad for e in row] for row in Ci.rows])


# -- Gershgorin --------------------------------------------------------------


@dataclass(frozen=True)
class GershgorinDisk:
    """Disk |z - center| <= radius with an interval-valued complex center."""

    center_re: Interval
    center_im: Interval
    radius: Interval

    @property
    def real_projection(self) -> Interval:
        return self.center_re + Interval(-self.radius.hi, self.radius.hi)

    @property
    def imag_projection(self) -> Interval:
        return self.center_im + Interval(-self.radius.hi, self.radius.hi)


def _disk_radius(row_re, row_im, i) -> Interval:
    acc = Interval(0.0, 0.0)
    for j, e in enumerate(row_re):
        if j == i:
            continue
        if row_im is None:
            acc = acc + Interval(0.0, e.abs_hi)
        else:
            m = _nonneg(e * e + row_im[j] * row_im[j]).sqrt()
            acc = acc + Interval(0.0, m.hi)
    return acc


def gershgorin(A: IMatrix, A_im: IMatrix | None = None):
    """Gershgorin disks of a (possibly complex) interval matrix.

    Returns (disks, disjoint).  Disjointness pairs complex-conjugate disk
    candidates first and then requires pairwise separation of the real-axis
    projections of the resulting groups; it certifies that all eigenvalues of
    every point matrix in the enclosure are simple.
    """
    n = A.nrows
    if n != A.ncols:
        raise ValueError("gershgorin requires a square matrix")
    zero = Interval(0.0, 0.0)
    disks = []
    for i in range(n):
        disks.append(
            GershgorinDisk(
                center_re=A[i, i],
                center_im=zero if A_im is None else A_im[i, i],
                radius=_disk_radius(A.row(i), None if A_im is None else A_im.row(i), i),
            )
        )
    return disks, _disks_disjoint(disks)


def _disks_disjoint(disks) -> bool:
    # group disks into conjugate pairs: mutually reflected imaginary
    # projections that both exclude the real axis
    n = len(disks)
    used = [False] * n
    groups = []
    for i in range(n):
        if used[i]:
            continue
        gi = disks[i].imag_projection
        partner = None
        if gi.lo > 0.0 or gi.hi < 0.0:
            for j in range(i + 1, n):
                if used[j]:
                    continue
                gj = disks[j].imag_projection
                if gj.lo > 0.0 or gj.hi < 0.0:
                    if (
                        intersect(gi, Interval(-gj.hi, -gj.lo)) is not None
                        and intersect(
                            disks[i].real_projection, disks[j].real_projection
                        )
                        is not None
                    ):
                        partner = j
                        break
        used[i] = True
        if partner is not None:
            used[partner] = True
            groups.append((i, partner))
        else:
            groups.append((i,))
    for a in range(len(groups)):
        for b in range(a + 1, len(groups)):
            pa = disks[groups[a][0]].real_projection
            pb = disks[groups[b][0]].real_projection
            if intersect(pa, pb) is not None:
                return False
    return True


# -- logarithmic norms --------------------------------------------------------


@dataclass(frozen=True)
class LogNormBounds:
    """Rigorous bounds l(A) <= l_upper and m_l(A) >= ml_lower."""

    l_upper: float
    ml_lower: float

    def __post_init__(self):
        if self.ml_lower > self.l_upper:
            raise ValueError("ml_lower must not exceed l_upper")


def log_norm_bounds(A: IMatrix) -> LogNormBounds:
    """Bounds of the extreme eigenvalues of (A + A^T)/2 over the enclosure.

    Gershgorin applied to the interval symmetric part: for every point matrix
    in A, the Euclidean logarithmic norm l and logarithmic minimum m_l satisfy
    ml_lower <= m_l <= l <= l_upper.
    """
    n = A.nrows
    if n != A.ncols:
        raise ValueError("log_norm_bounds requires a square matrix")
    half = Interval(0.5, 0.5)
    S = [
        [(A[i, j] + A[j, i]) * half for j in range(n)]
        for i in range(n)
    ]
    l_upper = -np.inf
    ml_lower = np.inf
    for i in range(n):
        rad = Interval(0.0, 0.0)
        for j in range(n):
            if j != i:
                rad = rad + Interval(0.0, S[i][j].abs_hi)
        l_upper = max(l_upper, (S[i][i] + rad).hi)
        ml_lower = min(ml_lower, (S[i][i] - rad).lo)
    return LogNormBounds(l_upper=float(l_upper), ml_lower=float(ml_lower))


# -- complex interval helpers (used for conjugate-pair charts) ----------------


def cmat_mul(Are, Aim, Bre, Bim):
    """Product of complex interval matrices given as (re, im) parts."""
    re = Are.matmul(Bre) - Aim.matmul(Bim)
    im = Are.matmul(Bim) + Aim.matmul(Bre)
    return re, im


def imat_from_blocks(blocks) -> IMatrix:
    """Assemble an interval matrix from a 2-D grid of IMatrix blocks."""
    rows = []
    for block_row in blocks:
        height = block_row[0].nrows
        for b in block_row:
            if b.nrows != height:
                raise ValueError("inconsistent block heights")
        for i in range(height):
            row = []
            for b in block_row:
                row.extend(b.row(i))
            rows.append(row)
    return IMatrix(rows)


def submatrix(A: IMatrix, row_idx, col_idx) -> IMatrix:
    return IMatrix([[A[i, j] for j in col_idx] for i in row_idx])


def ivec_concat(*vecs) -> IVector:
    entries = []
    for v in vecs:
        entries.extend(v.entries)
    return IVector(entries)
