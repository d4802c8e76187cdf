"""Affine fast-saddle-type isolating blocks around layer equilibria.

A block is built in the predictor-corrector chart

    x = P z + x_bar + S (y - y_bar),      S = -f_x(x_bar,y_bar)^{-1} f_y(...)

where P approximately diagonalizes the fast Jacobian at the sample point
(complex conjugate eigenpairs occupy 2x2 real rotation blocks, and their
cross-sections are disks rather than interval products).  The box extents
come from rigorous residual enclosures divided by eigenvalue bounds; the
exit/entrance structure of every fast face is then re-verified by direct
interval evaluation of the transformed field on the face, uniformly in
eps in [0, eps0], rather than trusted from the sizing algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .interval import IMatrix, Interval, IVector
from .linalg import (
    cmat_mul,
    gershgorin,
    inverse_enclosure,
    log_norm_bounds,
)
from .system import FastSlowSystem

__all__ = [
    "DirKind",
    "Direction",
    "AffineChart",
    "BlockBox",
    "FaceReport",
    "FastSaddleBlock",
    "EigSolverFailed",
    "HyperbolicityViolated",
    "build_chart",
    "fast_field_enclosure",
    "ChartJacobian",
    "transformed_jacobian",
    "residual_bounds",
    "derive_box",
    "verify_block",
    "construct_block",
    "conjugated_enclosure",
    "direction_bounds",
    "gershgorin_disjoint",
]

BOX_FLOOR = 1e-9
EVAL_INFLATION = 1.5
PAIR_SEGMENTS = 8


class EigSolverFailed(RuntimeError):
    """Floating eigendecomposition of the fast Jacobian failed."""


class HyperbolicityViolated(RuntimeError):
    """An eigenvalue bound touches the imaginary axis."""


class DirKind(Enum):
    REAL = "real"
    PAIR = "pair"


@dataclass(frozen=True)
class Direction:
    """One fast direction of the chart: a real axis or a conjugate-pair plane."""

    kind: DirKind
    pos: int  # first z index of this direction
    unstable: bool
    lam_re: float
    lam_im: float = 0.0

    @property
    def dims(self) -> int:
        return 2 if self.kind == DirKind.PAIR else 1


@dataclass(frozen=True)
class AffineChart:
    P: np.ndarray
    P_inv_enc: IMatrix
    x_bar: np.ndarray
    y_bar: np.ndarray
    slope: np.ndarray  # n x l matrix -fx^-1 fy at the sample point
    directions: tuple
    n_u: int
    n_s: int

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def l(self) -> int:
        return self.slope.shape[1]


@dataclass(frozen=True)
class BlockBox:
    z_ranges: tuple  # Interval per fast chart coordinate
    cell: tuple  # absolute slow-variable cell, Interval per slow dim
    eta_u: float
    eta_s: float

    @property
    def n(self) -> int:
        return len(self.z_ranges)


@dataclass(frozen=True)
class FaceReport:
    label: str
    margin: float
    ok: bool


@dataclass(frozen=True)
class FastSaddleBlock:
    chart: AffineChart
    box: BlockBox
    delta: IVector
    lambda_bounds: tuple  # Interval per direction (real part enclosure)
    self_consistent: bool
    isolation_certified: bool
    faces: tuple
    # Jacobian data over the (inflated) sizing box, a superset of the box;
    # reusable by spectral enclosures and rate constants
    cj: "ChartJacobian | None" = field(default=None, compare=False, repr=False)


# -- chart construction --------------------------------------------------------


def build_chart(system: FastSlowSystem, x_bar, y_bar) -> AffineChart:
    """Eigen-chart at a (numerical) layer equilibrium.

    Columns of P are ordered unstable first, stable second; a complex pair
    contributes the real and imaginary parts of one eigenvector and a 2x2
    rotation block in the sample linearization.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    y_bar = np.asarray(y_bar, dtype=float)
    fx = system.fx_point(x_bar, y_bar, 0.0)
    fy = system.fy_point(x_bar, y_bar, 0.0)
    try:
        evals, evecs = np.linalg.eig(fx)
    except np.linalg.LinAlgError as exc:
        raise EigSolverFailed(str(exc)) from exc
    scale = max(1.0, float(np.max(np.abs(fx))))
    if np.any(np.abs(evals.real) < 1e-12 * scale):
        raise HyperbolicityViolated(
            f"sample eigenvalue too close to the imaginary axis: {evals}"
        )

    order = sorted(
        range(len(evals)),
        key=lambda i: (-evals[i].real, -evals[i].imag),
    )
    columns = []
    directions = []
    used = set()
    pos = 0
    for i in order:
        if i in used:
            continue
        lam = evals[i]
        vec = evecs[:, i]
        if abs(lam.imag) < 1e-12 * scale:
            v = vec.real
            nrm = np.linalg.norm(v)
            if nrm < 1e-12:
                # real eigenvalue with a complex-phased vector
                phase = vec[int(np.argmax(np.abs(vec)))]
                v = (vec / phase).real
                nrm = np.linalg.norm(v)
            columns.append(v / nrm)
            directions.append(
                Direction(DirKind.REAL, pos, lam.real > 0, float(lam.real))
            )
            used.add(i)
            pos += 1
        else:
            # pick the positive-imaginary member; partner is its conjugate
            if lam.imag < 0:
                lam = np.conj(lam)
                vec = np.conj(vec)
            partner = None
            for j in order:
                if j != i and j not in used and abs(evals[j] - np.conj(lam)) <= 1e-9 * scale:
                    partner = j
                    break
            if partner is None:
                raise EigSolverFailed("unpaired complex eigenvalue")
            p = vec.real
            q = vec.imag
            columns.append(p)
            columns.append(q)
            directions.append(
                Direction(DirKind.PAIR, pos, lam.real > 0, float(lam.real), float(lam.imag))
            )
            used.add(i)
            used.add(partner)
            pos += 2
    P = np.column_stack(columns)
    P_inv_enc = inverse_enclosure(IMatrix.from_point(P))
    slope = -np.linalg.solve(fx, fy) if system.l else np.zeros((system.n, 0))
    n_u = sum(d.dims for d in directions if d.unstable)
    return AffineChart(
        P=P,
        P_inv_enc=P_inv_enc,
        x_bar=x_bar,
        y_bar=y_bar,
        slope=slope,
        directions=tuple(directions),
        n_u=n_u,
        n_s=system.n - n_u,
    )


# -- interval evaluation in chart coordinates -----------------------------------


def chart_x_enclosure(chart: AffineChart, z_ranges, cell) -> list:
    """Enclosure of x = P z + x_bar + S (y - y_bar) over the box."""
    n = chart.n
    out = []
    for i in range(n):
        acc = Interval.point(chart.x_bar[i])
        for j, z in enumerate(z_ranges):
            acc = acc + Interval.point(chart.P[i, j]) * z
        for k, yk in enumerate(cell):
            w = yk - Interval.point(chart.y_bar[k])
            acc = acc + Interval.point(chart.slope[i, k]) * w
        out.append(acc)
    return out


def fast_field_enclosure(
    system: FastSlowSystem, chart: AffineChart, z_ranges, cell, eps_iv: Interval
) -> IVector:
    """Direct enclosure of z' = P^-1 (f + eps S g) over box x cell x eps range.

    Suffers the usual dependency blow-up across the predictor-corrector
    cancellation; residual_bounds uses the mean-value form instead and this
    direct evaluation serves as its center-point engine.
    """
    x_enc = chart_x_enclosure(chart, z_ranges, cell)
    env = system.env(x_enc, cell, eps_iv)
    f = system.f_ivec(env)
    drift = list(f.entries)
    if system.l:
        g = system.g_ivec(env)
        for i in range(chart.n):
            acc = Interval(0.0, 0.0)
            for k in range(system.l):
                acc = acc + Interval.point(chart.slope[i, k]) * g[k]
            drift[i] = drift[i] + eps_iv * acc
    return chart.P_inv_enc.matvec(IVector(drift))


@dataclass(frozen=True)
class ChartJacobian:
    """Jacobian blocks of the transformed fast field over a box.

    J_zz = P^-1 (fx + eps S gx) P
    J_zw = P^-1 ((fx + eps S gx) S + fy + eps S gy)
    J_zeps = P^-1 (feps + S (g + eps geps))

    The raw field enclosures are kept for the rate-constant assembly, which
    needs the slow rows as well.
    """

    J_zz: IMatrix
    J_zw: IMatrix | None
    J_zeps: IVector
    fx: IMatrix
    gx: IMatrix | None
    gy: IMatrix | None
    g: IVector | None
    geps: IVector | None
    domain: tuple = ()  # z_ranges the blocks were evaluated over

    def covers(self, z_ranges) -> bool:
        if len(self.domain) != len(z_ranges):
            return False
        return all(
            d.lo <= z.lo and z.hi <= d.hi for d, z in zip(self.domain, z_ranges)
        )


def transformed_jacobian(
    system: FastSlowSystem, chart: AffineChart, z_ranges, cell, eps_iv: Interval
) -> ChartJacobian:
    """Interval Jacobian of z -> P^-1 (f + eps S g) over the given box."""
    x_enc = chart_x_enclosure(chart, z_ranges, cell)
    env = system.env(x_enc, cell, eps_iv)
    fx = system.fx_imat(env)
    P = IMatrix.from_point(chart.P)
    n, l = chart.n, system.l
    if l:
        S = IMatrix.from_point(chart.slope)
        gx = system.gx_imat(env)
        gy = system.gy_imat(env)
        g = system.g_ivec(env)
        geps = system.geps_ivec(env)
        fy = system.fy_imat(env)
        feps = system.feps_ivec(env)
        core = fx + S.matmul(gx).scale(eps_iv)
        J_zz = chart.P_inv_enc.matmul(core).matmul(P)
        J_zw = chart.P_inv_enc.matmul(
            core.matmul(S) + fy + S.matmul(gy).scale(eps_iv)
        )
        eps_col = IVector(
            [
                feps[i]
                + sum(
                    (Interval.point(chart.slope[i, k]) * (g[k] + eps_iv * geps[k])
                     for k in range(l)),
                    Interval(0.0, 0.0),
                )
                for i in range(n)
            ]
        )
        J_zeps = chart.P_inv_enc.matvec(eps_col)
    else:
        gx = gy = g = geps = None
        J_zw = None
        J_zz = chart.P_inv_enc.matmul(fx).matmul(P)
        feps = system.feps_ivec(env)
        J_zeps = chart.P_inv_enc.matvec(feps)
    return ChartJacobian(
        J_zz=J_zz, J_zw=J_zw, J_zeps=J_zeps, fx=fx, gx=gx, gy=gy, g=g,
        geps=geps, domain=tuple(z_ranges),
    )


def _linear_part(chart: AffineChart, z_ranges, lam_bounds) -> list:
    """Lambda * z with interval eigenvalue bounds per direction."""
    out = [None] * chart.n
    for d, lam in zip(chart.directions, lam_bounds):
        p = d.pos
        if d.kind == DirKind.REAL:
            out[p] = lam * z_ranges[p]
        else:
            beta = Interval.point(d.lam_im)
            out[p] = lam * z_ranges[p] + beta * z_ranges[p + 1]
            out[p + 1] = -beta * z_ranges[p] + lam * z_ranges[p + 1]
    return out


def residual_bounds(
    system: FastSlowSystem,
    chart: AffineChart,
    z_ranges,
    cell,
    eps0: float,
    lam_bounds=None,
    cj: ChartJacobian | None = None,
) -> IVector:
    """Mean-value enclosure of F(z, w, eps) = z' - Lambda z over the box.

    F is evaluated thinly at the box center and extended by interval-Jacobian
    deviation terms; the direct product evaluation would lose the
    predictor-corrector cancellation to the dependency problem.  A Jacobian
    computed over any superset of the box may be passed in as cj.
    """
    if lam_bounds is None:
        lam_bounds = [Interval.point(d.lam_re) for d in chart.directions]
    eps_iv = Interval(0.0, eps0)
    if cj is None:
        cj = transformed_jacobian(system, chart, z_ranges, cell, eps_iv)
    z_mid = [Interval.point(z.mid) for z in z_ranges]
    w_mid = [Interval.point(y.mid) for y in cell]
    eps_mid = Interval.point(eps_iv.mid)
    center = fast_field_enclosure(system, chart, z_mid, w_mid, eps_mid)
    lam_diag = _linear_part(chart, z_mid, lam_bounds)
    out = [c - li for c, li in zip(center.entries, lam_diag)]
    # Jacobian of the residual: Lambda is subtracted entrywise BEFORE the
    # deviation products, otherwise the cancellation is lost to dependency
    n = chart.n
    lam_grid = [[Interval(0.0, 0.0)] * n for _ in range(n)]
    for d, lam in zip(chart.directions, lam_bounds):
        p = d.pos
        if d.kind == DirKind.REAL:
            lam_grid[p][p] = lam
        else:
            beta = Interval.point(d.lam_im)
            lam_grid[p][p] = lam
            lam_grid[p][p + 1] = beta
            lam_grid[p + 1][p] = -beta
            lam_grid[p + 1][p + 1] = lam
    dz = [z - Interval.point(z.mid) for z in z_ranges]
    dw = [y - Interval.point(y.mid) for y in cell]
    deps = eps_iv - eps_mid
    for i in range(n):
        acc = out[i]
        for j in range(n):
            acc = acc + (cj.J_zz[i, j] - lam_grid[i][j]) * dz[j]
        if cj.J_zw is not None:
            for k in range(system.l):
                acc = acc + cj.J_zw[i, k] * dw[k]
        acc = acc + cj.J_zeps[i] * deps
        out[i] = acc
    return IVector(out)


# -- box derivation --------------------------------------------------------------


def derive_box(
    chart: AffineChart,
    delta: IVector,
    lam_bounds,
    eta_u: float,
    eta_s: float,
    cell,
    floor: float = BOX_FLOOR,
) -> BlockBox:
    """Box extents -delta/lambda widened by eta per the block construction.

    Unstable directions use the infimum of the eigenvalue bound, stable ones
    the supremum; raises HyperbolicityViolated when a bound touches zero.
    """
    ranges = [None] * chart.n
    for d, lam in zip(chart.directions, lam_bounds):
        if d.unstable:
            rate = lam.lo
            if rate <= 0.0:
                raise HyperbolicityViolated(
                    f"unstable bound {lam!r} touches the imaginary axis"
                )
            eta = eta_u
        else:
            rate = lam.hi
            if rate >= 0.0:
                raise HyperbolicityViolated(
                    f"stable bound {lam!r} touches the imaginary axis"
                )
            eta = eta_s
        p = d.pos
        if d.kind == DirKind.REAL:
            dlt = delta[p]
            if d.unstable:
                lo = -dlt.hi / rate - eta
                hi = -dlt.lo / rate + eta
            else:
                lo = -dlt.lo / rate - eta
                hi = -dlt.hi / rate + eta
            ranges[p] = Interval(min(lo, -floor), max(hi, floor))
        else:
            mag = math.hypot(delta[p].abs_hi, delta[p + 1].abs_hi)
            R = max(mag / abs(rate) + eta, floor)
            ranges[p] = Interval(-R, R)
            ranges[p + 1] = Interval(-R, R)
    return BlockBox(z_ranges=tuple(ranges), cell=tuple(cell), eta_u=eta_u, eta_s=eta_s)


def _inflate_ranges(z_ranges, factor: float):
    out = []
    for z in z_ranges:
        m = z.mid
        r = max(z.rad * factor, BOX_FLOOR)
        out.append(Interval(m - r, m + r))
    return out


def _ranges_inside(inner, outer) -> bool:
    return all(o.lo <= i.lo and i.hi <= o.hi for i, o in zip(inner, outer))


def construct_block(
    system: FastSlowSystem,
    chart: AffineChart,
    cell,
    eps0: float,
    eta_u: float = 0.0,
    eta_s: float = 0.0,
    lam_bounds=None,
    max_rounds: int = 5,
) -> FastSaddleBlock:
    """Self-consistent box via fixed-point iteration of the residual sizing.

    The residual is always evaluated over an inflated copy of the candidate
    box (the enclosure domain E), so the accepted box inherits valid bounds;
    face signs are certified afterwards by verify_block.
    """
    if lam_bounds is None:
        lam_bounds = [Interval.point(d.lam_re) for d in chart.directions]
    thin = [Interval.point(0.0)] * chart.n
    delta = residual_bounds(system, chart, thin, cell, eps0, lam_bounds)
    box = derive_box(chart, delta, lam_bounds, eta_u, eta_s, cell)
    consistent = False
    cj = None
    eps_iv = Interval(0.0, eps0)
    for _ in range(max_rounds):
        eval_ranges = _inflate_ranges(box.z_ranges, EVAL_INFLATION)
        cj = transformed_jacobian(system, chart, eval_ranges, cell, eps_iv)
        delta = residual_bounds(
            system, chart, eval_ranges, cell, eps0, lam_bounds, cj=cj
        )
        new_box = derive_box(chart, delta, lam_bounds, eta_u, eta_s, cell)
        if _ranges_inside(new_box.z_ranges, eval_ranges):
            box = new_box
            consistent = True
            break
        box = new_box
    self_ok, isolation_ok, faces = (False, False, ())
    if consistent:
        self_ok, isolation_ok, faces = verify_block(system, chart, box, eps0, cj=cj)
    return FastSaddleBlock(
        chart=chart,
        box=box,
        delta=delta,
        lambda_bounds=tuple(lam_bounds),
        self_consistent=consistent and self_ok,
        isolation_certified=consistent and isolation_ok,
        faces=faces,
        cj=cj,
    )


# -- face verification -----------------------------------------------------------


def verify_block(
    system, chart: AffineChart, box: BlockBox, eps0: float, cj: ChartJacobian | None = None
):
    """Sign verification of every fast face over the eps range.

    Each face component z'_j is enclosed through the mean-value residual
    relative to the sample linearization, re-evaluated on the face itself,
    never inferred from the sizing deltas.  Returns (self_consistent,
    isolation_certified, face_reports).
    """
    eps_iv = Interval(0.0, eps0)
    if cj is None:
        cj = transformed_jacobian(
            system, chart, _inflate_ranges(box.z_ranges, 1.0), box.cell, eps_iv
        )
    sample = [Interval.point(d.lam_re) for d in chart.directions]
    reports = []
    ok = True
    for d in chart.directions:
        p = d.pos
        if d.kind == DirKind.REAL:
            lam = Interval.point(d.lam_re)
            for side in ("hi", "lo"):
                z_face = list(box.z_ranges)
                v = box.z_ranges[p].hi if side == "hi" else box.z_ranges[p].lo
                z_face[p] = Interval.point(v)
                F = residual_bounds(
                    system, chart, z_face, box.cell, eps0, sample, cj=cj
                )
                comp = lam * z_face[p] + F[p]
                if d.unstable:
                    margin = comp.lo if side == "hi" else -comp.hi
                else:
                    margin = -comp.hi if side == "hi" else comp.lo
                good = margin > 0.0
                ok = ok and good
                kind = "exit" if d.unstable else "entrance"
                reports.append(
                    FaceReport(f"z{p}:{side}:{kind}", float(margin), good)
                )
        else:
            R = box.z_ranges[p].hi
            alpha = Interval.point(d.lam_re)
            Rsq = Interval.point(R) * Interval.point(R)
            for s in range(PAIR_SEGMENTS):
                phi = Interval(
                    2.0 * math.pi * s / PAIR_SEGMENTS,
                    2.0 * math.pi * (s + 1) / PAIR_SEGMENTS,
                )
                zc = phi.cos() * Interval.point(R)
                zs = phi.sin() * Interval.point(R)
                z_face = list(box.z_ranges)
                z_face[p] = zc
                z_face[p + 1] = zs
                F = residual_bounds(
                    system, chart, z_face, box.cell, eps0, sample, cj=cj
                )
                # exact identity: z . z' = alpha R^2 + z . F on the circle
                # (the rotation part is skew and drops out pointwise)
                radial = alpha * Rsq + zc * F[p] + zs * F[p + 1]
                margin = radial.lo if d.unstable else -radial.hi
                good = margin > 0.0
                ok = ok and good
                kind = "exit" if d.unstable else "entrance"
                reports.append(
                    FaceReport(f"z{p}:arc{s}:{kind}", float(margin), good)
                )
    return True, ok, tuple(reports)


# -- spectral enclosures over a block ---------------------------------------------


def conjugated_enclosure(
    system: FastSlowSystem,
    chart: AffineChart,
    box: BlockBox,
    eps0: float,
    cj: ChartJacobian | None = None,
) -> IMatrix:
    """Enclosure of P^-1 f_x P over the chart image of the box."""
    fx = cj.fx if cj is not None else fx_enclosure(system, chart, box, eps0)
    return chart.P_inv_enc.matmul(fx).matmul(IMatrix.from_point(chart.P))


def fx_enclosure(
    system: FastSlowSystem,
    chart: AffineChart,
    box: BlockBox,
    eps0: float,
    cj: ChartJacobian | None = None,
) -> IMatrix:
    """Raw enclosure of f_x over the chart image of the box (for Krawczyk)."""
    if cj is not None:
        return cj.fx
    x_enc = chart_x_enclosure(chart, box.z_ranges, box.cell)
    env = system.env(x_enc, box.cell, Interval(0.0, eps0))
    return system.fx_imat(env)


def direction_bounds(M: IMatrix, directions) -> list:
    """Per-direction real-part enclosures from the conjugated matrix.

    Real directions get Gershgorin disk projections; conjugate pairs use the
    symmetric-part bounds of their 2x2 block plus off-pair coupling radii,
    which controls the radial expansion/contraction rate of the pair plane.
    """
    n = M.nrows
    out = []
    for d in directions:
        p = d.pos
        if d.kind == DirKind.REAL:
            acc = Interval(0.0, 0.0)
            for j in range(n):
                if j != p:
                    acc = acc + Interval(0.0, M[p, j].abs_hi)
            rad = acc.hi
            out.append(M[p, p] + Interval(-rad, rad))
        else:
            pairidx = (p, p + 1)
            sub = IMatrix([[M[i, j] for j in pairidx] for i in pairidx])
            bounds = log_norm_bounds(sub)
            rad = 0.0
            for i in pairidx:
                acc = Interval(0.0, 0.0)
                for j in range(n):
                    if j not in pairidx:
                        acc = acc + Interval(0.0, M[i, j].abs_hi)
                rad = max(rad, acc.hi)
            out.append(
                Interval(bounds.ml_lower, bounds.l_upper) + Interval(-rad, rad)
            )
    return out


_SQRT_HALF = Interval(
    math.nextafter(math.sqrt(0.5), 0.0), math.nextafter(math.sqrt(0.5), 1.0)
)


def gershgorin_disjoint(M: IMatrix, directions):
    """Gershgorin disks and disjointness for the conjugated enclosure.

    With conjugate-pair directions the matrix is first complexified by the
    fixed unitary that sends rotation blocks to diag(lam, conj lam), so the
    disks carry genuinely complex centers and pair grouping applies.
    """
    if all(d.kind == DirKind.REAL for d in directions):
        return gershgorin(M)
    n = M.nrows
    zero = Interval(0.0, 0.0)
    one = Interval(1.0, 1.0)
    Wre = [[zero] * n for _ in range(n)]
    Wim = [[zero] * n for _ in range(n)]
    for d in directions:
        p = d.pos
        if d.kind == DirKind.REAL:
            Wre[p][p] = one
        else:
            # columns (e_p + i e_{p+1})/sqrt2, (e_p - i e_{p+1})/sqrt2
            Wre[p][p] = _SQRT_HALF
            Wre[p][p + 1] = _SQRT_HALF
            Wim[p + 1][p] = _SQRT_HALF
            Wim[p + 1][p + 1] = -_SQRT_HALF
    Wre = IMatrix(Wre)
    Wim = IMatrix(Wim)
    WstarRe = Wre.transpose()
    WstarIm = -Wim.transpose()
    Z = IMatrix.zeros(n, n)
    Tre, Tim = cmat_mul(WstarRe, WstarIm, M, Z)
    Cre, Cim = cmat_mul(Tre, Tim, Wre, Wim)
    return gershgorin(Cre, Cim)
