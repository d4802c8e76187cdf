"""Krawczyk-type validation of continuous eigenpair families.

Given an interval enclosure [A] of a matrix family A(y) over a parameter cell
(and the eps range), the bordered systems

    real:    (A u - lam u, |u|^2 - 1) = 0
    complex: real/imaginary split with the extra gauge row Im(u_1) = 0

are solved with a Krawczyk operator whose preconditioner C is frozen at the
floating seed.  Strict interior inclusion K(X) in int(X) certifies a unique
zero for every matrix in [A], hence a continuous family of simple eigenpairs
over the cell.  The anchor term is evaluated over the full enclosure [A], not
just the sample matrix: with a point anchor the operator would not majorize
the parametric Newton step and the family claim would be unsound.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import math

import numpy as np

from .interval import IMatrix, Interval, IVector, intersect, subset_interior
from .linalg import NumericallySingular, approx_inverse

__all__ = [
    "EigKind",
    "EigenPairEnclosure",
    "KrawczykStatus",
    "KrawczykResult",
    "FamilyValidationFailed",
    "residual_real",
    "bordered_jacobian_real",
    "bordered_jacobian_complex",
    "krawczyk_validate",
    "validate_family",
]


class FamilyValidationFailed(RuntimeError):
    """A member of the requested eigenpair family could not be validated."""

    def __init__(self, index: int, detail: str):
        super().__init__(f"eigenpair {index}: {detail}")
        self.index = index
        self.detail = detail


class EigKind(Enum):
    REAL = "real"
    COMPLEX = "complex"


class KrawczykStatus(Enum):
    UNIQUE_FAMILY = "unique_family"
    NO_ZERO = "no_zero"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class EigenPairEnclosure:
    """Enclosure of one eigenpair, valid for every matrix in the family."""

    kind: EigKind
    lambda_re: Interval
    lambda_im: Interval
    u_re: IVector
    u_im: IVector
    anchor: int  # index of the eigenvector component excluded from 0

    @property
    def n(self) -> int:
        return self.u_re.dim

    def norm_sq(self) -> Interval:
        acc = Interval(0.0, 0.0)
        for c in self.u_re:
            acc = acc + c * c
        for c in self.u_im:
            acc = acc + c * c
        return acc

    def conjugate(self) -> "EigenPairEnclosure":
        return EigenPairEnclosure(
            kind=self.kind,
            lambda_re=self.lambda_re,
            lambda_im=-self.lambda_im,
            u_re=self.u_re,
            u_im=-self.u_im,
            anchor=self.anchor,
        )


@dataclass(frozen=True)
class KrawczykResult:
    status: KrawczykStatus
    enclosure: EigenPairEnclosure | None
    iterations: int
    detail: str = ""


def residual_real(u0: np.ndarray, lam0: float, A: np.ndarray) -> np.ndarray:
    """Floating residual of the bordered real eigenproblem at a point."""
    u0 = np.asarray(u0, dtype=float)
    top = A @ u0 - lam0 * u0
    return np.concatenate([top, [float(u0 @ u0) - 1.0]])


def residual_complex(u0: np.ndarray, lam0: complex, A: np.ndarray) -> np.ndarray:
    ur = u0.real
    ui = u0.imag
    lr, li = lam0.real, lam0.imag
    r1 = A @ ur - (lr * ur - li * ui)
    r2 = A @ ui - (lr * ui + li * ur)
    return np.concatenate([r1, r2, [float(ur @ ur + ui @ ui) - 1.0, ui[0]]])


def bordered_jacobian_real(u: IVector, lam: Interval, A: IMatrix) -> IMatrix:
    """Interval Jacobian [[A - lam I, -u], [2 u^T, 0]] of the real system."""
    n = u.dim
    rows = []
    for i in range(n):
        row = [A[i, j] - (lam if i == j else Interval(0.0, 0.0)) for j in range(n)]
        row.append(-u[i])
        rows.append(row)
    rows.append([Interval(2.0, 2.0) * u[j] for j in range(n)] + [Interval(0.0, 0.0)])
    return IMatrix(rows)


def bordered_jacobian_complex(
    u_re: IVector, u_im: IVector, lam_re: Interval, lam_im: Interval, A: IMatrix
) -> IMatrix:
    """Interval Jacobian of the split complex system, unknowns (ur, ui, lr, li).

    The normalization row is the exact derivative (2 ur^T, 2 ui^T, 0, 0).
    Swapping or negating that row leaves nonsingularity intact but would
    break the Krawczyk mean-value form, so the exact derivative is used.
    """
    n = u_re.dim
    zero = Interval(0.0, 0.0)
    two = Interval(2.0, 2.0)
    rows = []
    for i in range(n):
        row = [A[i, j] - (lam_re if i == j else zero) for j in range(n)]
        row += [lam_im if i == j else zero for j in range(n)]
        row += [-u_re[i], u_im[i]]
        rows.append(row)
    for i in range(n):
        row = [-lam_im if i == j else zero for j in range(n)]
        row += [A[i, j] - (lam_re if i == j else zero) for j in range(n)]
        row += [-u_im[i], -u_re[i]]
        rows.append(row)
    rows.append(
        [two * u_re[j] for j in range(n)]
        + [two * u_im[j] for j in range(n)]
        + [zero, zero]
    )
    rows.append(
        [zero] * n + [Interval(1.0, 1.0) if j == 0 else zero for j in range(n)] + [zero, zero]
    )
    return IMatrix(rows)


def _residual_enclosure_real(u0, lam0, A_box: IMatrix) -> IVector:
    """Enclosure of the residual at the seed over the whole matrix family."""
    n = len(u0)
    rows = []
    for i in range(n):
        acc = Interval(0.0, 0.0)
        for j in range(n):
            acc = acc + A_box[i, j] * Interval.point(u0[j])
        acc = acc - Interval.point(lam0) * Interval.point(u0[i])
        rows.append(acc)
    norm = Interval(0.0, 0.0)
    for j in range(n):
        c = Interval.point(u0[j])
        norm = norm + c * c
    rows.append(norm - Interval(1.0, 1.0))
    return IVector(rows)


def _residual_enclosure_complex(u0, lam0, A_box: IMatrix) -> IVector:
    n = len(u0)
    ur = [Interval.point(x) for x in u0.real]
    ui = [Interval.point(x) for x in u0.imag]
    lr = Interval.point(lam0.real)
    li = Interval.point(lam0.imag)
    rows = []
    for i in range(n):
        acc = Interval(0.0, 0.0)
        for j in range(n):
            acc = acc + A_box[i, j] * ur[j]
        rows.append(acc - (lr * ur[i] - li * ui[i]))
    for i in range(n):
        acc = Interval(0.0, 0.0)
        for j in range(n):
            acc = acc + A_box[i, j] * ui[j]
        rows.append(acc - (lr * ui[i] + li * ur[i]))
    norm = Interval(0.0, 0.0)
    for c in ur + ui:
        norm = norm + c * c
    rows.append(norm - Interval(1.0, 1.0))
    rows.append(ui[0])
    return IVector(rows)


def _box_around(center: np.ndarray, radius: float) -> IVector:
    return IVector([Interval(c - radius, c + radius) for c in center])


def _pick_anchor(vec: np.ndarray) -> int:
    return int(np.argmax(np.abs(vec)))


def krawczyk_validate(
    A_mid: np.ndarray,
    A_box: IMatrix,
    seed_vec: np.ndarray,
    seed_lam: complex,
    kind: EigKind,
    radius: float = 1e-6,
    max_iter: int = 30,
    inflations: int = 3,
) -> KrawczykResult:
    """Validate one eigenpair (family) of every matrix in A_box.

    Returns UNIQUE_FAMILY with the enclosure when the Krawczyk image lands
    strictly inside the iterate, NO_ZERO when an intersection empties, and
    INCONCLUSIVE otherwise.  On INCONCLUSIVE the initial box is inflated by 8
    and retried up to `inflations` times.
    """
    n = len(seed_vec)
    if kind == EigKind.REAL:
        seed_vec = np.real(seed_vec).astype(float)
        nrm = float(np.linalg.norm(seed_vec))
        if nrm == 0.0:
            return KrawczykResult(KrawczykStatus.INCONCLUSIVE, None, 0, "zero seed vector")
        seed_vec = seed_vec / nrm
        lam0 = float(np.real(seed_lam))
        x0 = np.concatenate([seed_vec, [lam0]])
        res = residual_real(seed_vec, lam0, A_mid)
        try:
            C = approx_inverse(
                _bordered_real_point(seed_vec, lam0, A_mid)
            )
        except NumericallySingular as exc:
            return KrawczykResult(KrawczykStatus.INCONCLUSIVE, None, 0, str(exc))
        anchor = _pick_anchor(seed_vec)
    else:
        # rotate the gauge so the first component is real, as the split
        # system's last row demands
        seed_vec = np.asarray(seed_vec, dtype=complex)
        if seed_vec[0] != 0:
            phase = seed_vec[0] / abs(seed_vec[0])
            seed_vec = seed_vec / phase
        nrm = float(np.linalg.norm(seed_vec))
        if nrm == 0.0:
            return KrawczykResult(KrawczykStatus.INCONCLUSIVE, None, 0, "zero seed vector")
        seed_vec = seed_vec / nrm
        lam0 = complex(seed_lam)
        x0 = np.concatenate(
            [seed_vec.real, seed_vec.imag, [lam0.real, lam0.imag]]
        )
        res = residual_complex(seed_vec, lam0, A_mid)
        try:
            C = approx_inverse(
                _bordered_complex_point(seed_vec, lam0, A_mid)
            )
        except NumericallySingular as exc:
            return KrawczykResult(KrawczykStatus.INCONCLUSIVE, None, 0, str(exc))
        anchor = _pick_anchor(np.concatenate([seed_vec.real, seed_vec.imag]))

    # first-order estimate of how far the family drifts across the box; the
    # contraction test supplies the rigor, this only seeds the iteration
    halfwidth = max(
        sum(0.5 * A_box[i, j].width for j in range(A_box.ncols))
        for i in range(A_box.nrows)
    )
    c_norm = float(np.max(np.sum(np.abs(C), axis=1)))
    drift = 2.0 * c_norm * halfwidth
    base_radius = max(radius, 10.0 * float(np.linalg.norm(res)), drift)
    Ci = IMatrix.from_point(C)
    x0_iv = IVector.from_point(x0)
    if kind == EigKind.REAL:
        F0 = _residual_enclosure_real(seed_vec, lam0, A_box)
    else:
        F0 = _residual_enclosure_complex(seed_vec, lam0, A_box)
    newton_term = Ci.matvec(F0)

    total_iters = 0
    detail = ""
    r = base_radius
    for _ in range(inflations + 1):
        X = _box_around(x0, r)
        status, enc, iters, detail = _krawczyk_loop(
            X, x0_iv, newton_term, Ci, A_box, kind, n, anchor, max_iter
        )
        total_iters += iters
        if status == KrawczykStatus.UNIQUE_FAMILY:
            return KrawczykResult(status, enc, total_iters, detail)
        if status == KrawczykStatus.NO_ZERO:
            return KrawczykResult(status, None, total_iters, detail)
        r *= 8.0
    return KrawczykResult(KrawczykStatus.INCONCLUSIVE, None, total_iters, detail)


def _bordered_real_point(u, lam, A):
    n = len(u)
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A - lam * np.eye(n)
    M[:n, n] = -u
    M[n, :n] = 2.0 * u
    return M


def _bordered_complex_point(u, lam, A):
    n = len(u)
    ur, ui = u.real, u.imag
    lr, li = lam.real, lam.imag
    size = 2 * n + 2
    M = np.zeros((size, size))
    M[:n, :n] = A - lr * np.eye(n)
    M[:n, n : 2 * n] = li * np.eye(n)
    M[:n, 2 * n] = -ur
    M[:n, 2 * n + 1] = ui
    M[n : 2 * n, :n] = -li * np.eye(n)
    M[n : 2 * n, n : 2 * n] = A - lr * np.eye(n)
    M[n : 2 * n, 2 * n] = -ui
    M[n : 2 * n, 2 * n + 1] = -ur
    M[2 * n, :n] = 2.0 * ur
    M[2 * n, n : 2 * n] = 2.0 * ui
    M[2 * n + 1, n] = 1.0
    return M


def _krawczyk_loop(X, x0_iv, newton_term, Ci, A_box, kind, n, anchor, max_iter):
    size = len(X)
    ident = IMatrix.identity(size)
    certified = False
    prev_width = math.inf
    for it in range(1, max_iter + 1):
        if kind == EigKind.REAL:
            u_box = IVector(X.entries[:n])
            lam_box = X[n]
            DF = bordered_jacobian_real(u_box, lam_box, A_box)
        else:
            u_re = IVector(X.entries[:n])
            u_im = IVector(X.entries[n : 2 * n])
            DF = bordered_jacobian_complex(u_re, u_im, X[2 * n], X[2 * n + 1], A_box)
        R = ident - Ci.matmul(DF)
        K = x0_iv - newton_term + R.matvec(X - x0_iv)
        if all(subset_interior(K[i], X[i]) for i in range(size)):
            certified = True
        new_entries = []
        empty = False
        for i in range(size):
            cap = intersect(K[i], X[i])
            if cap is None:
                empty = True
                break
            new_entries.append(cap)
        if empty:
            if certified:
                break
            return KrawczykStatus.NO_ZERO, None, it, "empty intersection"
        newX = IVector(new_entries)
        stalled = _same_box(newX, X)
        width = max(e.width for e in newX.entries)
        X = newX
        if certified and (stalled or width > 0.98 * prev_width or it == max_iter):
            break
        prev_width = width
        if stalled:
            return (
                KrawczykStatus.INCONCLUSIVE,
                None,
                it,
                "iteration stalled without interior inclusion",
            )
    if certified:
        enc = _make_enclosure(X, kind, n, anchor)
        return KrawczykStatus.UNIQUE_FAMILY, enc, it, ""
    return KrawczykStatus.INCONCLUSIVE, None, max_iter, "max iterations reached"


def intersect_boxes(K: IVector, X: IVector) -> IVector:
    out = []
    for a, b in zip(K.entries, X.entries):
        cap = intersect(a, b)
        out.append(cap if cap is not None else a)
    return IVector(out)


def _same_box(a: IVector, b: IVector) -> bool:
    return all(x == y for x, y in zip(a.entries, b.entries))


def _make_enclosure(X: IVector, kind: EigKind, n: int, anchor: int) -> EigenPairEnclosure:
    zero = Interval(0.0, 0.0)
    if kind == EigKind.REAL:
        return EigenPairEnclosure(
            kind=kind,
            lambda_re=X[n],
            lambda_im=zero,
            u_re=IVector(X.entries[:n]),
            u_im=IVector([zero] * n),
            anchor=anchor,
        )
    return EigenPairEnclosure(
        kind=kind,
        lambda_re=X[2 * n],
        lambda_im=X[2 * n + 1],
        u_re=IVector(X.entries[:n]),
        u_im=IVector(X.entries[n : 2 * n]),
        anchor=anchor,
    )


def validate_family(
    A_mid: np.ndarray,
    A_box: IMatrix,
    radius_hint: float = 1e-6,
    max_iter: int = 30,
) -> list[EigenPairEnclosure]:
    """Validate all n eigenpair families of A_box, conjugates by reflection.

    Eigenpairs are seeded from the floating eigendecomposition of A_mid and
    ordered by descending real part (ties by descending imaginary part).
    Raises FamilyValidationFailed when any member cannot be certified.
    """
    evals, evecs = np.linalg.eig(np.asarray(A_mid, dtype=float))
    order = sorted(
        range(len(evals)), key=lambda i: (-evals[i].real, -abs(evals[i].imag), -evals[i].imag)
    )
    out: dict[int, EigenPairEnclosure] = {}
    done = set()
    for i in order:
        if i in done:
            continue
        lam = evals[i]
        vec = evecs[:, i]
        if abs(lam.imag) < 1e-12:
            result = krawczyk_validate(
                A_mid, A_box, vec.real, lam.real, EigKind.REAL,
                radius=radius_hint, max_iter=max_iter,
            )
            if result.status != KrawczykStatus.UNIQUE_FAMILY:
                raise FamilyValidationFailed(i, f"{result.status.value}: {result.detail}")
            out[i] = result.enclosure
            done.add(i)
        else:
            result = krawczyk_validate(
                A_mid, A_box, vec, complex(lam), EigKind.COMPLEX,
                radius=radius_hint, max_iter=max_iter,
            )
            if result.status != KrawczykStatus.UNIQUE_FAMILY:
                raise FamilyValidationFailed(i, f"{result.status.value}: {result.detail}")
            out[i] = result.enclosure
            done.add(i)
            # reflect onto the conjugate partner without re-validating
            partner = _conjugate_partner(evals, i, done)
            if partner is not None:
                out[partner] = result.enclosure.conjugate()
                done.add(partner)
    return [out[i] for i in order if i in out]


def _conjugate_partner(evals, i, done):
    lam = evals[i]
    best = None
    best_dist = np.inf
    for j in range(len(evals)):
        if j == i or j in done:
            continue
        d = abs(evals[j] - np.conj(lam))
        if d < best_dist:
            best_dist = d
            best = j
    if best is not None and best_dist <= 1e-8 * max(1.0, abs(lam)):
        return best
    return None
