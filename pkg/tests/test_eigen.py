import numpy as np
import pytest

from slowtube.eigen import (
    EigKind,
    FamilyValidationFailed,
    KrawczykStatus,
    bordered_jacobian_complex,
    bordered_jacobian_real,
    krawczyk_validate,
    residual_real,
    validate_family,
)
from slowtube.interval import IMatrix, Interval, IVector


def boxed(A, pad):
    p = Interval(-pad, pad)
    return IMatrix([[Interval.point(A[i, j]) + p for j in range(A.shape[1])] for i in range(A.shape[0])])


class TestResidual:
    def test_exact_pair_zero(self):
        A = np.diag([2.0, -1.0])
        r = residual_real(np.array([1.0, 0.0]), 2.0, A)
        assert np.allclose(r, 0.0)

    def test_perturbed_lambda(self):
        A = np.diag([2.0, -1.0])
        r = residual_real(np.array([1.0, 0.0]), 2.1, A)
        assert np.allclose(r, [-0.1, 0.0, 0.0])

    def test_norm_row(self):
        A = np.diag([2.0, -1.0])
        r = residual_real(np.array([2.0, 0.0]), 2.0, A)
        assert abs(r[-1] - 3.0) < 1e-14


class TestBorderedJacobian:
    def test_real_structure(self):
        A = IMatrix.from_point(np.diag([2.0, -1.0]))
        u = IVector.from_point([1.0, 0.0])
        J = bordered_jacobian_real(u, Interval.point(2.0), A)
        expect = [
            [0.0, 0.0, -1.0],
            [0.0, -3.0, 0.0],
            [2.0, 0.0, 0.0],
        ]
        for i in range(3):
            for j in range(3):
                assert J[i, j].contains(expect[i][j])

    def test_real_nonsingular_iff_simple(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            D = np.diag(np.sort(rng.uniform(-3, 3, size=3))[::-1])
            D[1, 1] = D[0, 0] - rng.uniform(0.5, 2.0)
            D[2, 2] = D[1, 1] - rng.uniform(0.5, 2.0)
            Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
            A = Q @ D @ Q.T
            evals, evecs = np.linalg.eigh(A)
            for k in range(3):
                u = evecs[:, k]
                M = np.zeros((4, 4))
                M[:3, :3] = A - evals[k] * np.eye(3)
                M[:3, 3] = -u
                M[3, :3] = 2 * u
                assert abs(np.linalg.det(M)) > 1e-8

    def test_complex_reduces_to_real_blocks(self):
        A = IMatrix.from_point(np.diag([2.0, -1.0]))
        u_re = IVector.from_point([1.0, 0.0])
        u_im = IVector.from_point([0.0, 0.0])
        J = bordered_jacobian_complex(
            u_re, u_im, Interval.point(2.0), Interval.point(0.0), A
        )
        # with lam_im = 0, u_im = 0 the off blocks coupling re/im vanish
        for i in range(2):
            for j in range(2):
                assert J[i, 2 + j].contains(0.0) and J[i, 2 + j].width == 0.0
                assert J[2 + i, j].contains(0.0) and J[2 + i, j].width == 0.0


class TestKrawczyk:
    def test_constant_diagonal(self):
        A = np.diag([2.0, -1.0])
        box = boxed(A, 0.0)
        res = krawczyk_validate(A, box, np.array([1.0, 0.0]), 2.0, EigKind.REAL, radius=0.1)
        assert res.status == KrawczykStatus.UNIQUE_FAMILY
        enc = res.enclosure
        assert enc.lambda_re.contains(2.0)
        assert enc.lambda_re.lo > 1.99 and enc.lambda_re.hi < 2.01
        assert enc.u_re[0].lo > 0.99 and enc.u_re[0].hi < 1.01

    def test_family_over_interval_matrix(self):
        A = np.array([[0.0, 1.0], [0.3 / 9.0, 0.8 / 9.0]])
        box = boxed(A, 1e-3)
        evals, evecs = np.linalg.eig(A)
        i = int(np.argmax(evals.real))
        res = krawczyk_validate(A, box, evecs[:, i].real, float(evals[i].real), EigKind.REAL, radius=1e-2)
        assert res.status == KrawczykStatus.UNIQUE_FAMILY
        # every matrix in the box keeps its eigenvalue inside the enclosure
        rng = np.random.default_rng(8)
        for _ in range(100):
            E = rng.uniform(-1e-3, 1e-3, size=(2, 2))
            lam = np.max(np.linalg.eigvals(A + E).real)
            assert res.enclosure.lambda_re.contains(float(lam))

    def test_eigenvalue_crossing_never_unique(self):
        # family diag(y, 1-y), y in [0.4, 0.6]: eigenvalues cross at 0.5
        box = IMatrix(
            [
                [Interval(0.4, 0.6), Interval.point(0.0)],
                [Interval.point(0.0), Interval(0.4, 0.6)],
            ]
        )
        A_mid = np.diag([0.5, 0.5])
        res = krawczyk_validate(
            A_mid, box, np.array([1.0, 0.0]), 0.5, EigKind.REAL, radius=1e-3
        )
        assert res.status != KrawczykStatus.UNIQUE_FAMILY

    def test_complex_pair(self):
        A = np.array([[1.0, -2.0], [2.0, 1.0]])
        box = boxed(A, 1e-6)
        evals, evecs = np.linalg.eig(A)
        i = int(np.argmax(evals.imag))
        res = krawczyk_validate(A, box, evecs[:, i], complex(evals[i]), EigKind.COMPLEX, radius=1e-3)
        assert res.status == KrawczykStatus.UNIQUE_FAMILY
        enc = res.enclosure
        assert enc.lambda_re.contains(1.0)
        assert enc.lambda_im.contains(2.0)
        assert enc.norm_sq().contains(1.0)

    def test_no_zero_soundness(self):
        # box far from any eigenpair of a fixed matrix
        A = np.diag([2.0, -1.0])
        box = boxed(A, 0.0)
        res = krawczyk_validate(
            A, box, np.array([1.0, 0.0]), 5.0, EigKind.REAL, radius=1e-3, inflations=0
        )
        assert res.status in (KrawczykStatus.NO_ZERO, KrawczykStatus.INCONCLUSIVE)
        if res.status == KrawczykStatus.NO_ZERO:
            for lam in np.linalg.eigvals(A):
                assert not (4.999 <= lam.real <= 5.001)


class TestValidateFamily:
    def test_diag_constant(self):
        A = np.diag([2.0, -1.0])
        fam = validate_family(A, boxed(A, 0.0))
        assert len(fam) == 2
        assert fam[0].lambda_re.contains(2.0)
        assert fam[1].lambda_re.contains(-1.0)

    def test_fhn_origin_window(self):
        # hand-computed eigenvalues of [[0, 1], [a/delta, c/delta]]
        A = np.array([[0.0, 1.0], [0.3 / 9.0, 0.8 / 9.0]])
        fam = validate_family(A, boxed(A, 2e-4))
        lam1, lam2 = fam[0].lambda_re, fam[1].lambda_re
        assert lam1.lo > 0.2316 - 2e-3 and lam1.hi < 0.2331 + 2e-3
        assert lam2.lo > -0.1442 - 2e-3 and lam2.hi < -0.1424 + 2e-3
        # eigenvector of the unstable direction points along (0.974, 0.225)
        u = fam[0].u_re
        sign = 1.0 if u[0].mid > 0 else -1.0
        assert (u[0] * Interval.point(sign)).contains(0.9741) or abs(u[0].mid * sign - 0.9741) < 2e-3
        assert abs(u[1].mid * sign - 0.2263) < 2e-3

    def test_complex_conjugates_reflected(self):
        A = np.array([[1.0, -2.0], [2.0, 1.0]])
        fam = validate_family(A, boxed(A, 1e-8))
        ims = sorted(e.lambda_im.mid for e in fam)
        assert ims[0] < -1.9 and ims[1] > 1.9
        assert fam[0].u_re.entries == fam[1].u_re.entries

    def test_failure_reported_with_index(self):
        box = IMatrix(
            [
                [Interval(0.4, 0.6), Interval.point(0.0)],
                [Interval.point(0.0), Interval(0.4, 0.6)],
            ]
        )
        with pytest.raises(FamilyValidationFailed):
            validate_family(np.diag([0.5001, 0.4999]), box)


class TestCylinderCellFamily:
    def test_quarter_turn_cell(self):
        # fast Jacobian of the cylinder system at (r,z)=(1,0):
        # [[-2cos(t), -sin(t)], [-2sin(t), cos(t)]] over a width-2e-3 cell
        t_lo, t_hi = np.pi / 2 - 1e-3, np.pi / 2 + 1e-3
        c = Interval(t_lo, t_hi).cos()
        s = Interval(t_lo, t_hi).sin()
        two = Interval.point(2.0)
        box = IMatrix([[-(two * c), -s], [-(two * s), c]])
        A_mid = np.array([[0.0, -1.0], [-2.0, 0.0]])
        evals, evecs = np.linalg.eig(A_mid)
        i = int(np.argmax(evals.real))
        res = krawczyk_validate(
            A_mid, box, evecs[:, i].real, float(evals[i].real), EigKind.REAL
        )
        assert res.status == KrawczykStatus.UNIQUE_FAMILY
        enc = res.enclosure
        assert enc.lambda_re.contains(np.sqrt(2.0))
        target = np.array([0.57735, -0.81650])
        sgn = 1.0 if enc.u_re[0].mid * target[0] > 0 else -1.0
        for comp, want in zip(enc.u_re, target):
            lo, hi = sorted((sgn * comp.lo, sgn * comp.hi))
            assert lo - 1e-4 <= want <= hi + 1e-4


class TestComplexRegimePredPrey:
    def test_complex_kind_required_past_critical_coupling(self):
        # fast linearization [[0,1],[1-v, 0.25]] at (u,w)=(1,0): eigenvalues
        # are complex for v >= 65/64
        for v in (1.05, 1.2):
            A = np.array([[0.0, 1.0], [1.0 - v, 0.25]])
            assert np.iscomplex(np.linalg.eigvals(A)).all()
            fam = validate_family(A, boxed(A, 1e-8))
            assert all(e.kind.value == "complex" for e in fam)
            assert fam[0].lambda_im.mid > 0 > fam[1].lambda_im.mid
            assert fam[0].lambda_re.contains(0.125)
        # just below the threshold the pair is still real
        A = np.array([[0.0, 1.0], [1.0 - 1.01, 0.25]])
        assert not np.iscomplex(np.linalg.eigvals(A)).any()
        fam = validate_family(A, boxed(A, 1e-10))
        assert all(e.kind.value == "real" for e in fam)


class TestOracleContainment:
    def test_random_diagonalizable(self):
        rng = np.random.default_rng(11)
        checked = 0
        for _ in range(60):
            n = rng.choice([3, 4])
            evs = np.sort(rng.uniform(-3, 3, size=n))[::-1]
            for k in range(1, n):
                if evs[k - 1] - evs[k] < 0.1:
                    evs[k] = evs[k - 1] - rng.uniform(0.1, 0.7)
            Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
            A = Q @ np.diag(evs) @ Q.T
            fam = validate_family(A, boxed(A, 1e-9))
            oracle_vals, oracle_vecs = np.linalg.eigh(A)
            oracle_order = np.argsort(oracle_vals)[::-1]
            for idx, enc in enumerate(fam):
                ov = oracle_vals[oracle_order[idx]]
                assert enc.lambda_re.contains(float(ov))
                vec = oracle_vecs[:, oracle_order[idx]]
                a = enc.anchor
                if vec[a] * enc.u_re[a].mid < 0:
                    vec = -vec
                for c, x in zip(enc.u_re, vec):
                    assert c.contains(float(x))
                checked += 1
        assert checked >= 150

    def test_shrinking_cells_nest(self):
        A = np.array([[0.0, 1.0], [0.3 / 9.0, 0.8 / 9.0]])
        wide = validate_family(A, boxed(A, 4e-4))
        half = validate_family(A, boxed(A, 2e-4))
        for w, h in zip(wide, half):
            assert w.lambda_re.lo <= h.lambda_re.lo and h.lambda_re.hi <= w.lambda_re.hi

    def test_norm_constraint(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            A = rng.normal(size=(3, 3)) + np.diag([3.0, 0.0, -3.0])
            try:
                fam = validate_family(A, boxed(A, 1e-8))
            except FamilyValidationFailed:
                continue
            for enc in fam:
                assert enc.norm_sq().contains(1.0)
