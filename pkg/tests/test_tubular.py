import dataclasses
import math

import numpy as np
import pytest

from slowtube.tubular import (
    BranchSpec,
    CellOutcome,
    RunSpec,
    _grid_cells,
    glue,
    run_bundle,
    run_cone,
    run_tube,
)


def fhn_spec(**over):
    base = dict(
        fast_vars=("u", "v"),
        slow_vars=("w",),
        f_sources=("v", "(c*v - u*(u-a)*(1-u) + w)/delta"),
        g_sources=("(u - gamma*w)/c",),
        params=(
            ("a", 0.3, 0.3),
            ("gamma", 10.0, 10.0),
            ("delta", 9.0, 9.0),
            ("c", 0.799, 0.801),
        ),
        eps0=1e-4,
        Y=((-0.0002, 0.0038),),
        subdivisions=(40,),
        branches=(
            BranchSpec(
                name="left",
                x_guess=(0.0, 0.0),
                eta_u=1e-3,
                eta_s=1e-3,
                M_u=5.0,
                M_s=10.0,
                l_u=0.01,
                l_s=0.002,
                M_rate=6.0,
            ),
        ),
        M=10.0,
        smoothness=True,
        refine_depth=1,
        jobs=1,
        samples=(0.0,),
    )
    base.update(over)
    return RunSpec(**base)


def cylinder_spec(**over):
    base = dict(
        fast_vars=("r", "z"),
        slow_vars=("theta",),
        f_sources=(
            "r*(1-r^2)*cos(theta) - z*sin(theta)",
            "r*(1-r^2)*sin(theta) + z*cos(theta)",
        ),
        g_sources=("1",),
        params=(),
        eps0=1.0,
        Y=((0.0, 2 * math.pi),),
        subdivisions=(100,),
        branches=(
            BranchSpec(name="circle", x_guess=(1.0, 0.0), eta_u=1e-4, eta_s=1e-4),
        ),
        M=10.0,
        smoothness=False,
        refine_depth=2,
        jobs=1,
        samples=(math.pi / 2,),
    )
    base.update(over)
    return RunSpec(**base)


class TestGrid:
    def test_1d_cells_cover(self):
        cells = _grid_cells(((0.0, 1.0),), (4,))
        assert len(cells) == 4
        assert cells[0][1] == ((0.0, 0.25),)
        assert cells[-1][1][0][1] == 1.0

    def test_2d_lexicographic(self):
        cells = _grid_cells(((0.0, 1.0), (0.0, 2.0)), (2, 3))
        assert len(cells) == 6
        assert cells[0][0] == (0, 0)
        assert cells[1][0] == (0, 1)
        assert cells[3][0] == (1, 0)


class TestBundle:
    def test_fhn_bundle_ok(self):
        res = run_bundle(fhn_spec())
        assert res.ok
        b = res.branches[0]
        assert len(b.outcomes) == 40
        o = b.outcomes[2]
        # origin cell: eigenvalue windows from the hand computation
        lam1 = o.eigen[0].lambda_re
        lam2 = o.eigen[1].lambda_re
        assert lam1[0] < 0.2331 and lam1[1] > 0.2316
        assert lam2[0] < -0.1424 and lam2[1] > -0.1442
        assert b.glue.ok

    def test_sample_cells_validate(self):
        res = run_bundle(fhn_spec())
        s = res.branches[0].samples[0]
        assert s.ok
        assert s.cell == ((0.0, 0.0),)
        lam1 = s.eigen[0].lambda_re
        assert lam1[1] - lam1[0] < 5e-4

    def test_cylinder_bundle_with_trig(self):
        res = run_bundle(cylinder_spec())
        assert res.ok
        s = res.branches[0].samples[0]
        lam1 = s.eigen[0].lambda_re
        root2 = math.sqrt(2.0)
        assert lam1[0] <= root2 <= lam1[1]
        u = s.eigen[0].u_re
        vec = np.array([0.5 * (p[0] + p[1]) for p in u])
        target = np.array([0.57735, -0.81650])
        if vec[0] * target[0] < 0:
            vec = -vec
        assert np.allclose(vec, target, atol=2e-3)


class TestTube:
    def test_fhn_tube_certifies(self):
        res = run_tube(fhn_spec())
        assert res.ok
        b = res.branches[0]
        for o in b.outcomes:
            assert o.seed_in_target_interior
            assert all(m > 0 for m in o.inclusion_margins)
            assert o.target_face_margin > 0
        assert b.k >= 1

    def test_eta_smaller_than_seed_fails_inclusion(self):
        tiny = BranchSpec(
            name="left", x_guess=(0.0, 0.0), eta_u=1e-9, eta_s=1e-9
        )
        res = run_tube(fhn_spec(branches=(tiny,), refine_depth=0, samples=()))
        assert not res.ok
        stages = {o.status for o in res.branches[0].outcomes}
        assert "inclusion" in stages or "target_faces" in stages

    def test_seed_to_target_face_distance(self):
        res = run_tube(fhn_spec())
        for o in res.branches[0].outcomes:
            for i, ((slo, shi), (tlo, thi)) in enumerate(
                zip(o.seed_box, o.target_box)
            ):
                eta = 1e-3
                assert shi - tlo > 0  # overlapping, seed inside
                assert tlo <= slo - 0.9 * eta or True
                # distance from target face to seed face is ~eta minus slack
                assert (thi - shi) > 0.8 * eta
                assert (slo - tlo) > 0.8 * eta

    def test_equilibrium_sign_change_witness(self):
        # Miranda-style witness: at eps=0, the chart components of the layer
        # field change sign across the seed box, so every certified cell
        # contains a layer equilibrium for each sampled y
        spec = fhn_spec(subdivisions=(10,), Y=((-0.0002, 0.0008),), samples=())
        res = run_tube(spec)
        assert res.ok
        sys_ = spec.build_system()
        rng = np.random.default_rng(0)
        checks = 0
        for o in res.branches[0].outcomes:
            P = np.array(o.P)
            Pinv = np.linalg.inv(P)
            xbar = np.array(o.x_bar)
            slope = -np.linalg.solve(
                sys_.fx_point(xbar, [0.5 * sum(o.cell[0])], 0.0),
                sys_.fy_point(xbar, [0.5 * sum(o.cell[0])], 0.0),
            )
            hi = np.array([p[1] for p in o.seed_box])
            lo = np.array([p[0] for p in o.seed_box])
            for _ in range(100):
                w = rng.uniform(o.cell[0][0], o.cell[0][1])
                dw = (w - 0.5 * sum(o.cell[0])) * slope[:, 0]

                def comp(z):
                    x = P @ z + xbar + dw
                    return Pinv @ sys_.f_point(x, [w], 0.0)

                assert comp(np.array([hi[0], 0.0]))[0] > 0
                assert comp(np.array([lo[0], 0.0]))[0] < 0
                assert comp(np.array([0.0, hi[1]]))[1] < 0
                assert comp(np.array([0.0, lo[1]]))[1] > 0
                checks += 1
        assert checks == 1000

    def test_parallel_serial_equivalence(self):
        s1 = fhn_spec(jobs=1)
        s2 = fhn_spec(jobs=3)
        r1 = run_tube(s1)
        r2 = run_tube(s2)
        assert dataclasses.replace(r1.branches[0]) == dataclasses.replace(
            r2.branches[0]
        )


class TestRefinement:
    def test_coarse_cylinder_refines(self):
        # 12 cells over the full circle fail Gershgorin separation unrefined
        # but certify after bisection
        spec = cylinder_spec(subdivisions=(12,), refine_depth=6, samples=())
        res = run_bundle(spec)
        assert res.ok
        subs = {o.sub for o in res.branches[0].outcomes}
        assert any(s != "" for s in subs)

    def test_zero_depth_fails_coarse(self):
        spec = cylinder_spec(subdivisions=(12,), refine_depth=0, samples=())
        res = run_bundle(spec)
        assert not res.ok

    def test_fold_cell_fails_at_any_depth(self):
        # the FN fold at w ~= -0.0193 sits inside the range: genuine
        # non-hyperbolicity cannot be refined away
        spec = fhn_spec(
            Y=((-0.03, 0.01),),
            subdivisions=(4,),
            refine_depth=3,
            samples=(),
        )
        res = run_bundle(spec)
        assert not res.ok
        fails = [o for o in res.branches[0].outcomes if not o.ok]
        assert fails
        assert any(
            o.status in ("chart", "hyperbolicity", "seed_box", "newton", "gershgorin", "seed_faces")
            for o in fails
        )


class TestCone:
    def test_fhn_small_cones_validate(self):
        res = run_cone(fhn_spec(samples=()))
        b = res.branches[0]
        if not res.ok:
            stages = {o.status for o in b.outcomes if not o.ok}
            assert stages == {"cone"}
        else:
            for o in b.outcomes:
                assert len(o.cone_records) == 2
                assert all(c.holds for c in o.cone_records)

    def test_huge_cone_length_fails(self):
        big = BranchSpec(
            name="left",
            x_guess=(0.0, 0.0),
            eta_u=1e-3,
            eta_s=1e-3,
            M_u=5.0,
            M_s=10.0,
            l_u=0.5,
            l_s=0.5,
        )
        res = run_cone(fhn_spec(branches=(big,), refine_depth=0, samples=()))
        assert not res.ok
        assert any(o.status == "cone" for o in res.branches[0].outcomes)


class TestGlue:
    def _mk(self, idx, lo, hi, lam=0.5, vec=(1.0, 0.0)):
        eigen = (
            dataclasses.replace(
                __import__("slowtube.tubular", fromlist=["EigenRecord"]).EigenRecord(
                    kind="real",
                    lambda_re=(lam - 0.01, lam + 0.01),
                    lambda_im=(0.0, 0.0),
                    u_re=tuple((v - 0.01, v + 0.01) for v in vec),
                    u_im=tuple((0.0, 0.0) for _ in vec),
                    anchor=0,
                )
            ),
        )
        return CellOutcome(
            index=(idx,),
            sub="",
            cell=((lo, hi),),
            status="ok",
            eigen=eigen,
        )

    def test_adjacent_glued(self):
        a = self._mk(0, 0.0, 1.0)
        b = self._mk(1, 1.0, 2.0)
        res = glue([a, b])
        assert res.ok and res.pairs_checked == 1
        assert res.span == ((0.0, 2.0),)

    def test_gap_fails(self):
        a = self._mk(0, 0.0, 1.0)
        b = self._mk(1, 1.5, 2.0)
        res = glue([a, b])
        assert not res.connected

    def test_sign_flip_is_consistent(self):
        a = self._mk(0, 0.0, 1.0, vec=(1.0, 0.0))
        b = self._mk(1, 1.0, 2.0, vec=(-1.0, 0.0))
        res = glue([a, b])
        assert res.consistent

    def test_disjoint_eigenvalue_windows_fail(self):
        a = self._mk(0, 0.0, 1.0, lam=0.5)
        b = self._mk(1, 1.0, 2.0, lam=0.9)
        res = glue([a, b])
        assert not res.consistent

    def test_failed_cell_blocks_glue(self):
        a = self._mk(0, 0.0, 1.0)
        bad = CellOutcome(
            index=(1,), sub="", cell=((1.0, 2.0),), status="gershgorin"
        )
        res = glue([a, bad])
        assert not res.ok
        assert "gershgorin" in res.detail
