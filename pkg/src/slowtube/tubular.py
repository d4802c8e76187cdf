"""Pipelines: seeds and eigenpair bundles, tubular targets, conic extensions.

Per slow-variable cell the pipeline builds a seed block (tight enclosure of
the slow manifold branch), certifies simple spectra with Gershgorin disks in
the diagonalizing chart, validates the continuous eigenpair family with the
Krawczyk operator, and optionally sizes an eta-widened target whose inclusion
test places the seed strictly inside the moving-frame tube.  Cone conditions
over inflated boxes extend targets to conic and star-shaped neighborhoods.

Cells are processed independently (optionally in a process pool) and glued
sequentially afterwards; a failing cell is bisected along its widest slow
direction up to a configurable depth before the branch is declared failed.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .block import (
    BlockBox,
    DirKind,
    EigSolverFailed,
    HyperbolicityViolated,
    build_chart,
    conjugated_enclosure,
    construct_block,
    direction_bounds,
    fx_enclosure,
    gershgorin_disjoint,
)
from .eigen import FamilyValidationFailed, validate_family
from .interval import IMatrix, Interval, IVector, intersect
from .linalg import NumericallySingular, inverse_enclosure
from .rates import (
    ConeKind,
    RateStatus,
    cone_check,
    rate_order,
    rates_for_block,
)
from .system import FastSlowSystem, NewtonFailed, newton_layer_equilibrium

__all__ = [
    "BranchSpec",
    "RunSpec",
    "CellOutcome",
    "GlueResult",
    "BranchResult",
    "RunResult",
    "run",
    "run_bundle",
    "run_tube",
    "run_cone",
    "glue",
]


# -- specifications ------------------------------------------------------------


@dataclass(frozen=True)
class BranchSpec:
    """One branch of the critical manifold to validate."""

    name: str
    x_guess: tuple
    eta_u: float = 0.0
    eta_s: float = 0.0
    M_u: float = 2.0
    M_s: float = 2.0
    l_u: float = 0.0
    l_s: float = 0.0
    M_rate: float | None = None  # overrides the run-level cone slope M


@dataclass(frozen=True)
class RunSpec:
    """Plain-data description of a validation run (picklable for workers)."""

    fast_vars: tuple
    slow_vars: tuple
    f_sources: tuple
    g_sources: tuple
    params: tuple  # ((name, lo, hi), ...)
    eps0: float
    Y: tuple  # ((lo, hi), ...) per slow dim
    subdivisions: tuple
    branches: tuple
    M: float = 10.0
    smoothness: bool = False
    refine_depth: int = 6
    jobs: int = 1
    samples: tuple = ()  # thin slow-variable points for report rows

    def build_system(self) -> FastSlowSystem:
        return FastSlowSystem.from_strings(
            fast_vars=self.fast_vars,
            slow_vars=self.slow_vars,
            f_sources=self.f_sources,
            g_sources=self.g_sources,
            params={name: (lo, hi) for name, lo, hi in self.params},
            eps0=self.eps0,
        )


# -- per-cell outcome -----------------------------------------------------------


@dataclass(frozen=True)
class EigenRecord:
    kind: str
    lambda_re: tuple
    lambda_im: tuple
    u_re: tuple
    u_im: tuple
    anchor: int


@dataclass(frozen=True)
class ConeRecord:
    kind: str
    M: float
    holds: bool
    margin_graph: float
    margin_cone: float


@dataclass(frozen=True)
class CellOutcome:
    index: tuple
    sub: str
    cell: tuple
    status: str
    detail: str = ""
    x_bar: tuple = ()
    lam_sample: tuple = ()
    P: tuple = ()
    direction_kinds: tuple = ()
    n_u: int = 0
    seed_box: tuple = ()
    seed_delta: tuple = ()
    dir_bounds: tuple = ()
    gersh_disjoint: bool = False
    eigen: tuple = ()
    seed_face_margin: float = math.nan
    seed_cones: tuple = ()
    rates: tuple = ()
    k_status: str = ""
    k: int = -1
    k_ratios: tuple = ()
    target_box: tuple = ()
    target_face_margin: float = math.nan
    target_cones: tuple = ()
    inclusion_margins: tuple = ()
    seed_in_target_interior: bool = False
    cone_records: tuple = ()
    face_labels: tuple = ()

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class GlueResult:
    connected: bool
    consistent: bool
    span: tuple
    pairs_checked: int
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.connected and self.consistent


@dataclass(frozen=True)
class BranchResult:
    name: str
    mode: str
    outcomes: tuple
    samples: tuple
    glue: GlueResult | None
    k: int
    k_status: str

    @property
    def ok(self) -> bool:
        cells_ok = all(o.ok for o in self.outcomes) and all(
            o.ok for o in self.samples
        )
        glue_ok = self.glue.ok if self.glue is not None else True
        return cells_ok and glue_ok


@dataclass(frozen=True)
class RunResult:
    mode: str
    branches: tuple

    @property
    def ok(self) -> bool:
        return all(b.ok for b in self.branches)


# -- helpers ---------------------------------------------------------------------


def _pair(iv: Interval) -> tuple:
    return (iv.lo, iv.hi)


def _pairs(ivs) -> tuple:
    return tuple(_pair(v) for v in ivs)


def _grid_cells(Y, subdivisions):
    """Lexicographic closed-cell grid over the slow box."""
    axes = []
    for (lo, hi), m in zip(Y, subdivisions):
        if m < 1:
            raise ValueError("subdivisions must be >= 1")
        edges = [lo + (hi - lo) * i / m for i in range(m + 1)]
        edges[0], edges[-1] = lo, hi
        axes.append(edges)
    shape = tuple(subdivisions)
    cells = []
    for flat in range(int(np.prod(shape))):
        idx = np.unravel_index(flat, shape)
        bounds = tuple(
            (axes[d][i], axes[d][i + 1]) for d, i in enumerate(idx)
        )
        cells.append((tuple(int(i) for i in idx), bounds))
    return cells


def _eigen_record(enc) -> EigenRecord:
    return EigenRecord(
        kind=enc.kind.value,
        lambda_re=_pair(enc.lambda_re),
        lambda_im=_pair(enc.lambda_im),
        u_re=_pairs(enc.u_re),
        u_im=_pairs(enc.u_im),
        anchor=enc.anchor,
    )


def _cone_record(cert) -> ConeRecord:
    return ConeRecord(
        kind=cert.kind.value,
        M=cert.M,
        holds=cert.holds,
        margin_graph=cert.margin_graph,
        margin_cone=cert.margin_cone,
    )


def _rates_tuple(r):
    return (
        ("M", r.M),
        ("mu_s1", r.mu_s1),
        ("mu_s2", r.mu_s2),
        ("xi_u1", r.xi_u1),
        ("xi_u2", r.xi_u2),
        ("mu_ss1", r.mu_ss1),
        ("mu_ss2", r.mu_ss2),
        ("xi_su1", r.xi_su1),
        ("xi_su2", r.xi_su2),
    )


def _family_lambda_bounds(chart, encs):
    """Per-direction eigenvalue intervals from the validated family."""
    out = []
    i = 0
    for d in chart.directions:
        enc = encs[i]
        out.append(enc.lambda_re)
        i += 2 if d.kind == DirKind.PAIR else 1
    return out


def _family_eigenmatrix(chart, encs) -> IMatrix:
    """Interval eigenmatrix [P] with pair columns (Re u, Im u)."""
    n = chart.n
    cols = []
    i = 0
    for d in chart.directions:
        enc = encs[i]
        # sign-align the enclosure with the sample chart column
        col_mid = np.array([c.mid for c in enc.u_re])
        sample = chart.P[:, d.pos]
        flip = -1.0 if float(col_mid @ sample) < 0.0 else 1.0
        sgn = Interval.point(flip)
        cols.append([sgn * c for c in enc.u_re])
        if d.kind == DirKind.PAIR:
            cols.append([sgn * c for c in enc.u_im])
            i += 2
        else:
            i += 1
    rows = [[cols[j][r] for j in range(n)] for r in range(n)]
    return IMatrix(rows)


def _face_labels(chart) -> tuple:
    labels = []
    for d in chart.directions:
        kind = "exit" if d.unstable else "entrance"
        if d.kind == DirKind.REAL:
            labels.append(f"z{d.pos}:+/-:{kind}")
        else:
            labels.append(f"z{d.pos}-z{d.pos + 1}:circle:{kind}")
    return tuple(labels)


# -- the per-cell pipeline --------------------------------------------------------


@dataclass
class _Context:
    system: FastSlowSystem
    spec: RunSpec
    branch: BranchSpec
    mode: str


def _fail(index, sub, bounds, stage, detail="") -> CellOutcome:
    return CellOutcome(
        index=index,
        sub=sub,
        cell=tuple(bounds),
        status=stage,
        detail=detail,
    )


def _process_cell(ctx: _Context, index, bounds, sub, x_guess) -> CellOutcome:
    system = ctx.system
    spec = ctx.spec
    branch = ctx.branch
    eps0 = spec.eps0
    cell = tuple(Interval(lo, hi) for lo, hi in bounds)
    y_mid = [c.mid for c in cell]

    try:
        x_bar = newton_layer_equilibrium(system, y_mid, x_guess)
    except NewtonFailed as exc:
        return _fail(index, sub, bounds, "newton", str(exc))
    try:
        chart = build_chart(system, x_bar, y_mid)
    except (NumericallySingular, EigSolverFailed, HyperbolicityViolated) as exc:
        return _fail(index, sub, bounds, "chart", str(exc))

    try:
        seed = construct_block(system, chart, cell, eps0)
    except HyperbolicityViolated as exc:
        return _fail(index, sub, bounds, "seed_box", str(exc))
    if not seed.self_consistent:
        return _fail(index, sub, bounds, "seed_box", "no self-consistent enclosure")
    if not seed.isolation_certified:
        worst = min((f.margin for f in seed.faces), default=math.nan)
        return _fail(
            index, sub, bounds, "seed_faces", f"worst face margin {worst:.3e}"
        )

    seed_cj = seed.cj if seed.cj is not None and seed.cj.covers(seed.box.z_ranges) else None
    M_conj = conjugated_enclosure(system, chart, seed.box, eps0, cj=seed_cj)
    disks, disjoint = gershgorin_disjoint(M_conj, chart.directions)
    if not disjoint:
        return _fail(index, sub, bounds, "gershgorin", "disk projections overlap")
    bounds_dir = direction_bounds(M_conj, chart.directions)
    for d, biv in zip(chart.directions, bounds_dir):
        if d.unstable and biv.lo <= 0.0:
            return _fail(index, sub, bounds, "hyperbolicity", f"unstable bound {biv!r}")
        if not d.unstable and biv.hi >= 0.0:
            return _fail(index, sub, bounds, "hyperbolicity", f"stable bound {biv!r}")

    A_mid = system.fx_point(x_bar, y_mid, 0.0)
    A_box = fx_enclosure(system, chart, seed.box, eps0, cj=seed_cj)
    try:
        fam = validate_family(A_mid, A_box)
    except FamilyValidationFailed as exc:
        return _fail(index, sub, bounds, "krawczyk", str(exc))

    M_rate = branch.M_rate if branch.M_rate is not None else spec.M
    r_seed = rates_for_block(system, seed, M_rate, eps0)
    cu_seed = cone_check(r_seed, ConeKind.UNSTABLE)
    cs_seed = cone_check(r_seed, ConeKind.STABLE)
    if not (cu_seed.holds and cs_seed.holds):
        return _fail(
            index,
            sub,
            bounds,
            "seed_cones",
            f"margins u=({cu_seed.margin_graph:.3e},{cu_seed.margin_cone:.3e}) "
            f"s=({cs_seed.margin_graph:.3e},{cs_seed.margin_cone:.3e})",
        )

    out = dict(
        index=index,
        sub=sub,
        cell=tuple(bounds),
        status="ok",
        x_bar=tuple(float(v) for v in x_bar),
        lam_sample=tuple(
            (d.lam_re, d.lam_im) for d in chart.directions
        ),
        P=tuple(tuple(float(v) for v in row) for row in chart.P),
        direction_kinds=tuple(d.kind.value for d in chart.directions),
        n_u=chart.n_u,
        seed_box=_pairs(seed.box.z_ranges),
        seed_delta=_pairs(seed.delta),
        dir_bounds=_pairs(bounds_dir),
        gersh_disjoint=True,
        eigen=tuple(_eigen_record(e) for e in fam),
        seed_face_margin=min(f.margin for f in seed.faces),
        seed_cones=(_cone_record(cu_seed), _cone_record(cs_seed)),
        face_labels=_face_labels(chart),
    )

    rate_source = r_seed
    if ctx.mode == "bundle":
        if spec.smoothness:
            order = rate_order(rate_source)
            out["rates"] = _rates_tuple(rate_source)
            out["k_status"] = order.status.value
            out["k"] = order.k
            out["k_ratios"] = (order.k_su_ratio, order.k_ss_ratio)
        return CellOutcome(**out)

    # --- target stage (tube / cone) ---
    fam_lams = _family_lambda_bounds(chart, fam)
    P_fam = _family_eigenmatrix(chart, fam)
    try:
        P_fam_inv = inverse_enclosure(P_fam)
    except NumericallySingular as exc:
        return _fail(index, sub, bounds, "eigenmatrix_inverse", str(exc))

    try:
        target = construct_block(
            system,
            chart,
            cell,
            eps0,
            eta_u=branch.eta_u,
            eta_s=branch.eta_s,
            lam_bounds=fam_lams,
        )
    except HyperbolicityViolated as exc:
        return _fail(index, sub, bounds, "target_box", str(exc))
    if not target.self_consistent:
        return _fail(index, sub, bounds, "target_box", "no self-consistent target")
    if not target.isolation_certified:
        worst = min((f.margin for f in target.faces), default=math.nan)
        return _fail(
            index, sub, bounds, "target_faces", f"worst face margin {worst:.3e}"
        )

    # inclusion test: seed re-expressed in the family frame must sit strictly
    # inside the radii
    seed_in_family = P_fam_inv.matvec(
        IMatrix.from_point(chart.P).matvec(IVector(seed.box.z_ranges))
    )
    incl_margins = []
    incl_ok = True
    for d in chart.directions:
        eta = branch.eta_u if d.unstable else branch.eta_s
        for p in range(d.pos, d.pos + d.dims):
            extent = seed_in_family[p].abs_hi
            incl_margins.append(eta - extent)
            incl_ok = incl_ok and extent < eta
    if not incl_ok:
        return _fail(
            index,
            sub,
            bounds,
            "inclusion",
            f"seed extent exceeds radii; margins {tuple(round(m, 9) for m in incl_margins)}",
        )

    r_target = rates_for_block(system, target, M_rate, eps0)
    cu_t = cone_check(r_target, ConeKind.UNSTABLE)
    cs_t = cone_check(r_target, ConeKind.STABLE)
    if not (cu_t.holds and cs_t.holds):
        return _fail(
            index,
            sub,
            bounds,
            "target_cones",
            f"margins u=({cu_t.margin_graph:.3e},{cu_t.margin_cone:.3e}) "
            f"s=({cs_t.margin_graph:.3e},{cs_t.margin_cone:.3e})",
        )

    interior = all(
        t.lo < s.lo and s.hi < t.hi
        for s, t in zip(seed.box.z_ranges, target.box.z_ranges)
    )

    out.update(
        target_box=_pairs(target.box.z_ranges),
        target_face_margin=min(f.margin for f in target.faces),
        target_cones=(_cone_record(cu_t), _cone_record(cs_t)),
        inclusion_margins=tuple(incl_margins),
        seed_in_target_interior=interior,
    )

    if spec.smoothness:
        order = rate_order(r_target)
        out["rates"] = _rates_tuple(r_target)
        out["k_status"] = order.status.value
        out["k"] = order.k
        out["k_ratios"] = (order.k_su_ratio, order.k_ss_ratio)

    if ctx.mode == "cone":
        cone_records = []
        for kind, Mc, lc in (
            (ConeKind.UNSTABLE, branch.M_u, branch.l_u),
            (ConeKind.STABLE, branch.M_s, branch.l_s),
        ):
            inflated = _inflate_for_cone(target.box, chart, kind, Mc, lc)
            # cj must not be inherited: the rates below have to be
            # evaluated over the inflated box, not the tube-sized one
            blk = dataclasses.replace(target, box=inflated, cj=None)
            r_inf = rates_for_block(system, blk, Mc, eps0)
            cert = cone_check(r_inf, kind)
            cone_records.append(_cone_record(cert))
        out["cone_records"] = tuple(cone_records)
        if not all(c.holds for c in cone_records):
            bad = ",".join(c.kind for c in cone_records if not c.holds)
            res = CellOutcome(**{**out, "status": "cone", "detail": f"failed: {bad}"})
            return res

    return CellOutcome(**out)


def _inflate_for_cone(box, chart, kind: ConeKind, M: float, length: float):
    """R(eta_u + l, eta_s + l/M) for the unstable cone; mirrored for stable."""
    if kind == ConeKind.UNSTABLE:
        pad_u, pad_s = length, length / M
    else:
        pad_u, pad_s = length / M, length
    ranges = list(box.z_ranges)
    for d in chart.directions:
        pad = pad_u if d.unstable else pad_s
        for p in range(d.pos, d.pos + d.dims):
            z = ranges[p]
            ranges[p] = Interval(z.lo - pad, z.hi + pad)
    return BlockBox(
        z_ranges=tuple(ranges), cell=box.cell, eta_u=box.eta_u, eta_s=box.eta_s
    )


def _process_cell_refined(
    ctx: _Context, index, bounds, x_guess, depth: int, sub: str = ""
) -> list:
    outcome = _process_cell(ctx, index, bounds, sub, x_guess)
    if outcome.ok or depth <= 0:
        return [outcome]
    widths = [hi - lo for lo, hi in bounds]
    d = int(np.argmax(widths))
    lo, hi = bounds[d]
    mid = 0.5 * (lo + hi)
    halves = []
    for tag, piece in (("0", (lo, mid)), ("1", (mid, hi))):
        sub_bounds = tuple(
            piece if k == d else b for k, b in enumerate(bounds)
        )
        guess = outcome.x_bar if outcome.x_bar else x_guess
        halves.extend(
            _process_cell_refined(ctx, index, sub_bounds, guess, depth - 1, sub + tag)
        )
    return halves


# -- gluing ------------------------------------------------------------------------


def _boxes_share_face(a, b) -> bool:
    touch = 0
    for (alo, ahi), (blo, bhi) in zip(a, b):
        if ahi < blo or bhi < alo:
            return False
        if ahi == blo or bhi == alo:
            touch += 1
    return touch >= 1


def _eigen_consistent(ea, eb) -> bool:
    """Sign-aligned hull intersection of adjacent eigenvector enclosures."""
    if len(ea) != len(eb):
        return False
    for ra, rb in zip(ea, eb):
        if ra.kind != rb.kind:
            return False
        if intersect(Interval(*ra.lambda_re), Interval(*rb.lambda_re)) is None:
            return False
        for sign in (1.0, -1.0):
            all_meet = True
            for (alo, ahi), (blo, bhi) in zip(ra.u_re, rb.u_re):
                s_lo, s_hi = (blo, bhi) if sign > 0 else (-bhi, -blo)
                if intersect(Interval(alo, ahi), Interval(s_lo, s_hi)) is None:
                    all_meet = False
                    break
            if all_meet:
                break
        else:
            return False
    return True


def _match_to_previous(prev: CellOutcome, cur: CellOutcome) -> CellOutcome:
    """Permute cur's eigen list to nearest-neighbor match prev's midpoints."""
    if not prev.eigen or not cur.eigen or len(prev.eigen) != len(cur.eigen):
        return cur
    prev_mid = [
        complex(0.5 * (e.lambda_re[0] + e.lambda_re[1]),
                0.5 * (e.lambda_im[0] + e.lambda_im[1]))
        for e in prev.eigen
    ]
    cur_mid = [
        complex(0.5 * (e.lambda_re[0] + e.lambda_re[1]),
                0.5 * (e.lambda_im[0] + e.lambda_im[1]))
        for e in cur.eigen
    ]
    taken = set()
    perm = []
    for pm in prev_mid:
        best, best_d = None, math.inf
        for j, cm in enumerate(cur_mid):
            if j in taken:
                continue
            d = abs(cm - pm)
            if d < best_d or (
                d == best_d
                and best is not None
                and (cm.real, cm.imag) > (cur_mid[best].real, cur_mid[best].imag)
            ):
                best, best_d = j, d
        taken.add(best)
        perm.append(best)
    if perm == list(range(len(perm))):
        return cur
    return dataclasses.replace(
        cur, eigen=tuple(cur.eigen[j] for j in perm)
    )


def glue(outcomes) -> GlueResult:
    """Continuation certificate across the cell decomposition.

    Verifies that every certified leaf is reachable from the first through
    shared faces and that adjacent eigenvector enclosures agree after sign
    alignment, which pins the vector bundle over the union of cells.
    """
    leaves = [o for o in outcomes if o.ok]
    if not leaves:
        return GlueResult(False, False, (), 0, "no certified cells")
    if len(leaves) != len(outcomes):
        bad = [o for o in outcomes if not o.ok][0]
        return GlueResult(
            False, False, (), 0, f"cell {bad.index}{bad.sub} failed at {bad.status}"
        )
    n = len(leaves)
    adj = [[] for _ in range(n)]
    pairs = []
    # candidate neighbors from the grid structure: leaves of the same or an
    # index-adjacent original cell; avoids the quadratic all-pairs sweep
    by_index = {}
    for i, o in enumerate(leaves):
        by_index.setdefault(o.index, []).append(i)
    seen_pairs = set()
    for idx, members in by_index.items():
        neighbor_groups = [members]
        if isinstance(idx, tuple) and all(isinstance(v, int) for v in idx):
            for d in range(len(idx)):
                for step in (-1, 1):
                    nb = tuple(v + (step if k == d else 0) for k, v in enumerate(idx))
                    if nb in by_index:
                        neighbor_groups.append(by_index[nb])
        else:
            neighbor_groups = [list(range(n))]
        for group in neighbor_groups:
            for i in members:
                for j in group:
                    if j <= i or (i, j) in seen_pairs:
                        continue
                    seen_pairs.add((i, j))
                    if _boxes_share_face(leaves[i].cell, leaves[j].cell):
                        adj[i].append(j)
                        adj[j].append(i)
                        pairs.append((i, j))
    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    connected = len(seen) == n
    consistent = True
    detail = ""
    for i, j in pairs:
        if not _eigen_consistent(leaves[i].eigen, leaves[j].eigen):
            consistent = False
            detail = (
                f"eigenvector enclosures disagree between {leaves[i].index}"
                f"{leaves[i].sub} and {leaves[j].index}{leaves[j].sub}"
            )
            break
    if not connected:
        detail = "cell decomposition is not face-connected"
    span = tuple(
        (
            min(o.cell[d][0] for o in leaves),
            max(o.cell[d][1] for o in leaves),
        )
        for d in range(len(leaves[0].cell))
    )
    return GlueResult(connected, consistent, span, len(pairs), detail)


# -- drivers ------------------------------------------------------------------------


_WORKER_CTX = {}


def _worker_init(spec: RunSpec, branch: BranchSpec, mode: str):
    _WORKER_CTX["ctx"] = _Context(
        system=spec.build_system(), spec=spec, branch=branch, mode=mode
    )
    _WORKER_CTX["depth"] = spec.refine_depth


def _worker_task(args):
    index, bounds, x_guess = args
    ctx = _WORKER_CTX["ctx"]
    return _process_cell_refined(ctx, index, bounds, x_guess, _WORKER_CTX["depth"])


def _continuation_guesses(system, cells, x0):
    """Serial Newton continuation along the lexicographic cell order."""
    sols = {}
    guesses = []
    for idx, bounds in cells:
        guess = None
        for d in range(len(idx)):
            prev = tuple(v - (1 if k == d else 0) for k, v in enumerate(idx))
            if prev in sols:
                guess = sols[prev]
                break
        if guess is None:
            guess = np.asarray(x0, dtype=float)
        y_mid = [0.5 * (lo + hi) for lo, hi in bounds]
        try:
            sol = newton_layer_equilibrium(system, y_mid, guess)
            sols[idx] = sol
            guesses.append(tuple(float(v) for v in sol))
        except NewtonFailed:
            guesses.append(tuple(float(v) for v in guess))
    return guesses


def _run_branch(spec: RunSpec, branch: BranchSpec, mode: str) -> BranchResult:
    system = spec.build_system()
    ctx = _Context(system=system, spec=spec, branch=branch, mode=mode)
    cells = _grid_cells(spec.Y, spec.subdivisions)
    guesses = _continuation_guesses(system, cells, branch.x_guess)
    tasks = [
        (idx, bounds, guesses[i]) for i, (idx, bounds) in enumerate(cells)
    ]
    outcomes = []
    if spec.jobs > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (spec.jobs * 8))
        with ProcessPoolExecutor(
            max_workers=spec.jobs,
            initializer=_worker_init,
            initargs=(spec, branch, mode),
        ) as pool:
            for leaf_list in pool.map(_worker_task, tasks, chunksize=chunk):
                outcomes.extend(leaf_list)
    else:
        for index, bounds, guess in tasks:
            outcomes.extend(
                _process_cell_refined(ctx, index, bounds, guess, spec.refine_depth)
            )
    outcomes.sort(key=lambda o: (o.index, o.sub))
    # nearest-neighbor eigenvalue matching along the assembly order
    matched = []
    for o in outcomes:
        if matched and o.ok and matched[-1].ok:
            o = _match_to_previous(matched[-1], o)
        matched.append(o)
    outcomes = matched

    samples = []
    for i, point in enumerate(spec.samples):
        pt = tuple(point if isinstance(point, tuple) else (point,))
        bounds = tuple((v, v) for v in pt)
        guess = _nearest_guess(tasks, pt)
        res = _process_cell(ctx, ("sample", i), bounds, "", guess)
        samples.append(res)

    glue_res = glue(outcomes)
    ks = [o.k for o in outcomes if o.ok and o.k_status == RateStatus.OK.value]
    if spec.smoothness and ks and all(
        o.k_status == RateStatus.OK.value for o in outcomes if o.ok
    ):
        k, k_status = min(ks), RateStatus.OK.value
    elif spec.smoothness:
        bad = [o.k_status for o in outcomes if o.ok and o.k_status != RateStatus.OK.value]
        k, k_status = -1, (bad[0] if bad else "not_computed")
    else:
        k, k_status = -1, "not_computed"
    return BranchResult(
        name=branch.name,
        mode=mode,
        outcomes=tuple(outcomes),
        samples=tuple(samples),
        glue=glue_res,
        k=k,
        k_status=k_status,
    )


def _nearest_guess(tasks, point):
    best, best_d = None, math.inf
    for _, bounds, guess in tasks:
        mid = [0.5 * (lo + hi) for lo, hi in bounds]
        d = sum((m - p) ** 2 for m, p in zip(mid, point))
        if d < best_d:
            best, best_d = guess, d
    return best


def run(spec: RunSpec, mode: str) -> RunResult:
    if mode not in ("bundle", "tube", "cone"):
        raise ValueError(f"unknown mode {mode!r}")
    branches = tuple(_run_branch(spec, b, mode) for b in spec.branches)
    return RunResult(mode=mode, branches=branches)


def run_bundle(spec: RunSpec) -> RunResult:
    """Seeds, Gershgorin separation, Krawczyk eigenpair families per cell."""
    return run(spec, "bundle")


def run_tube(spec: RunSpec) -> RunResult:
    """Bundle plus eta-widened targets, inclusion test, and gluing."""
    return run(spec, "tube")


def run_cone(spec: RunSpec) -> RunResult:
    """Tube plus conic/star certificates over inflated boxes."""
    return run(spec, "cone")
