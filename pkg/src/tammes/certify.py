"""Embedding reconstruction, d-range estimation, and rigidity certification.

Surviving boxes are turned into concrete embeddings by solving the full
nonlinear relation system (angle sums, face closure through the fan laws,
the rhombus and triangle-angle links) with a bounded least-squares solver,
then developing vertex coordinates face by face from a seeded edge.  A
graph whose boxes all fail to produce a valid embedding is numerically
refuted; for embedded graphs the feasible edge-length interval is traced
by continuation with endpoint bisection.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from . import geom
from .geom import Embedding, SphericalPolygon
from .planegraph import PlaneGraph, canonical_code, trace_faces
from .system import A_VAR, D_VAR, DomainBox, VariableSystem, build_system

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9
CLOSURE_TOL = 1e-7
EDGE_TOL = 1e-7
D_RESOLUTION = 1e-5
MAX_SOLVER_ITERS = 200
PERTURBED_STARTS = 8

TWO_PI = 2.0 * math.pi


class CertifyError(RuntimeError):
    pass


def system_residuals(sys: VariableSystem, x: np.ndarray) -> np.ndarray:
    """Exact nonlinear residuals of the full relation system at a point."""
    res: list[float] = []
    for con in sys.structural:
        if con.lo == con.hi:  # equalities only; bounds live in the solver box
            res.append(sum(c * x[v] for v, c in con.coeffs) - con.lo)
    d = x[D_VAR]
    a = x[A_VAR]
    res.append(math.cos(a) * (1.0 + math.cos(d)) - math.cos(d))
    for ft in sys.fans:
        s = [x[v] for v in ft.tri.sides]
        ang = [x[v] for v in ft.tri.angles]
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            res.append(
                math.cos(s[i])
                - math.cos(s[j]) * math.cos(s[k])
                - math.sin(s[j]) * math.sin(s[k]) * math.cos(ang[i])
            )
    for _, u0, u1 in sys.quads:
        res.append(
            math.cos(x[u0] / 2.0) * math.cos(x[u1] / 2.0)
            - math.cos(d) * math.sin(x[u0] / 2.0) * math.sin(x[u1] / 2.0)
        )
    return np.asarray(res)


def _residual_sparsity(sys: VariableSystem) -> np.ndarray:
    rows = []
    for con in sys.structural:
        if con.lo == con.hi:
            rows.append([v for v, _ in con.coeffs])
    rows.append([D_VAR, A_VAR])
    for ft in sys.fans:
        rows.append(sorted(set(ft.tri.sides) | set(ft.tri.angles)))
    for _, u0, u1 in sys.quads:
        rows.append([D_VAR, u0, u1])
    pattern = np.zeros((len(rows), sys.size), dtype=int)
    for i, vs in enumerate(rows):
        pattern[i, vs] = 1
    return pattern


def solve_relations(sys: VariableSystem, x0: np.ndarray,
                    lo: np.ndarray, hi: np.ndarray,
                    fix_d: float | None = None) -> np.ndarray | None:
    """Bounded least-squares solve of the relation system; None on failure."""
    lo = lo.copy()
    hi = hi.copy()
    if fix_d is not None:
        lo[D_VAR] = fix_d - 1e-12
        hi[D_VAR] = fix_d + 1e-12
    pad = 1e-9
    too_tight = hi - lo < 2 * pad
    lo[too_tight] -= pad
    hi[too_tight] += pad
    x0 = np.clip(x0, lo, hi)
    try:
        out = least_squares(
            lambda x: system_residuals(sys, x),
            x0,
            bounds=(lo, hi),
            method="trf",
            jac_sparsity=_residual_sparsity(sys),
            xtol=1e-14, ftol=1e-14, gtol=1e-14,
            max_nfev=MAX_SOLVER_ITERS,
        )
    except ValueError:
        return None
    if not np.all(np.isfinite(out.x)):
        return None
    if np.max(np.abs(system_residuals(sys, out.x))) > RESIDUAL_TOL:
        return None
    return out.x


_DEV_SIGN = 1.0


def _place_next(prev: np.ndarray, cur: np.ndarray, angle: float, side: float,
                sign: float) -> np.ndarray:
    t_back = geom.tangent_toward(cur, prev)
    t_next = geom.rotate_about(cur, sign * angle, t_back)
    return geom.geodesic_step(cur, t_next, side)


def develop_coordinates(sys: VariableSystem, x: np.ndarray,
                        sign: float = _DEV_SIGN) -> tuple[np.ndarray, float]:
    """Vertex coordinates from solved angles, breadth-first over faces.

    The first face's first vertex sits at the north pole with its first
    edge along the prime meridian.  Returns (points, closure error): the
    largest mismatch when a walk revisits an already placed vertex.
    """
    d = float(x[D_VAR])
    faces = sys.faces
    g = sys.graph
    dart_face = {}
    for f in faces:
        for dart in f.darts:
            dart_face[dart] = f.index
    pts: dict[int, np.ndarray] = {}
    err = 0.0

    def walk(face, start_pos: int) -> None:
        nonlocal err
        b = [v for v, _ in face.darts]
        m = len(b)
        for step in range(1, m):
            i_prev2 = (start_pos + step - 1) % m
            i_prev = (start_pos + step) % m
            i_cur = (start_pos + step + 1) % m
            if b[i_cur] in pts and step < m - 1:
                continue_from_known = pts.get(b[i_prev]) is not None
            angle = float(x[sys.corner_of[(face.index, i_prev)]])
            p = _place_next(pts[b[i_prev2]], pts[b[i_prev]], angle, d, sign)
            if b[i_cur] in pts:
                err = max(err, float(np.linalg.norm(p - pts[b[i_cur]])))
            else:
                pts[b[i_cur]] = p

    seed = faces[0]
    b0 = [v for v, _ in seed.darts]
    pts[b0[0]] = np.array([0.0, 0.0, 1.0])
    pts[b0[1]] = np.array([math.sin(d), 0.0, math.cos(d)])
    walk(seed, 0)
    visited = {seed.index}
    frontier = [seed.index]
    while frontier:
        fidx = frontier.pop(0)
        for u, v in faces[fidx].darts:
            nb = dart_face.get((v, u))
            if nb is None or nb in visited:
                continue
            nb_face = faces[nb]
            bb = [w for w, _ in nb_face.darts]
            start = None
            for i in range(len(bb)):
                if bb[i] in pts and bb[(i + 1) % len(bb)] in pts:
                    start = i
                    break
            if start is None:
                continue
            walk(nb_face, start)
            visited.add(nb)
            frontier.append(nb)
    live = g.connected_vertices()
    if any(v not in pts for v in live):
        raise CertifyError("coordinate development did not reach every vertex")
    points = np.zeros((g.n, 3))
    for v in live:
        points[v] = pts[v] / np.linalg.norm(pts[v])
    return points, err


def _place_isolated(g: PlaneGraph, points: np.ndarray, d: float,
                    faces=None) -> tuple[np.ndarray, bool]:
    """Put isolated vertices at the deepest point of their host faces."""
    if not g.isolated:
        return points, True
    faces = faces if faces is not None else trace_faces(g)
    by_face: dict[int, list[int]] = {}
    for v, host in g.isolated.items():
        by_face.setdefault(host, []).append(v)
    out = points.copy()
    for host, vs in by_face.items():
        poly = SphericalPolygon([points[w] for w in faces[host].vertices()], d)
        if len(vs) == 1:
            val, p = geom.max_min_distance(poly)
            if val <= d + 1e-9:
                return out, False
            out[vs[0]] = p
        else:
            best = geom.multi_max_min_distance(poly, len(vs))
            if best <= d + 1e-6:
                return out, False
            # real multi-vertex hosts do not occur for n <= 11; refuse rather
            # than place approximately
            return out, False
    return out, True


def embedding_from_box(g: PlaneGraph, sys: VariableSystem, box: DomainBox,
                       rng: np.random.Generator | None = None,
                       starts: int = PERTURBED_STARTS) -> Embedding | None:
    """Solve inside one box and validate the resulting embedding."""
    rng = rng or np.random.default_rng(0)
    mid = box.midpoint()
    widths = box.widths()
    for attempt in range(starts):
        if attempt == 0:
            x0 = mid.copy()
        else:
            x0 = mid + (rng.random(sys.size) - 0.5) * widths * 0.9
        x = solve_relations(sys, x0, box.lo, box.hi)
        if x is None:
            continue
        emb = embedding_from_solution(g, sys, x)
        if emb is not None:
            return emb
    return None


def embedding_from_solution(g: PlaneGraph, sys: VariableSystem,
                            x: np.ndarray) -> Embedding | None:
    """Develop and validate coordinates for a solved variable vector."""
    try:
        points, err = develop_coordinates(sys, x)
    except (CertifyError, geom.GeometryError):
        return None
    if err > CLOSURE_TOL:
        return None
    d = float(x[D_VAR])
    points, ok = _place_isolated(g, points, d, sys.faces)
    if not ok:
        return None
    emb = Embedding(g, points, d)
    if emb.validate(EDGE_TOL):
        return None
    return emb


@dataclass
class GraphCertificate:
    """Certification outcome for one candidate graph."""

    graph: PlaneGraph
    status: str  # EMBEDDED | PRUNED | UNRESOLVED
    d_min: float | None = None
    d_max: float | None = None
    emb_min: Embedding | None = None
    emb_max: Embedding | None = None
    emb_mid: Embedding | None = None
    maximal: bool = False
    d_irreducible: bool = False
    solver_refuted: bool = False
    boxes: list[DomainBox] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def _vary_solution(sys: VariableSystem, x: np.ndarray, lo: np.ndarray,
                   hi: np.ndarray, d_target: float) -> np.ndarray | None:
    return solve_relations(sys, x, lo, hi, fix_d=d_target)


def _solution_valid(g: PlaneGraph, sys: VariableSystem,
                    x: np.ndarray) -> Embedding | None:
    if np.any(x[2:] > math.pi - 1e-9):
        pass  # angles may approach pi; the embedding checks decide
    return embedding_from_solution(g, sys, x)


def trace_d_range(g: PlaneGraph, sys: VariableSystem, x_start: np.ndarray,
                  lo: np.ndarray, hi: np.ndarray,
                  step0: float = 4e-3) -> tuple[float, np.ndarray, Embedding,
                                                float, np.ndarray, Embedding]:
    """Continuation along the solution family in both d directions.

    Returns (d_min, x_min, emb_min, d_max, x_max, emb_max), endpoints
    resolved to D_RESOLUTION by bisection between the last valid and first
    invalid parameter.
    """
    out = {}
    emb0 = embedding_from_solution(g, sys, x_start)
    if emb0 is None:
        raise CertifyError("continuation started from an invalid solution")
    for direction in (-1.0, +1.0):
        x = x_start.copy()
        d_cur = float(x[D_VAR])
        emb_cur = emb0
        step = step0
        while step >= 1e-6:
            d_try = d_cur + direction * step
            if d_try < lo[D_VAR] - 1e-9 or d_try > hi[D_VAR] + 1e-9:
                d_try = min(max(d_try, lo[D_VAR]), hi[D_VAR])
                if abs(d_try - d_cur) < 1e-12:
                    break
            x_try = _vary_solution(sys, x, lo, hi, d_try)
            emb_try = _solution_valid(g, sys, x_try) if x_try is not None else None
            if emb_try is not None:
                x = x_try
                d_cur = d_try
                emb_cur = emb_try
                step = min(step * 1.6, step0)
            else:
                step *= 0.5
        # bisection polish between d_cur (valid) and d_cur + direction*2*step
        lo_b, hi_b = d_cur, d_cur + direction * max(step * 4, 4e-6)
        for _ in range(30):
            if abs(hi_b - lo_b) < D_RESOLUTION * 0.5:
                break
            mid_b = 0.5 * (lo_b + hi_b)
            if mid_b < lo[D_VAR] - 1e-9 or mid_b > hi[D_VAR] + 1e-9:
                break
            x_try = _vary_solution(sys, x, lo, hi, mid_b)
            emb_try = _solution_valid(g, sys, x_try) if x_try is not None else None
            if emb_try is not None:
                x = x_try
                lo_b = mid_b
                d_cur = mid_b
                emb_cur = emb_try
            else:
                hi_b = mid_b
        out[direction] = (d_cur, x.copy(), emb_cur)
    d_lo, x_lo, emb_lo = out[-1.0]
    d_hi, x_hi, emb_hi = out[+1.0]
    return d_lo, x_lo, emb_lo, d_hi, x_hi, emb_hi


def verify_irreducible(emb: Embedding) -> bool:
    return geom.verify_irreducible(emb)


def verify_d_irreducible(emb: Embedding) -> bool:
    return geom.verify_d_irreducible(emb)


def certify_graph(g: PlaneGraph, boxes: Sequence[DomainBox],
                  sys: VariableSystem | None = None,
                  budget_hit: bool = False,
                  max_box_tries: int = 24) -> GraphCertificate:
    """Resolve one surviving graph: embed and measure, or refute.

    Boxes are probed (widest d first) for a solvable, geometrically valid
    embedding; success leads to continuation for [d_min, d_max] and
    rigidity checks at five sample parameters.  When every box fails the
    graph is numerically refuted (PRUNED) unless the search had already
    overrun its budget, which leaves the honest UNRESOLVED.
    """
    if sys is None:
        sys = build_system(g, g.n)
    rng = np.random.default_rng(20240801)
    ordered = sorted(boxes, key=lambda b: -(b.hi[D_VAR] - b.lo[D_VAR]))
    emb = None
    for box in ordered[:max_box_tries]:
        emb = embedding_from_box(g, sys, box, rng=rng)
        if emb is not None:
            break
    if emb is None:
        status = "UNRESOLVED" if budget_hit else "PRUNED"
        cert = GraphCertificate(g, status, boxes=list(boxes),
                                solver_refuted=not budget_hit)
        if budget_hit:
            cert.notes.append("leaf budget exceeded and no embedding found")
        return cert

    lo = np.minimum.reduce([b.lo for b in boxes])
    hi = np.maximum.reduce([b.hi for b in boxes])
    x_found = _solution_vector(sys, emb, boxes)
    d_lo, x_lo, emb_lo, d_hi, x_hi, emb_hi = trace_d_range(g, sys, x_found, lo, hi)

    cert = GraphCertificate(g, "EMBEDDED", d_min=d_lo, d_max=d_hi,
                            emb_min=emb_lo, emb_max=emb_hi,
                            boxes=list(boxes))
    samples = [emb_lo, emb_hi]
    xs = [x_lo, x_hi]
    for frac in (0.25, 0.5, 0.75):
        d_s = d_lo + frac * (d_hi - d_lo)
        if d_hi - d_lo < D_RESOLUTION:
            break
        x_s = _vary_solution(sys, x_lo if frac <= 0.5 else x_hi, lo, hi, d_s)
        emb_s = _solution_valid(g, sys, x_s) if x_s is not None else None
        if emb_s is not None:
            samples.append(emb_s)
            xs.append(x_s)
    cert.emb_mid = samples[min(2, len(samples) - 1)]
    irred = [verify_irreducible(e) for e in samples]
    if not all(irred):
        cert.notes.append("shiftable vertex at sampled parameters "
                          f"({sum(irred)}/{len(irred)} samples rigid)")
    cert.d_irreducible = all(verify_d_irreducible(e) for e in samples)
    mism = [e for e in samples
            if canonical_code(geom.contact_graph(e.points)) != canonical_code(g)]
    if mism:
        interior_ok = (cert.emb_mid is not None and
                       canonical_code(geom.contact_graph(cert.emb_mid.points))
                       == canonical_code(g))
        if not interior_ok:
            cert.notes.append("contact graph mismatch at interior sample")
    return cert


def _solution_vector(sys: VariableSystem, emb: Embedding,
                     boxes: Sequence[DomainBox]) -> np.ndarray:
    """Recover the variable vector of a found embedding for continuation."""
    for box in boxes:
        if abs(emb.d - float(box.midpoint()[D_VAR])) <= box.widths()[D_VAR]:
            x = solve_relations(sys, box.midpoint(), box.lo, box.hi, fix_d=emb.d)
            if x is not None:
                return x
    x = measure_variables(sys, emb)
    return x


def measure_variables(sys: VariableSystem, emb: Embedding) -> np.ndarray:
    """Read all system variables off a concrete embedding."""
    x = np.zeros(sys.size)
    x[D_VAR] = emb.d
    x[A_VAR] = geom.triangle_angle(emb.d)
    pts = emb.points
    for f in sys.faces:
        b = [v for v, _ in f.darts]
        m = len(b)
        for p in range(m):
            ang = geom.interior_angle(pts[b[(p - 1) % m]], pts[b[p]],
                                      pts[b[(p + 1) % m]])
            x[sys.corner_of[(f.index, p)]] = ang
        for (fidx, j), var in sys.diagonals.items():
            if fidx == f.index:
                x[var] = geom.angular_dist(pts[b[0]], pts[b[j]])
    for ft in sys.fans:
        f = sys.faces[ft.face]
        b = [v for v, _ in f.darts]
        t = ft.index
        tri_pts = (pts[b[0]], pts[b[t]], pts[b[t + 1]])
        x[ft.tri.angles[0]] = geom.interior_angle(tri_pts[1], tri_pts[0], tri_pts[2])
        x[ft.tri.angles[1]] = geom.interior_angle(tri_pts[0], tri_pts[1], tri_pts[2])
        x[ft.tri.angles[2]] = geom.interior_angle(tri_pts[0], tri_pts[2], tri_pts[1])
    return x


def classify_maximal(certs: list[GraphCertificate],
                     tol: float = 1e-5) -> None:
    """Flag records whose d_max attains the catalog maximum."""
    embedded = [c for c in certs if c.status == "EMBEDDED"]
    if not embedded:
        raise ValueError("cannot classify an empty catalog")
    top = max(c.d_max for c in embedded)
    for c in embedded:
        c.maximal = c.d_max >= top - tol
