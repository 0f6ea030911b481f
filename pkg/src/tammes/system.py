"""Variable tables, domain boxes, and the assembled linear system per graph.

Variables of a candidate graph: the common edge length d, the equilateral
triangle angle a, one corner angle per (face, corner) incidence, and for
every face with four or more vertices the sub-angles and diagonals of its
fan triangulation from the face's first boundary vertex.  Corner angles at
positions 1 and m-1 coincide with single fan sub-angles and share one
variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geom import rhombus_opposite, triangle_angle
from .planegraph import Face, PlaneGraph, trace_faces
from .relax import (
    AffineForm,
    Interval,
    LinearConstraint,
    TriangleVars,
    interval_cos,
    interval_sin,
    product_affine,
    trig_affine,
    triple_affine,
)

TWO_PI = 2.0 * math.pi

D_VAR = 0
A_VAR = 1


def fejes_toth_bound(n: int) -> float:
    """Classical upper bound on the optimal spread of n points on the sphere."""
    if n < 3:
        return math.pi
    omega = math.pi * n / (6.0 * (n - 2))
    c = 1.0 / math.tan(omega)
    return math.acos(max(-1.0, min(1.0, (c * c - 1.0) / 2.0)))


@dataclass
class FanTriangle:
    """One fan sub-triangle of a face: variable ids for sides and angles."""

    face: int
    index: int  # 1-based position in the fan
    tri: TriangleVars


@dataclass
class VariableSystem:
    """Declared variables and structural relations of one candidate graph."""

    graph: PlaneGraph
    n_run: int
    faces: list[Face]
    names: list[str]
    kinds: list[str]
    corner_of: dict[tuple[int, int], int]
    vertex_corners: dict[int, list[int]]
    fans: list[FanTriangle]
    diagonals: dict[tuple[int, int], int]  # (face, position j) -> var
    quads: list[tuple[int, int, int]]  # (face, corner var at pos 0, at pos 1)
    determining: list[int]
    structural: list[LinearConstraint] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.names)

    def branch_set(self) -> list[int]:
        out = [A_VAR] + self.determining
        seen = set()
        ordered = []
        for v in sorted(out):
            if v not in seen:
                seen.add(v)
                ordered.append(v)
        return ordered

    def derivable_check(self) -> bool:
        """Structural check: determining set + a pins every other variable."""
        known = set(self.determining) | {A_VAR, D_VAR}
        for (f, p), var in self.corner_of.items():
            size = self.faces[f].size
            if size == 3:
                known.add(var)  # equals a
        # polygon faces: m-3 leading corners + d determine the rest
        for f in {ft.face for ft in self.fans}:
            size = self.faces[f].size
            lead = [self.corner_of[(f, p)] for p in range(size - 3)]
            if all(v in known for v in lead):
                known.update(self.corner_of[(f, p)] for p in range(size))
                known.update(v for (ff, _), v in self.diagonals.items() if ff == f)
        for ft in self.fans:
            known.update(ft.tri.angles)
        return len(known) == self.size


class DomainBox:
    """Per-variable interval domains, stored as parallel bound arrays."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: np.ndarray, hi: np.ndarray):
        self.lo = lo
        self.hi = hi

    def copy(self) -> "DomainBox":
        return DomainBox(self.lo.copy(), self.hi.copy())

    def interval(self, v: int) -> Interval:
        return Interval(float(self.lo[v]), float(self.hi[v]))

    def width(self, v: int) -> float:
        return float(self.hi[v] - self.lo[v])

    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    def contains_point(self, x: np.ndarray, slack: float = 1e-9) -> bool:
        return bool(np.all(x >= self.lo - slack) and np.all(x <= self.hi + slack))

    def contained_in(self, other: "DomainBox", slack: float = 1e-12) -> bool:
        return bool(np.all(self.lo >= other.lo - slack) and np.all(self.hi <= other.hi + slack))

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def is_empty(self, slack: float = 1e-12) -> bool:
        return bool(np.any(self.lo > self.hi + slack))


def build_system(g: PlaneGraph, n_run: int) -> VariableSystem:
    """Declare all variables and structural constraints for a candidate."""
    faces = trace_faces(g)
    names = ["d", "a"]
    kinds = ["length", "angle"]

    def new_var(name: str, kind: str) -> int:
        names.append(name)
        kinds.append(kind)
        return len(names) - 1

    corner_of: dict[tuple[int, int], int] = {}
    vertex_corners: dict[int, list[int]] = {v: [] for v in g.connected_vertices()}
    for f in faces:
        for p, (v, _) in enumerate(f.darts):
            var = new_var(f"u{f.index}_{p}", "corner")
            corner_of[(f.index, p)] = var
            vertex_corners[v].append(var)

    fans: list[FanTriangle] = []
    diagonals: dict[tuple[int, int], int] = {}
    quads: list[tuple[int, int, int]] = []
    for f in faces:
        m = f.size
        if m < 4:
            continue
        for j in range(2, m - 1):
            diagonals[(f.index, j)] = new_var(f"z{f.index}_{j}", "diag")
        for t in range(1, m - 1):
            # triangle over boundary positions (0, t, t+1)
            side_far = D_VAR  # boundary edge t -> t+1
            side_hi = diagonals.get((f.index, t + 1), D_VAR)
            side_lo = diagonals.get((f.index, t), D_VAR)
            a0 = new_var(f"s{f.index}_{t}_0", "sub")
            a1 = (corner_of[(f.index, 1)] if t == 1
                  else new_var(f"s{f.index}_{t}_1", "sub"))
            a2 = (corner_of[(f.index, m - 1)] if t == m - 2
                  else new_var(f"s{f.index}_{t}_2", "sub"))
            fans.append(FanTriangle(f.index, t,
                                    TriangleVars((side_far, side_hi, side_lo),
                                                 (a0, a1, a2))))
        if m == 4:
            quads.append((f.index, corner_of[(f.index, 0)], corner_of[(f.index, 1)]))

    determining = [D_VAR]
    for f in faces:
        if f.size >= 4:
            determining.extend(corner_of[(f.index, p)] for p in range(f.size - 3))

    sys = VariableSystem(g, n_run, faces, names, kinds, corner_of,
                         vertex_corners, fans, diagonals, quads, determining)
    sys.structural = _structural_constraints(sys)
    return sys


def _structural_constraints(sys: VariableSystem) -> list[LinearConstraint]:
    cons: list[LinearConstraint] = []
    for v, corners in sorted(sys.vertex_corners.items()):
        coeffs: dict[int, float] = {}
        for c in corners:
            coeffs[c] = coeffs.get(c, 0.0) + 1.0
        cons.append(LinearConstraint.eq(coeffs, TWO_PI, f"vertex{v}_sum"))
    for f in sys.faces:
        if f.size == 3:
            for p in range(3):
                var = sys.corner_of[(f.index, p)]
                cons.append(LinearConstraint.eq({var: 1.0, A_VAR: -1.0}, 0.0,
                                                f"tri{f.index}_{p}"))
        else:
            for p in range(f.size):
                var = sys.corner_of[(f.index, p)]
                cons.append(LinearConstraint.ge({var: 1.0, A_VAR: -1.0}, 0.0,
                                                f"alpha_lb_f{f.index}_{p}"))
    # corner = sum of fan sub-angles at shared boundary positions
    by_face: dict[int, list[FanTriangle]] = {}
    for ft in sys.fans:
        by_face.setdefault(ft.face, []).append(ft)
    for fidx, fts in by_face.items():
        m = sys.faces[fidx].size
        fts.sort(key=lambda ft: ft.index)
        coeffs = {ft.tri.angles[0]: 1.0 for ft in fts}
        coeffs[sys.corner_of[(fidx, 0)]] = coeffs.get(sys.corner_of[(fidx, 0)], 0.0) - 1.0
        cons.append(LinearConstraint.eq(coeffs, 0.0, f"apex_split_f{fidx}"))
        for p in range(2, m - 1):
            left = fts[p - 2].tri.angles[2]   # triangle (0, p-1, p) angle at p
            right = fts[p - 1].tri.angles[1]  # triangle (0, p, p+1) angle at p
            cons.append(LinearConstraint.eq(
                {left: 1.0, right: 1.0, sys.corner_of[(fidx, p)]: -1.0}, 0.0,
                f"split_f{fidx}_{p}"))
    for (fidx, j), z in sorted(sys.diagonals.items()):
        cons.append(LinearConstraint.ge({z: 1.0, D_VAR: -1.0}, 0.0,
                                        f"diag_lb_f{fidx}_{j}"))
    for fidx, u0, u1 in sys.quads:
        u2 = sys.corner_of[(fidx, 2)]
        u3 = sys.corner_of[(fidx, 3)]
        cons.append(LinearConstraint.eq({u2: 1.0, u0: -1.0}, 0.0, f"quad_f{fidx}_02"))
        cons.append(LinearConstraint.eq({u3: 1.0, u1: -1.0}, 0.0, f"quad_f{fidx}_13"))
        for u in (u0, u1):
            cons.append(LinearConstraint.le({u: 1.0, A_VAR: -2.0}, 0.0,
                                            f"quad_ub_f{fidx}"))
        # an equilateral quadrilateral forces cos d > 0
        cons.append(LinearConstraint.le({D_VAR: 1.0}, math.pi / 2.0 - 1e-9,
                                        f"quad_dmax_f{fidx}"))
    return cons


def initial_box(sys: VariableSystem) -> DomainBox:
    """Starting domains: d within its packing bounds, angles in (0, pi)."""
    n = sys.n_run
    d_lo = TWO_PI / n
    d_hi = min(fejes_toth_bound(n), TWO_PI / 3.0 - 1e-9)
    for f in sys.faces:
        d_hi = min(d_hi, TWO_PI / f.size)
    if sys.quads:
        d_hi = min(d_hi, math.pi / 2.0 - 1e-9)
    d_hi = max(d_hi, d_lo)  # a face of exactly n vertices pins d
    a_lo = triangle_angle(d_lo)
    a_hi = triangle_angle(d_hi) if d_hi < TWO_PI / 3.0 else math.pi - 1e-9
    lo = np.zeros(sys.size)
    hi = np.zeros(sys.size)
    lo[D_VAR], hi[D_VAR] = d_lo, d_hi
    lo[A_VAR], hi[A_VAR] = a_lo, a_hi
    for (fidx, p), var in sys.corner_of.items():
        lo[var], hi[var] = a_lo, math.pi
    for ft in sys.fans:
        for var in ft.tri.angles:
            if sys.kinds[var] == "sub":
                lo[var], hi[var] = 1e-9, math.pi
    for (fidx, j), var in sys.diagonals.items():
        m = sys.faces[fidx].size
        path = min(j, m - j) * d_hi
        lo[var], hi[var] = d_lo, min(math.pi, path)
    return DomainBox(lo, hi)


def _quad_bound_constraints(sys: VariableSystem, box: DomainBox) -> list[LinearConstraint]:
    """Monotone opposite-angle bounds for equilateral quadrilateral faces."""
    out: list[LinearConstraint] = []
    eps = 1e-12
    d_lo = max(box.lo[D_VAR], eps)
    d_hi = min(box.hi[D_VAR], math.pi / 2.0 - eps)
    if d_lo > d_hi:
        return out

    def rho(u: float, d: float) -> float:
        u = min(max(u, eps), math.pi - eps)
        return rhombus_opposite(u, d)

    for fidx, u0, u1 in sys.quads:
        for src, dst in ((u0, u1), (u1, u0)):
            lo_b = rho(box.hi[src], d_lo)
            hi_b = rho(box.lo[src], d_hi)
            out.append(LinearConstraint(((dst, 1.0),), lo_b - 1e-12, hi_b + 1e-12,
                                        f"rho_f{fidx}"))
        # cos d equals the product of half-angle cotangents: monotone in both
        def cot_half(u: float) -> float:
            u = min(max(u, eps), math.pi - eps)
            return 1.0 / math.tan(u / 2.0)

        prod_lo = cot_half(box.hi[u0]) * cot_half(box.hi[u1])
        prod_hi = cot_half(box.lo[u0]) * cot_half(box.lo[u1])
        d_from_hi = math.acos(max(-1.0, min(1.0, prod_lo)))
        d_from_lo = math.acos(max(-1.0, min(1.0, prod_hi)))
        out.append(LinearConstraint(((D_VAR, 1.0),),
                                    d_from_lo - 1e-12, d_from_hi + 1e-12,
                                    f"rho_d_f{fidx}"))
    return out


def _rhombus_linearized(sys: VariableSystem, box: DomainBox,
                        memo: dict) -> list[LinearConstraint]:
    """Linear enclosure of cos(u0/2)cos(u1/2) - cos d sin(u0/2) sin(u1/2) = 0."""
    out = []
    for fidx, u0, u1 in sys.quads:
        i0, i1, idd = box.interval(u0), box.interval(u1), box.interval(D_VAR)
        c0 = trig_affine("cos", u0, i0, scale=0.5, memo=memo)
        c1 = trig_affine("cos", u1, i1, scale=0.5, memo=memo)
        s0 = trig_affine("sin", u0, i0, scale=0.5, memo=memo)
        s1 = trig_affine("sin", u1, i1, scale=0.5, memo=memo)
        cd = trig_affine("cos", D_VAR, idd, memo=memo)
        lhs = product_affine(c0, interval_cos(i0.scaled(0.5)),
                             c1, interval_cos(i1.scaled(0.5)))
        rhs = triple_affine(cd, interval_cos(idd),
                            s0, interval_sin(i0.scaled(0.5)),
                            s1, interval_sin(i1.scaled(0.5)))
        c = (lhs - rhs).contains_zero_constraint(f"rhombus_f{fidx}")
        if c is not None:
            out.append(c)
    return out


def _alpha_link(box: DomainBox, memo: dict) -> list[LinearConstraint]:
    """Cleared equilateral-angle relation cos a + cos a cos d - cos d = 0."""
    ia, idd = box.interval(A_VAR), box.interval(D_VAR)
    cos_a = trig_affine("cos", A_VAR, ia, memo=memo)
    cos_d = trig_affine("cos", D_VAR, idd, memo=memo)
    prod = product_affine(cos_a, interval_cos(ia), cos_d, interval_cos(idd))
    c = (cos_a + prod - cos_d).contains_zero_constraint("alpha_link")
    return [c] if c is not None else []


def assemble_system(sys: VariableSystem, box: DomainBox) -> list[LinearConstraint]:
    """Structural relations plus all box-dependent linearizations."""
    from .relax import linearize_spherical_triangle

    memo: dict = {}
    cons = list(sys.structural)
    cons.extend(_alpha_link(box, memo))
    cons.extend(_quad_bound_constraints(sys, box))
    cons.extend(_rhombus_linearized(sys, box, memo))
    if sys.fans:
        ivs = {v: box.interval(v) for v in range(sys.size)}
        for ft in sys.fans:
            cons.extend(linearize_spherical_triangle(
                ft.tri, ivs, tag=f"f{ft.face}t{ft.index}_", memo=memo))
    return cons
