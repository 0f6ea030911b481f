"""Spherical trigonometry and contact-graph geometry on the unit sphere."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .planegraph import PlaneGraph, trace_faces

#: Geometric equality tolerance (radians) used throughout this module.
GEOM_TOL = 1e-9

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Invalid geometric input (degenerate points, out-of-domain argument)."""


class InfeasibleError(GeometryError):
    """A geometric relation cannot be satisfied; carries the violated relation."""


def normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n < 1e-14:
        raise GeometryError("cannot normalize near-zero vector")
    return v / n


def sphere_point(x: float, y: float, z: float) -> np.ndarray:
    return normalize(np.array([x, y, z], dtype=float))


def angular_dist(p: np.ndarray, q: np.ndarray) -> float:
    """Great-circle distance between unit vectors, in [0, pi]."""
    return math.atan2(np.linalg.norm(np.cross(p, q)), float(np.dot(p, q)))


def rotate_about(axis: np.ndarray, angle: float, v: np.ndarray) -> np.ndarray:
    """Rodrigues rotation of v by angle around a unit axis."""
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * float(np.dot(axis, v)) * (1.0 - c)


def tangent_toward(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Unit tangent at p pointing along the geodesic toward q."""
    t = q - p * float(np.dot(p, q))
    n = np.linalg.norm(t)
    if n < 1e-13:
        raise GeometryError("tangent direction undefined for coincident/antipodal points")
    return t / n


def geodesic_step(p: np.ndarray, direction: np.ndarray, dist: float) -> np.ndarray:
    """Point at the given distance from p along a unit tangent direction."""
    return p * math.cos(dist) + direction * math.sin(dist)


def triangle_angle(d: float) -> float:
    """Interior angle of the equilateral spherical triangle with side d.

    Defined for 0 < d < 2*pi/3; increases from pi/3 toward pi.
    """
    if not 0.0 < d < TWO_PI / 3.0:
        raise GeometryError(f"equilateral triangle side out of range: {d}")
    c = math.cos(d)
    return math.acos(c / (1.0 + c))


def cos_rule_side(b: float, c: float, angle: float) -> float:
    """Side opposite `angle` in a spherical triangle with adjacent sides b, c."""
    for name, val in (("b", b), ("c", c)):
        if not 0.0 < val < math.pi:
            raise GeometryError(f"side {name} out of (0, pi): {val}")
    if not 0.0 < angle < math.pi:
        raise GeometryError(f"angle out of (0, pi): {angle}")
    cos_a = math.cos(b) * math.cos(c) + math.sin(b) * math.sin(c) * math.cos(angle)
    return math.acos(min(1.0, max(-1.0, cos_a)))


def cos_rule_angle(a: float, b: float, c: float) -> float:
    """Angle opposite side a in a spherical triangle with sides a, b, c."""
    for name, val in (("a", a), ("b", b), ("c", c)):
        if not 0.0 < val < math.pi:
            raise GeometryError(f"side {name} out of (0, pi): {val}")
    denom = math.sin(b) * math.sin(c)
    if denom < 1e-15:
        raise GeometryError("degenerate triangle in cos_rule_angle")
    cos_g = (math.cos(a) - math.cos(b) * math.cos(c)) / denom
    return math.acos(min(1.0, max(-1.0, cos_g)))


def rhombus_opposite(u1: float, d: float) -> float:
    """Opposite angle u2 of an equilateral spherical quadrilateral with side d.

    The two pairs of opposite angles satisfy cot(u1/2) cot(u2/2) = cos d,
    which pins u2 once u1 and d are chosen.  Decreasing in u1, increasing
    in d; only defined for d < pi/2 (the product of cotangents is positive).
    """
    if not 0.0 < u1 < math.pi:
        raise GeometryError(f"angle u1 out of (0, pi): {u1}")
    if not 0.0 < d < math.pi / 2.0:
        raise InfeasibleError(f"rhombus side must lie in (0, pi/2): {d}")
    cot_half = math.cos(d) * math.tan(u1 / 2.0)
    if cot_half <= 0.0:
        raise InfeasibleError("rhombus relation forces opposite angle outside (0, pi)")
    return 2.0 * math.atan(1.0 / cot_half)


def _circle_intersection(a: np.ndarray, b: np.ndarray, r: float) -> list[np.ndarray]:
    """Unit points at distance r from both a and b (0, 1 or 2 solutions)."""
    c = float(np.dot(a, b))
    if 1.0 - c * c < 1e-14:
        raise GeometryError("circle centers coincident or antipodal")
    cr = math.cos(r)
    alpha = cr / (1.0 + c)
    w = alpha * (a + b)
    g2 = 1.0 - float(np.dot(w, w))
    if g2 < -1e-12:
        return []
    g = math.sqrt(max(0.0, g2))
    axis = np.cross(a, b)
    axis /= np.linalg.norm(axis)
    return [w + g * axis, w - g * axis]


def interior_angle(prev_pt: np.ndarray, at: np.ndarray, next_pt: np.ndarray) -> float:
    """Unsigned corner angle of a polygon walk at `at`, in (0, pi]."""
    t1 = tangent_toward(at, prev_pt)
    t2 = tangent_toward(at, next_pt)
    return math.acos(min(1.0, max(-1.0, float(np.dot(t1, t2)))))


def _walk_orientation(pts: Sequence[np.ndarray]) -> float:
    """Sum of signed turning at each corner; sign gives the walk handedness."""
    total = 0.0
    m = len(pts)
    for i in range(m):
        total += float(np.dot(pts[i], np.cross(pts[(i - 1) % m], pts[(i + 1) % m])))
    return total


@dataclass
class SphericalPolygon:
    """Convex equilateral spherical polygon given by its cyclic vertices."""

    vertices: list[np.ndarray]
    side: float

    @property
    def size(self) -> int:
        return len(self.vertices)

    def contains(self, p: np.ndarray, tol: float = GEOM_TOL) -> bool:
        m = len(self.vertices)
        sign = 1.0 if _walk_orientation(self.vertices) >= 0 else -1.0
        for i in range(m):
            edge_n = np.cross(self.vertices[i], self.vertices[(i + 1) % m])
            if sign * float(np.dot(p, edge_n)) < -tol:
                return False
        return True

    def angles(self) -> list[float]:
        m = len(self.vertices)
        return [
            interior_angle(self.vertices[i - 1], self.vertices[i], self.vertices[(i + 1) % m])
            for i in range(m)
        ]

    def is_convex(self, tol: float = 1e-9) -> bool:
        m = len(self.vertices)
        signs = [
            float(np.dot(self.vertices[i], np.cross(self.vertices[i - 1], self.vertices[(i + 1) % m])))
            for i in range(m)
        ]
        return all(s >= -tol for s in signs) or all(s <= tol for s in signs)


def complete_polygon(
    free_angles: Sequence[float], d: float, m: int
) -> tuple[list[float], np.ndarray, list[np.ndarray]]:
    """Close an equilateral spherical m-gon from its m-3 leading corner angles.

    The polygon with side d is determined (up to isometry) by the angles at
    vertices 0..m-4.  Builds explicit coordinates, recovers the remaining
    three angles and the full matrix of pairwise vertex distances.

    Returns (all m angles, m x m distance matrix, vertex coordinates).
    Raises InfeasibleError when the data admits no convex closed polygon.
    """
    if m < 4:
        raise GeometryError("polygon completion needs m >= 4")
    if len(free_angles) != m - 3:
        raise GeometryError(f"expected {m - 3} free angles, got {len(free_angles)}")
    if not 0.0 < d < math.pi:
        raise GeometryError(f"side out of range: {d}")
    for u in free_angles:
        if not 0.0 < u < math.pi:
            raise InfeasibleError(f"corner angle out of (0, pi): {u}")

    pts: list[np.ndarray | None] = [None] * m
    pts[0] = np.array([0.0, 0.0, 1.0])
    pts[1] = np.array([math.sin(d), 0.0, math.cos(d)])
    # Forward chain: vertex j+1 from the angle at vertex j (angles 1..m-4).
    for j in range(1, m - 3):
        t_back = tangent_toward(pts[j], pts[j - 1])
        t_fwd = rotate_about(pts[j], free_angles[j], t_back)
        pts[j + 1] = geodesic_step(pts[j], t_fwd, d)
    # Backward step: vertex m-1 from the angle at vertex 0.
    t_fwd0 = tangent_toward(pts[0], pts[1])
    t_back0 = rotate_about(pts[0], -free_angles[0], t_fwd0)
    pts[m - 1] = geodesic_step(pts[0], t_back0, d)
    # Remaining vertex m-2 closes two circles of radius d.
    cands = _circle_intersection(pts[m - 3], pts[m - 1], d)
    if not cands:
        raise InfeasibleError("polygon does not close: no point at side distance from both chain ends")

    best: list[np.ndarray] | None = None
    for cand in cands:
        trial = [p.copy() for p in pts[: m - 2]] + [cand, pts[m - 1].copy()]
        poly = SphericalPolygon(trial, d)
        if poly.is_convex():
            best = trial
            break
    if best is None:
        raise InfeasibleError("polygon closes only through a non-convex configuration")

    poly = SphericalPolygon(best, d)
    angles = poly.angles()
    for i, u in enumerate(angles):
        if u > math.pi - 1e-12:
            raise InfeasibleError(f"straight corner at vertex {i}")
    dists = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            dij = angular_dist(best[i], best[j])
            dists[i, j] = dists[j, i] = dij
    return angles, dists, best


def circumcenters(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> list[np.ndarray]:
    """Both points equidistant from three unit vectors (antipodal pair)."""
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n)
    if norm < 1e-13:
        return []
    n = n / norm
    return [n, -n]


def max_min_distance(
    poly: SphericalPolygon, refine: bool = True
) -> tuple[float, np.ndarray]:
    """Deepest interior point of a convex polygon: maximize min distance to vertices.

    Candidates are circumcenters of vertex triples and intersections of
    pairwise bisectors with edge circles, filtered to the polygon; a local
    tangent-plane polish (and a coarse grid fallback) guards degenerate cases.
    """
    verts = poly.vertices
    m = len(verts)

    def score(p: np.ndarray) -> float:
        return min(angular_dist(p, v) for v in verts)

    candidates: list[np.ndarray] = []
    for i, j, k in combinations(range(m), 3):
        candidates.extend(circumcenters(verts[i], verts[j], verts[k]))
    for i, j in combinations(range(m), 2):
        bis = verts[i] - verts[j]
        for e in range(m):
            edge_n = np.cross(verts[e], verts[(e + 1) % m])
            cand = np.cross(bis, edge_n)
            norm = np.linalg.norm(cand)
            if norm > 1e-13:
                candidates.append(cand / norm)
                candidates.append(-cand / norm)

    inside = [c for c in candidates if poly.contains(c, tol=1e-9)]
    if not inside:
        # Degenerate fallback: coarse grid seeded from the vertex centroid.
        centroid = normalize(np.asarray(sum(verts)))
        inside = [centroid]

    best = max(inside, key=score)
    best_val = score(best)

    if refine:
        from scipy.optimize import minimize

        e1 = normalize(np.cross(best, verts[0]) if abs(np.dot(best, verts[0])) < 0.999
                       else np.cross(best, verts[1]))
        e2 = np.cross(best, e1)

        def neg(xy):
            p = normalize(best + xy[0] * e1 + xy[1] * e2)
            if not poly.contains(p, tol=1e-7):
                return 1e3
            return -score(p)

        res = minimize(neg, [0.0, 0.0], method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400})
        if -res.fun > best_val:
            best = normalize(best + res.x[0] * e1 + res.x[1] * e2)
            best_val = -res.fun
    return best_val, best


def multi_max_min_distance(
    poly: SphericalPolygon, count: int, grid: int = 48
) -> float:
    """Best achievable min distance for `count` mutually-separated interior points.

    Grid-based estimate used to reject combinatorially allowed but
    geometrically impossible placements of several isolated vertices in
    one face; exact enough because real cases are far from the threshold.
    """
    if count == 1:
        return max_min_distance(poly)[0]
    pts = _grid_in_polygon(poly, grid)
    if len(pts) < count:
        return 0.0
    scores = np.array([min(angular_dist(p, v) for v in poly.vertices) for p in pts])
    order = np.argsort(-scores)
    pts = [pts[i] for i in order[:200]]
    scores = scores[order[:200]]
    best = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            val = min(scores[i], scores[j], angular_dist(pts[i], pts[j]))
            best = max(best, val)
    return best


def _grid_in_polygon(poly: SphericalPolygon, steps: int) -> list[np.ndarray]:
    center = normalize(np.asarray(sum(poly.vertices)))
    e1 = normalize(np.cross(center, poly.vertices[0]))
    e2 = np.cross(center, e1)
    radius = max(angular_dist(center, v) for v in poly.vertices)
    pts = []
    for a in np.linspace(-radius, radius, steps):
        for b in np.linspace(-radius, radius, steps):
            r = math.hypot(a, b)
            if r > radius or r < 1e-12:
                p = center if r < 1e-12 else None
            else:
                direction = (a * e1 + b * e2) / r
                p = geodesic_step(center, direction, r)
            if p is not None and poly.contains(p, tol=1e-9):
                pts.append(p)
    return pts


def min_pairwise_distance(points: np.ndarray) -> float:
    """Smallest angular distance among distinct points."""
    n = len(points)
    if n < 2:
        raise GeometryError("need at least two points")
    best = math.pi
    for i in range(n):
        for j in range(i + 1, n):
            dij = angular_dist(points[i], points[j])
            if dij < 1e-12:
                raise GeometryError(f"coincident points {i}, {j}")
            best = min(best, dij)
    return best


def tangent_azimuths(p: np.ndarray, others: Iterable[np.ndarray]) -> list[float]:
    """Azimuths of geodesic directions from p, in a fixed right-handed frame."""
    ref = np.array([0.0, 0.0, 1.0]) if abs(p[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = normalize(np.cross(p, ref))
    e2 = np.cross(p, e1)
    out = []
    for q in others:
        t = tangent_toward(p, q)
        out.append(math.atan2(float(np.dot(t, e2)), float(np.dot(t, e1))))
    return out


def contact_graph(points: np.ndarray, tol: float = 1e-7) -> PlaneGraph:
    """Contact graph of a point set: edges at the minimum pairwise distance.

    Neighbor rotation order comes from tangent-plane azimuths, so the result
    is a genuine plane graph; isolated vertices are tagged with the face of
    the contact structure containing them.
    """
    n = len(points)
    psi = min_pairwise_distance(points)
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j and angular_dist(points[i], points[j]) <= psi + tol:
                nbrs[i].append(j)
    rotation = []
    for i in range(n):
        if nbrs[i]:
            az = tangent_azimuths(points[i], [points[j] for j in nbrs[i]])
            order = sorted(range(len(nbrs[i])), key=lambda k: az[k])
            rotation.append(tuple(nbrs[i][k] for k in order))
        else:
            rotation.append(())
    isolated: dict[int, int] = {}
    lone = [i for i in range(n) if not rotation[i]]
    if lone:
        g0 = PlaneGraph(n, tuple(rotation), {})
        faces = trace_faces(g0)
        for v in lone:
            host = None
            for f in faces:
                poly = SphericalPolygon([points[w] for w in f.vertices()], psi)
                if poly.contains(points[v], tol=1e-9) and poly.is_convex():
                    host = f.index
                    break
            if host is None:
                # Non-convex complement face: fall back to nearest-face test.
                host = min(
                    faces,
                    key=lambda f: min(angular_dist(points[v], points[w]) for w in f.vertices()),
                ).index
            isolated[v] = host
    return PlaneGraph(n, tuple(rotation), isolated)


@dataclass
class Embedding:
    """A realization of a plane graph with all edges at common length d."""

    graph: PlaneGraph
    points: np.ndarray
    d: float

    def distances(self) -> np.ndarray:
        n = len(self.points)
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                out[i, j] = out[j, i] = angular_dist(self.points[i], self.points[j])
        return out

    def validate(self, tol: float = 1e-7) -> list[str]:
        """Contact-graph consistency violations; empty list means valid."""
        problems = []
        dists = self.distances()
        edges = self.graph.edge_set()
        n = self.graph.n
        for i in range(n):
            if abs(float(np.linalg.norm(self.points[i])) - 1.0) > 1e-9:
                problems.append(f"vertex {i} off the unit sphere")
        for i in range(n):
            for j in range(i + 1, n):
                if (i, j) in edges:
                    if abs(dists[i, j] - self.d) > tol:
                        problems.append(f"edge ({i},{j}) length {dists[i, j]:.9f} != d")
                elif dists[i, j] < self.d - tol:
                    problems.append(f"non-edge ({i},{j}) closer than d: {dists[i, j]:.9f}")
        return problems


def vertex_shiftable(emb: Embedding, v: int, margin: float = GEOM_TOL) -> bool:
    """Whether vertex v admits a local move strictly increasing its min distance.

    A contact vertex is jammed exactly when the directions toward its tight
    neighbors positively span the tangent plane (every angular gap < pi).
    A degree-0 vertex is jammed when it sits at a strict local maximum of
    the min-distance to the hosting face's corners.
    """
    nbrs = emb.graph.rotation[v]
    if nbrs:
        dirs = tangent_azimuths(emb.points[v], [emb.points[w] for w in nbrs])
    else:
        host = emb.graph.isolated.get(v)
        if host is None:
            return True
        face = trace_faces(emb.graph)[host]
        corners = [emb.points[w] for w in face.vertices()]
        dmin = min(angular_dist(emb.points[v], c) for c in corners)
        tight = [c for c in corners if angular_dist(emb.points[v], c) <= dmin + 1e-7]
        if len(tight) < 3:
            return True
        dirs = tangent_azimuths(emb.points[v], tight)
    if len(dirs) < 3:
        return True
    dirs.sort()
    gaps = [dirs[(i + 1) % len(dirs)] - dirs[i] for i in range(len(dirs) - 1)]
    gaps.append(dirs[0] + TWO_PI - dirs[-1])
    return max(gaps) >= math.pi - margin


def d_flip(
    emb: Embedding, x: int, y: int, z: int, margin: float = GEOM_TOL
) -> np.ndarray | None:
    """Mirror x across the great circle through two of its tight contacts.

    Returns the flipped position when it strictly clears every other point
    beyond the contact distance, otherwise None.
    """
    px, py, pz = emb.points[x], emb.points[y], emb.points[z]
    for w, name in ((y, "y"), (z, "z")):
        if abs(angular_dist(px, emb.points[w]) - emb.d) > 1e-6:
            raise GeometryError(f"flip contact {name} is not tight")
    axis = np.cross(py, pz)
    norm = np.linalg.norm(axis)
    if norm < 1e-9:
        raise GeometryError("flip circle undefined: contacts collinear with center")
    nrm = axis / norm
    flipped = px - 2.0 * float(np.dot(px, nrm)) * nrm
    for w in range(emb.graph.n):
        if w in (x, y, z):
            continue
        if angular_dist(flipped, emb.points[w]) <= emb.d + margin:
            return None
    return flipped


def verify_irreducible(emb: Embedding) -> bool:
    """True when no single vertex can be shifted."""
    return all(not vertex_shiftable(emb, v) for v in range(emb.graph.n))


def verify_d_irreducible(emb: Embedding) -> bool:
    """True when additionally no mirror flip across a contact pair is possible."""
    for x in range(emb.graph.n):
        nbrs = emb.graph.rotation[x]
        for y, z in combinations(nbrs, 2):
            if abs(angular_dist(emb.points[y], emb.points[z]) - math.pi) < 1e-9:
                continue
            if d_flip(emb, x, y, z) is not None:
                return False
    return True
