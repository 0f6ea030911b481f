"""Exhaustive generation of candidate plane graphs for the packing search.

The candidate list for n vertices is the set of 3-connected planar graphs
(combinatorial polyhedra: 7, 34, 257, ... for n = 6, 7, 8, ...), optionally
extended by isolated-vertex placements in large faces.  Every such graph is
a spanning subgraph of a simple sphere triangulation on the same vertex set
(triangulate each face avoiding chords already present elsewhere; an ear
with an admissible chord always exists), so generation runs in two complete
stages:

1. all simple sphere triangulations on n vertices, by repeated vertex
   splitting from the tetrahedron with canonical-code deduplication;
2. all spanning subgraphs of each triangulation with minimum degree 3 and
   3-connectivity, deduplicated canonically.

The degree/face conditions for contact graphs are a separate filtering
stage; `generate_filtered` fuses them into the subgraph search so the
pipeline never materializes graphs a later filter would discard.
"""

from __future__ import annotations

import logging
from itertools import combinations, combinations_with_replacement
from typing import Iterable, Iterator

from .planegraph import (
    Face,
    PlaneGraph,
    StructureError,
    canonical_code,
    combinatorial_filter,
    trace_faces,
)

log = logging.getLogger(__name__)

MIN_N, MAX_N = 4, 11

TETRAHEDRON = PlaneGraph(4, ((1, 2, 3), (0, 3, 2), (0, 1, 3), (0, 2, 1)))

_tri_cache: dict[int, list[PlaneGraph]] = {}


def _rotation_from_triangles(n: int, tris: list[tuple[int, int, int]]) -> PlaneGraph | None:
    """Rebuild the rotation system of a triangulation from oriented face walks.

    A face walk (a, b, c) means darts a->b, b->c, c->a, so at vertex b the
    rotation successor of a is c.  Returns None when the triangle set is not
    a consistent simple embedding.
    """
    succ: list[dict[int, int]] = [dict() for _ in range(n)]
    for a, b, c in tris:
        for u, w, x in ((a, b, c), (b, c, a), (c, a, b)):
            if u in succ[w]:
                return None
            succ[w][u] = x
    rotation = []
    for v in range(n):
        if not succ[v]:
            return None
        start = next(iter(succ[v]))
        order = [start]
        while True:
            nxt = succ[v].get(order[-1])
            if nxt is None:
                return None
            if nxt == start:
                break
            order.append(nxt)
            if len(order) > len(succ[v]):
                return None
        if len(order) != len(succ[v]):
            return None
        rotation.append(tuple(order))
    g = PlaneGraph(n, tuple(rotation), {})
    try:
        g.validate()
    except StructureError:
        return None
    return g


def _oriented_triangles(g: PlaneGraph) -> list[tuple[int, int, int]]:
    return [f.darts[0] + (f.darts[1][1],) for f in trace_faces(g)]


def _vertex_splits(g: PlaneGraph, v: int) -> Iterator[PlaneGraph]:
    """All triangulations obtained by splitting vertex v into an edge."""
    ring = g.rotation[v]
    k = len(ring)
    others = [t for t in _oriented_triangles(g) if v not in t]
    new = g.n
    for i in range(k):
        for span in range(1, k):
            # v keeps the fan over arc1 = ring[i..i+span]; the new vertex takes
            # the complementary fan; two seam triangles glue along the new edge.
            arc1 = [ring[(i + t) % k] for t in range(span + 1)]
            arc2 = [ring[(i + t) % k] for t in range(span, k + 1)]
            new_tris = list(others)
            for t in range(span):
                new_tris.append((arc1[t], v, arc1[t + 1]))
            for t in range(len(arc2) - 1):
                new_tris.append((arc2[t], new, arc2[t + 1]))
            new_tris.append((arc1[-1], v, new))
            new_tris.append((arc2[-1], new, v))
            built = _rotation_from_triangles(new + 1, new_tris)
            if built is not None:
                yield built


def triangulations(n: int) -> list[PlaneGraph]:
    """All simple sphere triangulations on n vertices, up to isomorphism."""
    if n < 4:
        raise ValueError("triangulations need n >= 4")
    if n in _tri_cache:
        return _tri_cache[n]
    level = {canonical_code(TETRAHEDRON): TETRAHEDRON}
    _tri_cache.setdefault(4, list(level.values()))
    for size in range(5, n + 1):
        if size in _tri_cache:
            level = {canonical_code(g): g for g in _tri_cache[size]}
            continue
        nxt: dict[bytes, PlaneGraph] = {}
        for g in level.values():
            for v in range(g.n):
                for child in _vertex_splits(g, v):
                    code = canonical_code(child)
                    if code not in nxt:
                        nxt[code] = child
        level = nxt
        _tri_cache[size] = list(level.values())
    return _tri_cache[n]


def _induced_subgraph(g: PlaneGraph, kept: set[tuple[int, int]]) -> PlaneGraph:
    rotation = tuple(
        tuple(w for w in g.rotation[v] if (min(v, w), max(v, w)) in kept)
        for v in range(g.n)
    )
    return PlaneGraph(g.n, rotation, {})


def _connected(n: int, adj: list[list[int]], skip: tuple[int, ...] = ()) -> bool:
    start = next((v for v in range(n) if v not in skip), None)
    if start is None:
        return True
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for w in adj[u]:
            if w not in seen and w not in skip:
                seen.add(w)
                stack.append(w)
    return len(seen) == n - len(skip)


def is_three_connected(g: PlaneGraph, faces: list[Face] | None = None) -> bool:
    """3-connectivity test for a plane graph with simple-cycle faces.

    Any 2-cut of a 2-connected plane graph lies on a common face, so it
    suffices to probe vertex pairs sharing a face.
    """
    if g.n < 4:
        return False
    adj = [list(r) for r in g.rotation]
    if not _connected(g.n, adj):
        return False
    if faces is None:
        faces = trace_faces(g)
    if any(len(f.distinct_vertices()) != f.size for f in faces):
        return False  # repeated vertex on a face walk: a cut vertex
    pairs = set()
    for f in faces:
        verts = sorted(f.distinct_vertices())
        pairs.update(combinations(verts, 2))
    for u, v in pairs:
        if not _connected(g.n, adj, skip=(u, v)):
            return False
    return True


def _spanning_subgraphs(
    g: PlaneGraph,
    max_deg: int | None,
    max_face: int,
    require_three_connected: bool,
) -> Iterator[PlaneGraph]:
    """Spanning subgraphs of a triangulation with degrees in [3, max_deg]."""
    cap = max_deg if max_deg is not None else g.n - 1
    edges = sorted(g.edge_set())
    # Decide edges vertex-by-vertex (high degree first) so bounds bind early.
    rank = sorted(range(g.n), key=lambda v: -g.degree(v))
    rank_pos = {v: i for i, v in enumerate(rank)}
    edges.sort(key=lambda e: (min(rank_pos[e[0]], rank_pos[e[1]]),
                              max(rank_pos[e[0]], rank_pos[e[1]])))
    m = len(edges)
    undecided = [g.degree(v) for v in range(g.n)]
    kept_deg = [0] * g.n
    kept: list[bool] = [False] * m

    def emit() -> Iterator[PlaneGraph]:
        kept_set = {e for e, flag in zip(edges, kept) if flag}
        sub = _induced_subgraph(g, kept_set)
        if not sub.is_connected_ignoring_isolated():
            return
        faces = trace_faces(sub)
        if any(f.size > max_face for f in faces):
            return
        if require_three_connected and not is_three_connected(sub, faces):
            return
        yield sub

    def rec(i: int) -> Iterator[PlaneGraph]:
        if i == m:
            yield from emit()
            return
        u, v = edges[i]
        undecided[u] -= 1
        undecided[v] -= 1
        if kept_deg[u] < cap and kept_deg[v] < cap:
            kept_deg[u] += 1
            kept_deg[v] += 1
            kept[i] = True
            yield from rec(i + 1)
            kept[i] = False
            kept_deg[u] -= 1
            kept_deg[v] -= 1
        if kept_deg[u] + undecided[u] >= 3 and kept_deg[v] + undecided[v] >= 3:
            yield from rec(i + 1)
        undecided[u] += 1
        undecided[v] += 1

    yield from rec(0)


def generate_polyhedra(n: int, max_deg: int | None = None,
                       max_face: int | None = None) -> list[PlaneGraph]:
    """All 3-connected planar graphs on n vertices, up to isomorphism."""
    if not MIN_N <= n <= MAX_N:
        raise ValueError(f"supported vertex range is {MIN_N}..{MAX_N}, got {n}")
    cap = max_face if max_face is not None else n
    found: dict[bytes, PlaneGraph] = {}
    for tri in triangulations(n):
        for sub in _spanning_subgraphs(tri, max_deg, cap, True):
            code = canonical_code(sub)
            if code not in found:
                found[code] = sub
    return [found[c] for c in sorted(found)]


def _placements(g: PlaneGraph, extra: int, total_n: int) -> Iterator[PlaneGraph]:
    """Candidates obtained by adding `extra` isolated vertices into large faces."""
    faces = trace_faces(g)
    eligible = [f.index for f in faces if f.size >= 6]
    if not eligible:
        return
    base_rot = list(g.rotation) + [()] * extra
    for combo in combinations_with_replacement(eligible, extra):
        per_face: dict[int, int] = {}
        for fidx in combo:
            per_face[fidx] = per_face.get(fidx, 0) + 1
        if any(faces[f].size == 6 and c >= 2 for f, c in per_face.items()):
            continue
        isolated = {g.n + i: combo[i] for i in range(extra)}
        yield PlaneGraph(total_n, tuple(base_rot), isolated)


def _with_placements(
    bases_by_n: dict[int, list[PlaneGraph]], n: int
) -> Iterator[PlaneGraph]:
    # A face with six or more vertices first appears at eight vertices
    # (validated in the test suite), so smaller bases cannot host anything.
    for base_n in range(n - 1, 7, -1):
        extra = n - base_n
        for g in bases_by_n.get(base_n, []):
            yield from _placements(g, extra, n)


def generate_candidates(n: int, include_isolated: bool = True) -> list[PlaneGraph]:
    """The complete duplicate-free candidate list for n total vertices.

    Polyhedral graphs on n vertices, plus (when `include_isolated` is set)
    one candidate per admissible placement multiset of isolated vertices
    inside faces of six or more vertices of smaller polyhedral graphs.
    Combinatorial admissibility filtering is a separate downstream stage.
    """
    if not MIN_N <= n <= MAX_N:
        raise ValueError(f"supported vertex range is {MIN_N}..{MAX_N}, got {n}")
    out: dict[bytes, PlaneGraph] = {}
    for g in generate_polyhedra(n):
        out[canonical_code(g)] = g
    if include_isolated:
        bases = {bn: generate_polyhedra(bn, max_face=n) for bn in range(8, n)}
        for cand in _with_placements(bases, n):
            code = canonical_code(cand)
            if code not in out:
                out[code] = cand
    return [out[c] for c in sorted(out)]


def generate_filtered(n: int, include_isolated: bool = True) -> list[PlaneGraph]:
    """Candidates that already pass the contact-graph combinatorial filter.

    Equivalent to filtering `generate_candidates`, but fuses the degree
    window {3,4,5} into the subgraph search so graphs with high-degree
    vertices are never materialized; this is what the enumeration pipeline
    consumes for large n.
    """
    if not MIN_N <= n <= MAX_N:
        raise ValueError(f"supported vertex range is {MIN_N}..{MAX_N}, got {n}")
    out: dict[bytes, PlaneGraph] = {}
    for g in generate_polyhedra(n, max_deg=5):
        if combinatorial_filter(g, n):
            out[canonical_code(g)] = g
    if include_isolated:
        bases = {bn: generate_polyhedra(bn, max_deg=5, max_face=n)
                 for bn in range(8, n)}
        for cand in _with_placements(bases, n):
            if combinatorial_filter(cand, n):
                code = canonical_code(cand)
                if code not in out:
                    out[code] = cand
    return [out[c] for c in sorted(out)]


def candidate_counts(n: int) -> tuple[int, int]:
    """(number of candidates with placements, number of underlying graphs)."""
    cands = generate_candidates(n)
    underlying = set()
    for g in cands:
        if g.isolated:
            live = g.connected_vertices()
            underlying.add(canonical_code(PlaneGraph(len(live), g.rotation[: len(live)], {})))
        else:
            underlying.add(canonical_code(g))
    return len(cands), len(underlying)


def ingest_candidates(graphs: Iterable[PlaneGraph], n: int) -> list[PlaneGraph]:
    """Deduplicate externally generated graphs (e.g. plantri output) for a run."""
    out: dict[bytes, PlaneGraph] = {}
    for g in graphs:
        if g.n != n:
            continue
        out.setdefault(canonical_code(g), g)
    return [out[c] for c in sorted(out)]
