"""Plane graphs as rotation systems: faces, canonical codes, filter, file format."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

PLANAR_CODE_HEADER = b">>planar_code<<"


class StructureError(ValueError):
    """Malformed combinatorial input (asymmetric rotation, bad file record)."""


@dataclass(frozen=True)
class Face:
    """One face of an embedding: the cyclic walk of darts bounding it."""

    index: int
    darts: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return len(self.darts)

    def vertices(self) -> tuple[int, ...]:
        return tuple(u for u, _ in self.darts)

    def distinct_vertices(self) -> frozenset[int]:
        return frozenset(u for u, _ in self.darts)


@dataclass(frozen=True)
class PlaneGraph:
    """Combinatorial sphere embedding given by neighbor rotations.

    `rotation[v]` lists the neighbors of v in cyclic embedding order; degree-0
    vertices carry an empty rotation and may be tagged in `isolated` with the
    index (into `trace_faces` order) of the face hosting them.
    """

    n: int
    rotation: tuple[tuple[int, ...], ...]
    isolated: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "isolated", dict(self.isolated))

    def degree(self, v: int) -> int:
        return len(self.rotation[v])

    def degrees(self) -> list[int]:
        return [len(r) for r in self.rotation]

    def edge_count(self) -> int:
        return sum(len(r) for r in self.rotation) // 2

    def edge_set(self) -> set[tuple[int, int]]:
        out = set()
        for v, nbrs in enumerate(self.rotation):
            for w in nbrs:
                out.add((min(v, w), max(v, w)))
        return out

    def connected_vertices(self) -> list[int]:
        return [v for v in range(self.n) if self.rotation[v]]

    def isolated_vertices(self) -> list[int]:
        return [v for v in range(self.n) if not self.rotation[v]]

    def validate(self) -> None:
        """Raise StructureError unless the rotation system is symmetric and simple."""
        if len(self.rotation) != self.n:
            raise StructureError("rotation table length differs from vertex count")
        for v, nbrs in enumerate(self.rotation):
            if len(set(nbrs)) != len(nbrs):
                raise StructureError(f"repeated neighbor at vertex {v}")
            for w in nbrs:
                if not 0 <= w < self.n or w == v:
                    raise StructureError(f"bad neighbor {w} at vertex {v}")
                if v not in self.rotation[w]:
                    raise StructureError(f"asymmetric adjacency: {v}->{w} without {w}->{v}")

    def is_connected_ignoring_isolated(self) -> bool:
        live = self.connected_vertices()
        if not live:
            return True
        seen = {live[0]}
        stack = [live[0]]
        while stack:
            v = stack.pop()
            for w in self.rotation[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(live)

    def mirrored(self) -> "PlaneGraph":
        return PlaneGraph(self.n, tuple(tuple(reversed(r)) for r in self.rotation), {})


def trace_faces(g: PlaneGraph) -> list[Face]:
    """All faces of the embedding, by orbit of the next-dart permutation.

    The dart following (u, v) continues around the face through the neighbor
    after u in the rotation at v.  Deterministic order: faces appear by their
    smallest unvisited dart.
    """
    g.validate()
    pos: list[dict[int, int]] = [
        {w: i for i, w in enumerate(r)} for r in g.rotation
    ]
    unused: set[tuple[int, int]] = {
        (v, w) for v in range((g.n)) for w in g.rotation[v]
    }
    faces: list[Face] = []
    for v in range(g.n):
        for w in g.rotation[v]:
            if (v, w) not in unused:
                continue
            walk = []
            u, x = v, w
            while (u, x) in unused:
                unused.discard((u, x))
                walk.append((u, x))
                nxt = g.rotation[x][(pos[x][u] + 1) % len(g.rotation[x])]
                u, x = x, nxt
            faces.append(Face(len(faces), tuple(walk)))
    live = g.connected_vertices()
    if live and g.is_connected_ignoring_isolated():
        euler = len(live) - g.edge_count() + len(faces)
        if euler != 2:
            raise StructureError(f"face tracing violates Euler relation: {euler} != 2")
    return faces


def combinatorial_filter(g: PlaneGraph, n: int) -> bool:
    """Necessary combinatorial conditions for an irreducible contact graph.

    Degrees in {0, 3, 4, 5}; isolated vertices only in faces of six or more
    vertices, at most one per hexagon; every face has at most n vertices
    (the perimeter cap for edge length >= 2*pi/n).
    """
    for v in range(g.n):
        if g.degree(v) not in (0, 3, 4, 5):
            return False
    faces = trace_faces(g)
    for f in faces:
        if f.size > n:
            return False
    hosts: dict[int, int] = {}
    for v in g.isolated_vertices():
        host = g.isolated.get(v)
        if host is None or not 0 <= host < len(faces):
            return False
        hosts[host] = hosts.get(host, 0) + 1
    for fidx, count in hosts.items():
        if faces[fidx].size < 6:
            return False
        if faces[fidx].size == 6 and count >= 2:
            return False
    return True


def _rooted_code(
    rotation: Sequence[Sequence[int]],
    root: int,
    first: int,
    mirror: bool,
) -> tuple[bytes, dict[int, int]]:
    """BFS code of the connected embedding rooted at dart (root, first).

    Also returns the vertex labeling the code induces.
    """
    label = {root: 0}
    order = [root]
    anchor = {root: first}
    out = bytearray()
    i = 0
    while i < len(order):
        u = order[i]
        i += 1
        r = rotation[u]
        if mirror:
            r = tuple(reversed(r))
        k = r.index(anchor[u])
        for j in range(len(r)):
            w = r[(k + j) % len(r)]
            lbl = label.get(w)
            if lbl is None:
                lbl = len(order)
                label[w] = lbl
                order.append(w)
                anchor[w] = u
            out.append(lbl + 1)
        out.append(0)
    return bytes(out), label


def _canonical_face_tags(
    g: PlaneGraph, label_of: dict[int, int]
) -> bytes:
    """Face tags of isolated vertices under a canonical vertex labeling."""
    if not g.isolated:
        return b""
    faces = trace_faces(g)
    # Orientation-insensitive face key: with min degree 3 no two faces share
    # an identical edge set, so this indexing is canonical under mirroring.
    keyed = sorted(
        range(len(faces)),
        key=lambda i: sorted(
            (min(label_of[u], label_of[v]), max(label_of[u], label_of[v]))
            for u, v in faces[i].darts
        ),
    )
    canon_index = {orig: rank for rank, orig in enumerate(keyed)}
    tags = sorted(canon_index[host] for host in g.isolated.values())
    return bytes([255, len(tags), *tags])


def canonical_code(g: PlaneGraph, orientation_sensitive: bool = False) -> bytes:
    """Relabeling-invariant byte code identifying the plane graph.

    Minimizes a rooted BFS code over all starting darts and, unless
    orientation-sensitive mode is requested, over both orientations, so
    mirror images share a code.  Isolated vertices contribute a canonical
    multiset of host-face indices.
    """
    g.validate()
    live = g.connected_vertices()
    iso = g.isolated_vertices()
    if not live:
        return bytes([g.n, 0])
    min_deg = min(len(g.rotation[v]) for v in live)
    starts = [v for v in live if len(g.rotation[v]) == min_deg]
    mirrors = (False,) if orientation_sensitive else (False, True)
    best: bytes | None = None
    for mirror in mirrors:
        for root in starts:
            for first in g.rotation[root]:
                code, label = _rooted_code(g.rotation, root, first, mirror)
                full = bytes([g.n, len(iso)]) + code
                if g.isolated:
                    full += _canonical_face_tags(g, label)
                if best is None or full < best:
                    best = full
    assert best is not None
    return best


def graphs_isomorphic(a: PlaneGraph, b: PlaneGraph) -> bool:
    return canonical_code(a) == canonical_code(b)


def from_adjacency(adj: Sequence[Sequence[int]], isolated: Mapping[int, int] | None = None) -> PlaneGraph:
    g = PlaneGraph(len(adj), tuple(tuple(r) for r in adj), isolated or {})
    g.validate()
    return g


def read_planar_code(data: bytes) -> list[PlaneGraph]:
    """Parse the binary PLANAR_CODE interchange format.

    Header ">>planar_code<<" then, per graph, a vertex count byte followed by
    each vertex's 1-based neighbor list in rotation order, 0-terminated.
    """
    if not data.startswith(PLANAR_CODE_HEADER):
        raise StructureError("missing >>planar_code<< header")
    off = len(PLANAR_CODE_HEADER)
    graphs: list[PlaneGraph] = []
    while off < len(data):
        n = data[off]
        off += 1
        if n == 0:
            raise StructureError(f"zero vertex count at byte {off - 1}")
        rotation: list[tuple[int, ...]] = []
        for v in range(n):
            nbrs = []
            while True:
                if off >= len(data):
                    raise StructureError(f"truncated record at byte {off}")
                b = data[off]
                off += 1
                if b == 0:
                    break
                if b > n:
                    raise StructureError(f"neighbor {b} out of range at byte {off - 1}")
                nbrs.append(b - 1)
            rotation.append(tuple(nbrs))
        g = PlaneGraph(n, tuple(rotation), {})
        try:
            g.validate()
        except StructureError as exc:
            raise StructureError(f"invalid record ending at byte {off}: {exc}") from exc
        graphs.append(g)
    return graphs


def write_planar_code(graphs: Iterable[PlaneGraph]) -> bytes:
    out = bytearray(PLANAR_CODE_HEADER)
    for g in graphs:
        if g.n > 255:
            raise StructureError("PLANAR_CODE supports at most 255 vertices")
        out.append(g.n)
        for v in range(g.n):
            out.extend(w + 1 for w in g.rotation[v])
            out.append(0)
    return bytes(out)


def iter_planar_code_file(path) -> Iterator[PlaneGraph]:
    with open(path, "rb") as fh:
        yield from read_planar_code(fh.read())
