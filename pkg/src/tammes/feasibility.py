"""Interval branch-and-bound over the linearized constraint system.

Each search node tightens its box by constraint propagation to a fixpoint,
re-assembling the linearizations as the box shrinks (enclosures tighten
quadratically with box width).  Nodes split on the widest variable of the
determining set plus the triangle angle; a graph is pruned when every leaf
empties, and otherwise the surviving leaf boxes are handed to the
certification stage.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .planegraph import PlaneGraph
from .relax import LinearConstraint
from .system import A_VAR, D_VAR, DomainBox, VariableSystem, assemble_system, build_system, initial_box

EMPTY_SLACK = 1e-12
PROGRESS_TOL = 1e-4
REQUEUE_SHRINK = 0.10

DEFAULT_MAX_LEVEL = 40
DEFAULT_LEAF_BUDGET = 4096


class SearchStatus(Enum):
    PRUNED = "PRUNED"
    SURVIVED = "SURVIVED"
    BUDGET = "BUDGET"


@dataclass
class SearchNode:
    box: DomainBox
    level: int
    lineage: tuple[int, ...] = ()


@dataclass
class SearchResult:
    status: SearchStatus
    boxes: list[DomainBox] = field(default_factory=list)
    levels_used: int = 0
    nodes: int = 0
    leaves: int = 0
    wall_time: float = 0.0

    @property
    def pruned(self) -> bool:
        return self.status is SearchStatus.PRUNED


class CompiledConstraints:
    """Flat array form of a constraint list for vectorized propagation."""

    __slots__ = ("rows", "cols", "vals", "pos", "clo", "chi", "n_vars", "n_cons")

    def __init__(self, constraints: list[LinearConstraint], n_vars: int):
        rows: list[int] = []
        cols: list[int] = []
        vals: list[float] = []
        for ci, con in enumerate(constraints):
            for v, c in con.coeffs:
                rows.append(ci)
                cols.append(v)
                vals.append(c)
        self.rows = np.asarray(rows, dtype=np.intp)
        self.cols = np.asarray(cols, dtype=np.intp)
        self.vals = np.asarray(vals)
        self.pos = self.vals > 0.0
        self.clo = np.asarray([c.lo for c in constraints])
        self.chi = np.asarray([c.hi for c in constraints])
        self.n_vars = n_vars
        self.n_cons = len(constraints)


def propagate(constraints: "list[LinearConstraint] | CompiledConstraints",
              box: DomainBox,
              progress_tol: float = PROGRESS_TOL,
              max_passes: int = 40) -> DomainBox | None:
    """Tighten the box by iterated interval propagation to a fixpoint.

    Every constraint is swept simultaneously (vectorized); sweeps repeat
    while some interval still shrinks by more than the relative progress
    threshold, so variables tightened in one sweep immediately sharpen
    their neighboring constraints in the next.  Returns the tightened box
    (every solution point of the input box is kept) or None when some
    interval empties.
    """
    cc = (constraints if isinstance(constraints, CompiledConstraints)
          else CompiledConstraints(constraints, len(box.lo)))
    lo = box.lo.copy()
    hi = box.hi.copy()
    if cc.n_cons == 0:
        return DomainBox(lo, hi)
    rows, cols, vals, pos = cc.rows, cc.cols, cc.vals, cc.pos
    for _ in range(max_passes):
        x_lo = lo[cols]
        x_hi = hi[cols]
        term_lo = np.where(pos, vals * x_lo, vals * x_hi)
        term_hi = np.where(pos, vals * x_hi, vals * x_lo)
        act_lo = np.zeros(cc.n_cons)
        act_hi = np.zeros(cc.n_cons)
        np.add.at(act_lo, rows, term_lo)
        np.add.at(act_hi, rows, term_hi)
        if np.any(act_lo > cc.chi + 1e-9) or np.any(act_hi < cc.clo - 1e-9):
            return None
        rest_lo = act_lo[rows] - term_lo
        rest_hi = act_hi[rows] - term_hi
        with np.errstate(invalid="ignore"):
            ub_num = cc.chi[rows] - rest_lo
            lb_num = cc.clo[rows] - rest_hi
            new_hi_e = np.where(pos, ub_num, lb_num) / vals
            new_lo_e = np.where(pos, lb_num, ub_num) / vals
        cand_hi = np.full(cc.n_vars, np.inf)
        cand_lo = np.full(cc.n_vars, -np.inf)
        np.minimum.at(cand_hi, cols, new_hi_e)
        np.maximum.at(cand_lo, cols, new_lo_e)
        widths_before = hi - lo
        np.minimum(hi, cand_hi, out=hi)
        np.maximum(lo, cand_lo, out=lo)
        bad = lo > hi
        if np.any(bad):
            if np.any(lo[bad] > hi[bad] + EMPTY_SLACK):
                return None
            mids = 0.5 * (lo[bad] + hi[bad])
            lo[bad] = mids
            hi[bad] = mids
        gains = widths_before - (hi - lo)
        if not np.any((gains > 1e-12) &
                      (gains > progress_tol * np.maximum(widths_before, 1e-300))):
            break
    return DomainBox(lo, hi)


def choose_branch_variable(sys: VariableSystem, box: DomainBox) -> int:
    """Widest-interval member of the determining set plus the triangle angle."""
    best_v = None
    best_w = -1.0
    for v in sys.branch_set():
        w = box.width(v)
        if w > best_w + 1e-15:
            best_w = w
            best_v = v
    assert best_v is not None
    return best_v


def tighten(sys: VariableSystem, box: DomainBox,
            rounds: int = 3) -> DomainBox | None:
    """Alternate re-assembly and propagation until gains become marginal."""
    current = box
    for _ in range(rounds):
        cons = assemble_system(sys, current)
        nxt = propagate(cons, current)
        if nxt is None:
            return None
        before = current.widths().sum()
        after = nxt.widths().sum()
        current = nxt
        if before - after < 0.02 * max(before, 1e-12):
            break
    return current


def branch_and_bound(
    g: PlaneGraph,
    n_run: int | None = None,
    max_level: int = DEFAULT_MAX_LEVEL,
    leaf_budget: int = DEFAULT_LEAF_BUDGET,
    leaf_eps: float = 3e-3,
    leaf_target: int = 128,
    sys: VariableSystem | None = None,
    box: DomainBox | None = None,
) -> SearchResult:
    """Level-by-level domain subdivision with sound pruning.

    PRUNED certifies that no embedding satisfies the relaxed system anywhere
    in the initial domain; SURVIVED returns the leaf boxes still feasible at
    max_level.  Two early-leaf rules bound the work on graphs with genuine
    solution families, and only ever add surviving leaves (never prune):
    boxes whose branch variables have all collapsed below leaf_eps stop
    splitting, and once leaf_target leaves have been collected the remaining
    queue is tightened once and emitted.  Exceeding the hard leaf budget
    reports BUDGET with all remaining boxes so the certifier can still
    attempt embeddings.
    """
    t0 = time.time()
    if sys is None:
        sys = build_system(g, n_run if n_run is not None else g.n)
    root_box = box if box is not None else initial_box(sys)
    if root_box.is_empty():
        return SearchResult(SearchStatus.PRUNED, wall_time=time.time() - t0)

    stack: list[SearchNode] = [SearchNode(root_box, 0)]
    leaves: list[DomainBox] = []
    nodes = 0
    deepest = 0
    node_budget = leaf_budget * 8
    while stack:
        if len(leaves) > leaf_budget or nodes > node_budget:
            remaining = leaves + [n.box for n in stack]
            return SearchResult(SearchStatus.BUDGET, remaining, deepest, nodes,
                                len(leaves), time.time() - t0)
        node = stack.pop()
        nodes += 1
        deepest = max(deepest, node.level)
        at_target = len(leaves) >= leaf_target
        tightened = tighten(sys, node.box, rounds=1 if at_target else 3)
        if tightened is None:
            continue
        if node.level >= max_level or at_target:
            leaves.append(tightened)
            continue
        v = choose_branch_variable(sys, tightened)
        if tightened.width(v) <= leaf_eps:
            leaves.append(tightened)
            continue
        mid = 0.5 * (tightened.lo[v] + tightened.hi[v])
        left = tightened.copy()
        left.hi[v] = mid
        right = tightened.copy()
        right.lo[v] = mid
        stack.append(SearchNode(left, node.level + 1, node.lineage + (v,)))
        stack.append(SearchNode(right, node.level + 1, node.lineage + (v,)))
    if not leaves:
        return SearchResult(SearchStatus.PRUNED, [], deepest, nodes, 0,
                            time.time() - t0)
    return SearchResult(SearchStatus.SURVIVED, leaves, deepest, nodes,
                        len(leaves), time.time() - t0)
