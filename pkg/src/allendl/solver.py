"""Scenario search over a QCN with a difference-logic back end.

Each stored edge must pick exactly one base relation from its label; picking
``b`` on ``(i, j)`` asserts the endpoint template of ``b`` in a `DiffEngine`
where interval ``i`` owns variables ``2i`` (start) and ``2i + 1`` (end).
Universal edges never enter the search: any endpoint assignment of proper
intervals realizes some base relation on them.

Reasoning modes:

* `solve_sat`         one consistent scenario plus an integer witness
* `backbone`          relations chosen on an edge by *every* scenario
* `union_labels`      relations chosen on an edge by *some* scenario
* `enumerate_scenarios` all scenarios, without repeats
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field, asdict
from typing import Dict, Iterator, List, Optional, Tuple

from . import algebra as ia
from .diffengine import DiffEngine
from .network import QCN, Edge, PathConsistency

SAT = "sat"
UNSAT = "unsat"
ABORTED = "aborted"


@dataclass
class SolverOptions:
    # algebraic closure as preprocessing
    closure: bool = True
    # keep the closure up to date after every decision
    maintain_closure: bool = True
    forward_check: bool = True
    allow_point_intervals: bool = False
    timeout_s: Optional[float] = None
    # "fail-first": fewest candidates, ties by lowest edge; "static": lowest edge
    heuristic: str = "fail-first"
    # jump back to the latest decision named in a conflict instead of the previous one
    backjumping: bool = False
    # backbone/union queries try not yet covered relations first
    diversify: bool = True
    # backbone/union queries restart after a doubling conflict budget, each
    # restart with a seeded value order
    restarts: bool = True

    def __post_init__(self):
        if self.heuristic not in ("fail-first", "static"):
            raise ValueError(f"unknown heuristic {self.heuristic!r}")


@dataclass
class Stats:
    decisions: int = 0
    conflicts: int = 0
    propagations: int = 0
    wall_ms: float = 0.0

    def to_json(self) -> dict:
        d = asdict(self)
        d["wall_ms"] = round(self.wall_ms, 3)
        return d


class Aborted(Exception):
    """The wall-clock budget ran out."""


class _Restart(Exception):
    pass


RESTART_BASE = 128


@dataclass
class SatResult:
    status: str
    scenario: Optional[Dict[Edge, ia.Base]] = None
    solution: Optional[List[Tuple[int, int]]] = None
    stats: Stats = field(default_factory=Stats)

    @property
    def sat(self) -> bool:
        return self.status == SAT

    def to_json(self) -> dict:
        out = {"status": self.status}
        if self.status == SAT:
            out["scenario"] = [{"i": i, "j": j, "rel": b.name}
                               for (i, j), b in sorted(self.scenario.items())]
            out["solution"] = [{"var": v, "start": s, "end": e}
                               for v, (s, e) in enumerate(self.solution)]
        out["stats"] = self.stats.to_json()
        return out


@dataclass
class BackboneResult:
    status: str
    # edges absent from the dict have no backbone relation
    backbone: Optional[Dict[Edge, ia.Base]] = None
    stats: Stats = field(default_factory=Stats)

    def to_json(self) -> dict:
        out = {"status": self.status}
        if self.status == SAT:
            out["backbone"] = [{"i": i, "j": j, "rel": b.name}
                               for (i, j), b in sorted(self.backbone.items())]
        out["stats"] = self.stats.to_json()
        return out


@dataclass
class UnionResult:
    status: str
    union: Optional[Dict[Edge, int]] = None
    stats: Stats = field(default_factory=Stats)

    def to_json(self) -> dict:
        out = {"status": self.status}
        if self.status == SAT:
            out["union"] = [{"i": i, "j": j, "rels": ia.tokens(r)}
                            for (i, j), r in sorted(self.union.items())]
        out["stats"] = self.stats.to_json()
        return out


def _popcount(x: int) -> int:
    return bin(x).count("1")


class Search:
    """Backtracking search state for one QCN.

    A single instance can run several queries in sequence (the backbone and
    union loops do); each query starts from the root state.
    """

    def __init__(self, q: QCN, opts: Optional[SolverOptions] = None,
                 stats: Optional[Stats] = None, deadline: Optional[float] = None):
        self.q = q
        self.opts = opts = opts or SolverOptions()
        self.stats = stats if stats is not None else Stats()
        self.deadline = deadline
        self.edges: List[Edge] = q.edges()
        self.labels = [q.labels[e] for e in self.edges]
        self.refuted = any(r == ia.EMPTY for r in self.labels)
        self.pc: Optional[PathConsistency] = None
        if not self.refuted and (opts.closure or opts.maintain_closure):
            pc = PathConsistency(q, opts.allow_point_intervals)
            if not pc.propagate(self.edges):
                self.refuted = True
            else:
                # derived labels on universal pairs stay in the matrix (they
                # help propagation) but never become scenario edges
                self.labels = [pc.c[i][j] for i, j in self.edges]
                if opts.maintain_closure:
                    self.pc = pc

        self.engine = DiffEngine(2 * q.n)
        bound = ia.interval_bound(opts.allow_point_intervals)
        for v in range(q.n):
            self.engine.assert_constraint(2 * v, 2 * v + 1, bound)
        self._inst = [
            [ia.instantiate(b, 2 * i, 2 * i + 1, 2 * j, 2 * j + 1) for b in range(ia.NUM_BASE)]
            for i, j in self.edges
        ]
        # Forward-checking cache: per (edge, relation) an assignment that
        # satisfied the engine plus that template, and the path cell it was
        # recorded at.  It still proves feasibility if it also satisfies the
        # constraints decided since, which is much cheaper than a probe.
        self._root_cell = ((), None, 0)
        # restart state: value-order RNG and conflict limit
        self._rng: Optional[random.Random] = None
        self._limit: Optional[int] = None
        self._witness: List[Optional[tuple]] = [None] * (len(self.edges) * ia.NUM_BASE)

    # -- public queries ----------------------------------------------------------

    def initial_candidates(self) -> List[int]:
        return list(self.labels)

    def scenarios(self, cands: Optional[List[int]] = None,
                  block: Optional[Dict[int, int]] = None,
                  prefer: Optional[List[int]] = None) -> Iterator[List[int]]:
        """Yield consistent scenarios as lists of base relations (edge order).

        ``cands`` restricts each edge's candidates.  ``block`` maps edge
        indices to base relations; scenarios agreeing with ``block`` on every
        one of those edges are skipped.  ``prefer`` gives per edge a mask of
        candidates to try before the others (each group in canonical order).  While a yielded scenario is being
        consumed the engine holds its constraints, so `witness` is valid.
        """
        if self.refuted:
            return
        cands = [r & l for r, l in zip(self.labels if cands is None else cands, self.labels)]
        if any(c == ia.EMPTY for c in cands):
            return
        root = self.engine.level
        pc_root = self.pc.mark() if self.pc else 0
        try:
            yield from self._dfs(cands, block, prefer)
        finally:
            while self.engine.level > root:
                self.engine.pop(self.engine.level)
            if self.pc:
                self.pc.undo(pc_root)

    def first(self, cands=None, block=None, prefer=None, restarts=False
              ) -> Optional[Tuple[List[int], List[Tuple[int, int]]]]:
        """The first scenario found, with its witness, or None.

        With ``restarts`` attempt k gives up after ``RESTART_BASE * 2**(k-1)``
        conflicts; attempts after the first pick values in an order seeded by
        k.  The budgets are unbounded, so the answer is still complete.
        """
        if not restarts:
            return self._first(cands, block, prefer)
        k = 0
        try:
            while True:
                k += 1
                self._limit = self.stats.conflicts + (RESTART_BASE << (k - 1))
                if k > 1:
                    self._rng = random.Random(k)
                try:
                    return self._first(cands, block, prefer)
                except _Restart:
                    continue
        finally:
            self._rng = self._limit = None

    def _first(self, cands, block, prefer):
        gen = self.scenarios(cands, block, prefer)
        try:
            for scenario in gen:
                return scenario, self.witness()
        finally:
            gen.close()
        return None

    def witness(self) -> List[Tuple[int, int]]:
        if self.q.n == 0:
            return []
        vals = self.engine.extract_assignment(0)
        return [(vals[2 * v], vals[2 * v + 1]) for v in range(self.q.n)]

    def to_scenario(self, choice: List[int]) -> Dict[Edge, ia.Base]:
        return {e: ia.Base(b) for e, b in zip(self.edges, choice)}

    # -- search ------------------------------------------------------------------

    def _dfs(self, cands: List[int], block, prefer) -> Iterator[List[int]]:
        eng = self.engine
        pc = self.pc
        stats = self.stats
        inst = self._inst
        edges = self.edges
        cbj = self.opts.backjumping
        m = len(edges)
        st = _NodeState(cands, m, self._root_cell)
        decided, depth, undecided = st.decided, st.depth, st.undecided

        if pc is not None:
            # push root restrictions (forced atoms of union queries) into the matrix
            for k, (i, j) in enumerate(edges):
                if cands[k] != pc.c[i][j] and not pc.refine(i, j, cands[k]):
                    return
        # root units are asserted above this mark; `scenarios` pops it
        eng.push()
        if self._settle(st, block, -1, []) is not None:
            return
        e = self._select(cands, undecided)
        if e is None:
            yield list(decided)
            return

        def reasons_below(rs, level):
            # decisions made at shallower frames (root units carry depth -1)
            return {r for r in rs if 0 <= depth[r] < level}

        def retract(frame) -> None:
            if frame[2] is not None:
                eng.pop(frame[2])
                st.undo(frame[3])
                if pc is not None:
                    pc.undo(frame[5])
                st.cell = frame[6]
                for u in frame[7]:
                    decided[u] = None
                    depth[u] = -1
                    undecided.add(u)
                frame[7] = []
                frame[2] = None

        # frame: [edge, untried candidates, engine mark or None, trail size,
        #         conflict set, closure mark, path cell before the decision,
        #         edges decided by this frame (its own edge, then units)]
        stack = [[e, cands[e], None, 0, set(), 0, None, []]]
        while stack:
            frame = stack[-1]
            retract(frame)
            e, remaining, conf = frame[0], frame[1], frame[4]
            level = len(stack) - 1
            if not remaining:
                stack.pop()
                if not cbj:
                    continue
                reasons = reasons_below(conf | st.pruned_by[e], level)
                if not reasons:
                    return
                target = max(depth[r] for r in reasons)
                while len(stack) - 1 > target:
                    retract(stack.pop())
                stack[-1][4] |= reasons_below(reasons, target)
                continue
            if self.deadline is not None and time.monotonic() > self.deadline:
                raise Aborted()
            if self._limit is not None and stats.conflicts > self._limit:
                raise _Restart()
            group = (remaining & prefer[e] if prefer is not None else 0) or remaining
            if self._rng is None:
                low = group & -group
            else:
                low = 1 << self._rng.choice(ia.members(group))
            b = low.bit_length() - 1
            frame[1] = remaining ^ low
            stats.decisions += 1
            frame[3] = len(st.trail)
            frame[5] = pc.mark() if pc is not None else 0
            frame[6] = st.cell
            frame[2] = eng.push()
            decided[e] = b
            depth[e] = level
            undecided.discard(e)
            frame[7] = [e]
            conflict = eng.assert_all(inst[e][b], e)
            if conflict is not None:
                stats.conflicts += 1
                if cbj:
                    conf |= reasons_below(conflict.tags, level)
                continue
            st.cell = (inst[e][b], st.cell, st.cell[2] + 1)
            if pc is not None and not pc.refine(*edges[e], low):
                stats.conflicts += 1
                if cbj:
                    conf |= reasons_below(st.all_decided(), level)
                continue
            failed = self._settle(st, block, level, frame[7])
            if failed is not None:
                stats.conflicts += 1
                if cbj:
                    conf |= reasons_below(failed, level)
                continue
            nxt = self._select(cands, undecided)
            if nxt is None:
                yield list(decided)
                # further solutions may depend on every earlier decision
                conf |= reasons_below(st.all_decided(), level)
                continue
            stack.append([nxt, cands[nxt], None, 0, set(), 0, None, []])

    def _settle(self, st: "_NodeState", block, level: int, forced: List[int]) -> Optional[set]:
        """Propagate, then assert single-candidate edges, until nothing changes.

        Unit edges are recorded in ``forced`` at depth ``level``.  Returns
        ``None`` or the decided edges explaining a failure.
        """
        eng = self.engine
        inst = self._inst
        cands = st.cands
        while True:
            failed = self._propagate(st, block)
            if failed is not None:
                return failed
            units = [u for u in sorted(st.undecided) if not cands[u] & (cands[u] - 1)]
            if not units:
                return None
            for u in units:
                low = cands[u]
                b = low.bit_length() - 1
                conflict = eng.assert_all(inst[u][b], u)
                if conflict is not None:
                    return {t for t in conflict.tags if t is not None} | st.pruned_by[u]
                st.decided[u] = b
                st.depth[u] = level
                st.undecided.discard(u)
                forced.append(u)
                st.cell = (inst[u][b], st.cell, st.cell[2] + 1)
                self.stats.propagations += 1
                if self.pc is not None and not self.pc.refine(*self.edges[u], low):
                    return st.all_decided()

    def _select(self, cands, undecided) -> Optional[int]:
        if not undecided:
            return None
        if self.opts.heuristic == "static":
            return min(undecided)
        best = None
        best_key = None
        for e in undecided:
            key = (_popcount(cands[e]), e)
            if best_key is None or key < best_key:
                best, best_key = e, key
        return best

    def _sync_closure(self, st: "_NodeState") -> Optional[set]:
        # intersect undecided candidates with the closure matrix
        c = self.pc.c
        edges = self.edges
        why = None
        for e in sorted(st.undecided):
            i, j = edges[e]
            mask = st.cands[e]
            new = mask & c[i][j]
            if new != mask:
                if why is None:
                    why = st.all_decided()
                st.prune(e, new, why)
                self.stats.propagations += _popcount(mask ^ new)
                if not new:
                    return set(st.pruned_by[e])
        return None

    def _propagate(self, st: "_NodeState", block) -> Optional[set]:
        """Closure sync, forward checking and the block constraint.

        Returns ``None`` when the node survives, else the set of decided
        edges that explain the failure.
        """
        pc = self.pc
        if pc is not None:
            failed = self._sync_closure(st)
            if failed is not None:
                return failed
        if self.opts.forward_check:
            probe = self.engine.probe_witness
            inst = self._inst
            edges = self.edges
            cache = self._witness
            cell = st.cell
            changed = []
            for e in sorted(st.undecided):
                mask = st.cands[e]
                new = mask
                why = set()
                r = mask
                while r:
                    low = r & -r
                    r ^= low
                    b = low.bit_length() - 1
                    slot = e * ia.NUM_BASE + b
                    hit = cache[slot]
                    if hit is not None and _still_satisfied(hit, cell):
                        continue
                    conflict, witness = probe(inst[e][b], e)
                    cache[slot] = None if witness is None else (witness, cell)
                    if conflict is not None:
                        new ^= low
                        why.update(t for t in conflict.tags if t is not None and t != e)
                if new != mask:
                    st.prune(e, new, why)
                    self.stats.propagations += _popcount(mask ^ new)
                    if not new:
                        return set(st.pruned_by[e])
                    changed.append(e)
            if pc is not None and changed:
                for e in changed:
                    if not pc.refine(*edges[e], st.cands[e]):
                        return st.all_decided()
                failed = self._sync_closure(st)
                if failed is not None:
                    return failed
        if block and not self._check_block(st, block):
            return st.all_decided()
        return None

    def _check_block(self, st: "_NodeState", block) -> bool:
        # at least one blocked edge must end up different from block[e]
        alive = []
        for e, b in block.items():
            d = st.decided[e]
            if d is not None:
                if d != b:
                    return True
            elif st.cands[e] & ~(1 << b):
                alive.append(e)
                if len(alive) > 1:
                    return True
        if not alive:
            return False
        e = alive[0]
        mask = st.cands[e]
        new = mask & ~(1 << block[e])
        if new != mask:
            # conservative reason: every current decision
            st.prune(e, new, st.all_decided())
            self.stats.propagations += 1
            if self.pc is not None and not self.pc.refine(*self.edges[e], new):
                return False
        return True


def _still_satisfied(entry, cell) -> bool:
    # walk both path cells up to their common ancestor, checking the
    # constraints that lie only on the current path
    pot, a = entry[0], cell
    b = entry[1]
    while a is not b:
        if a[2] >= b[2]:
            for x, y, k in a[0]:
                if pot[x] - pot[y] > k:
                    return False
            a = a[1]
        else:
            b = b[1]
    return True


class _NodeState:
    """Per-query mutable search state with an undo trail for candidate sets."""

    def __init__(self, cands: List[int], m: int, cell):
        self.cands = cands
        # decision path as a linked list of (constraints, parent, depth)
        self.cell = cell
        self.decided: List[Optional[int]] = [None] * m
        self.depth = [-1] * m  # stack depth of each decided edge
        self.undecided = set(range(m))
        # decisions responsible for candidates pruned from each edge
        self.pruned_by: List[frozenset] = [frozenset()] * m
        self.trail: List[tuple] = []

    def prune(self, e: int, new: int, why) -> None:
        self.trail.append((e, self.cands[e], self.pruned_by[e]))
        self.cands[e] = new
        if why:
            self.pruned_by[e] = self.pruned_by[e] | frozenset(why)

    def undo(self, upto: int) -> None:
        trail = self.trail
        cands = self.cands
        pruned_by = self.pruned_by
        while len(trail) > upto:
            e, old, why = trail.pop()
            cands[e] = old
            pruned_by[e] = why

    def all_decided(self) -> set:
        return {e for e, d in enumerate(self.decided) if d is not None}


def _deadline(opts: SolverOptions) -> Optional[float]:
    if opts.timeout_s is None:
        return None
    return time.monotonic() + opts.timeout_s


def solve_sat(q: QCN, opts: Optional[SolverOptions] = None) -> SatResult:
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    stats = Stats()
    try:
        search = Search(q, opts, stats, _deadline(opts))
        found = search.first()
    except Aborted:
        stats.wall_ms = (time.perf_counter() - t0) * 1000
        return SatResult(ABORTED, stats=stats)
    stats.wall_ms = (time.perf_counter() - t0) * 1000
    if found is None:
        return SatResult(UNSAT, stats=stats)
    choice, witness = found
    return SatResult(SAT, search.to_scenario(choice), witness, stats)


def _backbone_pass(search: Search, first: List[int], opts: SolverOptions, on_hit=None):
    """Survivors of the backbone queries, and labels with confirmed edges fixed.

    Candidates start as ``first``.  Each surviving edge is queried with its
    survivor removed: a scenario drops every candidate it contradicts, and an
    unsatisfiable query confirms the edge, which stays fixed afterwards.
    """
    survivors = dict(enumerate(first))
    labels = search.initial_candidates()
    for e in range(len(labels)):
        if e not in survivors:
            continue
        bit = 1 << survivors[e]
        cands = list(labels)
        cands[e] = labels[e] & ~bit
        prefer = None
        if opts.diversify:
            prefer = [ia.UNIVERSAL & ~(1 << survivors[k]) if k in survivors else 0
                      for k in range(len(labels))]
        hit = search.first(cands, prefer=prefer, restarts=opts.restarts) if cands[e] else None
        if hit is None:
            labels[e] = bit
        else:
            choice = hit[0]
            if on_hit:
                on_hit(choice)
            survivors = {k: b for k, b in survivors.items() if choice[k] == b}
    return survivors, labels


def backbone(q: QCN, opts: Optional[SolverOptions] = None) -> BackboneResult:
    """Relations shared by all consistent scenarios."""
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    stats = Stats()
    try:
        search = Search(q, opts, stats, _deadline(opts))
        found = search.first()
        if found is None:
            result = BackboneResult(UNSAT, stats=stats)
        else:
            survivors, _ = _backbone_pass(search, found[0], opts)
            result = BackboneResult(
                SAT, {search.edges[e]: ia.Base(b) for e, b in survivors.items()}, stats)
    except Aborted:
        result = BackboneResult(ABORTED, stats=stats)
    stats.wall_ms = (time.perf_counter() - t0) * 1000
    return result


def union_labels(q: QCN, opts: Optional[SolverOptions] = None) -> UnionResult:
    """Per edge, the relations realized by at least one consistent scenario.

    A backbone pass runs first: its scenarios mark atoms and its confirmed
    edges are fixed, which tightens propagation in the later queries.  The
    remaining unknown (edge, relation) atoms are settled in edge-then-canonical
    order by forcing the atom; a satisfiable query marks every atom of its
    scenario, and atoms proven infeasible leave later queries' candidates.
    """
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    stats = Stats()
    try:
        search = Search(q, opts, stats, _deadline(opts))
        found = search.first()
        if found is None:
            result = UnionResult(UNSAT, stats=stats)
        else:
            feasible = [0] * len(search.edges)

            def mark(choice):
                for e, b in enumerate(choice):
                    feasible[e] |= 1 << b

            mark(found[0])
            _, labels = _backbone_pass(search, found[0], opts, mark)
            for e in range(len(labels)):
                r = labels[e]
                while r:
                    low = r & -r
                    r ^= low
                    if feasible[e] & low:
                        continue
                    cands = list(labels)
                    cands[e] = low
                    prefer = [ia.UNIVERSAL & ~f for f in feasible] if opts.diversify else None
                    hit = search.first(cands, prefer=prefer, restarts=opts.restarts)
                    if hit is None:
                        labels[e] &= ~low
                    else:
                        mark(hit[0])
            result = UnionResult(
                SAT, {edge: feasible[k] for k, edge in enumerate(search.edges)}, stats)
    except Aborted:
        result = UnionResult(ABORTED, stats=stats)
    stats.wall_ms = (time.perf_counter() - t0) * 1000
    return result


def enumerate_scenarios(q: QCN, limit: Optional[int] = None,
                        opts: Optional[SolverOptions] = None
                        ) -> Iterator[Tuple[Dict[Edge, ia.Base], List[Tuple[int, int]]]]:
    """Distinct consistent scenarios with witnesses, at most ``limit`` of them."""
    if limit is not None and limit < 1:
        raise ValueError("limit must be at least 1")
    opts = opts or SolverOptions()
    search = Search(q, opts, deadline=_deadline(opts))
    count = 0
    for choice in search.scenarios():
        yield search.to_scenario(choice), search.witness()
        count += 1
        if limit is not None and count >= limit:
            return
