"""Incremental difference-constraint engine.

A constraint ``x - y <= k`` is kept as an edge ``y -> x`` of weight ``k``.
The engine maintains an integer potential (a concrete assignment) that
satisfies every active constraint.  Asserting a violated constraint repairs
the potential with a Dijkstra pass over reduced costs; reaching the source of
the new edge with a strict decrease means the new edge closes a negative cycle.

Assertions are atomic: a conflicting constraint leaves no trace, so the engine
is feasible at every point where user code can observe it.  ``push``/``pop``
give LIFO backtracking through a trail of edge and potential deltas.

Instances are single-threaded.  Separate instances share nothing.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Dict, Iterable, List, NamedTuple, Optional


class EngineUsageError(ValueError):
    """Raised for calls that violate the engine's preconditions."""


class DifferenceConstraint(NamedTuple):
    """``x - y <= k`` over integer variables ``x`` and ``y``."""

    x: int
    y: int
    k: int

    def satisfied_by(self, values) -> bool:
        return values[self.x] - values[self.y] <= self.k

    def __str__(self) -> str:
        return f"v{self.x} - v{self.y} <= {self.k}"


@dataclass(frozen=True)
class Conflict:
    """A negative cycle.

    ``cycle`` starts with the constraint whose assertion failed.  Each
    constraint's ``x`` equals the next one's ``y``, and the last ``x`` equals
    the first ``y``.  The cycle is not guaranteed to be minimal.
    """

    cycle: tuple
    # tags[i] is the caller-supplied tag of cycle[i] (None when untagged)
    tags: tuple = ()

    @property
    def weight(self) -> int:
        return sum(c.k for c in self.cycle)


# trail entry tags
_EDGE = 0
_POT = 1


class DiffEngine:
    def __init__(self, num_vars: int = 0):
        if num_vars < 0:
            raise EngineUsageError("num_vars must be non-negative")
        self.num_vars = num_vars
        self._pot: List[int] = [0] * num_vars
        # _out[y][x] = k  <=>  active constraint x - y <= k
        self._out: List[Dict[int, int]] = [dict() for _ in range(num_vars)]
        self._tag: List[Dict[int, object]] = [dict() for _ in range(num_vars)]
        self._trail: list = []
        self._marks: List[int] = []
        self.num_asserted = 0

    # -- construction helpers -------------------------------------------------

    def add_var(self) -> int:
        """Append a fresh unconstrained variable; only legal with no open marks."""
        if self._marks:
            raise EngineUsageError("cannot add variables while marks are open")
        self._pot.append(0)
        self._out.append({})
        self._tag.append({})
        self.num_vars += 1
        return self.num_vars - 1

    def _check(self, v: int) -> None:
        if not 0 <= v < self.num_vars:
            raise EngineUsageError(f"variable {v} out of range [0, {self.num_vars})")

    # -- assertion -------------------------------------------------------------

    def assert_constraint(self, x: int, y: int, k: int, tag=None) -> Optional[Conflict]:
        """Assert ``x - y <= k``.  Returns ``None`` if feasible, else a `Conflict`.

        ``tag`` is an opaque origin label reported back in conflicts whose
        cycle uses this constraint.  On conflict the engine is left exactly
        as before the call.
        """
        self._check(x)
        self._check(y)
        if x == y:
            if k < 0:
                return Conflict((DifferenceConstraint(x, y, k),), (tag,))
            return None
        out_y = self._out[y]
        old = out_y.get(x)
        if old is not None and old <= k:
            return None
        pot = self._pot
        if pot[x] - pot[y] > k:
            conflict = self._repair(x, y, k, tag)
            if conflict is not None:
                return conflict
        tag_y = self._tag[y]
        self._trail.append((_EDGE, y, x, None if old is None else (old, tag_y[x])))
        out_y[x] = k
        tag_y[x] = tag
        self.num_asserted += 1
        return None

    def assert_all(self, constraints: Iterable, tag=None) -> Optional[Conflict]:
        """Assert several constraints; on conflict, the earlier ones stay asserted.

        Callers wanting all-or-nothing wrap this in ``push``/``pop``.
        """
        for x, y, k in constraints:
            conflict = self.assert_constraint(x, y, k, tag)
            if conflict is not None:
                return conflict
        return None

    def _repair(self, x: int, y: int, k: int, tag) -> Optional[Conflict]:
        # Lower pot[x] to pot[y] + k and push the decrease along out-edges.
        # Keys are decreases (negative), monotone along reduced costs >= 0.
        pot = self._pot
        out = self._out
        delta = {x: pot[y] + k - pot[x]}
        pred = {x: -1}
        done: Dict[int, int] = {}
        heap = [(delta[x], x)]
        while heap:
            g, v = heapq.heappop(heap)
            if v in done or g > delta[v]:
                continue
            nv = pot[v] + g
            done[v] = nv
            for w, c in out[v].items():
                if w in done:
                    continue
                gw = nv + c - pot[w]
                if gw < 0 and gw < delta.get(w, 0):
                    if w == y:
                        return self._cycle(x, y, k, tag, pred, v)
                    delta[w] = gw
                    pred[w] = v
                    heapq.heappush(heap, (gw, w))
        trail = self._trail
        for v, nv in done.items():
            trail.append((_POT, v, pot[v], None))
            pot[v] = nv
        return None

    def _cycle(self, x, y, k, tag, pred, last) -> Conflict:
        # walk the relaxation tree back from `last` (which reaches y) to x
        out, tags = self._out, self._tag
        path = [(DifferenceConstraint(y, last, out[last][y]), tags[last][y])]
        w = last
        while w != x:
            v = pred[w]
            path.append((DifferenceConstraint(w, v, out[v][w]), tags[v][w]))
            w = v
        path.reverse()
        return Conflict((DifferenceConstraint(x, y, k),) + tuple(c for c, _ in path),
                        (tag,) + tuple(t for _, t in path))

    def probe(self, constraints: Iterable) -> bool:
        """True iff the constraints are jointly consistent with the current state.

        The engine is unchanged afterwards.
        """
        return self.probe_conflict(constraints) is None

    def probe_conflict(self, constraints: Iterable, tag=None) -> Optional[Conflict]:
        """Like `probe`, but returns the conflict found (or ``None``)."""
        pot = self._pot
        pending = [c for c in constraints if pot[c[0]] - pot[c[1]] > c[2]]
        if not pending:
            return None
        mark = self.push()
        conflict = self.assert_all(pending, tag)
        self.pop(mark)
        return conflict

    def probe_witness(self, constraints: Iterable, tag=None):
        """Probe returning ``(conflict, potential)``.

        On success ``potential`` is a copy of an assignment satisfying the
        current constraints plus ``constraints``; on conflict it is ``None``.
        """
        pot = self._pot
        pending = [c for c in constraints if pot[c[0]] - pot[c[1]] > c[2]]
        if not pending:
            return None, list(pot)
        mark = self.push()
        conflict = self.assert_all(pending, tag)
        witness = None if conflict is not None else list(pot)
        self.pop(mark)
        return conflict, witness

    # -- backtracking ----------------------------------------------------------

    def push(self) -> int:
        self._marks.append(len(self._trail))
        return len(self._marks)

    def pop(self, mark: int) -> None:
        if not self._marks or mark != len(self._marks):
            raise EngineUsageError(
                f"pop({mark}) out of LIFO order; innermost mark is {len(self._marks)}")
        size = self._marks.pop()
        trail = self._trail
        pot = self._pot
        out = self._out
        tags = self._tag
        while len(trail) > size:
            kind, a, b, old = trail.pop()
            if kind == _POT:
                pot[a] = b
            else:
                if old is None:
                    del out[a][b]
                    del tags[a][b]
                else:
                    out[a][b], tags[a][b] = old
                self.num_asserted -= 1

    @property
    def level(self) -> int:
        return len(self._marks)

    # -- inspection ------------------------------------------------------------

    def is_feasible(self) -> bool:
        # failed assertions are rolled back, so the active set is always feasible
        return True

    def active_constraints(self) -> List[DifferenceConstraint]:
        """Active constraints (tightest bound per ordered pair), sorted."""
        return sorted(DifferenceConstraint(x, y, k)
                      for y, row in enumerate(self._out) for x, k in row.items())

    def extract_assignment(self, reference: int = 0) -> List[int]:
        """A solution with ``reference`` pinned to 0 (deterministic)."""
        if not self.is_feasible():
            raise EngineUsageError("engine is infeasible")
        if self.num_vars == 0:
            return []
        self._check(reference)
        base = self._pot[reference]
        return [p - base for p in self._pot]

    def dump(self) -> str:
        """One ``x y k`` line per active constraint, preceded by the variable count."""
        lines = [str(self.num_vars)]
        lines += [f"{c.x} {c.y} {c.k}" for c in self.active_constraints()]
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> "DiffEngine":
        """Rebuild an engine from `dump` output."""
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows:
            raise EngineUsageError("empty dump")
        eng = cls(int(rows[0][0]))
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != 3:
                raise EngineUsageError(f"dump line {lineno}: expected 'x y k'")
            conflict = eng.assert_constraint(*map(int, row))
            if conflict is not None:
                raise EngineUsageError(f"dump line {lineno}: constraint set is infeasible")
        return eng

