"""Qualitative constraint networks over the interval algebra.

Only pairs ``(i, j)`` with ``i < j`` are stored.  The diagonal is implicitly
``{eq}``, ``(j, i)`` is the converse of ``(i, j)``, and a missing pair means
the universal relation.

Text format::

    4                  # number of variables
    0 1 (p m)
    0 3 (d s fi)
    .
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from . import algebra as ia
from .algebra import EMPTY, UNIVERSAL, converse_rel

Edge = Tuple[int, int]


class ParseError(ValueError):
    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class QCN:
    n: int
    labels: Mapping[Edge, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be non-negative")
        for (i, j), r in self.labels.items():
            if not 0 <= i < j < self.n:
                raise ValueError(f"edge ({i}, {j}) is not of the form 0 <= i < j < {self.n}")
            if r == UNIVERSAL or not 0 <= r <= UNIVERSAL:
                raise ValueError(f"edge ({i}, {j}) has invalid stored label {r}")

    @classmethod
    def from_constraints(cls, n: int, constraints: Iterable[Tuple[int, int, int]]) -> "QCN":
        """Normalize arbitrary ``(i, j, relation)`` triples into a QCN.

        Reverse-direction pairs are converted, repeated pairs intersect, the
        diagonal must admit ``eq`` and universal labels are dropped.
        """
        labels: Dict[Edge, int] = {}
        for i, j, r in constraints:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"index out of range in ({i}, {j}) for n={n}")
            if i == j:
                if not r & ia.bit(ia.Base.eq):
                    raise ValueError(f"diagonal constraint ({i}, {i}) excludes eq")
                continue
            if i > j:
                i, j, r = j, i, converse_rel(r)
            labels[(i, j)] = labels.get((i, j), UNIVERSAL) & r
        return cls(n, {e: r for e, r in sorted(labels.items()) if r != UNIVERSAL})

    def get(self, i: int, j: int) -> int:
        if i == j:
            return ia.bit(ia.Base.eq)
        if i < j:
            return self.labels.get((i, j), UNIVERSAL)
        return converse_rel(self.labels.get((j, i), UNIVERSAL))

    def edges(self) -> List[Edge]:
        return sorted(self.labels)

    def is_trivially_inconsistent(self) -> bool:
        return any(r == EMPTY for r in self.labels.values())

    def with_labels(self, updates: Mapping[Edge, int]) -> "QCN":
        merged = dict(self.labels)
        merged.update(updates)
        return QCN(self.n, {e: r for e, r in sorted(merged.items()) if r != UNIVERSAL})

    def scenario_space(self) -> int:
        """Number of candidate scenarios (product of stored label sizes)."""
        total = 1
        for r in self.labels.values():
            total *= ia.size(r)
        return total


# -- text format ---------------------------------------------------------------

_EDGE_RE = re.compile(r"^(\d+)\s+(\d+)\s*\(([^()]*)\)$")


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_qcn(text: str) -> QCN:
    n = None
    triples = []
    terminated = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip(raw)
        if not line:
            continue
        if terminated:
            raise ParseError("content after terminator '.'", lineno)
        if n is None:
            if not line.isdigit():
                raise ParseError(f"expected variable count, got {line!r}", lineno)
            n = int(line)
            continue
        if line == ".":
            terminated = True
            continue
        m = _EDGE_RE.match(line)
        if m is None:
            raise ParseError(f"malformed constraint line {line!r}", lineno)
        i, j = int(m.group(1)), int(m.group(2))
        toks = m.group(3).split()
        if not toks:
            raise ParseError("empty relation", lineno)
        try:
            r = ia.relation(*toks)
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if i >= n or j >= n:
            raise ParseError(f"index out of range for n={n}", lineno)
        if i == j and not r & ia.bit(ia.Base.eq):
            raise ParseError(f"self-loop ({i}, {i}) must admit eq", lineno)
        triples.append((i, j, r))
    if n is None:
        raise ParseError("missing variable count")
    if not terminated:
        raise ParseError("missing terminator '.'")
    return QCN.from_constraints(n, triples)


def serialize_qcn(q: QCN) -> str:
    lines = [str(q.n)]
    lines += [f"{i} {j} {ia.format_relation(q.labels[(i, j)])}" for i, j in q.edges()]
    lines.append(".")
    return "\n".join(lines) + "\n"


def read_qcn(path) -> QCN:
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return qcn_from_json(json.loads(text))
    return parse_qcn(text)


def write_qcn(q: QCN, path) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_qcn(q))


# -- JSON mirror ---------------------------------------------------------------

def qcn_to_json(q: QCN) -> dict:
    return {"n": q.n,
            "edges": [{"i": i, "j": j, "rels": ia.tokens(q.labels[(i, j)])}
                      for i, j in q.edges()]}


def qcn_from_json(obj: dict) -> QCN:
    try:
        n = int(obj["n"])
        triples = [(int(e["i"]), int(e["j"]), ia.relation(*e["rels"])) for e in obj["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad QCN JSON: {exc}") from None
    try:
        return QCN.from_constraints(n, triples)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


# -- algebraic closure ---------------------------------------------------------

class PathConsistency:
    """Full label matrix with incremental, undoable path-consistency propagation.

    ``c[i][j]`` holds the current label of every ordered pair.  `refine`
    intersects one label and propagates to a fixpoint; `mark`/`undo` roll
    back all label changes made since a mark.
    """

    def __init__(self, q: QCN, allow_point_intervals: bool = False):
        n = q.n
        self.n = n
        self.compose = ia.composer(allow_point_intervals)
        self.c = [[UNIVERSAL] * n for _ in range(n)]
        for i in range(n):
            self.c[i][i] = ia.bit(ia.Base.eq)
        self.consistent = True
        for (i, j), r in q.labels.items():
            self.c[i][j] = r
            self.c[j][i] = converse_rel(r)
            if r == EMPTY:
                self.consistent = False
        self._initially_consistent = self.consistent
        self._trail: List[Tuple[int, int, int]] = []
        self.revisions = 0

    def mark(self) -> int:
        return len(self._trail)

    def undo(self, mark: int) -> None:
        c = self.c
        trail = self._trail
        while len(trail) > mark:
            i, j, old = trail.pop()
            c[i][j] = old
            c[j][i] = converse_rel(old)
        self.consistent = self._initially_consistent

    def refine(self, i: int, j: int, r: int) -> bool:
        """Intersect ``C(i,j)`` with ``r`` and propagate; False on an empty label."""
        if not self._set(i, j, self.c[i][j] & r):
            return False
        return self.propagate([(i, j)] if i < j else [(j, i)])

    def _set(self, i: int, j: int, new: int) -> bool:
        c = self.c
        if new == c[i][j]:
            return True
        if i > j:
            i, j, new = j, i, converse_rel(new)
        self._trail.append((i, j, c[i][j]))
        c[i][j] = new
        c[j][i] = converse_rel(new)
        self.revisions += 1
        if new == EMPTY:
            self.consistent = False
            return False
        return True

    def propagate(self, seeds: Iterable[Edge]) -> bool:
        """Run to a fixpoint from the given changed pairs (each ``i < j``)."""
        if not self.consistent:
            return False
        c = self.c
        n = self.n
        compose = self.compose
        conv = converse_rel
        trail = self._trail
        queue = deque(seeds)
        queued = set(queue)
        while queue:
            i, j = queue.popleft()
            queued.discard((i, j))
            ci, cj = c[i], c[j]
            rij = ci[j]
            for k in range(n):
                if k == i or k == j:
                    continue
                # C(i,k) <- C(i,k) & C(i,j) o C(j,k); composing with the
                # universal relation gives the universal relation
                old = ci[k]
                rjk = cj[k]
                new = old if rjk == UNIVERSAL else old & compose(rij, rjk)
                if new != old:
                    if not new:
                        self._set(i, k, new)
                        return False
                    trail.append((i, k, old))
                    ci[k] = new
                    c[k][i] = conv(new)
                    self.revisions += 1
                    e = (i, k) if i < k else (k, i)
                    if e not in queued:
                        queued.add(e)
                        queue.append(e)
                # C(k,j) <- C(k,j) & C(k,i) o C(i,j)
                ck = c[k]
                old = ck[j]
                rki = ck[i]
                new = old if rki == UNIVERSAL else old & compose(rki, rij)
                if new != old:
                    if not new:
                        self._set(k, j, new)
                        return False
                    trail.append((k, j, old))
                    ck[j] = new
                    cj[k] = conv(new)
                    self.revisions += 1
                    e = (k, j) if k < j else (j, k)
                    if e not in queued:
                        queued.add(e)
                        queue.append(e)
                rij = ci[j]
        return True

    def to_qcn(self) -> QCN:
        n = self.n
        c = self.c
        return QCN(n, {(i, j): c[i][j] for i in range(n) for j in range(i + 1, n)
                       if c[i][j] != UNIVERSAL})


def algebraic_closure(q: QCN, allow_point_intervals: bool = False) -> Optional[QCN]:
    """Path-consistency fixpoint ``C(i,j) <- C(i,j) & C(i,k) o C(k,j)``.

    Returns the closed network (which may now store edges that were
    universal), or ``None`` once some label becomes empty.  Pairs are
    processed FIFO, seeded with the stored edges in ascending order.
    """
    pc = PathConsistency(q, allow_point_intervals)
    if not pc.consistent or not pc.propagate(q.edges()):
        return None
    return pc.to_qcn()


def four_interval_example() -> QCN:
    """The four-interval example network (variables renumbered from 0)."""
    return QCN.from_constraints(4, [
        (0, 1, ia.relation("p", "m")),
        (0, 3, ia.relation("d", "s", "fi")),
        (1, 2, ia.relation("oi")),
        (1, 3, ia.relation("oi", "m")),
        (2, 3, ia.relation("pi", "eq")),
    ])
