"""Random QCN generators and an exhaustive ground-truth oracle.

Randomness comes from numpy's PCG64 bit generator seeded with the GenSpec's
integer seed.  Draw order is fixed so files reproduce across platforms:

* for each pair ``(i, j)``, ``i < j``, in lexicographic order, one uniform
  draw decides whether the pair is constrained (probability ``d / (n - 1)``);
* right after a constrained pair is selected its label is drawn: model A
  draws 13 uniforms (one per base relation, canonical order, kept with
  probability ``s / 13``) and repeats until the label is neither empty nor
  universal; model H draws one integer index into the pool.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from importlib import resources
from itertools import combinations, product
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import algebra as ia
from .network import QCN, Edge


@dataclass(frozen=True)
class GenSpecA:
    n: int
    d: float
    s: float = 6.5
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0 < self.d <= self.n - 1:
            raise ValueError(f"average degree d={self.d} must lie in (0, n-1={self.n - 1}]")
        if not 1 <= self.s <= 13:
            raise ValueError(f"average label size s={self.s} must lie in [1, 13]")

    def filename(self) -> str:
        return f"A-n{self.n}-d{_num(self.d)}-s{_num(self.s)}-{self.seed}.csp"


@dataclass(frozen=True)
class GenSpecH:
    n: int
    d: float
    seed: int = 0
    pool: Optional[Tuple[int, ...]] = None  # None means default_hard_pool()

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not 0 < self.d <= self.n - 1:
            raise ValueError(f"average degree d={self.d} must lie in (0, n-1={self.n - 1}]")
        if self.pool is not None:
            validate_pool(self.pool)

    def filename(self) -> str:
        return f"H-n{self.n}-d{_num(self.d)}-{self.seed}.csp"


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else str(x)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _draw_edges(spec, rng, draw_label) -> QCN:
    p = spec.d / (spec.n - 1)
    labels: Dict[Edge, int] = {}
    for i, j in combinations(range(spec.n), 2):
        if rng.random() < p:
            labels[(i, j)] = draw_label()
    return QCN(spec.n, labels)


def gen_A(spec: GenSpecA) -> QCN:
    rng = _rng(spec.seed)
    keep = spec.s / ia.NUM_BASE
    weights = 1 << np.arange(ia.NUM_BASE)

    def label() -> int:
        while True:
            r = int(weights[rng.random(ia.NUM_BASE) < keep].sum())
            if r != ia.EMPTY and r != ia.UNIVERSAL:
                return r

    return _draw_edges(spec, rng, label)


def gen_H(spec: GenSpecH) -> QCN:
    pool = spec.pool if spec.pool is not None else default_hard_pool()
    validate_pool(pool)
    rng = _rng(spec.seed)
    return _draw_edges(spec, rng, lambda: pool[int(rng.integers(len(pool)))])


# -- hard relation pool --------------------------------------------------------

# Relations are read as formulas over the order of the four cross endpoint
# pairs (sx,sy), (sx,ey), (ex,sy), (ex,ey).  A literal restricts one pair's
# comparison to a non-trivial subset of {<, =, >}.

_CROSS = ((0, 2), (0, 3), (1, 2), (1, 3))


def _cmp(a: int, b: int) -> int:
    return 0 if a < b else (1 if a == b else 2)


def _base_points() -> List[Tuple[int, ...]]:
    # one comparison vector per base relation, read off a concrete witness
    pts: Dict[int, Tuple[int, ...]] = {}
    for xs, xe, ys, ye in product(range(4), repeat=4):
        if xs < xe and ys < ye:
            b = ia.relation_between((xs, xe), (ys, ye)).bit_length() - 1
            v = (xs, xe, ys, ye)
            pts.setdefault(b, tuple(_cmp(v[a], v[c]) for a, c in _CROSS))
    return [pts[b] for b in range(ia.NUM_BASE)]


def _clause_models(width: int) -> List[int]:
    pts = _base_points()
    out = set()
    for pairs in combinations(range(len(_CROSS)), width):
        for subsets in product(range(1, 7), repeat=width):
            m = 0
            for b, pt in enumerate(pts):
                if any(s >> pt[p] & 1 for p, s in zip(pairs, subsets)):
                    m |= 1 << b
            out.add(m)
    return sorted(out)


def clause_widths() -> List[int]:
    """Minimal CNF clause width for every relation mask (index = mask).

    Width ``k`` means the relation equals the conjunction of all clauses of at
    most ``k`` literals it implies, and ``k - 1`` does not suffice.  The
    universal relation has width 0; the empty relation is reported as 0 too.
    """
    widths = [0] * (ia.UNIVERSAL + 1)
    implied = [ia.UNIVERSAL] * (ia.UNIVERSAL + 1)
    settled = [False] * (ia.UNIVERSAL + 1)
    settled[ia.EMPTY] = settled[ia.UNIVERSAL] = True
    for k in range(1, len(_CROSS) + 1):
        models = _clause_models(k)
        for r in range(1, ia.UNIVERSAL):
            if settled[r]:
                continue
            cur = implied[r]
            for m in models:
                if not r & ~m:
                    cur &= m
            implied[r] = cur
            if cur == r:
                widths[r] = k
                settled[r] = True
    return widths


def derive_hard_pool() -> List[int]:
    """Relations whose minimal clause form needs a 3-literal clause."""
    return [r for r, w in enumerate(clause_widths()) if w == 3]


def validate_pool(pool: Sequence[int]) -> None:
    if len(pool) == 0:
        raise ValueError("relation pool is empty")
    for r in pool:
        if r == ia.EMPTY or r == ia.UNIVERSAL or not 0 < r < ia.UNIVERSAL:
            raise ValueError(f"pool relation {ia.format_relation(r)} is empty or universal")


def parse_pool(text: str) -> Tuple[int, ...]:
    rels = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip().strip("()").strip()
        if not line:
            continue
        try:
            rels.append(ia.relation(*line.split()))
        except ValueError as exc:
            raise ValueError(f"pool line {lineno}: {exc}") from None
    validate_pool(rels)
    return tuple(rels)


def format_pool(pool: Iterable[int], header: str = "") -> str:
    lines = [f"# {ln}" if ln else "#" for ln in header.splitlines()]
    lines += [" ".join(ia.tokens(r)) for r in pool]
    return "\n".join(lines) + "\n"


def load_pool(path) -> Tuple[int, ...]:
    with open(path) as fh:
        return parse_pool(fh.read())


_DEFAULT_POOL: Optional[Tuple[int, ...]] = None


def default_hard_pool() -> Tuple[int, ...]:
    """The shipped pool (``data/hard_pool.txt``), checked to be converse-closed."""
    global _DEFAULT_POOL
    if _DEFAULT_POOL is None:
        text = resources.files("allendl").joinpath("data/hard_pool.txt").read_text()
        pool = parse_pool(text)
        members = set(pool)
        if any(ia.converse_rel(r) not in members for r in pool):
            raise ValueError("default pool is not closed under converse")
        _DEFAULT_POOL = pool
    return _DEFAULT_POOL


# -- brute-force oracle --------------------------------------------------------

class OracleCapExceeded(ValueError):
    pass


@dataclass
class OracleReport:
    sat: bool
    scenario_count: int
    backbone: Dict[Edge, ia.Base]
    union: Dict[Edge, int]

    def to_json(self) -> dict:
        return {
            "status": "sat" if self.sat else "unsat",
            "scenario_count": self.scenario_count,
            "backbone": [{"i": i, "j": j, "rel": b.name} for (i, j), b in sorted(self.backbone.items())],
            "union": [{"i": i, "j": j, "rels": ia.tokens(r)} for (i, j), r in sorted(self.union.items())],
        }


def bellman_ford(num_vars: int, constraints) -> Optional[List[int]]:
    """Plain Bellman-Ford from a virtual source; ``None`` on a negative cycle."""
    edges = [(y, x, k) for x, y, k in constraints]
    dist = [0] * num_vars
    for _ in range(num_vars + 1):
        changed = False
        for u, v, w in edges:
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                changed = True
        if not changed:
            return dist
    return None


def oracle(q: QCN, max_n: int = 5, max_scenarios: int = 10 ** 7,
           allow_point_intervals: bool = False) -> OracleReport:
    """Enumerate every scenario and test each with a fresh Bellman-Ford run."""
    if q.n > max_n:
        raise OracleCapExceeded(f"n={q.n} exceeds max_n={max_n}")
    space = q.scenario_space()
    if space > max_scenarios:
        raise OracleCapExceeded(f"{space} candidate scenarios exceed max_scenarios={max_scenarios}")
    edges = q.edges()
    bound = ia.interval_bound(allow_point_intervals)
    base = [(2 * v, 2 * v + 1, bound) for v in range(q.n)]
    options = []
    for i, j in edges:
        options.append([(b, ia.instantiate(b, 2 * i, 2 * i + 1, 2 * j, 2 * j + 1))
                        for b in ia.iter_bases(q.labels[(i, j)])])
    count = 0
    seen = [0] * len(edges)
    agree: Optional[List[int]] = None
    for combo in itertools.product(*options):
        cons = list(base)
        for _, t in combo:
            cons.extend(t)
        if bellman_ford(2 * q.n, cons) is None:
            continue
        count += 1
        choice = [b for b, _ in combo]
        for k, b in enumerate(choice):
            seen[k] |= 1 << b
        if agree is None:
            agree = choice
        else:
            agree = [a if a == b else None for a, b in zip(agree, choice)]
    bb = {} if agree is None else {edges[k]: ia.Base(b) for k, b in enumerate(agree) if b is not None}
    return OracleReport(count > 0, count, bb, {e: seen[k] for k, e in enumerate(edges)})
