"""Allen's interval algebra: base relations, relations as bitmasks, endpoint
templates, converse and weak composition.

Base relations are the integers 0..12 in the fixed order of `NAMES`.  A
relation (a disjunction of base relations) is a 13-bit ``int`` mask, so
union and intersection are ``|`` and ``&``.

The composition table is not transcribed from the literature.  Each entry is
derived by asking the difference engine which third relation is consistent
with two given ones over three symbolic intervals.
"""

from __future__ import annotations

import threading
from enum import IntEnum
from functools import lru_cache
from typing import Iterable, Iterator, List, Tuple

from .diffengine import DiffEngine


class Base(IntEnum):
    eq = 0
    p = 1
    pi = 2
    m = 3
    mi = 4
    o = 5
    oi = 6
    s = 7
    si = 8
    d = 9
    di = 10
    f = 11
    fi = 12

    def __str__(self) -> str:
        return self.name


NAMES: Tuple[str, ...] = tuple(b.name for b in Base)
NUM_BASE = 13
EMPTY = 0
UNIVERSAL = (1 << NUM_BASE) - 1

_CONVERSE = (Base.eq, Base.pi, Base.p, Base.mi, Base.m, Base.oi, Base.o,
             Base.si, Base.s, Base.di, Base.d, Base.fi, Base.f)

_TOKEN_ALIASES = {"e": Base.eq, "=": Base.eq}


def converse(b: int) -> Base:
    return _CONVERSE[b]


def bit(b: int) -> int:
    return 1 << b


def members(r: int) -> List[Base]:
    """Base relations in ``r``, in canonical order."""
    return [Base(b) for b in range(NUM_BASE) if r >> b & 1]


def size(r: int) -> int:
    return bin(r).count("1")


def relation(*bases) -> int:
    """Build a mask from base relations or tokens: ``relation("p", "m")``."""
    r = 0
    for b in bases:
        r |= 1 << (parse_token(b) if isinstance(b, str) else int(b))
    return r


def parse_token(tok: str) -> Base:
    if tok in _TOKEN_ALIASES:
        return _TOKEN_ALIASES[tok]
    try:
        return Base[tok]
    except KeyError:
        raise ValueError(f"unknown relation token {tok!r}") from None


def tokens(r: int) -> List[str]:
    return [b.name for b in members(r)]


def format_relation(r: int) -> str:
    return "(" + " ".join(tokens(r)) + ")"


def _build_converse_masks() -> List[int]:
    table = []
    for r in range(UNIVERSAL + 1):
        c = 0
        for b in range(NUM_BASE):
            if r >> b & 1:
                c |= 1 << _CONVERSE[b]
        table.append(c)
    return table


_CONVERSE_MASK = _build_converse_masks()


def converse_rel(r: int) -> int:
    return _CONVERSE_MASK[r]


# -- endpoint templates --------------------------------------------------------

# symbolic endpoints of the pair (X, Y)
SX, EX, SY, EY = 0, 1, 2, 3
ENDPOINT_NAMES = ("sp(X)", "ep(X)", "sp(Y)", "ep(Y)")


def _lt(a, b):
    return [(a, b, -1)]


def _eq(a, b):
    return [(a, b, 0), (b, a, 0)]


# (lhs, rhs, bound) meaning lhs - rhs <= bound, for the primary relations
_PRIMARY = {
    Base.eq: _eq(SX, SY) + _eq(EX, EY),
    Base.p: _lt(EX, SY),
    Base.m: _eq(EX, SY),
    Base.o: _lt(SX, SY) + _lt(SY, EX) + _lt(EX, EY),
    Base.s: _eq(SX, SY) + _lt(EX, EY),
    Base.d: _lt(SY, SX) + _lt(EX, EY),
    Base.f: _eq(EX, EY) + _lt(SY, SX),
}

_SWAP = {SX: SY, EX: EY, SY: SX, EY: EX}


def swap_template(t) -> Tuple[Tuple[int, int, int], ...]:
    """Exchange the roles of X and Y in a template."""
    return tuple((_SWAP[a], _SWAP[b], k) for a, b, k in t)


def _build_templates():
    out = {}
    for b, t in _PRIMARY.items():
        out[b] = tuple(t)
        if b != Base.eq:
            out[converse(b)] = swap_template(t)
    return tuple(out[b] for b in Base)


_TEMPLATES = _build_templates()


def template(b: int) -> Tuple[Tuple[int, int, int], ...]:
    """Difference constraints over ``SX, EX, SY, EY`` characterizing ``b``.

    Every bound is 0 or -1 (strict order over integers).
    """
    return _TEMPLATES[b]


def instantiate(b: int, sx: int, ex: int, sy: int, ey: int):
    """Template of ``b`` with symbolic endpoints replaced by engine variables."""
    names = (sx, ex, sy, ey)
    return [(names[a], names[c], k) for a, c, k in _TEMPLATES[b]]


def interval_bound(allow_point_intervals: bool = False) -> int:
    """Bound on ``sp - ep``: -1 for proper intervals, 0 to admit points."""
    return 0 if allow_point_intervals else -1


# -- arithmetic definitions ----------------------------------------------------

def holds(b: int, x, y) -> bool:
    """Evaluate base relation ``b`` on concrete intervals ``x = (x-, x+)`` and ``y``.

    Written directly from the endpoint definitions, independent of `template`.
    """
    xs, xe = x
    ys, ye = y
    b = Base(b)
    if b == Base.eq:
        return xs == ys and xe == ye
    if b == Base.p:
        return xe < ys
    if b == Base.pi:
        return ye < xs
    if b == Base.m:
        return xe == ys
    if b == Base.mi:
        return ye == xs
    if b == Base.o:
        return xs < ys < xe < ye
    if b == Base.oi:
        return ys < xs < ye < xe
    if b == Base.s:
        return xs == ys and xe < ye
    if b == Base.si:
        return xs == ys and ye < xe
    if b == Base.d:
        return ys < xs and xe < ye
    if b == Base.di:
        return xs < ys and ye < xe
    if b == Base.f:
        return xe == ye and ys < xs
    return xe == ye and xs < ys  # fi


def relation_between(x, y) -> int:
    """Mask of all base relations that hold between two concrete intervals."""
    r = 0
    for b in range(NUM_BASE):
        if holds(b, x, y):
            r |= 1 << b
    return r


# -- composition ---------------------------------------------------------------

def _feasible(b1: int, b2: int, b3: int, point_bound: int) -> bool:
    # intervals X, Z, Y own engine variables (0,1), (2,3), (4,5)
    eng = DiffEngine(6)
    for s in (0, 2, 4):
        eng.assert_constraint(s, s + 1, point_bound)
    parts = (instantiate(b1, 0, 1, 2, 3),   # X b1 Z
             instantiate(b2, 2, 3, 4, 5),   # Z b2 Y
             instantiate(b3, 0, 1, 4, 5))   # X b3 Y
    for part in parts:
        if eng.assert_all(part) is not None:
            return False
    return True


def compose_base(b1: int, b2: int, allow_point_intervals: bool = False) -> int:
    """Weak composition of two base relations, derived by feasibility checks."""
    bound = interval_bound(allow_point_intervals)
    r = 0
    for b3 in range(NUM_BASE):
        if _feasible(b1, b2, b3, bound):
            r |= 1 << b3
    return r


_table_lock = threading.Lock()


@lru_cache(maxsize=None)
def _cached_table(allow_point_intervals: bool):
    return tuple(tuple(compose_base(a, b, allow_point_intervals) for b in range(NUM_BASE))
                 for a in range(NUM_BASE))


def build_table(allow_point_intervals: bool = False) -> Tuple[Tuple[int, ...], ...]:
    """13x13 composition table, computed on first use and cached.

    Construction runs under a lock, so concurrent first calls are safe.
    """
    with _table_lock:
        return _cached_table(allow_point_intervals)


@lru_cache(maxsize=None)
def _rows(allow_point_intervals: bool):
    # _rows[b][r] = b composed with relation r, for all 8192 masks r
    table = build_table(allow_point_intervals)
    rows = []
    for a in range(NUM_BASE):
        row = [0] * (UNIVERSAL + 1)
        entries = table[a]
        for r in range(1, UNIVERSAL + 1):
            low = r & -r
            row[r] = row[r ^ low] | entries[low.bit_length() - 1]
        rows.append(row)
    return rows


def compose(r1: int, r2: int, allow_point_intervals: bool = False) -> int:
    """Weak composition of two relations (union over member pairs)."""
    rows = _rows(allow_point_intervals)
    out = 0
    for b in range(NUM_BASE):
        if r1 >> b & 1:
            out |= rows[b][r2]
            if out == UNIVERSAL:
                break
    return out


@lru_cache(maxsize=None)
def _chunk_rows(allow_point_intervals: bool):
    # _chunk_rows[c][m][r] = (m << 4c) composed with r, for 4-bit chunks m
    rows = _rows(allow_point_intervals)
    chunks = []
    for c in range(0, NUM_BASE, 4):
        width = min(4, NUM_BASE - c)
        table = [[0] * (UNIVERSAL + 1)]
        for m in range(1, 1 << width):
            low = m & -m
            prev = table[m ^ low]
            row = rows[c + low.bit_length() - 1]
            table.append([a | b for a, b in zip(prev, row)])
        chunks.append(table)
    return chunks


def composer(allow_point_intervals: bool = False):
    """A fast ``compose`` closure bound to one interval mode."""
    c0, c1, c2, c3 = _chunk_rows(allow_point_intervals)

    def _compose(r1: int, r2: int) -> int:
        return (c0[r1 & 15][r2] | c1[r1 >> 4 & 15][r2]
                | c2[r1 >> 8 & 15][r2] | c3[r1 >> 12][r2])

    return _compose


def table_as_tokens(allow_point_intervals: bool = False):
    """The table as nested ``{a: {b: [tokens]}}`` dicts, for dumping."""
    table = build_table(allow_point_intervals)
    return {NAMES[a]: {NAMES[b]: tokens(table[a][b]) for b in range(NUM_BASE)}
            for a in range(NUM_BASE)}


def check_identities(allow_point_intervals: bool = False) -> List[str]:
    """Algebraic laws the table must satisfy; returns a list of violations.

    The identity law only holds over proper intervals: with point intervals
    allowed, templates overlap (a point can both meet and start an interval).
    """
    table = build_table(allow_point_intervals)
    errors = []
    for b in Base:
        if converse(converse(b)) != b:
            errors.append(f"converse is not an involution at {b}")
        if not allow_point_intervals and (
                table[b][Base.eq] != bit(b) or table[Base.eq][b] != bit(b)):
            errors.append(f"eq is not an identity for {b}")
        if not table[b][converse(b)] & bit(Base.eq):
            errors.append(f"eq missing from {b} o {converse(b)}")
        if set(template(converse(b))) != set(swap_template(template(b))):
            errors.append(f"template of {converse(b)} is not the swap of {b}")
        for b2 in Base:
            if not table[b][b2]:
                errors.append(f"empty entry {b} o {b2}")
            if converse_rel(table[b][b2]) != table[converse(b2)][converse(b)]:
                errors.append(f"converse duality fails at ({b}, {b2})")
    return errors


def iter_bases(r: int) -> Iterator[int]:
    while r:
        low = r & -r
        yield low.bit_length() - 1
        r ^= low


def union(rels: Iterable[int]) -> int:
    out = 0
    for r in rels:
        out |= r
    return out
