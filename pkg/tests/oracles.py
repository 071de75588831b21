"""Independent reference computations used by the tests."""

from itertools import product

from allendl import algebra as ia

INF = float("inf")


def floyd_feasible(num_vars, constraints):
    """All-pairs shortest paths from scratch; feasible iff no negative diagonal."""
    dist = [[0 if i == j else INF for j in range(num_vars)] for i in range(num_vars)]
    for x, y, k in constraints:
        # edge y -> x with weight k
        if k < dist[y][x]:
            dist[y][x] = k
    for m in range(num_vars):
        dm = dist[m]
        for i in range(num_vars):
            dim = dist[i][m]
            if dim == INF:
                continue
            di = dist[i]
            for j in range(num_vars):
                if dim + dm[j] < di[j]:
                    di[j] = dim + dm[j]
    return all(dist[i][i] >= 0 for i in range(num_vars))


def intervals(lo, hi, allow_points=False):
    return [(s, e) for s in range(lo, hi) for e in range(s, hi) if allow_points or s < e]


def brute_force_table(allow_points=False):
    """Composition table by exhaustive search over concrete integer intervals.

    Six endpoints take at most six distinct values, so 0..5 covers every
    ordering of three intervals.
    """
    ivs = intervals(0, 6, allow_points)
    table = [[0] * ia.NUM_BASE for _ in range(ia.NUM_BASE)]
    rel = {(a, b): ia.relation_between(a, b) for a in ivs for b in ivs}
    for x, z, y in product(ivs, repeat=3):
        for b1 in ia.iter_bases(rel[x, z]):
            for b2 in ia.iter_bases(rel[z, y]):
                table[b1][b2] |= rel[x, y]
    return table


def scenario_holds(q, scenario, solution):
    """Check a witness against a scenario purely arithmetically."""
    for (i, j), b in scenario.items():
        if not ia.holds(b, solution[i], solution[j]):
            return False
    return True
