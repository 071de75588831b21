import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from allendl import algebra as ia
from allendl.algebra import UNIVERSAL, relation
from allendl.instances import (GenSpecA, GenSpecH, OracleCapExceeded, bellman_ford,
                               clause_widths, default_hard_pool, derive_hard_pool,
                               format_pool, gen_A, gen_H, oracle, parse_pool)
from allendl.network import QCN, four_interval_example, serialize_qcn
from allendl.solver import solve_sat

from oracles import floyd_feasible


def test_gen_A_deterministic():
    spec = GenSpecA(10, 3, 6.5, 7)
    assert serialize_qcn(gen_A(spec)) == serialize_qcn(gen_A(spec))
    assert gen_A(spec) != gen_A(GenSpecA(10, 3, 6.5, 8))


def test_known_instances_frozen():
    # regression guard for the documented draw order
    assert serialize_qcn(gen_A(GenSpecA(5, 2, 6.5, 0))) == (
        "5\n0 2 (eq p d f)\n0 3 (pi m mi o d)\n1 3 (eq m mi s d f fi)\n"
        "2 3 (p mi oi s si d f fi)\n2 4 (eq p m o s si f)\n3 4 (eq mi oi d)\n.\n")
    assert serialize_qcn(gen_H(GenSpecH(5, 2, 0))) == (
        "5\n0 2 (eq p oi s si di f)\n0 3 (eq p pi oi s di)\n.\n")


def test_gen_A_degree_and_label_size():
    degs, sizes = [], []
    for seed in range(200):
        q = gen_A(GenSpecA(30, 6, 6.5, seed))
        degs.append(2 * len(q.labels) / q.n)
        sizes += [ia.size(r) for r in q.labels.values()]
    mean_deg = sum(degs) / len(degs)
    mean_size = sum(sizes) / len(sizes)
    assert abs(mean_deg - 6) <= 0.15 * 6
    assert abs(mean_size - 6.5) <= 0.10 * 6.5


@pytest.mark.parametrize("kwargs", [dict(n=1, d=0.5), dict(n=30, d=40), dict(n=5, d=0),
                                    dict(n=5, d=2, s=0.5), dict(n=5, d=2, s=14)])
def test_gen_spec_validation(kwargs):
    with pytest.raises(ValueError):
        GenSpecA(**kwargs)


def test_filenames():
    assert GenSpecA(30, 8, 6.5, 3).filename() == "A-n30-d8-s6.5-3.csp"
    assert GenSpecH(20, 10, 1).filename() == "H-n20-d10-1.csp"


def test_gen_H_labels_from_pool_and_deterministic():
    pool = set(default_hard_pool())
    for seed in range(20):
        q = gen_H(GenSpecH(12, 5, seed))
        assert q == gen_H(GenSpecH(12, 5, seed))
        assert all(r in pool for r in q.labels.values())


def test_gen_H_custom_pool():
    pool = (relation("p", "m"), relation("pi", "mi"))
    q = gen_H(GenSpecH(8, 4, 0, pool))
    assert set(q.labels.values()) <= set(pool)
    with pytest.raises(ValueError):
        GenSpecH(8, 4, 0, ())


def test_pool_properties():
    pool = default_hard_pool()
    members = set(pool)
    assert len(pool) == len(members) > 0
    assert all(ia.size(r) > 1 for r in pool)
    assert UNIVERSAL not in members and ia.EMPTY not in members
    assert all(ia.converse_rel(r) in members for r in pool)


def test_shipped_pool_matches_derivation():
    assert list(default_hard_pool()) == derive_hard_pool()


def test_clause_widths():
    widths = clause_widths()
    assert widths[UNIVERSAL] == 0
    for b in ia.Base:
        assert widths[ia.bit(b)] == 1
    # "before or meets" is the single literal ex <= sy
    assert widths[relation("p", "m")] == 1
    assert all(widths[r] == widths[ia.converse_rel(r)] for r in range(1, UNIVERSAL))


def test_pool_file_roundtrip():
    pool = default_hard_pool()[:5]
    assert parse_pool(format_pool(pool, "a header\nsecond line")) == pool
    assert parse_pool("(p m)  # comment\n\n") == (relation("p", "m"),)
    with pytest.raises(ValueError):
        parse_pool("p zz\n")


@pytest.mark.slow
def test_H_lower_sat_rate_than_A():
    a = sum(solve_sat(gen_A(GenSpecA(20, 10, 6.5, k))).sat for k in range(50))
    h = sum(solve_sat(gen_H(GenSpecH(20, 10, k))).sat for k in range(50))
    assert h < a, f"H sat {h}/50, A sat {a}/50"


# -- oracle --------------------------------------------------------------------

def test_oracle_example():
    rep = oracle(four_interval_example())
    assert rep.sat and rep.scenario_count == 4


def test_oracle_single_edge():
    rep = oracle(QCN(2, {(0, 1): relation("p", "m")}))
    assert rep.scenario_count == 2
    assert rep.backbone == {}
    assert rep.union == {(0, 1): relation("p", "m")}


def test_oracle_unsat_triangle():
    q = QCN.from_constraints(3, [(0, 1, relation("p")), (1, 2, relation("p")),
                                 (0, 2, relation("pi"))])
    rep = oracle(q)
    assert not rep.sat and rep.scenario_count == 0
    assert rep.to_json()["status"] == "unsat"


def test_oracle_caps():
    with pytest.raises(OracleCapExceeded):
        oracle(QCN(6))
    q = gen_A(GenSpecA(5, 4, 12, 0))
    with pytest.raises(OracleCapExceeded):
        oracle(q, max_scenarios=10)


def test_oracle_report_consistency():
    for seed in range(30):
        q = gen_A(GenSpecA(4, 2.5, 4, seed))
        rep = oracle(q)
        assert rep.sat == (rep.scenario_count > 0) == all(rep.union.values())
        for e, b in rep.backbone.items():
            assert rep.union[e] == ia.bit(b)


cons = st.integers(1, 7).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1),
                                   st.integers(-3, 3)), max_size=16)))


@settings(max_examples=200, deadline=None)
@given(cons)
def test_bellman_ford_agrees_with_floyd(case):
    n, cs = case
    dist = bellman_ford(n, cs)
    assert (dist is not None) == floyd_feasible(n, cs)
    if dist is not None:
        assert all(dist[x] - dist[y] <= k for x, y, k in cs)
