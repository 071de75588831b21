import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from allendl import algebra as ia
from allendl import solver
from allendl.algebra import Base, relation
from allendl.instances import GenSpecA, gen_A, oracle
from allendl.network import QCN, four_interval_example
from allendl.solver import (ABORTED, SAT, UNSAT, Search, SolverOptions, backbone,
                            enumerate_scenarios, solve_sat, union_labels)

from oracles import scenario_holds

# the scenario read off the drawn solution of the four-interval example
KNOWN_SCENARIO = {(0, 1): "m", (0, 3): "d", (1, 2): "oi", (1, 3): "oi", (2, 3): "eq"}

OPTION_SETS = [
    SolverOptions(),
    SolverOptions(backjumping=True),
    SolverOptions(closure=False, maintain_closure=False),
    SolverOptions(forward_check=False),
    SolverOptions(closure=False, maintain_closure=False, forward_check=False),
    SolverOptions(heuristic="static", backjumping=True),
    SolverOptions(diversify=False, restarts=False),
]


def single(n, *triples):
    return QCN.from_constraints(n, [(i, j, relation(*r.split())) for i, j, r in triples])


def test_example_sat_with_valid_witness():
    q = four_interval_example()
    res = solve_sat(q)
    assert res.status == SAT
    assert set(res.scenario) == set(q.edges())
    assert all(q.labels[e] & ia.bit(b) for e, b in res.scenario.items())
    assert res.solution[0][0] == 0
    assert scenario_holds(q, res.scenario, res.solution)


def test_example_drawn_scenario_is_consistent():
    fixed = QCN(4, {e: relation(b) for e, b in KNOWN_SCENARIO.items()})
    assert oracle(fixed).sat
    assert solve_sat(fixed).status == SAT
    scenarios = enumerate_scenarios(four_interval_example())
    seen = [{e: b.name for e, b in sc.items()} for sc, _ in scenarios]
    assert KNOWN_SCENARIO in seen


def test_example_reasoning_modes():
    q = four_interval_example()
    assert backbone(q).backbone == {(1, 2): Base.oi, (1, 3): Base.oi, (2, 3): Base.eq}
    assert union_labels(q).union == {(0, 1): relation("p", "m"), (0, 3): relation("s", "d"),
                                     (1, 2): relation("oi"), (1, 3): relation("oi"),
                                     (2, 3): relation("eq")}
    assert len(list(enumerate_scenarios(q))) == oracle(q).scenario_count == 4


def test_unsat_triangle():
    q = single(3, (0, 1, "p"), (1, 2, "p"), (0, 2, "pi"))
    for opts in OPTION_SETS:
        assert solve_sat(q, opts).status == UNSAT
        assert backbone(q, opts).status == UNSAT
        assert union_labels(q, opts).status == UNSAT
        assert list(enumerate_scenarios(q, opts=opts)) == []


def test_single_edge_pm():
    q = single(2, (0, 1, "p m"))
    res = solve_sat(q)
    assert res.scenario[(0, 1)] in (Base.p, Base.m)
    assert backbone(q).backbone == {}
    assert union_labels(q).union == {(0, 1): relation("p", "m")}
    assert len(list(enumerate_scenarios(q, limit=10))) == 2


def test_single_edge_backbone():
    assert backbone(single(2, (0, 1, "p"))).backbone == {(0, 1): Base.p}


def test_triangle_with_universal_edge():
    q = single(3, (0, 1, "p"), (1, 2, "p"))
    assert union_labels(q).union == {(0, 1): relation("p"), (1, 2): relation("p")}
    # the universal pair never becomes a scenario edge
    assert set(solve_sat(q).scenario) == {(0, 1), (1, 2)}


def test_empty_networks():
    assert solve_sat(QCN(0)).status == SAT
    res = solve_sat(QCN(3))
    assert res.scenario == {} and len(res.solution) == 3
    assert all(s < e for s, e in res.solution)


def test_empty_label_is_unsat():
    assert solve_sat(QCN(2, {(0, 1): 0})).status == UNSAT


def test_enumerate_limit():
    q = single(3, (0, 1, "p m o"), (1, 2, "p m"))
    assert len(list(enumerate_scenarios(q, limit=2))) == 2
    with pytest.raises(ValueError):
        list(enumerate_scenarios(q, limit=0))


def test_point_intervals_allow_degenerate_witness():
    q = single(2, (0, 1, "s"), (0, 1, "s"))
    opts = SolverOptions(allow_point_intervals=True)
    res = solve_sat(q, opts)
    assert res.status == SAT
    assert all(s <= e for s, e in res.solution)
    strict = single(3, (0, 1, "m"), (1, 2, "m"), (0, 2, "m"))
    assert solve_sat(strict).status == UNSAT
    assert solve_sat(strict, opts).status == SAT


def test_timeout_reports_aborted():
    q = gen_A(GenSpecA(40, 9.5, 6.5, 3))
    res = solve_sat(q, SolverOptions(timeout_s=0.0))
    assert res.status == ABORTED
    assert res.scenario is None
    assert "scenario" not in res.to_json()
    assert backbone(q, SolverOptions(timeout_s=0.0)).status == ABORTED
    assert union_labels(q, SolverOptions(timeout_s=0.0)).status == ABORTED


def test_json_schema():
    out = solve_sat(four_interval_example()).to_json()
    assert set(out) == {"status", "scenario", "solution", "stats"}
    assert set(out["scenario"][0]) == {"i", "j", "rel"}
    assert set(out["solution"][0]) == {"var", "start", "end"}
    assert set(out["stats"]) == {"decisions", "conflicts", "propagations", "wall_ms"}
    assert set(backbone(four_interval_example()).to_json()["backbone"][0]) == {"i", "j", "rel"}
    assert set(union_labels(four_interval_example()).to_json()["union"][0]) == {"i", "j", "rels"}


def test_search_reusable_across_queries():
    q = four_interval_example()
    search = Search(q)
    first = search.first()
    again = search.first()
    assert first == again
    level = search.engine.level
    gen = search.scenarios()
    next(gen)
    gen.close()
    assert search.engine.level == level


def test_option_validation():
    with pytest.raises(ValueError):
        SolverOptions(heuristic="random")


# -- oracle equivalence --------------------------------------------------------

def small_instance(seed):
    rng = random.Random(seed)
    n = rng.choice([3, 4, 5])
    d = rng.uniform(0.5, n - 1)
    s = rng.choice([2.0, 4.0, 6.5, 9.0])
    return gen_A(GenSpecA(n, d, s, seed))


def check_against_oracle(q, opts):
    rep = oracle(q, max_scenarios=10 ** 6)
    res = solve_sat(q, opts)
    assert res.status == (SAT if rep.sat else UNSAT)
    scenarios = list(enumerate_scenarios(q, opts=opts))
    assert len(scenarios) == rep.scenario_count
    assert len({tuple(sorted(s.items())) for s, _ in scenarios}) == len(scenarios)
    for sc, wit in scenarios:
        assert scenario_holds(q, sc, wit)
    if not rep.sat:
        assert backbone(q, opts).status == UNSAT
        assert union_labels(q, opts).status == UNSAT
        return
    assert scenario_holds(q, res.scenario, res.solution)
    bb = backbone(q, opts).backbone
    un = union_labels(q, opts).union
    assert bb == rep.backbone
    assert un == rep.union
    for e, b in bb.items():
        assert un[e] & ia.bit(b)
    for e, b in res.scenario.items():
        assert un[e] & ia.bit(b)


@pytest.mark.parametrize("opts", OPTION_SETS, ids=lambda o: (
    f"cl{int(o.closure)}-fc{int(o.forward_check)}-{o.heuristic}-bj{int(o.backjumping)}"
    f"-rs{int(o.restarts)}"))
def test_oracle_equivalence(opts):
    for seed in range(40):
        q = small_instance(seed)
        if q.scenario_space() > 10 ** 5:
            continue
        check_against_oracle(q, opts)


def test_restarts_preserve_answers(monkeypatch):
    # a budget of one conflict makes nearly every query restart
    monkeypatch.setattr(solver, "RESTART_BASE", 1)
    for seed in range(40):
        q = small_instance(seed)
        if q.scenario_space() <= 10 ** 5:
            check_against_oracle(q, SolverOptions())


def test_restarts_are_deterministic(monkeypatch):
    monkeypatch.setattr(solver, "RESTART_BASE", 1)
    q = gen_A(GenSpecA(12, 5, 6.5, 4))
    a, b = union_labels(q), union_labels(q)
    assert a.union == b.union and a.stats.decisions == b.stats.decisions
    assert backbone(q).backbone == backbone(q, SolverOptions(restarts=False)).backbone


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_oracle_equivalence_property(seed):
    q = small_instance(seed)
    if q.scenario_space() <= 10 ** 5:
        check_against_oracle(q, SolverOptions())


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31), st.sampled_from([2.0, 4.0, 5.0, 7.0]))
def test_closure_neutrality_and_determinism(seed, d):
    q = gen_A(GenSpecA(8, d, 6.5, seed))
    plain = SolverOptions(closure=False, maintain_closure=False)
    a = solve_sat(q)
    assert a.status == solve_sat(q, plain).status
    b = solve_sat(q)
    assert (a.status, a.scenario, a.solution) == (b.status, b.scenario, b.solution)
    if a.status == SAT:
        assert scenario_holds(q, a.scenario, a.solution)
    if d <= 4.0:
        assert union_labels(q).union == union_labels(q, SolverOptions(backjumping=True)).union
