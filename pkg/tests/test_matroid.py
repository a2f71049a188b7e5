import random
from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import triangle
from oracles import brute_graph_vcg, forest
from seqauction import matroid as mt
from seqauction.scenarios import random_graphical_matroid
from seqauction.valuations import unit_demand

Q = Fraction
POLICIES = ("lexicographic", "random", "longest")


def edges_of(inst):
    return list(inst.matroid.edges)


def test_rank_examples(tri):
    assert mt.rank(tri.matroid) == 2
    assert mt.rank(tri.matroid, []) == 0
    assert mt.rank(mt.UniformMatroid("abcd", 2), "abc") == 2


def test_contraction_examples(tri):
    c = mt.contract(tri.matroid, ["e1"])
    assert set(mt.bases(c)) == {frozenset({"e2"}), frozenset({"e3"})}
    assert set(mt.bases(mt.contract(tri.matroid, []))) == set(mt.bases(tri.matroid))


def test_cocircuit_examples(tri):
    assert mt.find_cocircuit(tri.matroid) == {"e1", "e2"}
    assert mt.find_cocircuit(tri.matroid, ["e1"]) == {"e2", "e3"}
    assert mt.find_cocircuit(mt.UniformMatroid("ab", 1)) == {"a", "b"}
    with pytest.raises(ValueError):
        mt.find_cocircuit(tri.matroid, ["e1", "e2"])
    with pytest.raises(ValueError):
        mt.find_cocircuit(tri.matroid, [], policy="widest")


def test_greedy_examples(tri):
    assert mt.greedy_opt_basis(tri) == (frozenset({"e1", "e2"}), 8)
    assert mt.greedy_opt_basis(triangle("procurement")) == (frozenset({"e2", "e3"}), 5)
    flat = mt.weighted(mt.UniformMatroid("abc", 2), {"a": 1, "b": 1, "c": 1})
    basis, total = mt.greedy_opt_basis(flat)
    assert total == 2 and mt.is_basis(flat.matroid, basis)


def test_vcg_examples(tri):
    assert mt.vcg_price(tri, "e1") == 2
    assert mt.vcg_price(tri, "e2") == 2
    assert mt.vcg_price(tri, "e3") is mt.INFINITE
    assert str(mt.INFINITE) == "inf" and mt.INFINITE > 10**9


@pytest.mark.parametrize("policy", POLICIES)
def test_triangle_auction(tri, policy):
    trace = mt.run_sequential_basis_auction(tri, policy, seed=3)
    assert trace.winners == {"e1", "e2"}
    assert trace.prices == {"e1": 2, "e2": 2}


def test_triangle_auction_both_first_cocircuits(tri):
    seen = set()
    for seed in range(20):
        trace = mt.run_sequential_basis_auction(tri, "random", seed)
        seen.add(trace.rounds[0][0])
        assert trace.prices == {"e1": 2, "e2": 2}
    assert len(seen) >= 2


def test_rank_one_is_plain_first_price():
    inst = mt.weighted(mt.UniformMatroid("abc", 1), {"a": 4, "b": 7, "c": 5})
    trace = mt.run_sequential_basis_auction(inst)
    assert trace.winners == {"b"} and trace.prices == {"b": 5}


def test_path_graph_is_free():
    g = mt.GraphicalMatroid([1, 2, 3, 4], [("p1", 1, 2), ("p2", 2, 3), ("p3", 3, 4)])
    trace = mt.run_sequential_basis_auction(mt.weighted(g, {"p1": 3, "p2": 1, "p3": 2}))
    assert trace.prices == {"p1": 0, "p2": 0, "p3": 0}
    with pytest.raises(ValueError):
        mt.run_sequential_basis_auction(mt.weighted(g, {"p1": 3, "p2": 1, "p3": 2}, "procurement"))


def test_procurement_triangle():
    trace = mt.run_sequential_basis_auction(triangle("procurement"))
    _, _, prices = brute_graph_vcg(edges_of(triangle()), triangle().w, maximize=False)
    assert trace.winners == {"e2", "e3"} and trace.prices == prices == {"e2": 5, "e3": 5}


def test_tied_weights_warn():
    inst = mt.weighted(mt.UniformMatroid("abc", 1), {"a": 1, "b": 1, "c": 0})
    assert mt.run_sequential_basis_auction(inst).warnings


def test_participation_examples(tri):
    trace = mt.run_sequential_basis_auction(tri)
    assert [set(d) for d, _, _ in trace.rounds] == [{"e1", "e2"}, {"e2", "e3"}]
    assert mt.participation_matching(trace, {"e2", "e3"}) == {"e2": 0, "e3": 1}
    assert len(mt.participation_matching(trace, trace.winners)) == 2


def test_participation_reports_hall_set(tri):
    trace = mt.AuctionTrace(((frozenset({"e1", "e2"}), "e1", Q(2)), (frozenset({"e1", "e2"}), "e2", Q(2))))
    bad = mt.participation_matching(trace, {"e1", "e3"})
    assert isinstance(bad, mt.HallViolation) and bad.elements == {"e3"}


def test_explicit_matroid_checks_axioms():
    with pytest.raises(KeyError):
        mt.ExplicitMatroid("ab", [[], ["a"], ["b"], ["a", "b"], ["c"]])
    with pytest.raises(ValueError):
        mt.ExplicitMatroid("abc", [[], ["a"], ["b"], ["c"], ["a", "b"]])
    u = mt.ExplicitMatroid("abc", [[], ["a"], ["b"], ["c"], ["a", "b"], ["a", "c"], ["b", "c"]])
    assert mt.rank(u) == 2 and len(mt.circuits(u)) == 1


def test_graph_json_round_trip(tri):
    obj = tri.matroid.to_json(tri.w)
    back = mt.graph_from_json(obj)
    assert back.w == tri.w and back.matroid.to_json(back.w) == obj


def test_unit_demand_single_cocircuit_is_stage_auction():
    m = mt.UniformMatroid("ab", 1)
    rep = mt.matroid_unit_demand_auction(m, [unit_demand({"a": 5, "b": 0}), unit_demand({"a": 0, "b": 3})])
    assert [(k, e, p) for _, k, e, p in rep.rounds] == [(0, "a", 3)]
    assert (rep.welfare, rep.opt) == (5, 5)


def test_unit_demand_bidders_as_elements(tri):
    w = tri.w
    bidders = [unit_demand({f: (w[e] if f == e else 0) for f in w}) for e in tri.matroid.ground]
    rep = mt.matroid_unit_demand_auction(tri.matroid, bidders)
    trace = mt.run_sequential_basis_auction(tri)
    got = {tri.matroid.ground[k]: p for _, k, _, p in rep.rounds}
    assert {tri.matroid.ground[k] for _, k, e, _ in rep.rounds} == trace.winners
    assert got == trace.prices


# ---------------------------------------------------------------------------
# properties over random graphical matroids

graphs = st.builds(
    lambda seed, v: random_graphical_matroid(random.Random(seed), v),
    st.integers(0, 10**6),
    st.integers(2, 5),
)


@given(graphs)
@settings(max_examples=60, deadline=None)
def test_graph_independence_matches_union_find(inst):
    edges = edges_of(inst)
    g = inst.matroid
    for r in range(len(g.ground) + 1):
        for s in combinations(g.ground, r):
            assert g.independent(s) == forest(edges, s)


@given(graphs)
@settings(max_examples=60, deadline=None)
def test_greedy_routes_agree(inst):
    basis, total, _ = brute_graph_vcg(edges_of(inst), inst.w)
    assert mt.sort_greedy_basis(inst) == basis
    assert mt.brute_force_opt_basis(inst) == (basis, total)
    for policy in POLICIES:
        assert mt.greedy_opt_basis(inst, policy, random.Random(1)) == (basis, total)


@given(graphs)
@settings(max_examples=60, deadline=None)
def test_vcg_formulas_agree_with_brute_force(inst):
    basis, _, prices = brute_graph_vcg(edges_of(inst), inst.w)
    for e in inst.matroid.ground:
        assert mt.vcg_price(inst, e) == (prices[e] if e in basis else mt.INFINITE)


@given(graphs, st.sampled_from(POLICIES), st.integers(0, 99))
@settings(max_examples=60, deadline=None)
def test_auction_emulates_vcg(inst, policy, seed):
    basis, _, prices = brute_graph_vcg(edges_of(inst), inst.w)
    trace = mt.run_sequential_basis_auction(inst, policy, seed)
    assert trace.winners == basis and trace.prices == prices
    spe = mt.solve_basis_auction_spe(inst, policy, seed)
    assert spe.winners == basis and spe.prices == prices


@given(graphs)
@settings(max_examples=40, deadline=None)
def test_contraction_monotone(inst):
    m = inst.matroid
    opt = mt.sort_greedy_basis(inst)
    for d in mt.cocircuits(m):
        for k in d:
            smaller = inst.with_matroid(m.contract([k]))
            for i in opt - {k}:
                before, after = mt.vcg_price(inst, i), mt.vcg_price(smaller, i)
                assert after >= before
                if k in opt:
                    assert after == before


@given(graphs, st.sampled_from(POLICIES))
@settings(max_examples=40, deadline=None)
def test_every_basis_has_participation_matching(inst, policy):
    trace = mt.run_sequential_basis_auction(inst, policy, 5)
    for b in mt.bases(inst.matroid):
        assert isinstance(mt.participation_matching(trace, b), dict)


@given(graphs)
@settings(max_examples=40, deadline=None)
def test_contraction_rank_identity(inst):
    m = inst.matroid
    for x in list(m.ground)[:3]:
        assert mt.rank(m.contract([x])) == mt.rank(m) - mt.rank(m, [x])


@given(st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_unit_demand_matroid_ratio_at_most_two(seed):
    rng = random.Random(seed)
    inst = random_graphical_matroid(rng, 3, extra=rng.randint(0, 1))
    ground = inst.matroid.ground
    bidders = [unit_demand({e: rng.randint(0, 5) for e in ground}) for _ in range(rng.randint(2, 3))]
    rep = mt.matroid_unit_demand_auction(inst.matroid, bidders)
    assert rep.welfare * 2 >= rep.opt
