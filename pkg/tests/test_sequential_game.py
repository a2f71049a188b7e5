import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import intro_instance
from oracles import grid_spe_paths
from seqauction import scenarios as sc
from seqauction import sequential_game as sg
from seqauction.stage_auction import SECOND, Bid, ZERO, canonical_equilibrium, verify_stage_nash
from seqauction.valuations import additive, brute_force_optimal_allocation, unit_demand

Q = Fraction


def test_intro_continuation_matrix(intro):
    sol = sg.solve_spe(intro)
    assert sg.continuation_matrix(intro, (), sol) == ((6, 5), (0, 4))


def test_last_round_matrix_is_diagonal(intro):
    sol = sg.solve_spe(intro)
    assert sg.continuation_matrix(intro, (1,), sol) == ((5, 0), (0, 0))
    with pytest.raises(ValueError):
        sg.continuation_matrix(intro, (0, 0), sol)


def test_intro_path_and_report(intro):
    sol = sg.solve_spe(intro)
    rep = sg.play(sol)
    assert rep.allocation == (1, 0)
    assert rep.prices == (1, 0)
    assert rep.utilities == (5, 3)
    assert (rep.welfare, rep.opt, rep.poa) == (9, 10, Q(10, 9))


def test_intro_matches_grid_oracle(intro):
    assert grid_spe_paths(intro.players, intro.items, Q(1, 2)) == {((1, 0), (Q(1), Q(0)))}
    assert sg.solve_spe(intro, "all") == [((1, 0), (Q(1), Q(0)))]


def test_single_item_reduces_to_stage():
    inst = sg.sequential_instance([additive({"A": 5}), additive({"A": 3}), additive({"A": 2})], ["A"])
    node = sg.solve_spe(inst).node(())
    assert node.outcome == canonical_equilibrium(((5, 0, 0), (0, 3, 0), (0, 0, 2)))[1]


def test_inert_player_pays_nothing():
    inst = sg.sequential_instance([additive({"A": 2, "B": 1}), additive({"A": 0, "B": 0})], ["A", "B"])
    rep = sg.play(sg.solve_spe(inst))
    assert rep.prices == (0, 0) and rep.allocation == (0, 0)


def test_report_json_and_infinite_ratio():
    inst = sg.sequential_instance([additive({"A": 1}), additive({"A": 0})], ["A"])
    rep = sg.make_report(inst, [1], [Q(0)])
    assert rep.poa is None
    assert rep.to_json()["poa"] == "inf"


def test_instance_json_round_trip(intro):
    assert sg.instance_from_json(intro.to_json()) == intro


def test_rejects_bad_instances():
    with pytest.raises(ValueError):
        sg.sequential_instance([additive({"A": 1})], ["A"])
    with pytest.raises(ValueError):
        sg.AuctionInstance((additive({"A": 1}), additive({"A": 1})), (("A",), ("A",)))
    multi = sg.AuctionInstance((additive({"A": 1, "B": 1}), additive({"A": 1, "B": 1})), (("A", "B"),))
    with pytest.raises(ValueError):
        sg.solve_spe(multi)


def test_state_cap_raises():
    inst = sc.random_unit_demand(random.Random(0), 4, 4)
    with pytest.raises(RuntimeError):
        sg.solve_spe(inst, max_states=5)


def test_verify_spe_accepts_canonical_profile(intro):
    verdict = sg.verify_spe(intro, sg.solution_profile(sg.solve_spe(intro)))
    assert verdict.ok is True and verdict.violation is None


def test_verify_spe_catches_overbidding():
    inst = sg.sequential_instance([additive({"A": 1, "B": 1}), additive({"A": 1, "B": 1})], ["A", "B"])
    # player 0 always bids 5 and wins everything at a loss
    profile = sg.StrategyProfile(lambda h: (Bid(Q(5)), ZERO))
    verdict = sg.verify_spe(inst, profile)
    assert verdict.ok is False
    assert verdict.violation.player == 0 and verdict.violation.gain > 0


def test_verify_spe_cap_is_inconclusive(intro):
    verdict = sg.verify_spe(intro, sg.solution_profile(sg.solve_spe(intro)), max_nodes=1)
    assert verdict.ok is None
    assert not verdict


def test_grid_two_additive_bidders_simultaneous():
    inst = sg.AuctionInstance((additive({"A": 3, "B": 1}), additive({"A": 1, "B": 2})), (("A", "B"),))
    res = sg.grid_stage_equilibrium(inst, grid=Q(1, 2))
    assert isinstance(res, sg.GridEquilibrium)
    assert res.winners == (0, 1)


def test_grid_single_item_round_matches_canonical():
    inst = sg.sequential_instance([additive({"A": 5}), additive({"A": 3})], ["A"])
    res = sg.grid_stage_equilibrium(inst, grid=Q(1), find_all=True)
    # high bidder wins at any price between the two values
    assert {(e.winners, e.prices) for e in res} == {((0,), (Q(p),)) for p in (3, 4, 5)}


def test_poa_sweep_examples():
    ud = lambda r: sc.random_unit_demand(r, r.randint(2, 3), r.randint(1, 3), top=4)
    assert sg.poa_sweep(ud, 30, seed=1, bound=Q(2)).worst <= 2
    add = lambda r: sc.random_additive(r, r.randint(2, 3), r.randint(1, 3), top=4)
    assert sg.poa_sweep(add, 30, seed=1, enumerate_limit=0, bound=Q(1)).worst == 1
    usm = lambda r: sc.random_uniform_submodular(r, 3, 2, spread=Q(1, 2))
    assert sg.poa_sweep(usm, 30, seed=1, bound=Q(4)).worst <= 4


# ---------------------------------------------------------------------------
# properties

small = st.integers(0, 4)


@st.composite
def instances(draw, kind="unit_demand", max_n=3, max_m=3, fmt="first"):
    n, m = draw(st.integers(2, max_n)), draw(st.integers(1, max_m))
    items = "ABCD"[:m]
    make = unit_demand if kind == "unit_demand" else additive
    players = [make({x: draw(small) for x in items}) for _ in range(n)]
    return sg.sequential_instance(players, items, fmt)


@given(st.sampled_from(["first", "second"]).flatmap(lambda f: instances(fmt=f)))
@settings(max_examples=60, deadline=None)
def test_every_node_is_stage_nash(inst):
    sol = sg.solve_spe(inst)
    for node in sol.nodes.values():
        assert verify_stage_nash(node.matrix, node.bids, inst.fmt)


@given(instances())
@settings(max_examples=60, deadline=None)
def test_individual_rationality(inst):
    rep = sg.play(sg.solve_spe(inst))
    assert all(u >= 0 for u in rep.utilities)
    assert sum(rep.prices) <= rep.welfare


@given(instances(kind="additive", max_n=4, max_m=4))
@settings(max_examples=40, deadline=None)
def test_additive_is_efficient(inst):
    rep = sg.play(sg.solve_spe(inst))
    assert rep.welfare == rep.opt


@given(instances())
@settings(max_examples=60, deadline=None)
def test_unit_demand_price_bound_per_player(inst):
    """Each player's optimal item sells for at least what that player
    gives up by not holding it."""
    sol = sg.solve_spe(inst)
    rep = sg.play(sol)
    alloc, _ = brute_force_optimal_allocation(list(inst.players), inst.items)
    price = dict(zip(inst.items, rep.prices))
    for i in range(inst.n):
        mine = [x for x, w in alloc.items() if w == i]
        if not mine:
            continue
        star = max(mine, key=lambda x: inst.value(i, {x}))
        got = inst.value(i, rep.bundles[i])
        assert price[star] >= inst.value(i, {star}) - got


@given(instances(max_n=2, max_m=2))
@settings(max_examples=30, deadline=None)
def test_solver_paths_are_grid_equilibria(inst):
    oracle = grid_spe_paths(inst.players, inst.items, Q(1, 2))
    assert sg.solve_spe(inst).path() in oracle
    assert set(sg.solve_spe(inst, "all")) <= oracle


@given(instances())
@settings(max_examples=20, deadline=None)
def test_deterministic(inst):
    assert sg.play(sg.solve_spe(inst)) == sg.play(sg.solve_spe(inst))


@given(instances(fmt="second"))
@settings(max_examples=30, deadline=None)
def test_second_price_canonical_profile_verifies(inst):
    sol = sg.solve_spe(inst)
    assert sg.verify_spe(inst, sg.solution_profile(sol)).ok is True


def test_bundles_in_report(intro):
    rep = sg.play(sg.solve_spe(intro))
    assert list(map(set, rep.bundles)) == [{"B"}, {"A"}]


def test_second_price_format(intro):
    inst = intro_instance(SECOND)
    rep = sg.play(sg.solve_spe(inst))
    assert rep.welfare <= rep.opt
