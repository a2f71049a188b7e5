import random
from fractions import Fraction

import pytest

from seqauction import scenarios as sc
from seqauction import sequential_game as sg
from seqauction.matroid import rank
from seqauction.stage_auction import SECOND, Bid, ZERO
from seqauction.valuations import brute_force_optimal_allocation, check_monotone

Q = Fraction


class _Seen:
    """A player's valuation restricted to the items on sale."""

    def __init__(self, inst, i):
        self.inst, self.i = inst, i

    def value(self, bundle):
        return self.inst.value(self.i, bundle)


def brute_opt(inst):
    return brute_force_optimal_allocation([_Seen(inst, i) for i in range(inst.n)], inst.items)[1]


def test_figure1_numbers():
    s = sc.figure1(1, Q(1, 100))
    assert s.expected == {"opt": Q(299, 100), "welfare": Q(201, 100), "poa": Q(299, 201)}
    rep = s.extras["report"]
    assert rep.allocation == (0, 2, 1)
    assert rep.prices == (0, Q(99, 100), 0)
    assert brute_opt(s.instance) == Q(299, 100)
    assert s.extras["welfares"] == [Q(201, 100)]


def test_figure1_profile_is_spe():
    s = sc.figure1()
    assert sg.verify_spe(s.instance, s.profile).ok is True


def test_figure1_approaches_three_halves():
    poa = sc.figure1(1, Q(1, 10**4)).expected["poa"]
    assert poa == Q(29999, 20001) and abs(poa - Q(3, 2)) < Q(1, 1000)


def test_figure1_rejects_bad_eps():
    with pytest.raises(ValueError):
        sc.figure1(1, 1)


@pytest.mark.parametrize("k", [1, 2])
def test_unbounded_small_k_against_brute_force(k):
    s = sc.submodular_unbounded(k=k)
    assert s.expected["opt"] == brute_opt(s.instance)
    assert s.expected["welfare"] == 8
    assert sg.verify_spe(s.instance, s.profile).ok is True


def test_unbounded_k1_ratio():
    assert sc.submodular_unbounded(k=1).expected["poa"] == Q(18001, 16000)


def test_unbounded_last_item_matrix():
    k = 5
    d = Q(1, 1000)
    s = sc.submodular_unbounded(k=k, delta=d)
    sol = s.extras["solution"]
    winners, prices = sol.path()
    assert winners[:k] == (2,) * k and prices[:k] == (d,) * k
    v = sol.node(winners[: k - 1]).matrix
    low = min(v[3])
    assert [x - low for x in v[3]] == [0, 0, d / 2, 3 * d / 2]
    for i in (0, 1):
        for j in (2, 3):
            assert abs(v[i][j] - 2) <= k * d


def test_unbounded_grows_with_k():
    ratios = [sc.submodular_unbounded(k=k).expected["poa"] for k in (1, 2, 5)]
    assert ratios == sorted(ratios) and len(set(ratios)) == 3


def test_unbounded_rejects_large_delta():
    with pytest.raises(sc.ScenarioError):
        sc.submodular_unbounded(k=20, delta=Q(1, 2))


def test_second_price_additive_t2():
    s = sc.second_price_additive(t=2)
    assert s.expected == {"opt": 4, "welfare": Q(101, 50), "poa": Q(200, 101)}
    assert sg.verify_spe(s.instance, s.profile).ok is True


def test_second_price_additive_truthful_threat_fails():
    s = sc.second_price_additive(t=2)
    verdict = sg.verify_spe(s.instance, s.extras["truthful_off_path"])
    assert verdict.ok is False and verdict.violation.player == 0


def test_second_price_additive_first_price_is_efficient():
    s = sc.second_price_additive(t=2)
    inst = s.instance.with_format("first")
    rep = sg.play(sg.solve_spe(inst))
    assert rep.poa == 1


@pytest.mark.parametrize("k", [0, 1, 2])
def test_second_price_unit_demand(k):
    e, d = Q(1, 10), Q(1, 100)
    s = sc.second_price_unit_demand(k=k, eps=e, delta=d)
    assert s.expected["opt"] == k * (1 - e) + 4
    assert s.expected["welfare"] == k * d + 4
    assert sg.verify_spe(s.instance, s.profile).ok is True


def test_gadget_alternative_is_spe_and_worse_for_b():
    s = sc.second_price_unit_demand(k=0)
    alt = s.extras["gadget_alternative"]
    assert sg.verify_spe(s.instance, alt).ok is True
    good, bad = sc.play_profile(s.instance, s.profile), sc.play_profile(s.instance, alt)
    assert bad == ([2, 1], [1, 0])
    u_good = sg.make_report(s.instance, *good).utilities[1]
    u_bad = sg.make_report(s.instance, *bad).utilities[1]
    assert (u_good, u_bad) == (2, 1)


def test_nonexistence_walrasian():
    s = sc.multi_item_nonexistence()
    alloc, prices = s.expected["walrasian_allocation"], s.expected["walrasian_prices"]
    assert sc.check_walrasian(s.instance, alloc, prices)
    assert not sc.check_walrasian(s.instance, alloc, {**prices, "Y": prices["Y"] - Q(1, 10)})
    assert not sc.check_walrasian(s.instance, {}, {"X1": 1})


def test_nonexistence_continuation():
    s = sc.multi_item_nonexistence()
    cont = s.extras["continuation"]
    v, d, e = 1, Q(1, 100), Q(1, 1000)
    # both X to player 0: player 2 then takes W, player 1 takes Y, player 0 takes Z
    assert cont((0, 0)) == (v - d / 2, 7 * d / 6, 2 * d / 3 - e, 0)


def test_nonexistence_rejects_bad_params():
    with pytest.raises(sc.ScenarioError):
        sc.multi_item_nonexistence(delta=Q(1, 100), eps=Q(1, 100))


def test_dominated_strategy_example():
    s = sc.dominated_strategy_spe()
    assert s.instance.fmt == SECOND
    assert s.extras["report"].utilities == (1, 1)
    assert sg.verify_spe(s.instance, s.profile).ok is True
    assert sg.verify_spe(s.instance, s.extras["truthful"]).ok is True
    # player 0's second-round threat bids its value in a losing spot
    assert s.profile.bids(((Bid(Q(1)), Bid(Q(1, 2))),)) == (Bid(Q(1)), Bid(Q(1)))
    assert s.profile.bids(((Bid(Q(1)), ZERO),)) == (ZERO, Bid(Q(1)))


def test_registry_names():
    assert set(sc.SCENARIOS) == {
        "figure1",
        "submodular_unbounded",
        "second_price_additive",
        "second_price_unit_demand",
        "multi_item_nonexistence",
        "dominated_strategy_spe",
    }


def test_generators_are_deterministic():
    for kind in ("unit_demand", "additive", "uniform_submodular"):
        a, b = sc.random_instance(kind, 11), sc.random_instance(kind, 11)
        assert a.to_json() == b.to_json()
    g1, g2 = sc.random_instance("graphical_matroid", 1), sc.random_instance("graphical_matroid", 1)
    assert g1.matroid.to_json(g1.w) == g2.matroid.to_json(g2.w)


def test_unit_demand_generator_is_monotone():
    inst = sc.random_unit_demand(random.Random(7), 4, 3)
    assert inst.n == 4 and len(inst.items) == 3
    assert all(check_monotone(v) for v in inst.players)


def test_graphical_generator_contract():
    inst = sc.random_instance("graphical_matroid", 1, vertices=5)
    g = inst.matroid
    assert len(g.vertices) == 5 and inst.distinct
    # connected: a spanning tree has |V| - 1 edges
    assert rank(g) == 4


def test_uniform_submodular_generator_spread():
    inst = sc.random_uniform_submodular(random.Random(3), 3, 2, spread=Q(1, 2))
    assert inst.n == 3
    with pytest.raises(ValueError):
        sc.random_instance("bogus", 0)
