"""Named constructions, reference strategy profiles and instance generators.

Every builder checks its own expected metrics at construction and raises
``ScenarioError`` when the construction disagrees with them.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Callable, Mapping

from . import sequential_game as sg
from .matroid import GraphicalMatroid, WeightedMatroid, weighted
from .sequential_game import AuctionInstance, History, StrategyProfile
from .stage_auction import FIRST, SECOND, Bid, ZERO, outcome
from .valuations import (
    Valuation,
    additive,
    coverage,
    optimal_matching_value,
    to_money,
    uniform_submodular,
    unit_demand,
)


class ScenarioError(AssertionError):
    pass


@dataclass(frozen=True)
class Scenario:
    name: str
    params: dict
    instance: object
    expected: dict
    profile: StrategyProfile | None = None
    extras: dict = field(default_factory=dict)
    notes: str = ""


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ScenarioError(msg)


def additive_opt(instance: AuctionInstance) -> Fraction:
    """Optimum for additive players: each item to its highest value."""
    total = Fraction(0)
    for x in instance.items:
        total += max(instance.value(i, {x}) for i in range(instance.n))
    return total


def play_profile(instance: AuctionInstance, profile: StrategyProfile) -> sg.GameReport:
    """Follow a full-history profile along its own path."""
    h: History = ()
    winners, prices = [], []
    for _ in instance.items:
        bids = tuple(profile.bids(h))
        out = outcome(bids, instance.fmt)
        winners.append(out.winner)
        prices.append(out.price)
        h += (bids,)
    return winners, prices


def check_walrasian(
    instance: AuctionInstance, allocation: Mapping[str, int], prices: Mapping[str, object]
) -> bool:
    """Every player's bundle maximizes value minus price over all bundles;
    unsold items must be priced 0."""
    items = list(instance.items)
    p = {x: to_money(prices.get(x, 0)) for x in items}
    for x in items:
        if x not in allocation and p[x] != 0:
            return False
    for i in range(instance.n):
        mine = {x for x, k in allocation.items() if k == i}
        have = instance.value(i, mine) - sum((p[x] for x in mine), Fraction(0))
        for r in range(len(items) + 1):
            for s in combinations(items, r):
                u = instance.value(i, s) - sum((p[x] for x in s), Fraction(0))
                if u > have:
                    return False
    return True


# ---------------------------------------------------------------------------
# sequential first price, unit demand: three items, four players

def figure1(alpha: object = 1, eps: object = Fraction(1, 100)) -> Scenario:
    """Players a, b, c, d (indices 0..3); A, B, C sold in that order.

    a values A at eps; b values A and C at alpha; c values B and C at alpha;
    d values B at alpha - eps. If a takes A, c must outbid d for B and b
    then gets C for free, so b gains nothing from winning A and lets a have
    it. Optimum: b gets A, d gets B, c gets C.
    """
    al, e = to_money(alpha), to_money(eps)
    if not 0 < e < al:
        raise ValueError("need 0 < eps < alpha")
    items = ["A", "B", "C"]

    def ud(vals):
        return unit_demand({x: vals.get(x, 0) for x in items})

    players = [ud({"A": e}), ud({"A": al, "C": al}), ud({"B": al, "C": al}), ud({"B": al - e})]
    inst = sg.sequential_instance(players, items)
    opt = optimal_matching_value(players, items)
    _require(opt == 3 * al - e, "optimum must be 3 alpha - eps")
    sol = sg.solve_spe(inst)
    report = sg.play(sol, opt)
    _require(report.welfare == 2 * al + e, "canonical equilibrium welfare must be 2 alpha + eps")
    welfares = sorted({sg.make_report(inst, w, p, opt).welfare for w, p in sg.solve_spe(inst, "all")})
    return Scenario(
        "figure1",
        {"alpha": al, "eps": e},
        inst,
        {"opt": opt, "welfare": 2 * al + e, "poa": opt / (2 * al + e)},
        sg.solution_profile(sol),
        {"solution": sol, "report": report, "welfares": welfares},
        "The solver confirms the expected optimum and equilibrium welfare.",
    )


# ---------------------------------------------------------------------------
# submodular players, unbounded ratio

def _unbounded_players(k: int, d: Fraction, e: Fraction) -> list[Valuation]:
    if 4 - d / 2 - k * d < 0 or 2 - k * d / 2 < 0:
        raise ScenarioError("delta too large for k")
    ii = [f"I{i}" for i in range(1, k + 1)]
    p1 = additive({**{x: 1 + e for x in ii}, "Z1": 2 - k * d / 2})
    p2 = additive({**{x: 1 for x in ii}, "Z2": 2 - k * d / 2})
    # third player: each I covers its own piece, Y covers all of them
    cover3 = {x: [f"s{x}"] for x in ii}
    cover3["Y"] = [f"s{x}" for x in ii] + ["core"]
    elems3 = {f"s{x}": d for x in ii}
    elems3["core"] = 4 - d / 2 - k * d
    # fourth player: each I overlaps both Z's and has a private piece;
    # Y covers the parts of the Z's that no I touches
    cover4 = {x: [f"z1{x}", f"z2{x}", f"u{x}"] for x in ii}
    cover4["Y"] = ["z1core", "z2core", "yown"]
    cover4["Z1"] = [f"z1{x}" for x in ii] + ["z1core"]
    cover4["Z2"] = [f"z2{x}" for x in ii] + ["z2core"]
    elems4 = {}
    for x in ii:
        elems4.update({f"z1{x}": d / 2, f"z2{x}": d / 2, f"u{x}": d})
    elems4.update({"z1core": 2 - k * d / 2, "z2core": 2 - k * d / 2, "yown": k * d})
    return [p1, p2, coverage(cover3, elems3), coverage(cover4, elems4)]


def count_key(k: int) -> Callable:
    """Winner history summarized by how many I items the two coverage
    players hold. The I items are interchangeable, and the additive
    players' marginals never depend on what they already hold."""

    def key(w):
        head = w[:k]
        return (len(head), head.count(2), head.count(3), tuple(w[k:]))

    return key


def unbounded_opt(instance: AuctionInstance, k: int) -> Fraction:
    """Exact optimum using interchangeability of the I items: enumerate how
    many I items each player gets and who gets Y, Z1, Z2."""
    ii = [f"I{i}" for i in range(1, k + 1)]
    tail = ("Y", "Z1", "Z2")
    cache: dict = {}

    def val(p, c, extra):
        key = (p, c, extra)
        if key not in cache:
            cache[key] = instance.value(p, ii[:c] + list(extra))
        return cache[key]

    best = Fraction(-1)
    for c0 in range(k + 1):
        for c1 in range(k + 1 - c0):
            for c2 in range(k + 1 - c0 - c1):
                counts = (c0, c1, c2, k - c0 - c1 - c2)
                for owners in product(range(4), repeat=3):
                    total = Fraction(0)
                    for p in range(4):
                        extra = tuple(x for x, o in zip(tail, owners) if o == p)
                        total += val(p, counts[p], extra)
                    best = max(best, total)
    return best


def submodular_unbounded(k: int = 20, delta: object = Fraction(1, 1000), eps: object = Fraction(1, 1000)) -> Scenario:
    if k < 1:
        raise ValueError("k must be at least 1")
    d, e = to_money(delta), to_money(eps)
    players = _unbounded_players(k, d, e)
    items = [f"I{i}" for i in range(1, k + 1)] + ["Y", "Z1", "Z2"]
    inst = sg.sequential_instance(players, items)
    key = count_key(k)
    sol = sg.solve_spe(inst, state_key=key)
    opt = unbounded_opt(inst, k)
    _require(opt == k + 8 + k * e - d / 2, f"optimum {opt} differs from the closed form")
    report = sg.play(sol, opt)
    profile = sg.solution_profile(sol)
    expected = {"opt": opt, "welfare": report.welfare, "poa": report.poa}
    return Scenario(
        "submodular_unbounded",
        {"k": k, "delta": d, "eps": e},
        inst,
        expected,
        profile,
        {"solution": sol, "report": report},
        "Two coverage players; the I items mostly go to the low-value third player.",
    )


# ---------------------------------------------------------------------------
# second price, additive players

def second_price_additive(t: int = 2, eps: object = Fraction(1, 10), delta: object = Fraction(1, 100)) -> Scenario:
    """Three additive players, items A1..At, B, C under second price.

    Reference profile: on the path the prescribed winner bids its value and
    everyone else bids 0 (third player takes every A, second takes B, first
    takes C). After the first deviation the deviator is shut out: another
    player bids above every value on all remaining items.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    e, d = to_money(eps), to_money(delta)
    aa = [f"A{i}" for i in range(1, t + 1)]
    players = [
        additive({**{x: 1 for x in aa}, "B": 0, "C": 1}),
        additive({**{x: 1 - e for x in aa}, "B": 1, "C": 1 - e}),
        additive({**{x: d for x in aa}, "B": 1 - e, "C": 0}),
    ]
    items = aa + ["B", "C"]
    inst = sg.sequential_instance(players, items, SECOND)
    path = []
    for x in items:
        w = 2 if x.startswith("A") else (1 if x == "B" else 0)
        bids = [ZERO] * 3
        bids[w] = Bid(inst.value(w, {x}))
        path.append(tuple(bids))
    profile = punishing_profile(path, {0: 1, 1: 0, 2: 0}, Fraction(2))
    opt = additive_opt(inst)
    winners, prices = play_profile(inst, profile)
    report = sg.make_report(inst, winners, prices, opt)
    _require(opt == t + 2, "optimum must be t + 2")
    _require(report.welfare == 2 + t * d, "path welfare must be 2 + t*delta")
    return Scenario(
        "second_price_additive",
        {"t": t, "eps": e, "delta": d},
        inst,
        {"opt": opt, "welfare": report.welfare, "poa": report.poa},
        profile,
        {"report": report, "path": path, "truthful_off_path": truthful_off_path_profile(inst, path)},
    )


def _first_deviator(path, h: History):
    for r, bids in enumerate(h):
        devs = [i for i, (b, p) in enumerate(zip(bids, path[r])) if b != p]
        if devs:
            return devs[0]
    return None


def punishing_profile(path, punisher: Mapping[int, int], high: Fraction) -> StrategyProfile:
    """Follow ``path`` exactly; once player i deviates, player punisher[i]
    bids ``high`` on every remaining item and everyone else bids 0."""
    n = len(path[0])

    def mode(h):
        dev = _first_deviator(path, h)
        return None if dev is None else punisher[dev]

    def bids(h):
        m = mode(h)
        if m is None:
            return path[len(h)]
        out = [ZERO] * n
        out[m] = Bid(high)
        return tuple(out)

    def breakpoints(h):
        return path[len(h)] if mode(h) is None else ()

    return StrategyProfile(bids, breakpoints, lambda h: (len(h), mode(h)))


def truthful_bids(instance: AuctionInstance, h: History) -> tuple[Bid, ...]:
    """Each player bids its marginal value for the current item."""
    items = instance.items
    held = [set() for _ in range(instance.n)]
    for x, b in zip(items, h):
        held[outcome(b, instance.fmt).winner].add(x)
    x = items[len(h)]
    return tuple(
        Bid(instance.value(i, held[i] | {x}) - instance.value(i, held[i])) for i in range(instance.n)
    )


def truthful_off_path_profile(instance: AuctionInstance, path) -> StrategyProfile:
    """Follow ``path``; after any deviation everyone bids truthfully."""

    def bids(h):
        if _first_deviator(path, h) is None:
            return path[len(h)]
        return truthful_bids(instance, h)

    def breakpoints(h):
        return path[len(h)] if _first_deviator(path, h) is None else ()

    return StrategyProfile(bids, breakpoints)


def truthful_profile(instance: AuctionInstance) -> StrategyProfile:
    return StrategyProfile(lambda h: truthful_bids(instance, h))


# ---------------------------------------------------------------------------
# second price, unit-demand players with signalling

def second_price_unit_demand(k: int = 10, eps: object = Fraction(1, 10), delta: object = Fraction(1, 100)) -> Scenario:
    """Blocks (A_i, B_i) for i = 1..k followed by a two-item gadget (A*, B*).

    Players 0..k-1 are the block players, then a, b, c. Block player i
    values A_i at 1 - eps and B_i at delta. In the gadget a values A* at 1,
    b values A* at 3 and B* at 1, c values A* and B* at 1. Gadget play is
    either "b takes A* at price 1, c takes B* at 0" (good for b) or "c takes
    A*, b takes B* at 0", and which one happens is the signal that keeps b
    bidding 1 - delta on every A_i with zero value for it.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    e, d = to_money(eps), to_money(delta)
    _require(0 < d < e < 1, "need 0 < delta < eps < 1")
    items = [x for i in range(1, k + 1) for x in (f"A{i}", f"B{i}")] + ["A*", "B*"]

    def ud(vals):
        return unit_demand({x: Fraction(vals.get(x, 0)) for x in items})

    players: list[Valuation] = [ud({f"A{i + 1}": 1 - e, f"B{i + 1}": d}) for i in range(k)]
    players.append(ud({"A*": 1}))
    players.append(ud({"A*": 3, "B*": 1}))
    players.append(ud({"A*": 1, "B*": 1}))
    inst = sg.sequential_instance(players, items, SECOND)
    good = signalling_profile(inst, k, cooperative=True)
    bad = signalling_profile(inst, k, cooperative=False)
    opt = k * (1 - e) + 4
    if k <= 3:
        _require(optimal_matching_value(players, items) == opt, "closed-form optimum disagrees")
    winners, prices = play_profile(inst, good)
    report = sg.make_report(inst, winners, prices, opt)
    _require(report.welfare == k * d + 4, "path welfare must be k*delta + 4")
    return Scenario(
        "second_price_unit_demand",
        {"k": k, "eps": e, "delta": d},
        inst,
        {"opt": opt, "welfare": report.welfare, "poa": report.poa},
        good,
        {"report": report, "gadget_alternative": bad},
        "Gadget values chosen so both gadget plays are equilibria with the expected welfare.",
    )


def signalling_profile(inst: AuctionInstance, k: int, cooperative: bool = True) -> StrategyProfile:
    """State machine over block outcomes. While cooperative, b bids 1 - delta
    on each A_i; a block stays cooperative if b or c wins A_i at price 0,
    or wins A_i at a positive price and then wins B_i too. Any other block
    outcome switches to the alternative gadget play for good, with
    truthful bidding everywhere else."""
    n = inst.n
    a, b, c = k, k + 1, k + 2
    fmt = inst.fmt
    d = inst.players[0].value({"B1"}) if k else Fraction(0)
    one_minus_d = 1 - d

    def state(h: History):
        coop = cooperative
        sub = None
        for r, bids in enumerate(h):
            if r >= 2 * k:
                break
            out = outcome(bids, fmt)
            if r % 2 == 0:
                if not coop:
                    continue
                if out.winner in (b, c):
                    sub = "ok" if out.price == 0 else "pending"
                else:
                    coop = False
            else:
                if coop and sub == "pending" and out.winner not in (b, c):
                    coop = False
                sub = None
        return coop, sub

    def bids(h: History):
        r = len(h)
        coop, sub = state(h)
        out = [ZERO] * n
        if r < 2 * k:
            i = r // 2
            if not coop:
                return truthful_bids(inst, h)
            if r % 2 == 0:
                out[b] = Bid(one_minus_d)
            else:
                out[i] = Bid(d)
                if sub == "pending":
                    out[b] = Bid(Fraction(1))
            return tuple(out)
        if r == 2 * k:
            out[a] = Bid(Fraction(1))
            if coop:
                out[b] = Bid(Fraction(2))
                out[c] = Bid(Fraction(1))
            else:
                out[c] = Bid(Fraction(3))
            return tuple(out)
        return truthful_bids(inst, h)

    def breakpoints(h: History):
        return (ZERO,)

    def key(h: History):
        r = len(h)
        coop, sub = state(h)
        last = outcome(h[-1], fmt).winner if r % 2 == 1 else None
        return (r, coop, sub, last)

    return StrategyProfile(bids, breakpoints, key)


# ---------------------------------------------------------------------------
# simultaneous first round with no pure equilibrium

def multi_item_nonexistence(v: object = 1, delta: object = Fraction(1, 100), eps: object = Fraction(1, 1000)) -> Scenario:
    """X1, X2 sold together, then W, Y, Z. Player 0 wants only Z, player 3
    only W; players 1 and 2 are coverage valuations matching every marginal
    value in the case analysis of the continuation."""
    v, d, e = to_money(v), to_money(delta), to_money(eps)
    _require(0 < e < d / 3 and d < v, "need eps < delta/3 and delta < v")
    p1 = additive({"Z": v})
    p2 = coverage(
        {"X1": ["d1"], "X2": ["d2"], "Y": ["c", "d1", "d2"], "Z": ["c", "z"]},
        {"c": v, "d1": d / 3, "d2": d / 3, "z": d / 2},
    )
    p3 = coverage(
        {"X1": ["x", "a"], "X2": ["x", "a"], "W": ["a", "b"], "Y": ["b", "y"]},
        {"x": 2 * v / 3, "a": d / 3, "b": d, "y": v - d / 2},
    )
    p4 = additive({"W": 2 * d / 3 + e})
    inst = AuctionInstance((p1, p2, p3, p4), (("X1", "X2"), ("W",), ("Y",), ("Z",)))
    allocation = {"X1": 1, "Z": 1, "X2": 2, "Y": 2, "W": 3}
    prices = {"X1": d / 3, "X2": d / 3, "Y": v + d / 6, "W": 2 * d / 3, "Z": v}
    _require(check_walrasian(inst, allocation, prices), "expected allocation must be Walrasian")
    cont = sg.round_continuation(inst, ())
    # both X's to player 0: player 2 takes W, player 1 takes Y, player 0 takes Z
    sub = sg._subgame(inst, ("X1", "X2"), (0, 0))
    sol = sg.solve_spe(sub)
    w, _ = sol.path()
    _require(w == (2, 1, 0), f"case analysis path mismatch: {w}")
    _require(cont((0, 0))[0] == v - d / 2, "player 0 must keep v - delta/2 after taking both X")
    return Scenario(
        "multi_item_nonexistence",
        {"v": v, "delta": d, "eps": e},
        inst,
        {"walrasian_allocation": allocation, "walrasian_prices": prices},
        None,
        {"continuation": cont},
    )


# ---------------------------------------------------------------------------
# dominated threat sustains a good outcome

def dominated_strategy_spe() -> Scenario:
    """Second price, two items worth 1 each to two additive players.

    Player 0 bids 1 on the first item, then 0 if player 1 bid exactly 0 on
    the first item and 1 otherwise. Player 1 bids 0 then 1. Both end with
    one item at price 0.
    """
    players = [additive({"A": 1, "B": 1}), additive({"A": 1, "B": 1})]
    inst = sg.sequential_instance(players, ["A", "B"], SECOND)
    one = Bid(Fraction(1))

    def bids(h):
        if not h:
            return (one, ZERO)
        return ((ZERO if h[0][1] == ZERO else one), one)

    def breakpoints(h):
        return (ZERO,) if not h else ()

    profile = StrategyProfile(bids, breakpoints)
    winners, prices = play_profile(inst, profile)
    report = sg.make_report(inst, winners, prices)
    _require(report.utilities == (1, 1), "payoffs must be (1, 1)")
    return Scenario(
        "dominated_strategy_spe",
        {},
        inst,
        {"utilities": (Fraction(1), Fraction(1)), "welfare": Fraction(2)},
        profile,
        {"report": report, "truthful": truthful_profile(inst)},
    )


# ---------------------------------------------------------------------------
# generators

def _grid_value(rng: random.Random, top: int, den: int) -> Fraction:
    return Fraction(rng.randint(0, top * den), den)


def random_unit_demand(rng: random.Random, n: int, m: int, top: int = 10, den: int = 1, fmt: str = FIRST) -> AuctionInstance:
    items = [chr(ord("A") + j) for j in range(m)]
    players = [unit_demand({x: _grid_value(rng, top, den) for x in items}) for _ in range(n)]
    return sg.sequential_instance(players, items, fmt)


def random_additive(rng: random.Random, n: int, m: int, top: int = 10, den: int = 1, fmt: str = FIRST) -> AuctionInstance:
    items = [chr(ord("A") + j) for j in range(m)]
    players = [additive({x: _grid_value(rng, top, den) for x in items}) for _ in range(n)]
    return sg.sequential_instance(players, items, fmt)


def random_uniform_submodular(
    rng: random.Random, n: int, m: int, spread: Fraction | None = None, top: int = 20, fmt: str = FIRST
) -> AuctionInstance:
    """Non-increasing marginals per player. With ``spread`` every player's
    first marginal lies in [(1 - spread) M, M] for a common M, so any two
    first marginals differ by at most spread times the larger one."""
    items = [chr(ord("A") + j) for j in range(m)]
    players = []
    big = Fraction(rng.randint(1, top))
    for _ in range(n):
        if spread is None:
            first = Fraction(rng.randint(0, top))
        else:
            lo = (1 - spread) * big
            first = lo + (big - lo) * Fraction(rng.randint(0, 8), 8)
        margs = [first]
        for _ in range(m - 1):
            margs.append(margs[-1] * Fraction(rng.randint(0, 4), 4))
        players.append(uniform_submodular(items, margs))
    return sg.sequential_instance(players, items, fmt)


def random_graphical_matroid(rng: random.Random, vertices: int = 5, extra: int | None = None) -> WeightedMatroid:
    """Connected multigraph: a random spanning tree plus extra random edges
    (parallel edges allowed, no loops); weights are distinct integers."""
    if vertices < 2:
        raise ValueError("need at least two vertices")
    vs = [f"v{i}" for i in range(vertices)]
    order = vs[:]
    rng.shuffle(order)
    edges = []
    for i in range(1, vertices):
        edges.append((order[i], order[rng.randrange(i)]))
    extra = rng.randint(1, vertices) if extra is None else extra
    for _ in range(extra):
        u, w = rng.sample(vs, 2)
        edges.append((u, w))
    names = [f"e{i + 1}" for i in range(len(edges))]
    weights = rng.sample(range(1, 10 * len(edges) + 1), len(edges))
    g = GraphicalMatroid(vs, [(nm, u, w) for nm, (u, w) in zip(names, edges)])
    return weighted(g, dict(zip(names, weights)))


def random_instance(kind: str, seed: int, **size):
    rng = random.Random(seed)
    if kind == "unit_demand":
        return random_unit_demand(rng, size.get("n", 3), size.get("m", 3))
    if kind == "additive":
        return random_additive(rng, size.get("n", 3), size.get("m", 3))
    if kind == "uniform_submodular":
        return random_uniform_submodular(rng, size.get("n", 3), size.get("m", 2), size.get("spread"))
    if kind == "graphical_matroid":
        return random_graphical_matroid(rng, size.get("vertices", 5))
    raise ValueError(f"unknown generator kind {kind!r}")


SCENARIOS = {
    "figure1": figure1,
    "submodular_unbounded": submodular_unbounded,
    "second_price_additive": second_price_additive,
    "second_price_unit_demand": second_price_unit_demand,
    "multi_item_nonexistence": multi_item_nonexistence,
    "dominated_strategy_spe": dominated_strategy_spe,
}
