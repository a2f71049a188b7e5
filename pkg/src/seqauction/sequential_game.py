"""Sequential first/second-price item auctions.

Rounds are sold in order; a round is a tuple of items sold at the same time
in separate auctions. The backward-induction solver handles singleton
rounds. Stage games are externality auctions whose entries combine the
marginal value of the item with the solved continuation of the subgame
that follows each possible winner.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Callable, Hashable, Iterable, Mapping, Sequence

from . import stage_auction as sa
from .stage_auction import FIRST, Bid, Matrix, StageOutcome
from .valuations import (
    Valuation,
    brute_force_optimal_allocation,
    money_str,
    to_money,
    valuation_from_json,
)

Winners = tuple[int, ...]

DEFAULT_MAX_STATES = 200_000


@dataclass(frozen=True)
class AuctionInstance:
    players: tuple[Valuation, ...]
    rounds: tuple[tuple[str, ...], ...]
    fmt: str = FIRST

    def __post_init__(self) -> None:
        if len(self.players) < 2:
            raise ValueError("need at least two players")
        if self.fmt not in sa.FORMATS:
            raise ValueError(f"format must be one of {sa.FORMATS}")
        seen: set[str] = set()
        for r in self.rounds:
            if not r:
                raise ValueError("empty round")
            for item in r:
                if item in seen:
                    raise ValueError(f"item {item!r} sold twice")
                seen.add(item)
        for k, v in enumerate(self.players):
            extra = set(v.items) - seen
            if extra:
                raise ValueError(f"player {k} values items not for sale: {sorted(extra)}")

    @property
    def items(self) -> tuple[str, ...]:
        return tuple(x for r in self.rounds for x in r)

    @property
    def n(self) -> int:
        return len(self.players)

    @property
    def sequential(self) -> bool:
        return all(len(r) == 1 for r in self.rounds)

    def value(self, i: int, bundle: Iterable[str]) -> Fraction:
        """Player i's value; items it never mentions are worth nothing to it."""
        v = self.players[i]
        return v.value(set(bundle).intersection(v.items))

    def with_format(self, fmt: str) -> "AuctionInstance":
        return AuctionInstance(self.players, self.rounds, fmt)

    def to_json(self) -> dict:
        return {
            "players": [v.to_json() for v in self.players],
            "rounds": [list(r) for r in self.rounds],
            "format": self.fmt,
        }


def instance_from_json(obj: Mapping) -> AuctionInstance:
    players = tuple(valuation_from_json(p) for p in obj["players"])
    rounds = tuple(tuple(r) for r in obj["rounds"])
    return AuctionInstance(players, rounds, obj.get("format", FIRST))


def sequential_instance(players: Sequence[Valuation], items: Sequence[str], fmt: str = FIRST) -> AuctionInstance:
    return AuctionInstance(tuple(players), tuple((x,) for x in items), fmt)


@dataclass(frozen=True)
class GameReport:
    """Outcome of one equilibrium path.

    Attributes:
        allocation: winner of each item, in sale order.
        prices: price paid for each item, in sale order.
        bundles: items held by each player.
        utilities: value of the bundle minus total payments, per player.
        welfare: total value of the bundles.
        opt: best achievable welfare.
        poa: opt / welfare, or None when welfare is 0 and opt is not.
    """

    items: tuple[str, ...]
    allocation: tuple[int, ...]
    prices: tuple[Fraction, ...]
    bundles: tuple[frozenset, ...]
    utilities: tuple[Fraction, ...]
    welfare: Fraction
    opt: Fraction
    poa: Fraction | None

    def to_json(self) -> dict:
        return {
            "allocation": {x: w for x, w in zip(self.items, self.allocation)},
            "prices": {x: money_str(p) for x, p in zip(self.items, self.prices)},
            "bundles": [sorted(b) for b in self.bundles],
            "utilities": [money_str(u) for u in self.utilities],
            "welfare": money_str(self.welfare),
            "opt": money_str(self.opt),
            "poa": "inf" if self.poa is None else money_str(self.poa),
        }


def make_report(
    instance: AuctionInstance,
    winners: Sequence[int],
    prices: Sequence[Fraction],
    opt: Fraction | None = None,
) -> GameReport:
    items = instance.items
    n = instance.n
    bundles = [set() for _ in range(n)]
    paid = [Fraction(0)] * n
    for x, w, p in zip(items, winners, prices):
        bundles[w].add(x)
        paid[w] += p
    vals = [instance.value(i, bundles[i]) for i in range(n)]
    welfare = sum(vals, Fraction(0))
    if opt is None:
        opt = _opt(instance)
    poa = None if welfare == 0 and opt > 0 else (Fraction(1) if opt == 0 else opt / welfare)
    return GameReport(
        items,
        tuple(winners),
        tuple(prices),
        tuple(frozenset(b) for b in bundles),
        tuple(vals[i] - paid[i] for i in range(n)),
        welfare,
        opt,
        poa,
    )


def _opt(instance: AuctionInstance) -> Fraction:
    class _View:
        def __init__(self, i):
            self.i = i

        def value(self, bundle):
            return instance.value(self.i, bundle)

    return brute_force_optimal_allocation([_View(i) for i in range(instance.n)], instance.items)[1]


# ---------------------------------------------------------------------------
# backward induction

@dataclass(frozen=True)
class SpeNode:
    """Solved stage at one history of winners."""

    winners: Winners
    item: str
    matrix: Matrix
    bids: tuple[Bid, ...]
    outcome: StageOutcome
    future: tuple[Fraction, ...]


@dataclass
class SpeSolution:
    """Stage profile at every reachable winner history.

    ``key`` maps a winner history to the memo key; two histories with the
    same key must have the same future play and the same marginal values.
    """

    instance: AuctionInstance
    policy: str
    key: Callable[[Winners], Hashable]
    nodes: dict = field(default_factory=dict)

    def node(self, winners: Winners) -> SpeNode:
        return self.nodes[self.key(tuple(winners))]

    def path(self) -> tuple[Winners, tuple[Fraction, ...]]:
        winners: Winners = ()
        prices: list[Fraction] = []
        for _ in self.instance.items:
            out = self.node(winners).outcome
            winners += (out.winner,)
            prices.append(out.price)
        return winners, tuple(prices)


class _Solver:
    def __init__(self, instance: AuctionInstance, key, max_states: int):
        if not instance.sequential:
            raise ValueError("multi-item round present; use grid_stage_equilibrium")
        self.inst = instance
        self.items = instance.items
        self.n = instance.n
        self.key = key
        self.max_states = max_states
        self.values: dict[tuple[int, frozenset], Fraction] = {}

    def value(self, i: int, bundle: frozenset) -> Fraction:
        k = (i, bundle)
        if k not in self.values:
            self.values[k] = self.inst.value(i, bundle)
        return self.values[k]

    def bundles(self, winners: Winners) -> list[frozenset]:
        out: list[set] = [set() for _ in range(self.n)]
        for x, w in zip(self.items, winners):
            out[w].add(x)
        return [frozenset(b) for b in out]

    def marginals(self, winners: Winners) -> list[Fraction]:
        item = self.items[len(winners)]
        return [
            self.value(i, b | {item}) - self.value(i, b)
            for i, b in enumerate(self.bundles(winners))
        ]

    def stage_matrix(self, winners: Winners, conts: Sequence[Sequence[Fraction]]) -> Matrix:
        marg = self.marginals(winners)
        n = self.n
        return tuple(
            tuple((marg[i] if j == i else Fraction(0)) + conts[j][i] for j in range(n))
            for i in range(n)
        )


def continuation_matrix(
    instance: AuctionInstance, winners: Winners, solution: SpeSolution
) -> Matrix:
    """Stage matrix at a history: own marginal value on the diagonal plus
    each player's solved continuation utility after each possible winner."""
    s = _Solver(instance, solution.key, DEFAULT_MAX_STATES)
    winners = tuple(winners)
    if len(winners) >= len(instance.items):
        raise ValueError("no item left to sell")
    conts = []
    for j in range(instance.n):
        child = winners + (j,)
        if len(child) == len(instance.items):
            conts.append((Fraction(0),) * instance.n)
            continue
        k = solution.key(child)
        if k not in solution.nodes:
            raise KeyError(f"child state {child} is not solved")
        conts.append(solution.nodes[k].future)
    return s.stage_matrix(winners, conts)


def solve_spe(
    instance: AuctionInstance,
    policy: str = "canonical",
    state_key: Callable[[Winners], Hashable] | None = None,
    max_states: int = DEFAULT_MAX_STATES,
    max_outcomes: int = 5000,
):
    """Backward induction over winner histories.

    With ``policy="canonical"`` every stage uses the canonical stage
    equilibrium and an ``SpeSolution`` is returned. With ``policy="all"``
    every elimination-compatible stage outcome is explored (both ends of
    each price interval) and the distinct equilibrium paths are returned as
    a list of (winners, prices) pairs.
    """
    key = state_key or (lambda w: w)
    if policy == "canonical":
        return _solve_canonical(instance, key, max_states)
    if policy == "all":
        return _solve_all(instance, max_states, max_outcomes)
    raise ValueError(f"unknown policy {policy!r}")


def _solve_canonical(instance, key, max_states) -> SpeSolution:
    s = _Solver(instance, key, max_states)
    sol = SpeSolution(instance, "canonical", key)
    zeros = (Fraction(0),) * s.n
    m = len(s.items)

    def future(winners: Winners) -> tuple[Fraction, ...]:
        if len(winners) == m:
            return zeros
        k = key(winners)
        node = sol.nodes.get(k)
        if node is not None:
            return node.future
        if len(sol.nodes) >= max_states:
            raise RuntimeError(f"more than {max_states} states; pass a coarser state_key")
        conts = [future(winners + (j,)) for j in range(s.n)]
        mat = s.stage_matrix(winners, conts)
        bids, out = sa.canonical_equilibrium(mat, instance.fmt)
        marg = s.marginals(winners)
        w = out.winner
        fut = tuple(
            (marg[i] - out.price if i == w else Fraction(0)) + conts[w][i] for i in range(s.n)
        )
        sol.nodes[k] = SpeNode(winners, s.items[len(winners)], mat, bids, out, fut)
        return fut

    future(())
    return sol


def _solve_all(instance, max_states, max_outcomes):
    """Every path reachable by choosing, at each node independently, any
    elimination-compatible stage outcome given the choices below it."""
    s = _Solver(instance, None, max_states)
    m = len(s.items)
    n = s.n
    memo: dict[Winners, list] = {}

    def outcomes(winners: Winners) -> list:
        # each entry: (future utilities, winners suffix, prices suffix)
        if len(winners) == m:
            return [((Fraction(0),) * n, (), ())]
        if winners in memo:
            return memo[winners]
        if len(memo) >= max_states:
            raise RuntimeError(f"more than {max_states} states")
        children = [outcomes(winners + (j,)) for j in range(n)]
        marg = s.marginals(winners)
        found: dict = {}
        for choice in product(*children):
            conts = [c[0] for c in choice]
            mat = s.stage_matrix(winners, conts)
            stage = []
            for c in sa.enumerate_compatible_outcomes(mat, fixed_tie_break=True):
                iv = c.interval
                prices = {iv.hi}
                if iv.lo_closed:
                    prices.add(iv.lo)
                stage += [(c.winner, p) for p in sorted(prices)]
            if not stage:
                out = sa.canonical_equilibrium(mat, instance.fmt)[1]
                stage = [(out.winner, out.price)]
            for w, p in stage:
                fut = tuple(
                    (marg[i] - p if i == w else Fraction(0)) + conts[w][i] for i in range(n)
                )
                entry = (fut, (w,) + choice[w][1], (p,) + choice[w][2])
                found.setdefault((fut, entry[1]), entry)
                if len(found) > max_outcomes:
                    raise RuntimeError(f"more than {max_outcomes} equilibrium outcomes at one node")
        memo[winners] = list(found.values())
        return memo[winners]

    return [(w, p) for _, w, p in outcomes(())]


def play(solution: SpeSolution, opt: Fraction | None = None) -> GameReport:
    winners, prices = solution.path()
    return make_report(solution.instance, winners, prices, opt)


# ---------------------------------------------------------------------------
# verification of full-history strategy profiles

History = tuple[tuple[Bid, ...], ...]


@dataclass(frozen=True)
class StrategyProfile:
    """Bids as a function of the full bid history (singleton rounds).

    Attributes:
        bids: history -> one bid per player for the current item.
        breakpoints: history -> bid levels at which the profile's later
            behaviour changes (besides who wins the current item).
        state_key: optional history -> hashable summary. Histories sharing
            a key must lead to the same future play and the same marginal
            values; the verifier then checks each key once.
    """

    bids: Callable[[History], Sequence[Bid]]
    breakpoints: Callable[[History], Iterable[Bid]] = lambda h: ()
    state_key: Callable[[History], Hashable] | None = None


@dataclass(frozen=True)
class Violation:
    history: History
    player: int
    deviation: Bid
    gain: Fraction


@dataclass(frozen=True)
class SpeVerdict:
    """ok is True (no improving deviation found), False (violation
    recorded) or None (a cap was hit before the search finished)."""

    ok: bool | None
    violation: Violation | None
    nodes_checked: int
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok is True


def verify_spe(
    instance: AuctionInstance,
    profile: StrategyProfile,
    step: object = Fraction(1, 10**6),
    max_nodes: int = 50_000,
    max_depth: int | None = None,
) -> SpeVerdict:
    """One-shot deviation check at every node reachable by deviations.

    At each node every player tries bidding 0, each opponent's amount
    (plain and plus), one step above the top opposing amount, and each
    declared breakpoint (plain, plus, and one step either side). Stage
    payoffs depend only on who wins and the price, and later play only
    changes at declared breakpoints, so these candidates cover every
    distinct continuation. Hitting a cap yields ok=None, never a pass.
    """
    if not instance.sequential:
        raise ValueError("verify_spe handles singleton rounds only")
    step = to_money(step)
    items = instance.items
    n, m = instance.n, len(items)
    fmt = instance.fmt
    key = profile.state_key or (lambda h: h)
    fut_memo: dict = {}
    values: dict = {}

    def val(i: int, bundle: frozenset) -> Fraction:
        k = (i, bundle)
        if k not in values:
            values[k] = instance.value(i, bundle)
        return values[k]

    def bundles(h: History) -> list[frozenset]:
        out: list[set] = [set() for _ in range(n)]
        for x, bids in zip(items, h):
            out[sa.outcome(bids, fmt).winner].add(x)
        return [frozenset(b) for b in out]

    def prescribed(h: History) -> tuple[Bid, ...]:
        b = tuple(profile.bids(h))
        if len(b) != n:
            raise ValueError("profile must give one bid per player")
        return b

    def future(h: History) -> tuple[Fraction, ...]:
        """Utility from the current item on, following the profile."""
        k = key(h)
        if k in fut_memo:
            return fut_memo[k]
        start = bundles(h)
        cur = [set(b) for b in start]
        paid = [Fraction(0)] * n
        hh = h
        for d in range(len(h), m):
            bids = prescribed(hh)
            out = sa.outcome(bids, fmt)
            cur[out.winner].add(items[d])
            paid[out.winner] += out.price
            hh = hh + (bids,)
        res = tuple(
            val(i, frozenset(cur[i])) - val(i, start[i]) - paid[i] for i in range(n)
        )
        fut_memo[k] = res
        return res

    def payoff(h: History, bids: tuple[Bid, ...], i: int) -> Fraction:
        out = sa.outcome(bids, fmt)
        stage = Fraction(0)
        if out.winner == i:
            b = bundles(h)[i]
            stage = val(i, b | {items[len(h)]}) - val(i, b) - out.price
        rest = future(h + (bids,)) if len(h) + 1 < m else (Fraction(0),) * n
        return stage + rest[i]

    def candidates(h: History, bids: tuple[Bid, ...], i: int) -> set[Bid]:
        cands = {sa.ZERO}
        others = [b for k, b in enumerate(bids) if k != i]
        for b in others:
            cands |= {Bid(b.amount), Bid(b.amount, True)}
        top = max(others)
        cands.add(Bid(top.amount + step))
        for b in profile.breakpoints(h):
            for a in (b.amount - step, b.amount, b.amount + step):
                if a >= 0:
                    cands |= {Bid(a), Bid(a, True)}
        return cands

    checked = 0
    seen = set()
    frontier: list[History] = [()]
    while frontier:
        h = frontier.pop()
        k = key(h)
        if k in seen:
            continue
        seen.add(k)
        checked += 1
        if checked > max_nodes:
            return SpeVerdict(None, None, checked - 1, f"node cap {max_nodes} reached")
        bids = prescribed(h)
        children = {bids}
        for i in range(n):
            base = payoff(h, bids, i)
            for c in sorted(candidates(h, bids, i)):
                trial = list(bids)
                trial[i] = c
                trial_t = tuple(trial)
                gain = payoff(h, trial_t, i) - base
                if gain > 0:
                    return SpeVerdict(False, Violation(h, i, c, gain), checked)
                children.add(trial_t)
        if len(h) + 1 < m:
            if max_depth is not None and len(h) + 1 > max_depth:
                return SpeVerdict(None, None, checked, f"depth cap {max_depth} reached")
            frontier.extend(h + (b,) for b in children)
    return SpeVerdict(True, None, checked)


def winners_of(history: History, fmt: str) -> Winners:
    return tuple(sa.outcome(b, fmt).winner for b in history)


def solution_profile(solution: SpeSolution) -> StrategyProfile:
    """Full-history profile that plays the solved stage bids at whatever
    winner history the bids produced."""
    fmt = solution.instance.fmt

    def bids(h: History) -> tuple[Bid, ...]:
        return solution.node(winners_of(h, fmt)).bids

    def key(h: History):
        return solution.key(winners_of(h, fmt))

    return StrategyProfile(bids=bids, state_key=key)


# ---------------------------------------------------------------------------
# simultaneous rounds

@dataclass(frozen=True)
class GridEquilibrium:
    """A pure equilibrium of a simultaneous round on the bid grid."""

    items: tuple[str, ...]
    bids: tuple[tuple[Bid, ...], ...]  # per item, one bid per player
    winners: tuple[int, ...]
    prices: tuple[Fraction, ...]


@dataclass(frozen=True)
class NoPureEquilibriumOnGrid:
    """No grid profile is a pure equilibrium.

    ``cycle`` is a best-response cycle: profiles (per item, one bid per
    player) visited by round-robin best responses until one repeats.
    """

    items: tuple[str, ...]
    grid: Fraction
    cycle: tuple[tuple[tuple[Bid, ...], ...], ...]
    movers: tuple[int, ...]


class RoundGame:
    """Stage game of one round given solved continuations.

    ``payoff(k, winners, prices)`` is player k's marginal value of the items
    it wins this round, plus its continuation utility after that joint
    outcome, minus the prices it pays.
    """

    def __init__(self, instance: AuctionInstance, winners: Winners, continuation):
        self.inst = instance
        self.hist = tuple(winners)
        self.r = len(self.hist)
        # locate the round that starts after the sold items
        sold = 0
        for idx, rd in enumerate(instance.rounds):
            if sold == self.r:
                self.round_items = rd
                break
            sold += len(rd)
        else:
            raise ValueError("history does not end at a round boundary")
        self.n = instance.n
        self.continuation = continuation
        self.base = [set() for _ in range(self.n)]
        for x, w in zip(instance.items, self.hist):
            self.base[w].add(x)
        self._val: dict = {}

    def gross(self, k: int, joint: tuple[int, ...]) -> Fraction:
        """Payoff of k before prices for a joint winner vector."""
        key = (k, joint)
        if key not in self._val:
            won = {x for x, w in zip(self.round_items, joint) if w == k}
            b = self.base[k]
            self._val[key] = (
                self.inst.value(k, b | won) - self.inst.value(k, b) + self.continuation(joint)[k]
            )
        return self._val[key]


def round_continuation(instance: AuctionInstance, winners: Winners, policy: str = "canonical"):
    """Continuation utilities after each joint outcome of the round that
    starts at ``winners``, solving the later singleton rounds."""
    rest = None
    sold = 0
    for idx, rd in enumerate(instance.rounds):
        if sold == len(winners):
            rest = instance.rounds[idx + 1:]
            break
        sold += len(rd)
    if rest is None:
        raise ValueError("history does not end at a round boundary")
    cache: dict = {}
    n = instance.n
    if not rest:
        return lambda joint: (Fraction(0),) * n
    if any(len(r) != 1 for r in rest):
        raise ValueError("later rounds must be singletons")
    done = instance.rounds[: len(instance.rounds) - len(rest)]
    prefix_items = tuple(x for r in done for x in r)

    def cont(joint):
        if joint not in cache:
            full = tuple(winners) + tuple(joint)
            sub = _subgame(instance, prefix_items, full)
            sol = _solve_canonical(sub, lambda w: w, DEFAULT_MAX_STATES)
            cache[joint] = sol.node(()).future
        return cache[joint]

    return cont


class _Fixed(Valuation):
    """Valuation of the remaining items given a bundle already held."""

    kind = "fixed"

    def __init__(self, base: Valuation, held: frozenset, items: tuple[str, ...]):
        self.base = base
        self.held = held
        self.items = items
        self._hv = base.value(held.intersection(base.items))

    def _value(self, s: frozenset) -> Fraction:
        return self.base.value((self.held | s).intersection(self.base.items)) - self._hv


def _subgame(instance: AuctionInstance, sold: tuple[str, ...], winners: Winners) -> AuctionInstance:
    held = [set() for _ in range(instance.n)]
    for x, w in zip(sold, winners):
        held[w].add(x)
    rest_rounds = tuple(r for r in instance.rounds if r[0] not in sold)
    rest_items = tuple(x for r in rest_rounds for x in r)
    players = tuple(
        _Fixed(v, frozenset(held[i]), rest_items) for i, v in enumerate(instance.players)
    )
    return AuctionInstance(players, rest_rounds, instance.fmt)


def _item_menu(n: int, w: int, s: int | None, plus: bool, zero: bool, k: int):
    """For player k on one item: (extra cost over the price to win, or
    None if k already wins; winner if k bids plain 0, or None if k cannot
    lose). ``zero`` marks the all-zero configuration."""
    if zero:
        if k == w:
            return None, (None if w == 0 else 0)
        # w bids 0+ unless it is player 0
        if w == 0 or k < w:
            return 0, w
        return 1, w
    if k == w:
        return None, s
    if not plus:
        # w and s tie at the plain price; w < s holds
        return 0, w
    return (0 if k < w else 1), w


def grid_stage_equilibrium(
    instance: AuctionInstance,
    winners: Winners = (),
    grid: object = Fraction(1, 4),
    top: object | None = None,
    continuation=None,
    max_profiles: int = 2 * 10**6,
    find_all: bool = False,
):
    """Exhaustive pure-equilibrium search for a simultaneous round.

    In a first-price item auction any pure equilibrium can be rewritten,
    without changing outcomes or incentives, so that on each item the
    winner bids the price (plain or plus), one backer bids the price plain
    and everyone else bids 0 (at price 0 all others bid 0). The search runs
    over these forms: winner, backer and plus flag per item, prices on the
    grid up to ``top``. For fixed forms each no-deviation condition is
    linear in the prices, so the last item's feasible prices come out as
    an interval. Deviations are restricted to the same grid.

    Returns a GridEquilibrium (or all of them with ``find_all``) or a
    NoPureEquilibriumOnGrid carrying a best-response cycle.
    """
    g = to_money(grid)
    if g <= 0:
        raise ValueError("grid step must be positive")
    cont = continuation or round_continuation(instance, winners)
    game = RoundGame(instance, winners, cont)
    items = game.round_items
    r = len(items)
    n = instance.n
    if instance.fmt != FIRST:
        raise ValueError("grid search implements first-price rounds")
    if top is None:
        top = max(
            game.gross(k, j) for k in range(n) for j in product(range(n), repeat=r)
        ) - min(game.gross(k, j) for k in range(n) for j in product(range(n), repeat=r))
    top = to_money(top)
    steps = int(top / g)
    if (steps + 1) ** max(r - 1, 0) * (n * n * 2) ** r > max_profiles:
        raise ValueError("grid too fine for enumeration")

    forms = []
    for w in range(n):
        forms.append((w, None, False, True))
        for s in range(n):
            if s == w:
                continue
            forms.append((w, s, True, False))
            if w < s:
                forms.append((w, s, False, False))
    subsets = list(product((False, True), repeat=r))
    found = []
    for combo in product(forms, repeat=r):
        menus = [
            [_item_menu(n, w, s, plus, zero, k) for (w, s, plus, zero) in combo] for k in range(n)
        ]
        cur_w = tuple(f[0] for f in combo)
        # constraints: const + sum coef_j * p_j >= 0
        cons = []
        feasible = True
        for k in range(n):
            cur_gross = game.gross(k, cur_w)
            cur_coef = [-1 if cur_w[j] == k else 0 for j in range(r)]
            for pick in subsets:
                joint = []
                const = cur_gross
                coef = list(cur_coef)
                ok = True
                for j in range(r):
                    extra, lose_to = menus[k][j]
                    if pick[j]:
                        joint.append(k)
                        if extra is not None:
                            const -= extra * g
                        coef[j] += 1
                    else:
                        if lose_to is None:
                            ok = False
                            break
                        joint.append(lose_to if cur_w[j] == k else cur_w[j])
                if not ok:
                    continue
                const -= game.gross(k, tuple(joint))
                if all(c == 0 for c in coef):
                    if const < 0:
                        feasible = False
                        break
                    continue
                cons.append((const, coef))
            if not feasible:
                break
        if not feasible:
            continue
        fixed_zero = [f[3] for f in combo]
        ranges = [[Fraction(0)] if z else [g * t for t in range(1, steps + 1)] for z in fixed_zero]
        for head in product(*ranges[:-1]):
            lo, hi = (ranges[-1][0], ranges[-1][-1]) if ranges[-1] else (None, None)
            if lo is None:
                break
            bad = False
            for const, coef in cons:
                c = const + sum(coef[j] * head[j] for j in range(r - 1))
                a = coef[-1]
                if a == 0:
                    if c < 0:
                        bad = True
                        break
                elif a > 0:
                    lo = max(lo, -c / a)
                else:
                    hi = min(hi, c / -a)
            if bad or lo > hi:
                continue
            first = lo if fixed_zero[-1] else g * max(1, -(-lo // g))
            last = hi
            p = first
            while p <= last:
                prices = tuple(head) + (p,)
                found.append(_realize(items, combo, prices, n))
                if not find_all:
                    return found[0]
                p += g
                if fixed_zero[-1]:
                    break
    if found:
        return found
    return _best_response_cycle(game, items, g, top)


def _realize(items, combo, prices, n) -> GridEquilibrium:
    per_item = []
    for (w, s, plus, zero), p in zip(combo, prices):
        bids = [sa.ZERO] * n
        if zero:
            if w != 0:
                bids[w] = Bid(Fraction(0), True)
        else:
            bids[w] = Bid(p, plus)
            bids[s] = Bid(p)
        per_item.append(tuple(bids))
    return GridEquilibrium(tuple(items), tuple(per_item), tuple(f[0] for f in combo), tuple(prices))


def _round_outcome(profile, n):
    return [sa.outcome(bids, FIRST) for bids in profile]


def _best_response(game: RoundGame, profile, k: int, g: Fraction):
    """Exact grid best response of player k: for each subset of items to
    win, bid the cheapest winning grid bid on those and 0 elsewhere."""
    r = len(profile)
    n = game.n
    options = []
    for pick in product((False, True), repeat=r):
        new = []
        for j in range(r):
            others = [b for i, b in enumerate(profile[j]) if i != k]
            if pick[j]:
                top = max(others)
                cand = [Bid(top.amount), Bid(top.amount, True), Bid(top.amount + g)]
                chosen = None
                for c in cand:
                    trial = list(profile[j])
                    trial[k] = c
                    if sa.outcome(trial, FIRST).winner == k:
                        chosen = c
                        break
                new.append(chosen)
            else:
                new.append(sa.ZERO)
        trial_profile = []
        for j in range(r):
            b = list(profile[j])
            b[k] = new[j]
            trial_profile.append(tuple(b))
        options.append(tuple(trial_profile))
    def util(p):
        outs = _round_outcome(p, n)
        joint = tuple(o.winner for o in outs)
        paid = sum((o.price for o in outs if o.winner == k), Fraction(0))
        return game.gross(k, joint) - paid
    best = max(util(p) for p in options)
    if util(tuple(profile)) >= best:
        return tuple(profile), False
    for p in options:
        if util(p) == best:
            return p, True
    raise AssertionError


def _best_response_cycle(game: RoundGame, items, g: Fraction, top: Fraction) -> NoPureEquilibriumOnGrid:
    n = game.n
    r = len(items)
    profile = tuple((sa.ZERO,) * n for _ in range(r))
    seen: dict = {}
    trail = []
    movers = []
    k = 0
    idle = 0
    while True:
        state = (profile, k)
        if state in seen:
            start = seen[state]
            return NoPureEquilibriumOnGrid(
                tuple(items), g, tuple(trail[start:]), tuple(movers[start:])
            )
        seen[state] = len(trail)
        trail.append(profile)
        new, moved = _best_response(game, profile, k, g)
        movers.append(k)
        if moved:
            idle = 0
            profile = new
        else:
            idle += 1
            if idle >= n:
                raise RuntimeError("best-response dynamics converged; exhaustive search missed it")
        k = (k + 1) % n


# ---------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class SweepSummary:
    count: int
    worst: Fraction
    worst_index: int
    mean: float
    histogram: dict


def poa_sweep(
    generator: Callable[[random.Random], AuctionInstance],
    count: int,
    seed: int = 0,
    enumerate_limit: int = 256,
    bound: Fraction | None = None,
) -> SweepSummary:
    """Solve ``count`` seeded instances and record the worst OPT/welfare.

    Uses every explored equilibrium when n^m <= ``enumerate_limit``, else
    the canonical one. Raises AssertionError if ``bound`` is exceeded.
    """
    rng = random.Random(seed)
    worst = Fraction(1)
    worst_index = -1
    ratios = []
    for idx in range(count):
        inst = generator(rng)
        ratio = worst_ratio(inst, enumerate_limit)
        ratios.append(ratio)
        if ratio is None or ratio > worst:
            worst = ratio if ratio is not None else worst
            worst_index = idx
        if bound is not None and (ratio is None or ratio > bound):
            raise AssertionError(f"instance {idx}: ratio {ratio} exceeds {bound}")
    hist: dict = {}
    for q in ratios:
        b = "inf" if q is None else f"{float(q):.2f}"
        hist[b] = hist.get(b, 0) + 1
    finite = [float(q) for q in ratios if q is not None]
    mean = sum(finite) / len(finite) if finite else float("inf")
    return SweepSummary(count, worst, worst_index, mean, hist)


def worst_ratio(instance: AuctionInstance, enumerate_limit: int = 256) -> Fraction | None:
    opt = _opt(instance)
    n, m = instance.n, len(instance.items)
    if n**m <= enumerate_limit:
        paths = solve_spe(instance, "all")
    else:
        paths = [solve_spe(instance).path()]
    worst: Fraction | None = Fraction(1)
    for w, p in paths:
        rep = make_report(instance, w, p, opt)
        if rep.poa is None:
            return None
        worst = max(worst, rep.poa)
    return worst
