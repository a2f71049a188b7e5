"""Single-item first/second-price auctions with externalities.

A matrix ``v`` holds ``v[i][j]``, the value player ``i`` gets when player
``j`` wins. Players are numbered from 0. Bids carry a ``plus`` flag meaning
"infinitesimally above the amount"; a plus bid still pays its amount.

Ties go to the highest bid, then to the lowest player index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Sequence

from .valuations import to_money

Matrix = tuple[tuple[Fraction, ...], ...]

FIRST = "first"
SECOND = "second"
FORMATS = (FIRST, SECOND)


@dataclass(frozen=True, order=True)
class Bid:
    amount: Fraction
    plus: bool = False

    def __str__(self) -> str:
        return f"{self.amount}{'+' if self.plus else ''}"


ZERO = Bid(Fraction(0))


@dataclass(frozen=True)
class StageOutcome:
    winner: int
    price: Fraction
    bids: tuple[Bid, ...]


@dataclass(frozen=True)
class TauReport:
    """Removal thresholds of the elimination sweep.

    Attributes:
        tau: per-player removal price.
        order: players in removal order.
        gamma: per-player largest gain from winning, clamped at 0.
        events: (player, price, supporter) each time a surviving player's
            out-degree first drops to zero; supporter is None at price 0.
    """

    tau: tuple[Fraction, ...]
    order: tuple[int, ...]
    gamma: tuple[Fraction, ...]
    events: tuple[tuple[int, Fraction, int | None], ...]


@dataclass(frozen=True)
class AscendingState:
    winner: int
    setter: int
    price: Fraction


@dataclass(frozen=True)
class PriceInterval:
    lo: Fraction
    hi: Fraction
    lo_closed: bool = True
    hi_closed: bool = True

    def __contains__(self, p: Fraction) -> bool:
        above = p > self.lo or (self.lo_closed and p == self.lo)
        below = p < self.hi or (self.hi_closed and p == self.hi)
        return above and below

    def __str__(self) -> str:
        return f"{'[' if self.lo_closed else '('}{self.lo},{self.hi}{']' if self.hi_closed else ')'}"


@dataclass(frozen=True)
class CompatibleOutcome:
    winner: int
    interval: PriceInterval


@dataclass(frozen=True)
class OverbiddingGraph:
    price: Fraction
    edges: frozenset = field(default_factory=frozenset)


def as_matrix(rows: Sequence[Sequence[object]]) -> Matrix:
    m = tuple(tuple(to_money(x) for x in row) for row in rows)
    n = len(m)
    if n < 2:
        raise ValueError("need at least two players")
    if any(len(row) != n for row in m):
        raise ValueError("matrix must be square")
    return m


def normalize(v: Matrix) -> Matrix:
    return tuple(tuple(x - min(row) for x in row) for row in v)


def is_toxic(v: Matrix) -> bool:
    n = len(v)
    return all(v[i][i] < v[i][j] for i in range(n) for j in range(n) if j != i)


def has_edge(v: Matrix, i: int, j: int, p: Fraction) -> bool:
    """Edge i->j: with i holding the item at price p, j would rather take it."""
    return v[j][j] - p > v[j][i]


def overbidding_graph(v: Matrix, p: object) -> OverbiddingGraph:
    p = to_money(p)
    if p < 0:
        raise ValueError("price must be nonnegative")
    n = len(v)
    edges = frozenset(
        (i, j) for i in range(n) for j in range(n) if i != j and has_edge(v, i, j, p)
    )
    return OverbiddingGraph(p, edges)


def gammas(v: Matrix) -> tuple[Fraction, ...]:
    n = len(v)
    return tuple(
        max(Fraction(0), max(v[i][i] - v[i][j] for j in range(n) if j != i)) for i in range(n)
    )


def breakpoints(v: Matrix) -> list[Fraction]:
    """Prices at which some edge disappears, plus 0."""
    n = len(v)
    pts = {Fraction(0)}
    for j in range(n):
        for i in range(n):
            d = v[j][j] - v[j][i]
            if i != j and d > 0:
                pts.add(d)
    return sorted(pts)


def _sweep(v: Matrix) -> list[tuple[Fraction, frozenset, list[int]]]:
    """Run the elimination sweep over the breakpoints.

    Returns one phase per visited price: the survivors on arrival and the
    players removed at that price, in removal order.
    """
    n = len(v)
    alive = set(range(n))
    phases = []
    for p in breakpoints(v):
        if not alive:
            break
        arrived = frozenset(alive)
        removed = []
        while True:
            zero_in = [
                j for j in sorted(alive)
                if not any(has_edge(v, i, j, p) for i in alive if i != j)
            ]
            if not zero_in:
                break
            alive.discard(zero_in[0])
            removed.append(zero_in[0])
        phases.append((p, arrived, removed))
    # at the largest breakpoint no edge is left, so everyone has been removed
    assert not alive
    return phases


def _out_degree_zero(v: Matrix, i: int, p: Fraction, alive: frozenset) -> bool:
    return not any(has_edge(v, i, j, p) for j in alive if j != i)


def _supporter(v: Matrix, i: int, p: Fraction, alive: frozenset) -> int | None:
    """Lowest surviving j whose edge into i lasted at every price below p.

    At price 0 the edge condition is vacuous and the tie-break decides who
    takes over when i drops out: player 0 if everyone else bids plain 0, or
    a higher-index backer bidding 0+. Player 0 needs no backer at all.
    Returns -1 when nobody qualifies.
    """
    if p == 0:
        if i == 0:
            return None
        if v[i][i] >= v[i][0]:
            return 0
        return next((k for k in range(i + 1, len(v)) if v[i][i] >= v[i][k]), -1)
    for j in sorted(alive):
        if j != i and v[i][i] - v[i][j] >= p:
            return j
    return -1


def tau_thresholds(v: Matrix) -> TauReport:
    n = len(v)
    tau: list[Fraction] = [Fraction(0)] * n
    order: list[int] = []
    events: list[tuple[int, Fraction, int | None]] = []
    flagged: set[int] = set()
    for p, alive, removed in _sweep(v):
        for i in sorted(alive):
            if i not in flagged and _out_degree_zero(v, i, p, alive):
                flagged.add(i)
                s = _supporter(v, i, p, alive)
                events.append((i, p, None if s is None or s < 0 else s))
        for j in removed:
            tau[j] = p
            order.append(j)
    return TauReport(tuple(tau), tuple(order), gammas(v), tuple(events))


def _winning_profile(n: int, i: int, p: Fraction, supporter: int | None) -> tuple[Bid, ...]:
    bids = [ZERO] * n
    if supporter is None:
        return tuple(bids)
    bids[i] = Bid(p, True)
    bids[supporter] = Bid(p)
    return tuple(bids)


def canonical_equilibrium(v: Matrix, fmt: str = FIRST) -> tuple[tuple[Bid, ...], StageOutcome]:
    """Pure equilibrium read off the elimination sweep.

    The winner is the first surviving player whose out-degree drops to zero
    while a surviving in-neighbour still backs it; the winner bids p+ and
    the backer bids p, everyone else 0.
    """
    _check_format(fmt)
    n = len(v)
    if is_toxic(v):
        bids = (ZERO,) * n
        return bids, outcome(bids, fmt)
    for p, alive, _removed in _sweep(v):
        for i in sorted(alive):
            if not _out_degree_zero(v, i, p, alive):
                continue
            s = _supporter(v, i, p, alive)
            if s is not None and s < 0:
                continue
            bids = _zero_price_profile(v, i, s) if p == 0 else _winning_profile(n, i, p, s)
            return bids, outcome(bids, fmt)
    bids = _tie_fallback(v)
    return bids, outcome(bids, fmt)


def _tie_fallback(v: Matrix) -> tuple[Bid, ...]:
    """Equilibrium when the tie-break rules out every price-0 candidate.

    Then each candidate i has nobody wanting the item from it, but a
    backer j < i would win the tie at 0. Lifting the price to the gap
    v[i][i] - v[i][j] lets j set the price strictly: i is indifferent to
    dropping out and nobody wants to take over, so it is an equilibrium,
    though the winner now bids above its threshold. Smallest gap first.
    """
    n = len(v)
    best = None
    for i in range(n):
        if any(has_edge(v, i, k, Fraction(0)) for k in range(n) if k != i):
            continue
        for j in range(1, i):
            gap = v[i][i] - v[i][j]
            if gap > 0 and (best is None or gap < best[0]):
                best = (gap, i, j)
    if best is None:
        raise RuntimeError("no equilibrium found for this matrix")
    gap, i, j = best
    return _winning_profile(n, i, gap, j)


def outcome(bids: Sequence[Bid], fmt: str = FIRST) -> StageOutcome:
    _check_format(fmt)
    bids = tuple(bids)
    if len(bids) < 2:
        raise ValueError("need at least two bids")
    w = max(range(len(bids)), key=lambda k: (bids[k], -k))
    if fmt == FIRST:
        price = bids[w].amount
    else:
        price = max(b for k, b in enumerate(bids) if k != w).amount
    return StageOutcome(w, price, bids)


def utility(v: Matrix, i: int, out: StageOutcome) -> Fraction:
    return v[i][i] - out.price if out.winner == i else v[i][out.winner]


def best_deviation_gain(v: Matrix, bids: Sequence[Bid], i: int, fmt: str = FIRST) -> Fraction:
    """Largest utility gain available to player i, as a supremum.

    Stage utility depends only on who wins and at what price, so the bids
    worth trying are 0 and each opponent's amount, plain and plus. When an
    opponent with a lower index already bids a+ the cheapest winning bid
    is a hair above a; its price tends to a, which is what we score, since
    a strict gain at the limit is also a strict gain for a close enough bid.
    """
    current = utility(v, i, outcome(bids, fmt))
    others = [b for k, b in enumerate(bids) if k != i]
    cands = {ZERO}
    for b in others:
        cands.add(Bid(b.amount))
        cands.add(Bid(b.amount, True))
    best = Fraction(0)
    for c in cands:
        trial = list(bids)
        trial[i] = c
        best = max(best, utility(v, i, outcome(trial, fmt)) - current)
    top = max(others)
    # the price of winning never drops below the top opposing amount
    best = max(best, v[i][i] - top.amount - current)
    return best


def verify_stage_nash(v: Matrix, bids: Sequence[Bid], fmt: str = FIRST) -> bool:
    bids = tuple(bids)
    if len(bids) != len(v):
        raise ValueError("one bid per player required")
    return all(best_deviation_gain(v, bids, i, fmt) <= 0 for i in range(len(v)))


def is_envy_free_second_price(v: Matrix, bids: Sequence[Bid]) -> bool:
    if not verify_stage_nash(v, bids, SECOND):
        raise ValueError("bids are not a second-price equilibrium")
    out = outcome(bids, SECOND)
    w, p = out.winner, out.price
    return not any(v[k][k] - p > v[k][w] for k in range(len(v)) if k != w)


def default_epsilon(v: Matrix) -> Fraction:
    """Half the largest common step of all within-row differences.

    With this step the ascending process lands exactly on every price at
    which a preference flips.
    """
    diffs = {abs(v[i][i] - v[i][j]) for i in range(len(v)) for j in range(len(v))}
    diffs.discard(Fraction(0))
    if not diffs:
        return Fraction(1)
    den = 1
    for d in diffs:
        den = den * d.denominator // gcd(den, d.denominator)
    g = 0
    for d in diffs:
        g = gcd(g, int(d * den))
    return Fraction(g, den) / 2


def ascending_equilibrium(
    v: Matrix, epsilon: object | None = None, fmt: str = FIRST
) -> tuple[tuple[Bid, ...], StageOutcome, tuple[AscendingState, ...]]:
    """Ascending process over states (winner, price setter, price).

    From (i, j, p): stop if nobody wants to take the item from i at p;
    otherwise the lowest such k takes over at p, or at p + epsilon if that
    state was already visited. An epsilon that divides every within-row
    difference keeps the process exact.
    """
    _check_format(fmt)
    n = len(v)
    eps = default_epsilon(v) if epsilon is None else to_money(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    if is_toxic(v):
        bids = (ZERO,) * n
        return bids, outcome(bids, fmt), ()
    # the start pair must be one the tie-break can hold at price 0: i is
    # player 0, or j is player 0, or j bids 0+ from above i
    start = next(
        (
            (i, j) for i in range(n) for j in range(n)
            if i != j and v[i][i] >= v[i][j] and (i == 0 or j == 0 or j > i)
        ),
        None,
    )
    if start is None:
        # every player strictly prefers player 0 (or a higher index) to
        # win, so nobody takes the item from player 0 at 0
        bids = (ZERO,) * n
        return bids, outcome(bids, fmt), ()
    state = AscendingState(start[0], start[1], Fraction(0))
    seen = {state}
    trace = [state]
    while True:
        i, p = state.winner, state.price
        k = next((k for k in range(n) if k != i and has_edge(v, i, k, p)), None)
        if k is None:
            break
        nxt = AscendingState(k, i, p)
        if nxt in seen:
            nxt = AscendingState(k, i, p + eps)
        seen.add(nxt)
        trace.append(nxt)
        state = nxt
    i, j, p = state.winner, state.setter, state.price
    backer = _supporter(v, i, Fraction(0), frozenset(range(n))) if p == 0 else j
    if p == 0 and backer != -1:
        bids = _zero_price_profile(v, i, backer)
    elif p == 0:
        # j < i would win a tie at exactly 0, so j sets the price one step up
        bids = _winning_profile(n, i, eps, j)
    else:
        bids = _winning_profile(n, i, p, j)
    return bids, outcome(bids, fmt), tuple(trace)


def _zero_price_profile(v: Matrix, i: int, j: int | None) -> tuple[Bid, ...]:
    """Realize "i wins at 0 backed by j" under the index tie-break.

    If i drops to 0 the item falls to the lowest index among the plain
    zero bids, so a backer above i has to bid 0+ to be the one left holding
    it; a backer below i bids plain 0 like everyone else.
    """
    n = len(v)
    bids = [ZERO] * n
    if j is None:
        return tuple(bids)
    bids[i] = Bid(Fraction(0), True)
    if j > i:
        bids[j] = Bid(Fraction(0), True)
    return tuple(bids)


def enumerate_compatible_outcomes(
    v: Matrix, fixed_tie_break: bool = False
) -> list[CompatibleOutcome]:
    """All (winner, price) pairs reachable by an equilibrium in closed bids.

    Winner i at price p qualifies iff p <= tau_i, nobody wants to take the
    item from i at p, and some j with tau_j >= p preferred i winning to j
    winning at every lower price. For fixed i these carve out one closed
    interval; at price 0 the last condition is vacuous.

    With ``fixed_tie_break`` the price-0 point is kept only if it can be
    realized under the lowest-index tie rule, which may open the interval
    at 0.
    """
    n = len(v)
    tau = tau_thresholds(v).tau
    out = []
    for i in range(n):
        lo = max([Fraction(0)] + [v[j][j] - v[j][i] for j in range(n) if j != i])
        hi = min(tau[i], max(min(tau[j], v[i][i] - v[i][j]) for j in range(n) if j != i))
        zero_ok = lo == 0
        if fixed_tie_break and zero_ok:
            zero_ok = _zero_price_realizable(v, i)
        if lo <= hi and hi > 0:
            out.append(CompatibleOutcome(i, PriceInterval(lo, hi, lo_closed=lo > 0 or zero_ok)))
        elif zero_ok:
            out.append(CompatibleOutcome(i, PriceInterval(Fraction(0), Fraction(0))))
    return out


def _zero_price_realizable(v: Matrix, i: int) -> bool:
    return _supporter(v, i, Fraction(0), frozenset(range(len(v)))) != -1


def _check_format(fmt: str) -> None:
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
