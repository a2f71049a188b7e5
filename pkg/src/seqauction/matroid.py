"""Matroid oracles and the sequential co-circuit auction.

Elements are strings. Every matroid keeps its ground set in a fixed order;
"lexicographic" choices compare sorted tuples of ground positions.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Iterable, Mapping, Sequence

from . import stage_auction as sa
from .valuations import Valuation, money_str, to_money

DIRECT = "direct"
PROCUREMENT = "procurement"
MAX_EXPLICIT = 10
MAX_SCAN = 16


class _Infinite:
    """Price of an element outside the optimum. Only ever compared."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFINITE"

    def __str__(self) -> str:
        return "inf"

    def __eq__(self, other) -> bool:
        return other is self

    def __hash__(self) -> int:
        return hash("INFINITE")

    def __lt__(self, other) -> bool:
        return False

    def __le__(self, other) -> bool:
        return other is self

    def __gt__(self, other) -> bool:
        return other is not self

    def __ge__(self, other) -> bool:
        return True


INFINITE = _Infinite()


class Matroid:
    """Base class: an ordered ground set and an independence test."""

    ground: tuple[str, ...]

    def independent(self, s: Iterable[str]) -> bool:
        raise NotImplementedError

    def contract(self, x: Iterable[str]) -> "Matroid":
        x = frozenset(x)
        if not x:
            return self
        return Contraction(self, x)

    def position(self, e: str) -> int:
        return self.ground.index(e)

    def key(self, s: Iterable[str]) -> tuple[int, ...]:
        return tuple(sorted(self.position(e) for e in s))


class UniformMatroid(Matroid):
    def __init__(self, ground: Sequence[str], k: int):
        if k < 0:
            raise ValueError("rank must be nonnegative")
        self.ground = tuple(ground)
        self.k = k

    def independent(self, s: Iterable[str]) -> bool:
        s = set(s)
        _check_subset(self, s)
        return len(s) <= self.k

    def __repr__(self) -> str:
        return f"UniformMatroid({self.ground}, {self.k})"


class GraphicalMatroid(Matroid):
    """Edges of a multigraph; a set is independent iff it has no cycle.

    ``edges`` holds (name, u, v); u == v is a loop, never independent.
    """

    def __init__(self, vertices: Sequence, edges: Sequence[tuple[str, object, object]]):
        self.vertices = tuple(vertices)
        self.edges = tuple((str(n), u, v) for n, u, v in edges)
        self.ground = tuple(n for n, _, _ in self.edges)
        if len(set(self.ground)) != len(self.ground):
            raise ValueError("edge names must be distinct")
        vs = set(self.vertices)
        for n, u, v in self.edges:
            if u not in vs or v not in vs:
                raise ValueError(f"edge {n} uses an unknown vertex")
        self._ends = {n: (u, v) for n, u, v in self.edges}

    def independent(self, s: Iterable[str]) -> bool:
        s = set(s)
        _check_subset(self, s)
        parent = {v: v for v in self.vertices}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in s:
            u, v = self._ends[e]
            ru, rv = find(u), find(v)
            if ru == rv:
                return False
            parent[ru] = rv
        return True

    def contract(self, x: Iterable[str]) -> "GraphicalMatroid":
        """Merge the endpoints of every contracted edge."""
        x = set(x)
        _check_subset(self, x)
        parent = {v: v for v in self.vertices}

        def find(a):
            while parent[a] != a:
                a = parent[a]
            return a

        for e in self.ground:
            if e in x:
                u, v = self._ends[e]
                ru, rv = find(u), find(v)
                if ru != rv:
                    parent[ru] = rv
        reps = tuple(dict.fromkeys(find(v) for v in self.vertices))
        edges = [(n, find(u), find(v)) for n, u, v in self.edges if n not in x]
        return GraphicalMatroid(reps, edges)

    def to_json(self, weights: Mapping[str, Fraction] | None = None) -> dict:
        out = []
        for n, u, v in self.edges:
            row = [str(u), str(v), n]
            if weights is not None:
                row.append(money_str(weights[n]))
            out.append(row)
        return {"vertices": [str(v) for v in self.vertices], "edges": out}

    def __repr__(self) -> str:
        return f"GraphicalMatroid({self.vertices}, {self.edges})"


class ExplicitMatroid(Matroid):
    """Independent sets listed explicitly, closed downward on input."""

    def __init__(self, ground: Sequence[str], independents: Iterable[Iterable[str]]):
        self.ground = tuple(ground)
        if len(self.ground) > MAX_EXPLICIT:
            raise ValueError(f"explicit matroids limited to {MAX_EXPLICIT} elements")
        fam = {frozenset()}
        for s in independents:
            s = frozenset(s)
            _check_subset(self, s)
            for r in range(len(s) + 1):
                fam.update(frozenset(c) for c in combinations(sorted(s), r))
        self.family = frozenset(fam)
        bad = exchange_violation(self.family)
        if bad is not None:
            raise ValueError(f"exchange property fails for {sorted(bad[0])} and {sorted(bad[1])}")

    def independent(self, s: Iterable[str]) -> bool:
        s = frozenset(s)
        _check_subset(self, s)
        return s in self.family


class Contraction(Matroid):
    """M / X for a generic oracle: S independent iff S plus a maximal
    independent subset of X is independent in M."""

    def __init__(self, base: Matroid, x: frozenset):
        _check_subset(base, x)
        self.base = base
        self.x = x
        self.ground = tuple(e for e in base.ground if e not in x)
        self.basis_x = frozenset(greedy_independent(base, [e for e in base.ground if e in x]))

    def independent(self, s: Iterable[str]) -> bool:
        s = frozenset(s)
        _check_subset(self, s)
        return self.base.independent(s | self.basis_x)


def exchange_violation(family: frozenset) -> tuple[frozenset, frozenset] | None:
    """First pair (A, B), |A| > |B|, with no element of A - B extending B."""
    for a in family:
        for b in family:
            if len(a) > len(b) and not any(b | {e} in family for e in a - b):
                return a, b
    return None


def _check_subset(m: Matroid, s) -> None:
    extra = set(s).difference(m.ground)
    if extra:
        raise KeyError(f"not in the ground set: {sorted(extra)}")


def greedy_independent(m: Matroid, order: Sequence[str]) -> list[str]:
    out: list[str] = []
    for e in order:
        if m.independent(out + [e]):
            out.append(e)
    return out


def rank(m: Matroid, s: Iterable[str] | None = None) -> int:
    s = m.ground if s is None else [e for e in m.ground if e in set(s)]
    return len(greedy_independent(m, s))


def contract(m: Matroid, x: Iterable[str]) -> Matroid:
    return m.contract(x)


def is_basis(m: Matroid, s: Iterable[str]) -> bool:
    s = set(s)
    return m.independent(s) and len(s) == rank(m)


def bases(m: Matroid) -> list[frozenset]:
    if len(m.ground) > MAX_SCAN:
        raise ValueError(f"basis enumeration limited to {MAX_SCAN} elements")
    r = rank(m)
    return [frozenset(c) for c in combinations(m.ground, r) if m.independent(c)]


def circuits(m: Matroid) -> list[frozenset]:
    """Minimal dependent sets, smallest first."""
    if len(m.ground) > MAX_SCAN:
        raise ValueError(f"circuit enumeration limited to {MAX_SCAN} elements")
    out: list[frozenset] = []
    for size in range(1, rank(m) + 2):
        for c in combinations(m.ground, size):
            fc = frozenset(c)
            if any(o <= fc for o in out):
                continue
            if not m.independent(fc):
                out.append(fc)
    return out


def closure(m: Matroid, s: Iterable[str]) -> frozenset:
    s = set(s)
    r = rank(m, s)
    return frozenset(e for e in m.ground if e in s or rank(m, s | {e}) == r)


def cocircuits(m: Matroid) -> list[frozenset]:
    """Complements of hyperplanes, in lexicographic order of ground positions."""
    if len(m.ground) > MAX_SCAN:
        raise ValueError(f"co-circuit enumeration limited to {MAX_SCAN} elements")
    r = rank(m)
    if r == 0:
        return []
    hyper = set()
    for c in combinations(m.ground, r - 1):
        if m.independent(c):
            hyper.add(closure(m, c))
    ground = set(m.ground)
    out = {frozenset(ground - h) for h in hyper}
    return sorted(out, key=m.key)


def find_cocircuit(
    m: Matroid, x: Iterable[str] = (), policy: str = "lexicographic", rng: random.Random | None = None
) -> frozenset:
    """A co-circuit of M / X. Policies: lexicographic (smallest sorted
    position tuple), random (uniform over co-circuits, seeded ``rng``),
    longest (largest co-circuit, lexicographic among equals)."""
    x = frozenset(x)
    if not m.independent(x):
        raise ValueError("won set must be independent")
    mx = m.contract(x)
    cands = cocircuits(mx)
    if not cands:
        raise ValueError("won set is already a basis")
    if policy == "lexicographic":
        return cands[0]
    if policy == "random":
        return (rng or random.Random(0)).choice(cands)
    if policy == "longest":
        return min(cands, key=lambda d: (-len(d), m.key(d)))
    raise ValueError(f"unknown co-circuit policy {policy!r}")


# ---------------------------------------------------------------------------
# weighted instances

@dataclass(frozen=True)
class WeightedMatroid:
    matroid: Matroid
    weights: tuple[tuple[str, Fraction], ...]
    mode: str = DIRECT

    def __post_init__(self) -> None:
        if self.mode not in (DIRECT, PROCUREMENT):
            raise ValueError("mode must be direct or procurement")
        if set(self.w) != set(self.matroid.ground):
            raise ValueError("need exactly one weight per element")

    @property
    def w(self) -> dict[str, Fraction]:
        return dict(self.weights)

    @property
    def distinct(self) -> bool:
        vals = [w for _, w in self.weights]
        return len(set(vals)) == len(vals)

    def better(self, a: Fraction, b: Fraction) -> bool:
        return a > b if self.mode == DIRECT else a < b

    def with_matroid(self, m: Matroid) -> "WeightedMatroid":
        w = self.w
        return WeightedMatroid(m, tuple((e, w[e]) for e in m.ground), self.mode)


def weighted(m: Matroid, weights: Mapping[str, object], mode: str = DIRECT) -> WeightedMatroid:
    return WeightedMatroid(m, tuple((e, to_money(weights[e])) for e in m.ground), mode)


def graph_from_json(obj: Mapping, mode: str = DIRECT) -> WeightedMatroid:
    edges = obj["edges"]
    verts = obj.get("vertices")
    if isinstance(verts, int):
        verts = [str(v) for v in range(verts)]
    g = GraphicalMatroid([str(v) for v in verts], [(e[2], str(e[0]), str(e[1])) for e in edges])
    return weighted(g, {e[2]: e[3] for e in edges}, obj.get("mode", mode))


def _order(inst: WeightedMatroid, elems: Iterable[str]) -> list[str]:
    """Best weight first; ground order among equals."""
    w = inst.w
    sign = -1 if inst.mode == DIRECT else 1
    return sorted(elems, key=lambda e: (sign * w[e], inst.matroid.position(e)))


def sort_greedy_basis(inst: WeightedMatroid) -> frozenset:
    return frozenset(greedy_independent(inst.matroid, _order(inst, inst.matroid.ground)))


def greedy_opt_basis(
    inst: WeightedMatroid, policy: str = "lexicographic", rng: random.Random | None = None
) -> tuple[frozenset, Fraction]:
    """Co-circuit greedy: repeatedly take the best element of a co-circuit
    of the matroid contracted by the picks so far."""
    m = inst.matroid
    picked: set[str] = set()
    r = rank(m)
    while len(picked) < r:
        d = find_cocircuit(m, picked, policy, rng)
        picked.add(_order(inst, d)[0])
    w = inst.w
    return frozenset(picked), sum((w[e] for e in picked), Fraction(0))


def brute_force_opt_basis(inst: WeightedMatroid) -> tuple[frozenset, Fraction]:
    w = inst.w
    best = None
    for b in bases(inst.matroid):
        val = sum((w[e] for e in b), Fraction(0))
        if best is None or inst.better(val, best[1]):
            best = (b, val)
    assert best is not None
    return best


def _opt_set(inst: WeightedMatroid) -> frozenset:
    return sort_greedy_basis(inst)


def vcg_exchange(inst: WeightedMatroid, i: str):
    """Best value among elements that can replace i in the optimum; 0 if
    none can. INFINITE if i is not in the optimum."""
    opt = _opt_set(inst)
    if i not in opt:
        return INFINITE
    w = inst.w
    rest = opt - {i}
    cands = [w[j] for j in inst.matroid.ground if j not in opt and inst.matroid.independent(rest | {j})]
    if not cands:
        return Fraction(0)
    return max(cands) if inst.mode == DIRECT else min(cands)


def vcg_circuit(inst: WeightedMatroid, i: str):
    """Over circuits through i, the best of each circuit's worst other value."""
    opt = _opt_set(inst)
    if i not in opt:
        return INFINITE
    w = inst.w
    vals = []
    for c in circuits(inst.matroid):
        if i in c and len(c) > 1:
            others = [w[j] for j in c if j != i]
            vals.append(min(others) if inst.mode == DIRECT else max(others))
    if not vals:
        return Fraction(0)
    return max(vals) if inst.mode == DIRECT else min(vals)


def vcg_welfare(inst: WeightedMatroid, i: str):
    """Clarke payment: others' best independent set without i, minus what
    the others get in the optimum (sign flipped for procurement)."""
    opt = _opt_set(inst)
    if i not in opt:
        return INFINITE
    w = inst.w
    m = inst.matroid
    others = [e for e in m.ground if e != i]
    if inst.mode == DIRECT:
        best = sum((w[e] for e in greedy_independent(m, _order(inst, others))), Fraction(0))
        return best - (sum((w[e] for e in opt), Fraction(0)) - w[i])
    without = _restrict(m, others)
    if rank(without) < rank(m):
        return Fraction(0)
    cheapest = sum((w[e] for e in greedy_independent(m, _order(inst, others))), Fraction(0))
    return cheapest - (sum((w[e] for e in opt), Fraction(0)) - w[i])


class _Restriction(Matroid):
    def __init__(self, base: Matroid, keep: Sequence[str]):
        self.base = base
        self.ground = tuple(e for e in base.ground if e in set(keep))

    def independent(self, s):
        return self.base.independent(s)


def _restrict(m: Matroid, keep: Sequence[str]) -> Matroid:
    return _Restriction(m, keep)


def vcg_price(inst: WeightedMatroid, i: str):
    """VCG price of i; the three formulas must agree or AssertionError."""
    a, b, c = vcg_exchange(inst, i), vcg_circuit(inst, i), vcg_welfare(inst, i)
    if not (a == b == c):
        raise AssertionError(f"VCG formulas disagree for {i}: {a}, {b}, {c}")
    return a


@dataclass(frozen=True)
class AuctionTrace:
    """Per round: co-circuit auctioned, winning element, price."""

    rounds: tuple[tuple[frozenset, str, Fraction], ...]
    warnings: tuple[str, ...] = ()

    @property
    def winners(self) -> frozenset:
        return frozenset(w for _, w, _ in self.rounds)

    @property
    def prices(self) -> dict[str, Fraction]:
        return {w: p for _, w, p in self.rounds}

    def to_json(self) -> dict:
        return {
            "rounds": [
                {"cocircuit": sorted(d), "winner": w, "price": money_str(p)} for d, w, p in self.rounds
            ],
            "basis": sorted(self.winners),
            "warnings": list(self.warnings),
        }


def _check_procurement(inst: WeightedMatroid, m: Matroid) -> None:
    if inst.mode == PROCUREMENT:
        for d in cocircuits(m):
            if len(d) < 2:
                raise ValueError(f"procurement needs co-circuits of size >= 2, found {sorted(d)}")


def run_sequential_basis_auction(
    inst: WeightedMatroid, policy: str = "lexicographic", seed: int = 0
) -> AuctionTrace:
    """Equilibrium play of the co-circuit auction: on each co-circuit of
    the current contraction the optimum element with the best current VCG
    price wins and pays that price."""
    rng = random.Random(seed)
    warnings = []
    if not inst.distinct:
        warnings.append("weights not distinct; ties broken by ground order")
    m = inst.matroid
    _check_procurement(inst, m)
    won: list[str] = []
    rounds = []
    r = rank(m)
    while len(won) < r:
        d = find_cocircuit(m, won, policy, rng)
        cur = inst.with_matroid(m.contract(won))
        _check_procurement(inst, cur.matroid)
        opt = _opt_set(cur)
        cands = [e for e in cur.matroid.ground if e in d and e in opt]
        prices = {e: vcg_exchange(cur, e) for e in cands}
        sign = -1 if inst.mode == DIRECT else 1
        winner = min(cands, key=lambda e: (sign * prices[e], m.position(e)))
        rounds.append((d, winner, prices[winner]))
        won.append(winner)
    return AuctionTrace(tuple(rounds), tuple(warnings))


def solve_basis_auction_spe(
    inst: WeightedMatroid, policy: str = "lexicographic", seed: int = 0
) -> AuctionTrace:
    """Independent route: backward induction over won sets, where each
    round is a first-price stage among the co-circuit's elements whose
    externality entries come from the solved subgames. Direct mode only."""
    if inst.mode != DIRECT:
        raise ValueError("backward-induction route implemented for direct mode")
    m = inst.matroid
    w = inst.w
    r = rank(m)
    rng = random.Random(seed)
    cocircuit_of: dict[frozenset, frozenset] = {}
    memo: dict[frozenset, tuple[dict, list]] = {}

    def cocircuit(won: frozenset) -> frozenset:
        if won not in cocircuit_of:
            cocircuit_of[won] = find_cocircuit(m, won, policy, rng)
        return cocircuit_of[won]

    def solve(won: frozenset):
        # returns (utility per element from here on, rounds from here on)
        if len(won) == r:
            return {}, []
        if won in memo:
            return memo[won]
        d = sorted(cocircuit(won), key=m.position)
        children = [solve(won | {e}) for e in d]
        if len(d) == 1:
            # no competitor: the element takes it for free
            util = dict(children[0][0])
            util[d[0]] = w[d[0]]
            res = (util, [(frozenset(d), d[0], Fraction(0))] + children[0][1])
            memo[won] = res
            return res
        mat = [
            [(w[a] if a == b else Fraction(0)) + children[jb][0].get(a, Fraction(0)) for jb, b in enumerate(d)]
            for a in d
        ]
        _, out = sa.canonical_equilibrium(mat)
        win = d[out.winner]
        util = dict(children[out.winner][0])
        util[win] = w[win] - out.price
        res = (util, [(frozenset(d), win, out.price)] + children[out.winner][1])
        memo[won] = res
        return res

    return AuctionTrace(tuple(solve(frozenset())[1]))


# ---------------------------------------------------------------------------
# participation graph

@dataclass(frozen=True)
class HallViolation:
    elements: frozenset
    neighbours: frozenset


def participation_matching(trace: AuctionTrace, basis: Iterable[str]) -> dict | HallViolation:
    """Match each basis element to a distinct round whose co-circuit
    contains it. Hall's condition is checked over every subset first; a
    violated subset is returned instead of a matching."""
    b = sorted(basis)
    adj = {e: [t for t, (d, _, _) in enumerate(trace.rounds) if e in d] for e in b}
    for size in range(1, len(b) + 1):
        for sub in combinations(b, size):
            nb = {t for e in sub for t in adj[e]}
            if len(nb) < size:
                return HallViolation(frozenset(sub), frozenset(nb))
    owner: dict[int, str] = {}

    def augment(e: str, seen: set) -> bool:
        for t in adj[e]:
            if t in seen:
                continue
            seen.add(t)
            if t not in owner or augment(owner[t], seen):
                owner[t] = e
                return True
        return False

    for e in b:
        if not augment(e, set()):
            raise AssertionError("Hall's condition holds but no augmenting path found")
    return {e: t for t, e in owner.items()}


# ---------------------------------------------------------------------------
# unit-demand bidders on a matroid

@dataclass(frozen=True)
class MatroidGameReport:
    """Equilibrium path: per round, co-circuit, winner, chosen element, price."""

    rounds: tuple[tuple[frozenset, int, str, Fraction], ...]
    utilities: tuple[Fraction, ...]
    welfare: Fraction
    opt: Fraction
    poa: Fraction | None

    def to_json(self) -> dict:
        return {
            "rounds": [
                {"cocircuit": sorted(d), "winner": k, "element": e, "price": money_str(p)}
                for d, k, e, p in self.rounds
            ],
            "utilities": [money_str(u) for u in self.utilities],
            "welfare": money_str(self.welfare),
            "opt": money_str(self.opt),
            "poa": "inf" if self.poa is None else money_str(self.poa),
        }


def matroid_unit_demand_opt(m: Matroid, bidders: Sequence[Valuation]) -> Fraction:
    """Best total value assigning each bidder at most one element, with
    the assigned elements independent."""
    ground = m.ground
    best = Fraction(0)
    choices = [[None] + [e for e in ground if e in b.items and b.value({e}) > 0] for b in bidders]
    for pick in product(*choices):
        used = [e for e in pick if e is not None]
        if len(set(used)) != len(used) or not m.independent(used):
            continue
        val = sum((b.value({e}) for b, e in zip(bidders, pick) if e is not None), Fraction(0))
        best = max(best, val)
    return best


def matroid_unit_demand_auction(
    m: Matroid,
    bidders: Sequence[Valuation],
    policy: str = "lexicographic",
    seed: int = 0,
    max_states: int = 100_000,
) -> MatroidGameReport:
    """Each round sells the current co-circuit as one first-price slot;
    the winner pays its bid and picks an element of the co-circuit (the
    one best for its continuation, lowest ground position among equals).
    Solved by backward induction with the canonical stage equilibrium."""
    n = len(bidders)
    if n < 2:
        raise ValueError("need at least two bidders")
    r = rank(m)
    rng = random.Random(seed)
    cocircuit_of: dict[frozenset, frozenset] = {}
    memo: dict = {}

    def val(k: int, e: str) -> Fraction:
        return bidders[k].value({e}) if e in bidders[k].items else Fraction(0)

    def held_value(k: int, held: dict) -> Fraction:
        return max((val(k, e) for e, o in held.items() if o == k), default=Fraction(0))

    def solve(state: frozenset):
        # state: frozenset of (element, owner)
        held = dict(state)
        won = frozenset(held)
        if len(won) == r:
            return (Fraction(0),) * n, []
        if state in memo:
            return memo[state]
        if len(memo) >= max_states:
            raise RuntimeError(f"more than {max_states} states")
        if won not in cocircuit_of:
            cocircuit_of[won] = find_cocircuit(m, won, policy, rng)
        d = sorted(cocircuit_of[won], key=m.position)
        picks = []
        for j in range(n):
            best = None
            for e in d:
                nxt = state | {(e, j)}
                fut, _ = solve(nxt)
                gain = max(held_value(j, held), val(j, e)) - held_value(j, held) + fut[j]
                if best is None or gain > best[0]:
                    best = (gain, e, fut)
            picks.append(best)
        mat = []
        for i in range(n):
            row = []
            for j in range(n):
                gain, e, fut = picks[j]
                row.append(gain if i == j else fut[i])
            mat.append(row)
        _, out = sa.canonical_equilibrium(mat)
        k = out.winner
        gain, e, fut = picks[k]
        util = tuple((gain - out.price) if i == k else fut[i] for i in range(n))
        rest = solve(state | {(e, k)})[1]
        res = (util, [(frozenset(d), k, e, out.price)] + rest)
        memo[state] = res
        return res

    util, rounds = solve(frozenset())
    held: dict[str, int] = {e: k for _, k, e, _ in rounds}
    welfare = sum((held_value(k, held) for k in range(n)), Fraction(0))
    opt = matroid_unit_demand_opt(m, bidders)
    poa = None if welfare == 0 and opt > 0 else (Fraction(1) if opt == 0 else opt / welfare)
    return MatroidGameReport(tuple(rounds), util, welfare, opt, poa)
