"""Combinatorial valuations and brute-force welfare oracles.

All money is an exact ``fractions.Fraction``. Item identifiers are strings.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, product
from typing import Iterable, Mapping, Sequence

Money = Fraction
ItemSet = frozenset

MAX_SCAN_ITEMS = 15
MAX_ALLOCATIONS = 10**7


def to_money(x: object) -> Fraction:
    """Parse an int, Fraction or "p/q" string into an exact rational."""
    if isinstance(x, bool):
        raise TypeError("booleans are not money")
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except ValueError as exc:
            raise ValueError(f"not a rational number: {x!r}") from exc
    raise TypeError(f"expected int, Fraction or rational string, got {type(x).__name__}")


def money_str(x: Fraction) -> str:
    return str(Fraction(x))


class Valuation:
    """Base class. Subclasses implement ``_value`` on a validated frozenset."""

    kind = ""

    def value(self, bundle: Iterable[str]) -> Fraction:
        s = frozenset(bundle)
        unknown = s.difference(self.items)
        if unknown:
            raise KeyError(f"unknown item(s): {sorted(unknown)}")
        if not s:
            return Fraction(0)
        return self._value(s)

    def _value(self, s: frozenset) -> Fraction:
        raise NotImplementedError

    def marginal(self, bundle: Iterable[str], item: str) -> Fraction:
        s = frozenset(bundle)
        if item in s:
            raise ValueError(f"item {item!r} already in bundle")
        return self.value(s | {item}) - self.value(s)

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Additive(Valuation):
    weights: tuple[tuple[str, Fraction], ...]
    kind = "additive"

    @property
    def items(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.weights)

    def _value(self, s: frozenset) -> Fraction:
        return sum((w for k, w in self.weights if k in s), Fraction(0))

    def to_json(self) -> dict:
        return {"kind": self.kind, "values": {k: money_str(w) for k, w in self.weights}}


@dataclass(frozen=True)
class UnitDemand(Valuation):
    weights: tuple[tuple[str, Fraction], ...]
    kind = "unit_demand"

    @property
    def items(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.weights)

    def _value(self, s: frozenset) -> Fraction:
        return max((w for k, w in self.weights if k in s), default=Fraction(0))

    def to_json(self) -> dict:
        return {"kind": self.kind, "values": {k: money_str(w) for k, w in self.weights}}


@dataclass(frozen=True)
class UniformSubmodular(Valuation):
    """Value depends only on how many items are held; marginals non-increasing."""

    items: tuple[str, ...]
    marginals: tuple[Fraction, ...]
    kind = "uniform_submodular"

    def __post_init__(self) -> None:
        if len(self.marginals) != len(self.items):
            raise ValueError("need one marginal per item")
        if any(a < b for a, b in zip(self.marginals, self.marginals[1:])):
            raise ValueError("marginals must be non-increasing")
        if self.marginals and self.marginals[-1] < 0:
            raise ValueError("marginals must be nonnegative")

    def _value(self, s: frozenset) -> Fraction:
        return sum(self.marginals[: len(s)], Fraction(0))

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "items": list(self.items),
            "marginals": [money_str(m) for m in self.marginals],
        }


@dataclass(frozen=True)
class Table(Valuation):
    """Explicit bundle values completed by free disposal.

    The value of a bundle is the largest recorded value over recorded subsets
    of it, so an unrecorded bundle inherits the best thing it contains.
    """

    items: tuple[str, ...]
    entries: tuple[tuple[frozenset, Fraction], ...]
    kind = "table"

    def _value(self, s: frozenset) -> Fraction:
        return max((w for b, w in self.entries if b <= s), default=Fraction(0))

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "items": list(self.items),
            "bundles": [[sorted(b), money_str(w)] for b, w in self.entries],
        }


@dataclass(frozen=True)
class Coverage(Valuation):
    """Each item covers a set of weighted elements; a bundle is worth the
    total weight of the union it covers."""

    cover: tuple[tuple[str, frozenset], ...]
    element_weights: tuple[tuple[str, Fraction], ...]
    kind = "coverage"

    @property
    def items(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.cover)

    def _value(self, s: frozenset) -> Fraction:
        covered: set[str] = set()
        for k, elems in self.cover:
            if k in s:
                covered |= elems
        weights = dict(self.element_weights)
        return sum((weights[e] for e in covered), Fraction(0))

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "cover": {k: sorted(e) for k, e in self.cover},
            "elements": {e: money_str(w) for e, w in self.element_weights},
        }


def additive(values: Mapping[str, object]) -> Additive:
    return Additive(tuple((k, _nonneg(v)) for k, v in values.items()))


def unit_demand(values: Mapping[str, object]) -> UnitDemand:
    return UnitDemand(tuple((k, _nonneg(v)) for k, v in values.items()))


def uniform_submodular(items: Sequence[str], marginals: Sequence[object]) -> UniformSubmodular:
    return UniformSubmodular(tuple(items), tuple(to_money(m) for m in marginals))


def table(items: Sequence[str], bundles: Mapping[Iterable[str], object] | Iterable) -> Table:
    pairs = bundles.items() if isinstance(bundles, Mapping) else bundles
    entries = []
    for b, w in pairs:
        fb = frozenset(b)
        if not fb <= set(items):
            raise KeyError(f"bundle {sorted(fb)} uses unknown items")
        entries.append((fb, _nonneg(w)))
    return Table(tuple(items), tuple(entries))


def coverage(cover: Mapping[str, Iterable[str]], elements: Mapping[str, object]) -> Coverage:
    cov = tuple((k, frozenset(v)) for k, v in cover.items())
    for k, elems in cov:
        missing = elems.difference(elements)
        if missing:
            raise KeyError(f"item {k!r} covers unknown elements {sorted(missing)}")
    return Coverage(cov, tuple((e, _nonneg(w)) for e, w in elements.items()))


def _nonneg(x: object) -> Fraction:
    v = to_money(x)
    if v < 0:
        raise ValueError(f"values must be nonnegative, got {v}")
    return v


def valuation_from_json(obj: Mapping) -> Valuation:
    kind = obj.get("kind")
    if kind == "additive":
        return additive(obj["values"])
    if kind == "unit_demand":
        return unit_demand(obj["values"])
    if kind == "uniform_submodular":
        return uniform_submodular(obj["items"], obj["marginals"])
    if kind == "table":
        return table(obj["items"], [(b, w) for b, w in obj["bundles"]])
    if kind == "coverage":
        return coverage(obj["cover"], obj["elements"])
    raise ValueError(f"unknown valuation kind: {kind!r}")


def value(v: Valuation, bundle: Iterable[str]) -> Fraction:
    return v.value(bundle)


def marginal(v: Valuation, bundle: Iterable[str], item: str) -> Fraction:
    return v.marginal(bundle, item)


def _subsets(items: Sequence[str]):
    for r in range(len(items) + 1):
        for c in combinations(items, r):
            yield frozenset(c)


def _check_scan_size(items: Sequence[str]) -> None:
    if len(items) > MAX_SCAN_ITEMS:
        raise ValueError(f"exhaustive scan limited to {MAX_SCAN_ITEMS} items, got {len(items)}")


def check_monotone(v: Valuation, items: Sequence[str] | None = None) -> bool:
    """True iff adding any single item never lowers the value.

    A table is also rejected when a recorded bundle is worth less than a
    recorded subset of it, since completion would silently overrule it.
    """
    items = tuple(v.items if items is None else items)
    _check_scan_size(items)
    if isinstance(v, Table) and any(v.value(b) > w for b, w in v.entries):
        return False
    for s in _subsets(items):
        base = v.value(s)
        for j in items:
            if j not in s and v.value(s | {j}) < base:
                return False
    return True


def check_submodular(v: Valuation, items: Sequence[str] | None = None) -> bool:
    """True iff marginals shrink as the base bundle grows.

    Checking S and S+k against every j outside S+k is enough: the general
    S <= T condition follows by chaining single-item steps.
    """
    items = tuple(v.items if items is None else items)
    _check_scan_size(items)
    for s in _subsets(items):
        for k in items:
            if k in s:
                continue
            t = s | {k}
            for j in items:
                if j in t:
                    continue
                if v.marginal(s, j) < v.marginal(t, j):
                    return False
    return True


def bundles_of(allocation: Mapping[str, int], n: int) -> list[frozenset]:
    out: list[set] = [set() for _ in range(n)]
    for item, p in allocation.items():
        out[p].add(item)
    return [frozenset(b) for b in out]


def welfare(players: Sequence[Valuation], allocation: Mapping[str, int]) -> Fraction:
    return sum(
        (v.value(b) for v, b in zip(players, bundles_of(allocation, len(players)))),
        Fraction(0),
    )


def brute_force_optimal_allocation(
    players: Sequence[Valuation], items: Sequence[str], limit: int = MAX_ALLOCATIONS
) -> tuple[dict[str, int], Fraction]:
    """Enumerate every assignment of items to players.

    Assignments are visited in lexicographic order of the winner vector and
    only a strictly better one replaces the incumbent, so ties go to the
    lexicographically smallest vector.
    """
    items = list(items)
    n, m = len(players), len(items)
    if n == 0:
        raise ValueError("need at least one player")
    if n**m > limit:
        raise ValueError(f"{n}^{m} allocations exceed the limit of {limit}")
    # per-player value of every item subset, indexed by bitmask
    tables = []
    for v in players:
        row = [Fraction(0)] * (1 << m)
        for mask in range(1, 1 << m):
            row[mask] = v.value(items[b] for b in range(m) if mask >> b & 1)
        tables.append(row)
    best_vec: tuple[int, ...] | None = None
    best = Fraction(-1)
    for vec in product(range(n), repeat=m):
        masks = [0] * n
        for b, p in enumerate(vec):
            masks[p] |= 1 << b
        w = sum((tables[p][masks[p]] for p in range(n)), Fraction(0))
        if w > best:
            best, best_vec = w, vec
    assert best_vec is not None
    return {items[b]: best_vec[b] for b in range(m)}, best


def optimal_matching_value(players: Sequence[Valuation], items: Sequence[str]) -> Fraction:
    """Maximum-weight matching of players to single items.

    Each player is scored by its value for a single item, so unit-demand
    players are represented exactly. Exact DP over used-item bitmasks.
    """
    items = list(items)
    m = len(items)
    weights = [[v.value({j}) for j in items] for v in players]
    best: dict[int, Fraction] = {0: Fraction(0)}
    for row in weights:
        nxt = dict(best)
        for mask, w in best.items():
            for b in range(m):
                if not mask >> b & 1:
                    key = mask | 1 << b
                    cand = w + row[b]
                    if cand > nxt.get(key, Fraction(-1)):
                        nxt[key] = cand
        best = nxt
    return max(best.values())
