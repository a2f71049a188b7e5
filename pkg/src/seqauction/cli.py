"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error, 2 a check failed, 3 no pure
equilibrium on the bid grid.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from . import matroid as mt
from . import scenarios as sc
from . import sequential_game as sg
from . import stage_auction as sa
from .valuations import money_str, to_money

SCHEMA_VERSION = 1
JOBS_ENV = "SEQAUCTION_JOBS"
MAX_MATRIX_PLAYERS = 12
MAX_SEQ_STATES = sg.DEFAULT_MAX_STATES

EXIT_OK, EXIT_USAGE, EXIT_FAILED, EXIT_NO_EQ = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunReport:
    command: list[str]
    config: dict
    result: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    status: str = "PASS"
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "result": self.result,
            "checks": self.checks,
            "status": self.status,
            "seconds": round(self.seconds, 3),
        }


def _q(x) -> str:
    if x is None:
        return "inf"
    if x is mt.INFINITE:
        return "inf"
    return money_str(x)


def _bid(b: sa.Bid) -> str:
    return str(b)


def parse_bid(s: str) -> sa.Bid:
    s = str(s).strip()
    plus = s.endswith("+")
    return sa.Bid(to_money(s[:-1] if plus else s), plus)


def _load(path: str):
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from exc


def _matrix(obj) -> tuple[sa.Matrix, str]:
    fmt = sa.FIRST
    if isinstance(obj, dict):
        fmt = obj.get("format", fmt)
        obj = obj.get("v", obj.get("matrix"))
    if not isinstance(obj, list) or not obj:
        raise UsageError('expected a matrix or {"v": [[...], ...]}')
    if len(obj) > MAX_MATRIX_PLAYERS:
        raise UsageError(f"matrix has {len(obj)} players; limit is {MAX_MATRIX_PLAYERS}")
    try:
        return sa.as_matrix(obj), fmt
    except (ValueError, TypeError) as exc:
        raise UsageError(f"bad matrix: {exc}") from exc


def _instance(obj) -> sg.AuctionInstance:
    try:
        return sg.instance_from_json(obj)
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"bad instance: {exc}") from exc


# ---------------------------------------------------------------------------
# commands

def cmd_solve_stage(args, report: RunReport) -> int:
    v, fmt = _matrix(_load(args.input))
    fmt = args.format or fmt
    bids, out = sa.canonical_equilibrium(v, fmt)
    report.result = {
        "bids": [_bid(b) for b in bids],
        "winner": out.winner,
        "price": _q(out.price),
        "tau": [_q(t) for t in sa.tau_thresholds(v).tau],
    }
    if args.policy == "ascending":
        eps = to_money(args.epsilon) if args.epsilon else None
        abids, aout, trace = sa.ascending_equilibrium(v, eps, fmt)
        report.result.update(bids=[_bid(b) for b in abids], winner=aout.winner, price=_q(aout.price))
        report.result["trace"] = [[s.winner, s.setter, _q(s.price)] for s in trace]
        bids = abids
    report.checks["nash"] = sa.verify_stage_nash(v, bids, fmt)
    return EXIT_OK if report.checks["nash"] else EXIT_FAILED


def cmd_tau(args, report: RunReport) -> int:
    v, _ = _matrix(_load(args.input))
    t = sa.tau_thresholds(v)
    report.result = {
        "tau": [_q(x) for x in t.tau],
        "order": list(t.order),
        "gamma": [_q(x) for x in t.gamma],
        "events": [{"player": i, "price": _q(p), "supporter": s} for i, p, s in t.events],
    }
    return EXIT_OK


def cmd_enumerate(args, report: RunReport) -> int:
    v, _ = _matrix(_load(args.input))
    outs = sa.enumerate_compatible_outcomes(v, fixed_tie_break=args.fixed_tie_break)
    report.result = {
        "outcomes": [
            {
                "winner": o.winner,
                "lo": _q(o.interval.lo),
                "hi": _q(o.interval.hi),
                "lo_closed": o.interval.lo_closed,
                "hi_closed": o.interval.hi_closed,
                "interval": str(o.interval),
            }
            for o in outs
        ]
    }
    return EXIT_OK


def cmd_solve_seq(args, report: RunReport) -> int:
    inst = _instance(_load(args.input))
    if args.format:
        inst = inst.with_format(args.format)
    if not inst.sequential:
        grid = to_money(args.grid or "1/4")
        res = sg.grid_stage_equilibrium(inst, grid=grid)
        if isinstance(res, sg.NoPureEquilibriumOnGrid):
            report.result = {
                "items": list(res.items),
                "grid": _q(res.grid),
                "cycle": [[[_bid(b) for b in per_item] for per_item in prof] for prof in res.cycle],
                "movers": list(res.movers),
            }
            report.status = "NO_PURE_EQUILIBRIUM"
            return EXIT_NO_EQ
        report.result = {
            "items": list(res.items),
            "bids": [[_bid(b) for b in per_item] for per_item in res.bids],
            "winners": list(res.winners),
            "prices": [_q(p) for p in res.prices],
        }
        return EXIT_OK
    try:
        if args.policy == "all":
            opt = sg._opt(inst)
            paths = sg.solve_spe(inst, "all", max_states=args.max_states)
            reps = [sg.make_report(inst, w, p, opt) for w, p in paths]
            report.result = {"equilibria": [r.to_json() for r in reps]}
            return EXIT_OK
        sol = sg.solve_spe(inst, max_states=args.max_states)
    except RuntimeError as exc:
        raise UsageError(str(exc)) from exc
    report.result = sg.play(sol).to_json()
    return EXIT_OK


def markov_profile(obj, n: int) -> sg.StrategyProfile:
    """Profile whose bids depend only on the winners so far. Keys are
    comma-joined winner indices ("" for the first item)."""
    table = {}
    for k, row in obj["bids"].items():
        if len(row) != n:
            raise UsageError(f"profile entry {k!r} needs {n} bids")
        table[k] = tuple(parse_bid(b) for b in row)
    fmt = obj.get("format", sa.FIRST)
    if fmt not in sa.FORMATS:
        raise UsageError(f"profile format must be one of {sa.FORMATS}, got {fmt!r}")

    def bids(h):
        k = ",".join(str(w) for w in sg.winners_of(h, fmt))
        if k not in table:
            raise UsageError(f"profile has no entry for winner history {k!r}")
        return table[k]

    return sg.StrategyProfile(bids, state_key=lambda h: sg.winners_of(h, fmt))


def cmd_verify(args, report: RunReport) -> int:
    obj = _load(args.input)
    inst = _instance(obj["instance"] if "instance" in obj else obj)
    if args.format:
        inst = inst.with_format(args.format)
    prof = _load(args.profile) if args.profile else obj.get("profile")
    if prof is not None:
        prof_obj = dict(prof)
        prof_obj.setdefault("format", inst.fmt)
        profile = markov_profile(prof_obj, inst.n)
        source = "given"
    else:
        profile = sg.solution_profile(sg.solve_spe(inst, max_states=args.max_states))
        source = "canonical"
    step = to_money(args.epsilon) if args.epsilon else Fraction(1, 10**6)
    verdict = sg.verify_spe(inst, profile, step=step)
    report.result = {
        "profile": source,
        "ok": verdict.ok,
        "nodes_checked": verdict.nodes_checked,
        "reason": verdict.reason,
    }
    if verdict.violation is not None:
        v = verdict.violation
        report.result["violation"] = {
            "history": [[_bid(b) for b in r] for r in v.history],
            "player": v.player,
            "deviation": _bid(v.deviation),
            "gain": _q(v.gain),
        }
    report.checks["spe"] = verdict.ok is True
    return EXIT_OK if verdict.ok else EXIT_FAILED


def cmd_matroid(args, report: RunReport) -> int:
    obj = _load(args.input)
    try:
        inst = mt.graph_from_json(obj, args.mode)
    except (KeyError, ValueError, TypeError, IndexError) as exc:
        raise UsageError(f"bad matroid: {exc}") from exc
    policy = args.policy or "lexicographic"
    best, weight = mt.brute_force_opt_basis(inst)
    report.result = {"opt_basis": sorted(best), "opt_weight": _q(weight)}
    if args.action == "greedy":
        basis, w = mt.greedy_opt_basis(inst, policy, random.Random(args.seed))
        report.result.update(greedy_basis=sorted(basis), greedy_weight=_q(w))
        report.checks["greedy_is_optimal"] = basis == best
    elif args.action == "vcg":
        report.result["vcg"] = {e: _q(mt.vcg_price(inst, e)) for e in inst.matroid.ground}
    else:
        try:
            trace = mt.run_sequential_basis_auction(inst, policy, args.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        vcg = {e: mt.vcg_price(inst, e) for e in trace.winners}
        report.result["trace"] = trace.to_json()
        report.result["vcg"] = {e: _q(p) for e, p in vcg.items()}
        report.checks["allocation"] = trace.winners == best
        report.checks["prices"] = all(trace.prices[e] == vcg[e] for e in trace.winners)
    return EXIT_OK if all(report.checks.values()) else EXIT_FAILED


def _scenario_kwargs(args, name: str) -> dict:
    given = {
        "alpha": args.alpha,
        "eps": args.eps,
        "delta": args.delta,
        "k": args.k,
        "t": args.t,
        "v": args.v,
    }
    allowed = {
        "figure1": ("alpha", "eps"),
        "submodular_unbounded": ("k", "delta", "eps"),
        "second_price_additive": ("t", "eps", "delta"),
        "second_price_unit_demand": ("k", "eps", "delta"),
        "multi_item_nonexistence": ("v", "delta", "eps"),
        "dominated_strategy_spe": (),
    }[name]
    out = {}
    for key, val in given.items():
        if val is None:
            continue
        if key not in allowed:
            raise UsageError(f"scenario {name} does not take --{key}")
        out[key] = int(val) if key in ("k", "t") else to_money(val)
    return out


def cmd_scenario(args, report: RunReport) -> int:
    name = args.name
    if name not in sc.SCENARIOS:
        raise UsageError(f"unknown scenario {name!r}; choose from {sorted(sc.SCENARIOS)}")
    try:
        s = sc.SCENARIOS[name](**_scenario_kwargs(args, name))
    except sc.ScenarioError as exc:
        report.status = "FAIL"
        report.result = {"error": str(exc)}
        return EXIT_FAILED
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    report.config["params"] = {k: (_q(v) if isinstance(v, Fraction) else v) for k, v in s.params.items()}
    report.result = {"name": s.name, "expected": _jsonable(s.expected), "notes": s.notes}
    if args.emit:
        _emit(s, args.emit, report)
    if not args.check:
        return EXIT_OK
    code = EXIT_OK
    if name == "multi_item_nonexistence":
        grid = to_money(args.grid) if args.grid else s.params["delta"] / 4
        res = sg.grid_stage_equilibrium(s.instance, grid=grid)
        report.checks["walrasian"] = sc.check_walrasian(
            s.instance, s.expected["walrasian_allocation"], s.expected["walrasian_prices"]
        )
        report.checks["no_pure_equilibrium"] = isinstance(res, sg.NoPureEquilibriumOnGrid)
        if isinstance(res, sg.NoPureEquilibriumOnGrid):
            report.result["cycle_length"] = len(res.cycle)
            report.result["movers"] = list(res.movers)
            code = EXIT_NO_EQ
    elif s.profile is not None:
        verdict = sg.verify_spe(s.instance, s.profile)
        report.checks["spe"] = verdict.ok is True
    if name == "figure1":
        report.checks["welfare_in_equilibria"] = s.expected["welfare"] in s.extras["welfares"]
    if not all(report.checks.values()):
        report.status = "FAIL"
        return EXIT_FAILED
    return code


MAX_EMIT_HISTORIES = 4096


def _emit(s: sc.Scenario, paths: list[str], report: RunReport) -> None:
    """Write the instance JSON and, when the scenario carries a solved
    winner-history profile of modest size, the profile JSON."""
    inst = s.instance
    if len(paths) > 2:
        raise UsageError("--emit takes an instance path and an optional profile path")
    with open(paths[0], "w") as f:
        json.dump(inst.to_json(), f, indent=2)
    if len(paths) < 2:
        return
    sol = s.extras.get("solution")
    m = len(inst.items)
    if sol is None or sum(inst.n**r for r in range(m)) > MAX_EMIT_HISTORIES:
        report.result["emit_note"] = "profile depends on full bid history; not written"
        return
    table = {}
    frontier = [()]
    for _ in range(m):
        nxt = []
        for w in frontier:
            table[",".join(map(str, w))] = [_bid(b) for b in sol.node(w).bids]
            nxt += [w + (j,) for j in range(inst.n)]
        frontier = nxt
    with open(paths[1], "w") as f:
        json.dump({"format": inst.fmt, "bids": table}, f, indent=2)


def _jsonable(x):
    if isinstance(x, Fraction):
        return _q(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


# ---------------------------------------------------------------------------
# sweeps

def _sweep_one(kind: str, seed: int, idx: int):
    """Result of instance ``idx`` of a sweep: (ratio or None, ok)."""
    rng = random.Random(f"{seed}:{idx}")
    if kind == "matroid":
        inst = sc.random_graphical_matroid(rng, rng.randint(2, 6))
        best, _ = mt.brute_force_opt_basis(inst)
        for policy in ("lexicographic", "random", "longest"):
            trace = mt.run_sequential_basis_auction(inst, policy, idx)
            if trace.winners != best:
                return None, False
            if any(mt.vcg_price(inst, e) != p for e, p in trace.prices.items()):
                return None, False
        return Fraction(1), True
    n, m = rng.randint(2, 4), rng.randint(1, 4)
    if kind == "unit_demand":
        inst = sc.random_unit_demand(rng, n, m)
    elif kind == "additive":
        inst = sc.random_additive(rng, n, m)
    elif kind == "uniform_submodular":
        inst = sc.random_uniform_submodular(rng, n, m)
    else:
        raise UsageError(f"unknown sweep kind {kind!r}")
    policy_limit = 256 if kind != "additive" else 0
    return sg.worst_ratio(inst, policy_limit), True


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def cmd_sweep(args, report: RunReport) -> int:
    kinds = ("unit_demand", "additive", "uniform_submodular", "matroid")
    if args.kind not in kinds:
        raise UsageError(f"unknown sweep kind {args.kind!r}; choose from {list(kinds)}")
    jobs = args.jobs or default_jobs()
    idxs = range(args.count)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_sweep_one, [args.kind] * args.count, [args.seed] * args.count, idxs))
    else:
        results = [_sweep_one(args.kind, args.seed, i) for i in idxs]
    bound = to_money(args.bound) if args.bound is not None else None
    worst = Fraction(1)
    unbounded = False
    for ratio, ok in results:
        if not ok:
            report.checks["agreement"] = False
        if ratio is None:
            unbounded = True
        elif ratio > worst:
            worst = ratio
    report.checks.setdefault("agreement", True)
    report.result = {"count": args.count, "worst": "inf" if unbounded else _q(worst)}
    if bound is not None:
        report.checks["bound"] = not unbounded and worst <= bound
    if not all(report.checks.values()):
        report.status = "FAIL"
        return EXIT_FAILED
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="seqauction", description=__doc__.splitlines()[0])
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.add_argument("--seed", type=int, default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(q):
        q.add_argument("--policy")
        q.add_argument("--epsilon")
        q.add_argument("--grid")
        q.add_argument("--seed", type=int, default=argparse.SUPPRESS)
        q.add_argument("--report", default=argparse.SUPPRESS)
        return q

    q = common(sub.add_parser("solve-stage", help="canonical equilibrium of one externality matrix"))
    q.add_argument("input")
    q.add_argument("--format", choices=sa.FORMATS)
    q = common(sub.add_parser("tau", help="elimination thresholds of a matrix"))
    q.add_argument("input")
    q = common(sub.add_parser("enumerate", help="all compatible (winner, price interval) pairs"))
    q.add_argument("input")
    q.add_argument("--fixed-tie-break", action="store_true")
    for name, helptext in (("solve-seq", "solve a sequential auction"), ("verify", "check a profile is an SPE")):
        q = common(sub.add_parser(name, help=helptext))
        q.add_argument("input")
        q.add_argument("--format", choices=sa.FORMATS)
        q.add_argument("--max-states", type=int, default=MAX_SEQ_STATES)
        if name == "verify":
            q.add_argument("profile", nargs="?", help="profile JSON; default is the canonical solution")
    q = common(sub.add_parser("matroid", help="co-circuit auction on a weighted graph"))
    q.add_argument("action", choices=("run", "vcg", "greedy"))
    q.add_argument("input")
    q.add_argument("--mode", choices=(mt.DIRECT, mt.PROCUREMENT), default=mt.DIRECT)
    q = common(sub.add_parser("scenario", help="build and check a named construction"))
    q.add_argument("name")
    q.add_argument("--check", action="store_true")
    q.add_argument("--emit", nargs="+", metavar="PATH", help="write instance.json [profile.json]")
    for flag in ("alpha", "eps", "delta", "k", "t", "v"):
        q.add_argument(f"--{flag}")
    q = common(sub.add_parser("sweep", help="seeded random sweep with an optional bound"))
    q.add_argument("kind")
    q.add_argument("--count", type=int, default=100)
    q.add_argument("--bound")
    q.add_argument("--jobs", type=int)
    return p


COMMANDS = {
    "solve-stage": cmd_solve_stage,
    "tau": cmd_tau,
    "enumerate": cmd_enumerate,
    "solve-seq": cmd_solve_seq,
    "verify": cmd_verify,
    "matroid": cmd_matroid,
    "scenario": cmd_scenario,
    "sweep": cmd_sweep,
}


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    config = {k: getattr(args, k, None) for k in ("policy", "epsilon", "grid", "seed")}
    report = RunReport(argv, config)
    start = time.perf_counter()
    try:
        code = COMMANDS[args.command](args, report)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report.seconds = time.perf_counter() - start
    if code == EXIT_FAILED:
        report.status = "FAIL"
    text = json.dumps(report.to_json(), indent=2)
    if args.report:
        with open(args.report, "w") as f:
            f.write(text + "\n")
    else:
        print(text)
    print(report.status if code != EXIT_NO_EQ else "NO_PURE_EQUILIBRIUM", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
