"""Command-line front end.

Every command prints one JSON report: the command echo, a fingerprint of the
instance (sha256 of its canonical JSON), command-specific results and the
wall time. ``--csv`` switches table-like results to CSV.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, is_dataclass
from pathlib import Path

from . import acceptance, families, gaps
from .evalexact import (
    eval_procedural,
    optimal_adaptive,
    optimal_k_semi_adaptive,
    optimal_nonadaptive,
)
from .lpbound import phi
from .model import Instance, NonAdaptivePlan, SizeLimitError, TreePolicy, greedy_order
from .montecarlo import McConfig, simulate, simulate_always_insert
from .policies import (
    CountThresholdPolicy,
    large_item_hybrid,
    non_adaptive_greedy,
    one_semi_adaptive_greedy,
    optimal_alpha,
    partition_combine,
    semi_adaptive_greedy,
)

SIG_DIGITS = 12


class UsageError(Exception):
    pass


# --- output helpers --------------------------------------------------------------


def _clean(obj):
    """Make ``obj`` JSON-ready, rounding floats to 12 significant digits."""
    if is_dataclass(obj) and not isinstance(obj, type):
        obj = asdict(obj)
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj if abs(obj) < 2**53 else str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return str(obj)
        return float(format(obj, f".{SIG_DIGITS}g"))
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item"):
        return _clean(obj.item())
    return str(obj)


def _num(x) -> str:
    return format(x, f".{SIG_DIGITS}g") if isinstance(x, float) else str(x)


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def fingerprint(instance: Instance) -> str:
    return hashlib.sha256(canonical_json(instance.to_json()).encode()).hexdigest()


def _workers(args) -> int:
    if getattr(args, "workers", None):
        return max(1, int(args.workers))
    env = os.environ.get("SK_ADAPT_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"SK_ADAPT_WORKERS must be an integer, got {env!r}")
    return 1


def load_instance(path: str) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read instance file: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"instance file is not valid JSON: {exc}")
    try:
        inst = Instance.from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid instance: {exc}")
    if inst.n == 0:
        raise UsageError("instance has no items")
    return inst


# --- policy mini-language ----------------------------------------------------


def _kv(text: str) -> dict[str, str]:
    out = {}
    for part in filter(None, text.split(",")):
        if "=" not in part:
            raise UsageError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_policy(spec: str, instance: Instance):
    """Build a policy from ``plan:3,1,2``, ``greedy0``, ``semi1``,
    ``semik:k=4,alpha=uniform``, ``tree:@file.json``, ``threshold:k=99``,
    ``always``, ``hybrid:eps=0.2`` or ``combine:eps=0.1``."""
    name, _, rest = spec.partition(":")
    if name == "plan":
        try:
            ids = [int(x) for x in rest.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"bad plan {rest!r}")
        if any(not 0 <= i < instance.n for i in ids):
            raise UsageError("plan refers to an item outside the instance")
        return NonAdaptivePlan(tuple(ids))
    if name == "greedy0":
        return non_adaptive_greedy(instance)[0]
    if name == "semi1":
        return one_semi_adaptive_greedy(instance)[0]
    if name == "semik":
        kv = _kv(rest)
        k = int(kv.get("k", 1))
        alpha = kv.get("alpha", "uniform")
        if alpha in ("uniform", "optimal"):
            vec = optimal_alpha(k)
        else:
            vec = [float(a) for a in alpha.split("/")]
        return semi_adaptive_greedy(instance, k, vec)
    if name == "tree":
        path = rest[1:] if rest.startswith("@") else rest
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read tree file: {exc}")
        return TreePolicy.from_json(data, instance.scale)
    if name == "threshold":
        k = int(_kv(rest).get("k", 0))
        return CountThresholdPolicy(tuple(greedy_order(instance)), k)
    if name == "hybrid":
        return large_item_hybrid(instance, float(_kv(rest).get("eps", 0.2)))
    if name == "combine":
        return partition_combine(instance, float(_kv(rest).get("eps", 0.1))).policy
    raise UsageError(f"unknown policy spec {spec!r}")


# --- commands ------------------------------------------------------------------


def cmd_phi(args):
    inst = load_instance(args.instance)
    sol = phi(inst, args.t)
    return inst, {"t": sol.t, "value": sol.value, "x": list(sol.x), "split_item": sol.split_item}


def _mc(args) -> McConfig:
    return McConfig(args.samples, args.seed, args.ci_level)


def cmd_eval(args):
    inst = load_instance(args.instance)
    if args.policy == "always":
        if args.method != "mc":
            raise UsageError("the always policy is Monte Carlo only")
        return inst, asdict(simulate_always_insert(inst, _mc(args), _workers(args)))
    pol = parse_policy(args.policy, inst)
    if args.method == "mc":
        return inst, asdict(simulate(inst, pol, _mc(args), _workers(args)))
    res = eval_procedural(inst, pol)
    return inst, asdict(res)


def cmd_adapt(args):
    inst = load_instance(args.instance)
    out = {}
    if args.k is not None:
        value, tree = optimal_k_semi_adaptive(inst, args.k, restrict_greedy=args.restrict_greedy)
        out["k"] = args.k
        out["semi_adaptive_value"] = value
    elif args.nonadaptive:
        value, plan = optimal_nonadaptive(inst)
        out["nonadaptive_value"] = value
        out["plan"] = list(plan.items)
        tree = None
    else:
        value, tree = optimal_adaptive(inst)
        out["adaptive_value"] = value
    if tree is not None:
        out["max_queries"] = tree.max_queries()
        if args.tree_out:
            Path(args.tree_out).write_text(json.dumps(tree.to_json()))
            out["tree_file"] = args.tree_out
    return inst, out


def cmd_alg(args):
    inst = load_instance(args.instance)
    if args.k < 0:
        raise UsageError("k must be nonnegative")
    trace = None
    if args.k == 0 and not args.semik:
        pol, trace = non_adaptive_greedy(inst)
        label = "non-adaptive-greedy"
    elif args.k == 1 and not args.semik:
        pol, trace = one_semi_adaptive_greedy(inst)
        label = "one-semi-adaptive-greedy"
    else:
        pol = semi_adaptive_greedy(inst, args.k)
        label = "semi-adaptive-greedy"
    if args.method == "mc":
        res = asdict(simulate(inst, pol, _mc(args), _workers(args)))
    else:
        res = asdict(eval_procedural(inst, pol))
    out = {"algorithm": label, "k": args.k, "phi1": phi(inst, 1.0).value, "evaluation": res}
    if isinstance(pol, NonAdaptivePlan):
        out["plan"] = list(pol.items)
    if args.trace and trace is not None:
        out["trace"] = asdict(trace)
    return inst, out


def _sidecar_path(path: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".pred.json")


def cmd_gap(args):
    inst = load_instance(args.instance)
    if args.closed_form:
        side = _sidecar_path(args.instance)
        if not side.exists():
            raise UsageError(f"no prediction sidecar at {side}; create the instance with `family`")
        pred = json.loads(side.read_text())
        if "gap" not in pred:
            raise UsageError("this family has no closed-form gap")
        return inst, {"closed_form_gap": pred["gap"], "predictions": pred}
    rep = gaps.measure_gaps(inst, args.k)
    return inst, asdict(rep)


def _family_spec(args):
    name = args.name
    if name == "bernoulli-eps":
        return families.BernoulliEps(args.eps, args.n, args.variant)
    if name == "h2-risky":
        p = _prob_list(args.p) if args.p else families.worst_case_h2_risky(args.n)
        return families.H2Risky(tuple(p), args.eps_sep)
    if name == "h2-nonrisky":
        if args.p:
            p = _prob_list(args.p)
        elif args.p1 is not None:
            p = (args.p1,) + ((1 - args.p1) / (args.n - 1),) * (args.n - 1) if args.n > 1 else (1.0,)
        else:
            p = families.worst_case_h2_nonrisky(args.n)
        return families.H2NonRisky(tuple(p), args.p0, args.a, args.eps_sep)
    if name == "noisy-lb":
        return families.NoisyLB(args.k, args.eps_base)
    if name == "random":
        return families.RandomSpec(n=args.n, atoms=args.atoms, seed=args.seed, scale=args.scale,
                                   variant=args.variant, mode=args.mode, eps=args.eps)
    raise UsageError(f"unknown family {name!r}")


def _prob_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"bad probability list {text!r}")


def cmd_family(args):
    spec = _family_spec(args)
    inst = families.build_family(spec)
    pred = families.predictions(spec)
    out = {"family": args.name, "n_items": inst.n, "scale": inst.scale, "predictions": pred}
    if args.out:
        Path(args.out).write_text(json.dumps(inst.to_json()))
        _sidecar_path(args.out).write_text(json.dumps(_clean(pred), indent=1))
        out["instance_file"] = args.out
        out["sidecar_file"] = str(_sidecar_path(args.out))
    else:
        out["instance"] = inst.to_json()
    return inst, out


def cmd_bounds(args):
    what = args.what
    if what == "certify-t":
        res = gaps.certify_T(args.grid)
        return None, asdict(res)
    if what == "certify-tprime":
        res = gaps.certify_Tprime(args.grid, fixed_t=args.fixed_t)
        return None, asdict(res)
    if what == "recursion":
        fn = gaps.risky_recursion if args.variant == "risky" else gaps.nonrisky_recursion
        return None, {"variant": args.variant, "sequence": fn(args.k), "_csv_row": fn(args.k)}
    if what == "bernoulli-chain":
        return None, asdict(gaps.bernoulli_chain_mdp(args.eps, args.horizon))
    raise UsageError(f"unknown bounds target {what!r}")


def cmd_reproduce(args):
    only = None
    if args.only:
        try:
            only = [int(x) for x in args.only.split(",")]
        except ValueError:
            raise UsageError("--only takes a comma separated list of criterion ids")
        if any(c not in acceptance.CRITERIA for c in only):
            raise UsageError("unknown criterion id")
    results = acceptance.run_all(args.quick, _workers(args), only)
    rows = [{"id": r.cid, "name": r.name, "status": "PASS" if r.passed else "FAIL",
             "seconds": r.seconds, "detail": r.detail} for r in results]
    out = {"quick": args.quick, "all_passed": all(r.passed for r in results), "criteria": rows,
           "_csv_table": [[r["id"], r["name"], r["status"], r["seconds"]] for r in rows]}
    return None, out


# --- parser ----------------------------------------------------------------------


def _mc_flags(p):
    p.add_argument("--method", choices=["exact", "mc"], default="exact")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ci-level", type=float, default=0.99)


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="sk-adapt", description="Stochastic knapsack adaptivity toolkit")
    top.add_argument("--csv", action="store_true", help="print tables as CSV instead of JSON")
    top.add_argument("--workers", type=int, default=None, help="worker processes (or SK_ADAPT_WORKERS)")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phi", help="fractional relaxation value")
    p.add_argument("--instance", required=True)
    p.add_argument("--t", type=float, default=1.0)
    p.set_defaults(func=cmd_phi)

    p = sub.add_parser("eval", help="evaluate a policy")
    p.add_argument("--instance", required=True)
    p.add_argument("--policy", required=True)
    _mc_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("adapt", help="optimal adaptive, non-adaptive or k-query value")
    p.add_argument("--instance", required=True)
    p.add_argument("--nonadaptive", action="store_true")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--restrict-greedy", action="store_true")
    p.add_argument("--tree-out", default=None)
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("alg", help="run the greedy algorithm with k queries")
    p.add_argument("--instance", required=True)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--semik", action="store_true", help="use the k-block rule even for k <= 1")
    p.add_argument("--trace", action="store_true")
    _mc_flags(p)
    p.set_defaults(func=cmd_alg)

    p = sub.add_parser("gap", help="measured or closed-form adaptivity gap")
    p.add_argument("--instance", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--closed-form", action="store_true")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("family", help="generate a named instance family")
    p.add_argument("name", choices=["bernoulli-eps", "h2-risky", "h2-nonrisky", "noisy-lb", "random"])
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--eps-sep", type=float, default=None)
    p.add_argument("--eps-base", type=float, default=1e-3)
    p.add_argument("--p", default=None, help="comma separated probability vector")
    p.add_argument("--p1", type=float, default=None)
    p.add_argument("--p0", type=float, default=0.0)
    p.add_argument("--a", type=float, default=1e9)
    p.add_argument("--atoms", type=int, default=4)
    p.add_argument("--scale", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["any", "small", "large"], default="any")
    p.add_argument("--variant", choices=["risky", "nonrisky"], default="risky")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_family)

    p = sub.add_parser("bounds", help="constant certificates, recursions and the Bernoulli-chain threshold rule")
    p.add_argument("what", choices=["certify-t", "certify-tprime", "recursion", "bernoulli-chain"])
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--fixed-t", action="store_true")
    p.add_argument("--variant", choices=["risky", "nonrisky"], default="risky")
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--horizon", type=int, default=None)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("reproduce", help="run the acceptance suite")
    p.add_argument("--quick", action="store_true")
    p.add_argument("--only", default=None, help="comma separated criterion ids")
    p.set_defaults(func=cmd_reproduce)
    return top


def _emit_csv(results: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if "_csv_row" in results:
        w.writerow([_num(x) for x in results["_csv_row"]])
    elif "_csv_table" in results:
        w.writerow(["id", "name", "status", "seconds"])
        for row in results["_csv_table"]:
            w.writerow([_num(x) for x in row])
    else:
        flat = {k: v for k, v in results.items() if not isinstance(v, (dict, list, tuple))}
        w.writerow(list(flat))
        w.writerow([_num(v) for v in flat.values()])
    return buf.getvalue()


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        inst, results = args.func(args)
    except SizeLimitError as exc:
        print(f"sk-adapt: size limit: {exc}", file=sys.stderr)
        return 3
    except (UsageError, ValueError) as exc:
        print(f"sk-adapt: error: {exc}", file=sys.stderr)
        return 2
    wall = time.perf_counter() - start
    if args.csv:
        sys.stdout.write(_emit_csv(results))
    else:
        shown = {k: v for k, v in results.items() if not k.startswith("_")}
        report = {
            "command": ["sk-adapt"] + argv,
            "fingerprint": fingerprint(inst) if inst is not None else None,
            "results": _clean(shown),
            "wall_time": _clean(wall),
        }
        print(json.dumps(report, indent=1))
    if args.command == "reproduce":
        return 0 if results["all_passed"] else 1
    return 0


def main() -> None:
    sys.exit(run())
