"""Command-line entry point: mdpconc <command> [options].

Exit codes: 0 success, 1 an experiment missed its pass criterion,
2 bad input (unreadable or invalid model, inconsistent options, domain error).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import bounds as B
from . import sim
from .classify import classify_chain, classify_model, in_pi_ar
from .core import (
    FiniteHorizonPolicy,
    StationaryPolicy,
    induced_chain,
    load_model,
    model_issues,
)
from .errors import MdpConcError
from .solvers import (
    solve_aroe,
    solve_arpe,
    solve_droe,
    solve_drpe,
    solve_fhdp,
    solve_fhpe,
)
from .stats import diameter, dispersion, fh_dispersion, span, _kdev

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


# -- deterministic JSON -----------------------------------------------------


def jsonable(x):
    """Plain-Python copy of x; non-finite floats become "inf"/"-inf"/"nan"."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (StationaryPolicy,)):
        return list(x.decision)
    if isinstance(x, FiniteHorizonPolicy):
        return [list(p.decision) for p in x.stages]
    return x


def dumps(obj) -> str:
    # repr-based float output is the shortest string that round-trips
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


# -- argument handling ------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    opts = {
        "model": lambda: p.add_argument("--model", required=True, help="model JSON file"),
        "policy": lambda: p.add_argument(
            "--policy", default="optimal",
            help="comma-separated actions, 'optimal' or 'greedy-fhdp' (default optimal)"),
        "policy2": lambda: p.add_argument("--policy2", help="second policy for two-policy bounds"),
        "gamma": lambda: p.add_argument("--gamma", type=float, help="discount factor"),
        "horizon": lambda: p.add_argument("--horizon", type=int, help="finite horizon h"),
        "T": lambda: p.add_argument("-T", dest="T", type=int, default=100, help="horizon T"),
        "delta": lambda: p.add_argument("--delta", type=float, default=0.05),
        "runs": lambda: p.add_argument("--runs", type=int, default=1000),
        "seed": lambda: p.add_argument("--seed", type=int, default=0),
        "bound": lambda: p.add_argument("--bound", default="azuma_centered",
                                        help="bound kind(s), comma separated"),
        "out": lambda: p.add_argument("--out", help="write the report here instead of stdout"),
        "format": lambda: p.add_argument("--format", choices=("json", "csv"), default="json"),
        "cap": lambda: p.add_argument("--cap", type=int, default=10**6,
                                      help="policy-enumeration cap"),
        "conservative": lambda: p.add_argument(
            "--conservative-threshold", action="store_true",
            help="LIL onset from 173/K^2 instead of 173/K"),
        "reading": lambda: p.add_argument("--reading", choices=("per-t", "per_T", "uniform"),
                                          default="per-t"),
        "initial": lambda: p.add_argument("--initial", type=int, default=0,
                                          help="initial state"),
        "ref": lambda: p.add_argument("--ref-state", type=int, default=0),
        "support": lambda: p.add_argument("--support-only", action="store_true",
                                          help="restrict K's max to successor states"),
        "learner": lambda: p.add_argument("--learner", default="uniform",
                                          help="learner for regret-gap runs: 'uniform' or actions"),
    }
    for n in names:
        opts[n]()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mdpconc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"mdpconc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model file")
    _add_common(p, "model", "out")
    p = sub.add_parser("classify", help="chain structure and MDP class")
    _add_common(p, "model", "out", "cap", "policy")
    p = sub.add_parser("solve", help="solve the planning equations")
    _add_common(p, "model", "out", "policy", "gamma", "horizon", "ref", "cap")
    p = sub.add_parser("stats", help="dispersion statistics H, K, sigma, D")
    _add_common(p, "model", "out", "policy", "gamma", "horizon", "ref", "support", "cap")
    p = sub.add_parser("bounds", help="evaluate bounds (CSV gives envelopes over T=1..T)")
    _add_common(p, "model", "out", "policy", "policy2", "gamma", "horizon", "T", "delta",
                "bound", "format", "conservative", "support", "cap")
    p = sub.add_parser("simulate", help="seeded trajectories")
    _add_common(p, "model", "out", "policy", "gamma", "horizon", "T", "runs", "seed",
                "initial", "cap")
    p = sub.add_parser("verify", help="Monte Carlo coverage of bounds")
    _add_common(p, "model", "out", "policy", "policy2", "gamma", "horizon", "T", "delta",
                "runs", "seed", "bound", "conservative", "reading", "initial", "support",
                "learner", "cap")
    return ap


def _load(path: str):
    if not Path(path).is_file():
        raise InputError("FileNotFound", f"no such file: {path}")
    try:
        return load_model(path)
    except json.JSONDecodeError as e:
        raise InputError("JSONDecodeError", str(e)) from None


def _parse_actions(spec: str, model) -> StationaryPolicy:
    try:
        acts = [int(x) for x in spec.split(",")]
    except ValueError:
        raise InputError("InvalidPolicy", f"cannot parse policy {spec!r}") from None
    return StationaryPolicy(acts).check(model)


def _gamma(args, model):
    g = args.gamma if getattr(args, "gamma", None) is not None else model.gamma
    return g


def _horizon(args, model):
    h = args.horizon if getattr(args, "horizon", None) is not None else None
    return h


class Context:
    """Resolved model, policies and value solutions for one invocation."""

    def __init__(self, args, need_family: str | None = None):
        self.args = args
        self.model = _load(args.model)
        self.gamma = _gamma(args, self.model)
        self.horizon = _horizon(args, self.model)
        if need_family == "discounted" and self.gamma is None:
            raise InputError("MissingOption", "discounted bounds need --gamma (or gamma in the model)")
        if need_family == "finite_horizon" and self.horizon is None:
            self.horizon = self.model.horizon
            if self.horizon is None:
                raise InputError("MissingOption", "finite-horizon bounds need --horizon")
        self.family = need_family or ("finite_horizon" if self.horizon is not None
                                      else "discounted" if self.gamma is not None else "average")
        self.aroe = None

    def policy(self, spec: str | None):
        m = self.model
        spec = spec or "optimal"
        if self.family == "finite_horizon":
            if spec in ("optimal", "greedy-fhdp"):
                return solve_fhdp(m, self.horizon).policy
            return FiniteHorizonPolicy.repeat(_parse_actions(spec, m), self.horizon)
        if spec == "greedy-fhdp":
            raise InputError("InvalidPolicy", "greedy-fhdp needs --horizon")
        if spec == "optimal":
            if self.family == "discounted":
                return solve_droe(m, self.gamma).policy
            return self.optimal().policy
        return _parse_actions(spec, m)

    def optimal(self):
        if self.aroe is None:
            self.aroe = solve_aroe(self.model, ref_state=getattr(self.args, "ref_state", 0),
                                   cap=getattr(self.args, "cap", 10**6))
        return self.aroe

    def solution(self, policy):
        m = self.model
        if self.family == "finite_horizon":
            return solve_fhpe(m, policy)
        if self.family == "discounted":
            return solve_drpe(m, policy, self.gamma)
        return solve_arpe(m, policy, getattr(self.args, "ref_state", 0))


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}


def _report(args, model, result) -> dict:
    return {
        "tool": "mdpconc",
        "version": __version__,
        "command": args.command,
        "config": _config(args),
        "model_sha256": model.digest() if model is not None else None,
        "result": result,
    }


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- commands ---------------------------------------------------------------


def cmd_validate(args) -> int:
    path = Path(args.model)
    if not path.is_file():
        errs = [{"error": "FileNotFound", "message": f"no such file: {path}"}]
        _emit(args, dumps({"valid": False, "errors": errs, "config": _config(args),
                           "tool": "mdpconc", "version": __version__}))
        return EXIT_INPUT
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        errs = [{"error": "JSONDecodeError", "message": str(e)}]
        _emit(args, dumps({"valid": False, "errors": errs, "config": _config(args),
                           "tool": "mdpconc", "version": __version__}))
        return EXIT_INPUT
    issues = model_issues(raw)
    if issues:
        _emit(args, dumps({"valid": False, "errors": [e.to_dict() for e in issues],
                           "config": _config(args), "tool": "mdpconc", "version": __version__}))
        return EXIT_INPUT
    model = load_model(path)
    summary = {
        "valid": True,
        "n_states": model.n_states,
        "n_actions": model.n_actions,
        "r_max": model.r_max,
        "gamma": model.gamma,
        "horizon": model.horizon,
    }
    _emit(args, dumps(_report(args, model, summary)))
    return EXIT_OK


def cmd_classify(args) -> int:
    model = _load(args.model)
    cls = classify_model(model, args.cap)
    result = {"class": cls.to_dict()}
    if args.policy and args.policy != "optimal":
        pi = _parse_actions(args.policy, model)
        cs = classify_chain(induced_chain(model, pi))
        result["policy"] = {
            "decision": list(pi.decision),
            "recurrent_classes": [sorted(c) for c in cs.recurrent_classes],
            "transient_states": sorted(cs.transient_states),
            "in_pi_ar": in_pi_ar(model, pi),
        }
    _emit(args, dumps(_report(args, model, result)))
    return EXIT_OK


def cmd_solve(args) -> int:
    ctx = Context(args)
    m = ctx.model
    if ctx.family == "finite_horizon":
        if args.policy in ("optimal", "greedy-fhdp"):
            sol = solve_fhdp(m, ctx.horizon)
        else:
            sol = solve_fhpe(m, ctx.policy(args.policy))
        res = {"family": ctx.family, "horizon": sol.horizon, "V_t": list(sol.v),
               "policy": sol.policy}
    elif ctx.family == "discounted":
        if args.policy == "optimal":
            sol = solve_droe(m, ctx.gamma)
            res = {"family": ctx.family, "gamma": sol.gamma, "V": sol.v,
                   "optimal_actions": [list(a) for a in sol.optimal_actions],
                   "policy": sol.policy}
        else:
            pi = ctx.policy(args.policy)
            sol = solve_drpe(m, pi, ctx.gamma)
            res = {"family": ctx.family, "gamma": sol.gamma, "V": sol.v, "policy": pi}
    else:
        if args.policy == "optimal":
            sol = ctx.optimal()
            res = {"family": ctx.family, "lambda_star": sol.lambda_star, "V_star": sol.v_star,
                   "ref_state": sol.ref_state, "iterations": sol.iterations,
                   "final_span": sol.final_span,
                   "optimal_actions": [list(a) for a in sol.optimal_actions],
                   "policy": sol.policy}
        else:
            pi = ctx.policy(args.policy)
            sol = solve_arpe(m, pi, args.ref_state)
            res = {"family": ctx.family, "lambda": sol.lam, "V": sol.v,
                   "ref_state": sol.ref_state, "policy": pi}
    _emit(args, dumps(_report(args, m, res)))
    return EXIT_OK


def cmd_stats(args) -> int:
    ctx = Context(args)
    m = ctx.model
    pi = ctx.policy(args.policy)
    sol = ctx.solution(pi)
    if ctx.family == "finite_horizon":
        fh = fh_dispersion(m, pi, sol, args.support_only)
        res = {"family": ctx.family, **fh.to_dict(),
               "K_bar": [fh.k_bar(t) for t in range(fh.horizon + 2)],
               "H_bar": [fh.h_bar(t) for t in range(fh.horizon + 2)],
               "g": [fh.g(t) for t in range(fh.horizon + 2)], "policy": pi}
    elif ctx.family == "discounted":
        P = induced_chain(m, pi).transition
        res = {"family": ctx.family, "gamma": ctx.gamma, "K_gamma": _kdev(P, sol.v, args.support_only),
               "H_gamma": span(sol.v), "policy": pi}
    else:
        st = dispersion(m, pi, sol.v, with_diameter=True, support_only=args.support_only)
        res = {"family": ctx.family, "lambda": sol.lam, **st.to_dict(), "policy": pi}
    _emit(args, dumps(_report(args, m, res)))
    return EXIT_OK


def _kinds(args) -> list[str]:
    kinds = [k.strip() for k in args.bound.split(",") if k.strip()]
    bad = [k for k in kinds if k not in B.ALL_KINDS]
    if bad:
        raise InputError("UnknownBound", f"unknown bound kind(s) {bad}; choose from {B.ALL_KINDS}")
    families = {B.BoundRequest(kind=k, T=1, delta=0.5).family for k in kinds}
    if len(families) > 1:
        raise InputError("MixedFamilies", "average, discounted and finite-horizon kinds "
                                          "cannot be mixed in one run")
    return kinds


def _requests(ctx: Context, args, kinds, need_policy: bool = True):
    m = ctx.model
    model_only = not need_policy and all(k.startswith(("policy_independent", "regret_gap_model")) for k in kinds)
    pi = sol = pi2 = sol2 = None
    if not model_only:
        pi = ctx.policy(args.policy)
        sol = ctx.solution(pi)
    if any("two_policy" in k for k in kinds):
        if not args.policy2:
            raise InputError("MissingOption", "two-policy bounds need --policy2")
        pi2 = ctx.policy(args.policy2)
        sol2 = ctx.solution(pi2)
    if any("two_optimal" in k for k in kinds):
        pi2 = ctx.policy(args.policy2) if args.policy2 else pi
        sol2 = ctx.solution(pi2)
    diam = None
    if any(k.startswith("policy_independent") or k.startswith("regret_gap_model") for k in kinds):
        diam = diameter(m)
    reqs = [sim.build_request(k, args.T, args.delta, m, pi, sol, pi2, sol2,
                              args.conservative_threshold, args.support_only, diam)
            for k in kinds]
    return pi, sol, pi2, sol2, reqs


def cmd_bounds(args) -> int:
    kinds = _kinds(args)
    ctx = Context(args, B.BoundRequest(kind=kinds[0], T=1, delta=0.5).family)
    _, _, _, _, reqs = _requests(ctx, args, kinds, need_policy=False)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["T"]
        for k in kinds:
            header += [k, f"{k}_applicable"]
        w.writerow(header)
        for t in range(1, args.T + 1):
            row = [t]
            for r in reqs:
                res = B.evaluate(r.with_T(t))
                row += [repr(float(res.value)), int(res.applicable)]
            w.writerow(row)
        _emit(args, buf.getvalue())
        return EXIT_OK
    res = {k: B.evaluate(r).to_dict() for k, r in zip(kinds, reqs)}
    inputs = {k: {f: getattr(r, f) for f in ("K", "H", "K2", "H2", "D", "r_max", "gamma")}
              for k, r in zip(kinds, reqs)}
    _emit(args, dumps(_report(args, ctx.model, {"bounds": res, "inputs": inputs})))
    return EXIT_OK


def cmd_simulate(args) -> int:
    ctx = Context(args)
    m = ctx.model
    pi = ctx.policy(args.policy)
    runs = []
    for run in range(args.runs):
        tr = sim.simulate(m, pi, args.T, args.seed, args.initial, run)
        entry = {"run": run, "states": tr.states, "actions": tr.actions,
                 "reward": sim.cumulative_reward(tr)}
        if ctx.gamma is not None:
            entry["discounted_reward"] = sim.discounted_reward(tr, ctx.gamma)
        runs.append(entry)
    _emit(args, dumps(_report(args, m, {"policy": pi, "trajectories": runs})))
    return EXIT_OK


def _learner(args, model):
    if args.learner == "uniform":
        return sim.UniformRandomPolicy(model.n_actions)
    return sim.FixedPolicy(_parse_actions(args.learner, model))


def cmd_verify(args) -> int:
    kinds = _kinds(args)
    family = B.BoundRequest(kind=kinds[0], T=1, delta=0.5).family
    ctx = Context(args, family)
    m = ctx.model
    pi, sol, pi2, sol2, reqs = _requests(ctx, args, kinds)
    reports = {}
    ok = True
    for k, req in zip(kinds, reqs):
        if k.startswith("regret_gap") and "model" not in k:
            rep = sim.regret_gap_experiment(m, ctx.optimal(), _learner(args, m), args.T,
                                            args.runs, args.seed, args.delta,
                                            "lil" if "lil" in k else "azuma", args.initial)
        else:
            rep = sim.coverage_experiment(m, pi, sol, req, args.runs, args.T, args.seed,
                                          args.reading, args.initial, pi2, sol2)
        reports[k] = rep.to_dict()
        ok &= rep.passed
    _emit(args, dumps(_report(args, m, {"coverage": reports, "passed": ok})))
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "validate": cmd_validate,
    "classify": cmd_classify,
    "solve": cmd_solve,
    "stats": cmd_stats,
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InputError as e:
        err = {"error": e.code, "message": str(e)}
    except MdpConcError as e:
        err = e.to_dict()
    except (ValueError, OSError) as e:
        err = {"error": type(e).__name__, "message": str(e)}
    _emit(args, dumps({"tool": "mdpconc", "version": __version__, "command": args.command,
                       "config": _config(args), "errors": [err]}))
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
