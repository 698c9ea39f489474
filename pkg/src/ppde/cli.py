"""Command line interface: ``ppde {solve,bound,snell,verify,example}``.

Exit codes: 0 success, 1 a verification failed, 2 invalid configuration,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
import warnings
from importlib import resources

import numpy as np
import yaml

from . import generator as gen
from . import terminal as term
from .cascade import BudgetExceeded, CascadeConfig, build_cascade, global_bound_check, to_json
from .local_pde import CFLError
from .stochastic import (Lattice, SnellProblem, bounding_value_pde, bounding_value_ppde,
                         degenerate_example, exit_count_tail, snell_envelope)

log = logging.getLogger("ppde")

EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 1, 2, 3


class InvalidConfig(Exception):
    pass


class NumericFailure(Exception):
    pass


def load_config(path):
    """Read YAML or JSON and validate against the bundled schema."""
    import jsonschema

    if path is None:
        cfg = {}
    else:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise InvalidConfig(str(exc)) from None
        try:
            cfg = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
        except (ValueError, yaml.YAMLError) as exc:
            raise InvalidConfig(f"cannot parse {path}: {exc}") from None
        cfg = cfg or {}
    schema = json.loads(resources.files("ppde").joinpath("config_schema.json").read_text())
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        raise InvalidConfig(f"config: {exc.message}") from None
    return cfg


def _apply_overrides(cfg, args):
    cfg = json.loads(json.dumps(cfg))
    casc = cfg.setdefault("cascade", {})
    if getattr(args, "eps", None):
        try:
            casc["eps"] = [float(e) for e in args.eps.split(",")]
        except ValueError:
            raise InvalidConfig(f"bad --eps {args.eps!r}") from None
    if getattr(args, "levels", None) is not None:
        casc["max_levels"] = None if args.levels in ("none", "inf") else int(args.levels)
    if getattr(args, "grid", None) is not None:
        casc["nx"] = args.grid
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        cfg["threads"] = args.threads
    return cfg


def build_problem(cfg):
    T = float(cfg.get("horizon", 1.0))
    g = cfg.get("generator", {"name": "heat"})
    t = cfg.get("terminal", {"name": "marginal", "params": {"shape": "cos"}})
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            G = gen.make_generator(g["name"], **g.get("params", {}))
        xi = term.make_terminal(t["name"], T, **t.get("params", {}))
    except (gen.ConfigurationError, ValueError, TypeError) as exc:
        raise InvalidConfig(str(exc)) from None
    return G, xi, T


def cascade_configs(cfg, T):
    casc = dict(cfg.get("cascade", {}))
    eps = casc.pop("eps", [0.4, 0.2])
    eps = [eps] if isinstance(eps, (int, float)) else list(eps)
    casc.pop("truncation_paths", None)
    casc.setdefault("max_levels", None)
    try:
        return [CascadeConfig(eps=float(e), horizon=T, threads=int(cfg.get("threads", 1)), **casc)
                for e in eps]
    except (gen.ConfigurationError, TypeError) as exc:
        raise InvalidConfig(str(exc)) from None


def _write(out, name, text):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, name), "w") as fh:
        fh.write(text)


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def _check_finite(*values):
    if not all(math.isfinite(v) for v in values):
        raise NumericFailure("non-finite value produced")


def run_solve(cfg):
    G, xi, T = build_problem(cfg)
    seed = int(cfg.get("seed", 0))
    n_trunc = int(cfg.get("cascade", {}).get("truncation_paths", 2000))
    records, timings = [], {}
    for cc in cascade_configs(cfg, T):
        t0 = time.perf_counter()
        try:
            st = build_cascade(G, xi, cc)
        except BudgetExceeded as exc:
            raise NumericFailure(str(exc)) from None
        timings[f"eps={cc.eps!r}"] = time.perf_counter() - t0
        up, lo = st.root
        _check_finite(up, lo)
        if cc.max_levels is None:
            trunc = dict(levels="unbounded", capacity_bound=0.0)
        else:
            trunc = exit_count_tail(G.L0, cc.eps, T, cc.max_levels, n_paths=n_trunc, seed=seed,
                                    threads=cc.threads)
        rec = json.loads(to_json(st))
        rec["truncation_estimate"] = trunc
        rec["global_bound"] = global_bound_check(st, G, xi)
        records.append(rec)
    return dict(generator=G.name, terminal=xi.name, horizon=T, seed=seed, runs=records), timings


def cmd_solve(args):
    cfg = _apply_overrides(load_config(args.config), args)
    result, timings = run_solve(cfg)
    _write(args.out, "result.json", _dumps(result))
    _write(args.out, "timings.json", _dumps(timings))
    rows = [[r["eps"], r["theta_upper"], r["theta_lower"], r["midpoint"], r["gap"]]
            for r in result["runs"]]
    with open(os.path.join(args.out, "convergence.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "theta_upper", "theta_lower", "midpoint", "gap"])
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
    for r in result["runs"]:
        print(f"eps={r['eps']:g} theta in [{r['theta_lower']:.6f}, {r['theta_upper']:.6f}] "
              f"gap={r['gap']:.3g}")
    return 0


def _lattice(cfg):
    lat = cfg.get("lattice", {})
    try:
        return Lattice(**{"n_steps": 64, **lat})
    except gen.ConfigurationError as exc:
        raise InvalidConfig(str(exc)) from None


def cmd_bound(args):
    cfg = _apply_overrides(load_config(args.config), args)
    G, xi, T = build_problem(cfg)
    lat = _lattice(cfg)
    if xi.markov is None:
        raise InvalidConfig("bounding values need a terminal-value functional")
    half = Lattice(max(1, lat.n_steps // 2), lat.alpha_points, lat.beta_points, lat.b_points)
    try:
        up = [bounding_value_ppde(xi, G.L0, G.C0, G.c0, "upper", l, T).value for l in (half, lat)]
        lo = [bounding_value_ppde(xi, G.L0, G.C0, G.c0, "lower", l, T).value for l in (half, lat)]
    except gen.ConfigurationError as exc:
        raise InvalidConfig(str(exc)) from None
    _check_finite(*up, *lo)
    tol = abs(up[1] - up[0]) + abs(lo[1] - lo[0])
    if args.against:
        with open(args.against) as fh:
            runs = json.load(fh)["runs"]
    else:
        runs = run_solve(cfg)[0]["runs"]
    checks = []
    for r in runs:
        ok = r["theta_upper"] <= up[1] + tol and r["theta_lower"] >= lo[1] - tol
        checks.append(dict(eps=r["eps"], theta_upper=r["theta_upper"], theta_lower=r["theta_lower"],
                           ok=ok))
    out = dict(w_upper=up[1], w_lower=lo[1], tolerance=tol, tolerance_source="lattice refinement",
               checks=checks, ok=all(c["ok"] for c in checks))
    _write(args.out, "bound.json", _dumps(out))
    print(f"w_lower={lo[1]:.6f} w_upper={up[1]:.6f} sandwich {'ok' if out['ok'] else 'VIOLATED'}")
    return 0 if out["ok"] else EXIT_FAIL


def _reward(spec, seed, lat, L, T):
    name, p = spec["name"], spec.get("params", {})
    if name == "linear_time":
        a, b = float(p.get("a", 0.0)), float(p.get("b", 1.0))
        return lambda t, x: a + b * t + 0 * x
    if name == "put":
        K = float(p.get("strike", 0.0))
        return lambda t, x: np.maximum(K - x, 0.0)
    if name == "random":
        rng = np.random.default_rng(seed)
        N = lat.n_steps
        R = rng.uniform(-1, 1, (N + 1, 2 * N + 1))
        dt = T / N
        dx = math.sqrt(2 * L * dt)
        return lambda t, x: R[int(round(t / dt)), np.rint(x / dx).astype(int) + N]
    raise InvalidConfig(f"unknown reward {name!r}")


def cmd_snell(args):
    cfg = _apply_overrides(load_config(args.config), args)
    sn = cfg.get("snell", {})
    T = float(cfg.get("horizon", 1.0))
    lat = _lattice(cfg)
    L, c0 = float(sn.get("L", 1.0)), float(sn.get("c0", 0.0))
    reward = _reward(sn.get("reward", {"name": "linear_time"}), int(cfg.get("seed", 0)), lat, L, T)
    radius = sn.get("radius")
    problem = SnellProblem(reward, L, c0, T, radius=np.inf if radius is None else radius,
                           t0=sn.get("t0"))
    try:
        res = snell_envelope(problem, lat)
    except gen.ConfigurationError as exc:
        raise InvalidConfig(str(exc)) from None
    _check_finite(res.Y0)
    out = dict(Y0=res.Y0, stop_at_root=bool(res.stop[0][0]), n_steps=lat.n_steps,
               stop_region_size=int(sum(s.sum() for s in res.stop)))
    _write(args.out, "snell.json", _dumps(out))
    print(f"Y0={res.Y0:.10g} stop_at_root={out['stop_at_root']}")
    return 0


def cmd_verify(args):
    from .harness import junit_xml, run_suite, suite_failed, summary

    cfg = _apply_overrides(load_config(args.config), args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reports = run_suite(threads=int(cfg.get("threads", 1)), seed=int(cfg.get("seed", 0)))
    _write(args.out, "junit.xml", junit_xml(reports))
    text = summary(reports)
    _write(args.out, "summary.txt", text + "\n")
    print(text)
    return EXIT_FAIL if suite_failed(reports) else 0


def cmd_example(args):
    if args.name != "degenerate":
        raise InvalidConfig(f"unknown example {args.name!r}")
    cfg = load_config(args.config).get("example", {})
    L0, C0 = float(cfg.get("L0", 1.0)), float(cfg.get("C0", 1.0))
    T_eta, t = float(cfg.get("T_eta", 1.0)), float(cfg.get("t", 0.0))
    closed = degenerate_example(L0, C0, T_eta, t)
    est = bounding_value_pde(lambda s, x: s + 0 * x, t, T_eta, 1.0, L0, C0, 0.0, "upper",
                             _lattice({"lattice": {"n_steps": 64}}))
    out = dict(closed_form_interior=closed["interior"], boundary_value=closed["boundary"],
               lattice_interior=est.value, degenerate=True,
               discontinuous=closed["interior"] != closed["boundary"])
    if args.out:
        _write(args.out, "example.json", _dumps(out))
    print(f"interior value {closed['interior']:.15g} (lattice {est.value:.15g}); "
          f"boundary value {closed['boundary']:.15g}; degenerate c0 = 0")
    return 0


def make_parser():
    p = argparse.ArgumentParser(prog="ppde", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default="out"):
        sp.add_argument("--config", help="YAML or JSON configuration file")
        sp.add_argument("--eps", help="comma separated exit radii")
        sp.add_argument("--levels", help="truncation level (or 'none')")
        sp.add_argument("--grid", type=int, help="space nodes per local cylinder (odd)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", default=out_default)
        sp.add_argument("--threads", type=int)
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("solve", help="run the cascade over the eps schedule")
    common(sp)
    sp.set_defaults(func=cmd_solve)
    sp = sub.add_parser("bound", help="bounding values and the sandwich check")
    common(sp)
    sp.add_argument("--against", help="result.json from a previous solve")
    sp.set_defaults(func=cmd_bound)
    sp = sub.add_parser("snell", help="optimal stopping on the lattice")
    common(sp)
    sp.set_defaults(func=cmd_snell)
    sp = sub.add_parser("verify", help="run the verification suite")
    common(sp)
    sp.set_defaults(func=cmd_verify)
    sp = sub.add_parser("example", help="closed-form examples")
    sp.add_argument("name", choices=["degenerate"])
    common(sp, out_default=None)
    sp.set_defaults(func=cmd_example)
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidConfig as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, CFLError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
