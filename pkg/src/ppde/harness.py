"""Verification checks with explicit tolerances and a JUnit-style report.

Every check returns a :class:`CheckReport` whose tolerances name their
source: a grid Richardson estimate, a Monte Carlo standard error, or a
configured value.
"""
from __future__ import annotations

import math
import time
import xml.etree.ElementTree as ET
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from . import generator as gen
from . import terminal as term
from .cascade import (CascadeConfig, build_cascade, global_bound_check, shared_node_violation)
from .local_pde import (BoundaryData, Cylinder, barrier_sub, barrier_super, check_stability,
                        solve_frozen)
from .stochastic import (Lattice, SnellProblem, bounding_value_ppde, degenerate_example,
                         bounding_value_pde, snell_by_enumeration, snell_envelope)


@dataclass
class CheckReport:
    name: str
    status: str
    measured: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    message: str = ""
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def line(self) -> str:
        vals = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(self.measured.items()))
        tols = ", ".join(f"{k}={_fmt(v)} [{self.provenance.get(k, 'config')}]"
                         for k, v in sorted(self.tolerances.items()))
        return f"{self.status.upper():5s} {self.name}: {vals}" + (f" | tol {tols}" if tols else "")


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _status(ok):
    return "pass" if ok else "fail"


def check_partial_comparison(sub: Callable, sup: Callable, points: Iterable, tol=0.0,
                             provenance="config", name="partial_comparison") -> CheckReport:
    """``sub(t, omega) <= sup(t, omega) + tol`` at every sample point."""
    worst = -math.inf
    n = 0
    for t, omega in points:
        worst = max(worst, float(sub(t, omega)) - float(sup(t, omega)))
        n += 1
    return CheckReport(name, _status(worst <= tol), dict(max_excess=worst, points=n),
                       dict(comparison=tol), dict(comparison=provenance))


def check_perron_gap(G, xi, cfg: CascadeConfig, eps_list, levels=None, tol=0.02,
                     name="perron_gap") -> CheckReport:
    """Root gap of the level-free cascade along ``eps_list`` and, at the first
    eps, monotone shrinking of the gap along ``levels``."""
    gaps, mids = [], []
    for eps in eps_list:
        st = build_cascade(G, xi, cfg.with_(eps=eps, max_levels=None))
        gaps.append(st.gap)
        mids.append(0.5 * sum(st.root))
    level_gaps = []
    if levels:
        K = max(levels) + 1
        level_gaps = [build_cascade(G, xi, cfg.with_(eps=eps_list[0], max_levels=m, positions=K)).gap
                      for m in levels]
    monotone = all(b <= a + 1e-12 for a, b in zip(level_gaps[:-1], level_gaps[1:]))
    ok = monotone and max(gaps) <= tol
    measured = dict(max_gap=max(gaps), final_midpoint=mids[-1], level_gaps_monotone=monotone)
    return CheckReport(name, _status(ok), measured, dict(gap=tol), dict(gap="config"),
                       dict(eps=list(eps_list), levels=list(levels or [])))


def check_change_of_variable(G, xi, cfg: CascadeConfig, a=2.0, c=0.5,
                             name="change_of_variable") -> CheckReport:
    """Affine ``Phi(x) = a x + c`` commutes with the cascade up to the sandwich gaps."""
    base = build_cascade(G, xi, cfg)
    Gt = gen.affine_generator(G, a, c)
    f = xi.markov
    xit = term.terminal_value(lambda x: a * f(x) + c, xi.horizon, a * xi.bound + abs(c))
    moved = build_cascade(Gt, xit, cfg)
    lhs = 0.5 * sum(moved.root)
    rhs = a * 0.5 * sum(base.root) + c
    tol = 0.5 * (moved.gap + a * base.gap) + 1e-9
    return CheckReport(name, _status(abs(lhs - rhs) <= tol), dict(difference=abs(lhs - rhs)),
                       dict(difference=tol), dict(difference="sandwich gaps"),
                       dict(a=a, c=c, generator=G.name))


def check_barriers(generators, deltas=(1.0, 0.1, 0.01), eps=0.5, T_eta=1.0, nx=21,
                   name="barrier_sandwich") -> CheckReport:
    """``w_lower <= v <= w_upper`` for the local solve with bounded boundary data."""
    worst = -math.inf
    for G in generators:
        Q = Cylinder(0.0, T_eta, eps, nx)
        bd = BoundaryData(lambda s, x: np.sin(3 * x + s), lambda x: np.sin(3 * x + T_eta))
        v = solve_frozen(G, Q, bd)
        for d in deltas:
            up = barrier_super(1.0, d, G.L0, G.C0, T_eta)(v.times)[:, None]
            lo = barrier_sub(1.0, d, G.L0, G.C0, T_eta)(v.times)[:, None]
            worst = max(worst, float(np.max(v.values - up)), float(np.max(lo - v.values)))
    return CheckReport(name, _status(worst <= 0.0), dict(max_violation=worst),
                       dict(violation=0.0), dict(violation="exact"),
                       dict(deltas=list(deltas), generators=[G.name for G in generators]))


def check_local_stability(G, n_pairs=10, seed=0, eps=0.5, nx=21, name="local_stability"):
    rng = np.random.default_rng(seed)
    Q = Cylinder(0.0, 1.0, eps, nx)
    order, contraction = -math.inf, -math.inf
    for _ in range(n_pairs):
        a, b, c = rng.normal(size=3)
        shift = abs(rng.normal()) * 0.3
        bd1 = BoundaryData(lambda s, x: a * np.sin(b * x + c * s), lambda x: a * np.sin(b * x + c))
        bd2 = BoundaryData(lambda s, x: a * np.sin(b * x + c * s) + shift * (1 + s * x * x),
                           lambda x: a * np.sin(b * x + c) + shift * (1 + x * x))
        rep = check_stability(G, Q, bd1, bd2)
        order = max(order, rep.order_violation)
        contraction = max(contraction, rep.contraction_gap - rep.boundary_gap)
    ok = order <= 0.0 and contraction <= 1e-12
    return CheckReport(name, _status(ok), dict(order_violation=order, contraction_excess=contraction),
                       dict(order=0.0, contraction=1e-12), dict(order="exact", contraction="float"),
                       dict(generator=G.name, pairs=n_pairs, seed=seed))


def check_sandwich_levels(G, xi, cfg: CascadeConfig, m, name="sandwich_levels"):
    K = cfg.positions if cfg.positions is not None else m + 1
    a = build_cascade(G, xi, cfg.with_(max_levels=m, positions=K))
    b = build_cascade(G, xi, cfg.with_(max_levels=m + 1, positions=K))
    worst = shared_node_violation(a, b)
    return CheckReport(name, _status(worst <= 0.0), dict(max_violation=worst),
                       dict(violation=0.0), dict(violation="exact"), dict(levels=m))


def check_global_bound(G, xi, cfg: CascadeConfig, name="global_bound"):
    st = build_cascade(G, xi, cfg)
    res = global_bound_check(st, G, xi)
    return CheckReport(name, _status(res["ok"]), dict(max_abs=res["max_abs"]),
                       dict(bound=res["bound"]), dict(bound="a priori"))


def check_snell(n_rewards=20, seed=0, n_steps=8, name="snell_exact"):
    rng = np.random.default_rng(seed)
    lat = Lattice(n_steps)
    mismatches = 0
    for _ in range(n_rewards):
        R = rng.uniform(-1, 1, (n_steps + 1, 2 * n_steps + 1))
        dt = 1.0 / n_steps
        dx = math.sqrt(2 * dt)
        reward = (lambda t, x, R=R: R[int(round(t / dt)), np.rint(x / dx).astype(int) + n_steps])
        pr = SnellProblem(reward, 1.0, 0.25, 1.0, radius=1.0)
        if snell_envelope(pr, lat).Y0 != snell_by_enumeration(pr, lat):
            mismatches += 1
    return CheckReport(name, _status(mismatches == 0), dict(mismatches=mismatches),
                       dict(mismatches=0), dict(mismatches="exact"), dict(rewards=n_rewards, seed=seed))


def check_degenerate(name="degenerate_example"):
    closed = degenerate_example(1.0, 1.0, 1.0, 0.0)
    est = bounding_value_pde(lambda s, x: s + 0 * x, 0.0, 1.0, 1.0, 1.0, 1.0, 0.0, "upper",
                             Lattice(64))
    err = abs(closed["interior"] - (2 * math.e - 1))
    dp_err = abs(est.value - closed["interior"])
    ok = err <= 1e-12 and dp_err <= 1e-9 and closed["boundary"] == 0.0
    return CheckReport(name, _status(ok), dict(closed_form_error=err, lattice_error=dp_err),
                       dict(closed_form=1e-12, lattice=1e-9),
                       dict(closed_form="config", lattice="config"))


def check_bound_sandwich(G, xi, cfg: CascadeConfig, lattice=Lattice(128), name="bounding_sandwich"):
    """``w_lower <= cascade root <= w_upper`` up to the lattice refinement difference."""
    st = build_cascade(G, xi, cfg)
    ups = [bounding_value_ppde(xi, G.L0, G.C0, G.c0, "upper", Lattice(n)).value
           for n in (lattice.n_steps // 2, lattice.n_steps)]
    los = [bounding_value_ppde(xi, G.L0, G.C0, G.c0, "lower", Lattice(n)).value
           for n in (lattice.n_steps // 2, lattice.n_steps)]
    tol = abs(ups[1] - ups[0]) + abs(los[1] - los[0])
    up, lo = st.root
    excess = max(up - ups[1], los[1] - lo)
    return CheckReport(name, _status(excess <= tol), dict(excess=excess, w_upper=ups[1],
                                                         w_lower=los[1]),
                       dict(excess=tol), dict(excess="lattice refinement"))


def default_checks(seed=0):
    """The built-in suite: small instances of every verifiable property."""
    heat = gen.heat()
    iso = gen.isaacs()
    cosine = term.marginal("cos")
    coarse = CascadeConfig(eps=0.5, max_levels=None, nx=11)
    return {
        "barrier_sandwich": lambda: check_barriers(_builtin_generators()),
        "bounding_sandwich": lambda: check_bound_sandwich(heat, cosine, coarse),
        "change_of_variable": lambda: check_change_of_variable(iso, cosine, coarse),
        "degenerate_example": check_degenerate,
        "global_bound": lambda: check_global_bound(iso, cosine, coarse.with_(max_levels=6)),
        "local_stability": lambda: check_local_stability(iso, seed=seed),
        "perron_gap": lambda: check_perron_gap(heat, cosine, CascadeConfig(eps=0.4, nx=11),
                                               [0.4, 0.2], levels=[2, 4, 8]),
        "sandwich_levels": lambda: check_sandwich_levels(iso, cosine, CascadeConfig(eps=0.5, nx=11), 4),
        "snell_exact": lambda: check_snell(seed=seed),
    }


def _builtin_generators():
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return [gen.heat(), gen.heat(sigma=1.2, drift=0.3, rate=-0.2, source=0.5),
                gen.semilinear(k_f=0.3), gen.hjb(k_f=0.2), gen.isaacs()]


def run_suite(checks: Optional[dict] = None, threads=1, seed=0):
    """Run checks concurrently; reports come back sorted by name."""
    checks = checks if checks is not None else default_checks(seed)

    def run(item):
        name, fn = item
        t0 = time.perf_counter()
        try:
            rep = fn()
        except Exception as exc:  # reported, not raised
            rep = CheckReport(name, "error", message=f"{type(exc).__name__}: {exc}")
        rep.name = name
        rep.seconds = time.perf_counter() - t0
        return rep

    items = sorted(checks.items())
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            reports = list(pool.map(run, items))
    else:
        reports = [run(it) for it in items]
    return reports


def suite_failed(reports) -> bool:
    return any(not r.passed for r in reports)


def junit_xml(reports, suite="ppde") -> str:
    root = ET.Element("testsuite", name=suite, tests=str(len(reports)),
                      failures=str(sum(r.status == "fail" for r in reports)),
                      errors=str(sum(r.status == "error" for r in reports)))
    for r in reports:
        case = ET.SubElement(root, "testcase", name=r.name, classname=suite,
                             time=f"{r.seconds:.3f}")
        if r.status == "fail":
            ET.SubElement(case, "failure", message=r.line())
        elif r.status == "error":
            ET.SubElement(case, "error", message=r.message)
        out = ET.SubElement(case, "system-out")
        out.text = r.line()
    return ET.tostring(root, encoding="unicode")


def summary(reports) -> str:
    lines = [r.line() if r.status != "error" else f"ERROR {r.name}: {r.message}" for r in reports]
    passed = sum(r.passed for r in reports)
    lines.append(f"{passed}/{len(reports)} checks passed")
    return "\n".join(lines)
