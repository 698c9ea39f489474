"""Explicit monotone finite differences on a space-time cylinder (d=1).

The scheme for ``-v_s - g(s, v, v_x, v_xx) = 0`` marches backward from the
terminal slice::

    v[k] = v[k+1] + dt * (g(s[k+1], v, Dv, D2v) + kappa * D2v)

with central differences. ``kappa = max(0, L0 h / 2 - c0)`` is an artificial
viscosity that keeps the scheme monotone when the ellipticity ``c0`` is too
small to dominate the first-order term; it vanishes for ``h <= 2 c0 / L0``.
Linear functions of ``x`` and constants are reproduced exactly.
"""
from __future__ import annotations

import hashlib
import json
import os
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .generator import FrozenGenerator, GeneratorSpec, freeze


class CFLError(ValueError):
    """Requested time step breaks the monotonicity condition."""

    def __init__(self, msg, suggested_nt):
        super().__init__(msg)
        self.suggested_nt = suggested_nt


def artificial_viscosity(L0, c0, h):
    return max(0.0, 0.5 * L0 * h - c0)


def max_time_step(L0, c0, h, dim=1):
    """Largest monotone step ``h^2 / (2 d * 2 (L0 + kappa))``."""
    kappa = artificial_viscosity(L0, c0, h)
    return h * h / (2 * dim * 2 * (L0 + kappa))


def steps_for(duration, L0, c0, h, dim=1):
    if duration <= 0:
        return 0
    return int(np.ceil(duration / max_time_step(L0, c0, h, dim) - 1e-9))


def explicit_update(v, g_eval, dt, h, kappa, out=None):
    """Interior values one step earlier; ``v`` has the space axis last."""
    left, mid, right = v[..., :-2], v[..., 1:-1], v[..., 2:]
    z = (right - left) * (0.5 / h)
    gamma = ((right + left) - 2.0 * mid) * (1.0 / (h * h))
    rate = g_eval(mid, z, gamma)
    if kappa:
        rate = rate + kappa * gamma
    if out is None:
        return mid + dt * rate
    np.multiply(rate, dt, out=out)
    out += mid
    return out


@dataclass(frozen=True)
class Cylinder:
    """``[t0, T_eta] x [-eps_eta, eps_eta]`` discretized with ``nx`` points."""

    t0: float
    T_eta: float
    eps_eta: float
    nx: int = 41
    nt: Optional[int] = None
    dim: int = 1

    def __post_init__(self):
        if not (self.T_eta > self.t0 and self.eps_eta > 0):
            raise ValueError("empty cylinder")
        if self.nx < 3 or self.nx % 2 == 0:
            raise ValueError("nx must be odd and at least 3 (the centre must be a node)")
        if self.dim != 1:
            raise NotImplementedError("the local solver is one-dimensional")

    @property
    def h(self):
        return 2.0 * self.eps_eta / (self.nx - 1)

    @property
    def x(self):
        return np.linspace(-self.eps_eta, self.eps_eta, self.nx)

    def time_steps(self, L0, c0):
        need = steps_for(self.T_eta - self.t0, L0, c0, self.h)
        if self.nt is None:
            return need
        if self.nt < need:
            raise CFLError(f"nt={self.nt} violates the monotone step bound; use nt >= {need}", need)
        return self.nt


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data: ``lateral(s, x)`` on ``|x| = eps`` and ``terminal(x)``.

    Both callables must accept numpy arrays.
    """

    lateral: Callable
    terminal: Callable
    sup_norm: Optional[float] = None

    @classmethod
    def from_function(cls, h: Callable, T_eta: float):
        return cls(lateral=h, terminal=lambda x: h(T_eta, x))

    def corner_mismatch(self, Q: Cylinder) -> float:
        e = np.array([-Q.eps_eta, Q.eps_eta])
        return float(np.max(np.abs(self.lateral(Q.T_eta, e) - self.terminal(e))))


@dataclass
class ValueField:
    """Grid values ``values[k, j] = v(times[k], x[j])``."""

    times: np.ndarray
    x: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def at(self, t, x) -> float:
        """Bilinear interpolation (linear in time and in space)."""
        k = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2)
        t0, t1 = self.times[k], self.times[k + 1]
        w = 0.0 if t1 == t0 else min(max((t - t0) / (t1 - t0), 0.0), 1.0)
        row = (1 - w) * self.values[k] + w * self.values[k + 1]
        return float(np.interp(x, self.x, row))

    @property
    def initial(self) -> np.ndarray:
        return self.values[0]

    def to_csv(self, filename) -> None:
        T, X = np.meshgrid(self.times, self.x, indexing="ij")
        data = np.column_stack([T.ravel(), X.ravel(), self.values.ravel()])
        np.savetxt(filename, data, delimiter=",", header="t,x,v", comments="", fmt="%.17g")

    def save(self, filename) -> None:
        np.savez(filename, times=self.times, x=self.x, values=self.values,
                 meta=np.array(json.dumps(self.meta, sort_keys=True)))

    @classmethod
    def load(cls, filename) -> "ValueField":
        with np.load(filename) as data:
            return cls(data["times"], data["x"], data["values"], json.loads(str(data["meta"])))


def _as_frozen(g: Union[GeneratorSpec, FrozenGenerator], horizon) -> FrozenGenerator:
    if isinstance(g, FrozenGenerator):
        return g
    return freeze(g, 0.0, None if g.path_free else _zero_path(horizon), horizon)


def _zero_path(horizon):
    from .paths import Path
    return Path.zero(horizon=horizon)


def solve_frozen(g: Union[GeneratorSpec, FrozenGenerator], Q: Cylinder, bd: BoundaryData,
                 horizon: Optional[float] = None) -> ValueField:
    """Solve the frozen local problem on ``Q`` with Dirichlet data ``bd``.

    Raises :class:`CFLError` when ``Q.nt`` is too small for monotonicity.
    """
    horizon = Q.T_eta if horizon is None else horizon
    fg = _as_frozen(g, horizon)
    spec = fg.spec
    nt = Q.time_steps(spec.L0, spec.c0)
    h, x = Q.h, Q.x
    kappa = artificial_viscosity(spec.L0, spec.c0, h)
    times = np.linspace(Q.t0, Q.T_eta, nt + 1)
    dt = (Q.T_eta - Q.t0) / nt
    if bd.corner_mismatch(Q) > 1e-6:
        warnings.warn("lateral and terminal data disagree at the corners", stacklevel=2)
    values = np.empty((nt + 1, Q.nx))
    values[nt] = bd.terminal(x)
    ends = np.array([x[0], x[-1]])
    values[nt, [0, -1]] = bd.lateral(Q.T_eta, ends)
    for k in range(nt - 1, -1, -1):
        s = times[k + 1]
        explicit_update(values[k + 1], lambda y, z, gm: fg(s, y, z, gm), dt, h, kappa,
                        out=values[k, 1:-1])
        values[k, [0, -1]] = bd.lateral(times[k], ends)
    meta = dict(generator=spec.name, params=_jsonable(spec.params), L0=spec.L0, c0=spec.c0,
                C0=spec.C0, kappa=kappa, dt=dt, h=h, nt=nt, degenerate=spec.c0 == 0)
    return ValueField(times, x, values, meta)


def _jsonable(d):
    return {k: (v if isinstance(v, (int, float, str, bool)) or v is None else repr(v))
            for k, v in sorted(d.items())}


def cache_key(g: Union[GeneratorSpec, FrozenGenerator], Q: Cylinder, bd: BoundaryData) -> str:
    """Content hash of generator parameters, cylinder and sampled boundary data."""
    fg = _as_frozen(g, Q.T_eta)
    spec = fg.spec
    nt = Q.time_steps(spec.L0, spec.c0)
    times = np.linspace(Q.t0, Q.T_eta, nt + 1)
    e = np.array([-Q.eps_eta, Q.eps_eta])
    lat = np.array([bd.lateral(s, e) for s in times])
    head = json.dumps(dict(g=spec.name, p=_jsonable(spec.params), L0=spec.L0, c0=spec.c0,
                           C0=spec.C0, t=fg.t, cur=fg.current, Q=[Q.t0, Q.T_eta, Q.eps_eta, Q.nx, nt]),
                      sort_keys=True)
    digest = hashlib.sha256(head.encode())
    digest.update(np.ascontiguousarray(bd.terminal(Q.x), dtype=float).tobytes())
    digest.update(np.ascontiguousarray(lat, dtype=float).tobytes())
    return digest.hexdigest()[:32]


def cached_solve(g, Q: Cylinder, bd: BoundaryData, cache_dir) -> ValueField:
    """``solve_frozen`` with a binary cache keyed by :func:`cache_key`."""
    os.makedirs(cache_dir, exist_ok=True)
    fname = os.path.join(cache_dir, cache_key(g, Q, bd) + ".npz")
    if os.path.exists(fname):
        return ValueField.load(fname)
    field_ = solve_frozen(g, Q, bd)
    field_.save(fname)
    return field_


def grid_tolerance(g, Q: Cylinder, bd: BoundaryData) -> float:
    """Richardson-style estimate: max difference at ``t0`` between ``nx`` and ``2 nx - 1``."""
    coarse = solve_frozen(g, Q, bd)
    fine = solve_frozen(g, Cylinder(Q.t0, Q.T_eta, Q.eps_eta, 2 * Q.nx - 1, None, Q.dim), bd)
    return float(np.max(np.abs(coarse.initial - fine.initial[::2])))


# ---------------------------------------------------------------------------
# barriers

@dataclass(frozen=True)
class Barrier:
    """Spatially constant barrier ``sign * (h_sup + delta e^{lam (T_eta - t)})``."""

    h_sup: float
    delta: float
    lam: float
    T_eta: float
    sign: float = 1.0

    def __call__(self, t):
        return self.sign * (self.h_sup + self.delta * np.exp(self.lam * (self.T_eta - np.asarray(t))))

    def residual(self, t, L0, C0):
        """``-w' - g_bar(w, 0, 0)`` for the upper barrier (non-negative means supersolution)."""
        w = self.h_sup + self.delta * np.exp(self.lam * (self.T_eta - np.asarray(t)))
        dw = -self.lam * self.delta * np.exp(self.lam * (self.T_eta - np.asarray(t)))
        return -dw - (L0 * np.abs(w) + C0)


def barrier_lambda(h_sup, delta, L0, C0):
    if delta <= 0:
        raise ValueError("delta must be positive")
    return (C0 + L0 * h_sup) / delta + L0


def barrier_super(h_sup, delta, L0, C0, T_eta) -> Barrier:
    return Barrier(h_sup, delta, barrier_lambda(h_sup, delta, L0, C0), T_eta, 1.0)


def barrier_sub(h_sup, delta, L0, C0, T_eta) -> Barrier:
    return Barrier(h_sup, delta, barrier_lambda(h_sup, delta, L0, C0), T_eta, -1.0)


def global_barrier(bound_xi, L0, C0, T):
    """Exact solution of ``-w' = L0 w + C0``, ``w(T) = bound_xi``: a spatially constant
    supersolution of every generator dominated by the upper bounding generator."""
    def w(t):
        s = T - np.asarray(t, dtype=float)
        growth = np.exp(L0 * s)
        tail = C0 * s if L0 == 0 else C0 * np.expm1(L0 * s) / L0
        return bound_xi * growth + tail
    return w


@dataclass
class StabilityReport:
    ordered_input: bool
    order_violation: float
    contraction_gap: float
    boundary_gap: float

    @property
    def ok(self) -> bool:
        order_ok = (not self.ordered_input) or self.order_violation <= 0.0
        return order_ok and self.contraction_gap <= self.boundary_gap


def check_stability(g, Q: Cylinder, bd1: BoundaryData, bd2: BoundaryData, slack=0.0) -> StabilityReport:
    """Monotonicity and contraction between two boundary data sets.

    ``order_violation = max(v1 - v2)`` when ``h1 <= h2`` everywhere; the
    contraction bound is ``||(h1-h2)+|| + ||(h2-h1)+||`` over boundary nodes.
    """
    v1, v2 = solve_frozen(g, Q, bd1), solve_frozen(g, Q, bd2)
    x, times = Q.x, v1.times
    e = np.array([x[0], x[-1]])
    d_lat = np.array([bd1.lateral(s, e) - bd2.lateral(s, e) for s in times])
    d_term = bd1.terminal(x) - bd2.terminal(x)
    diffs = np.concatenate([d_lat.ravel(), d_term.ravel()])
    ordered = bool(np.all(diffs <= 0))
    bgap = float(np.max(np.maximum(diffs, 0)) + np.max(np.maximum(-diffs, 0))) + slack
    return StabilityReport(ordered, float(np.max(v1.values - v2.values)),
                           float(np.max(np.abs(v1.values - v2.values))), bgap)
