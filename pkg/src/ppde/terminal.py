"""Terminal path functionals built from marginals, running extremes and integrals.

Every functional carries a sup bound and an optional ``markov`` shortcut
``f(x_T)`` (vectorized) when it depends on the path only through its
terminal value.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .paths import Partition, Path, interp_partition, running_extremes


@dataclass(frozen=True)
class TerminalFunctional:
    """Bounded functional ``xi(omega)`` of a path on ``[0, T]``."""

    func: Callable
    horizon: float
    bound: float = np.inf
    modulus: Callable = field(default=lambda r: r)
    markov: Optional[Callable] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, omega: Path) -> float:
        return float(self.func(omega))

    def terminal_values(self, base: Path, t0: float, xs) -> np.ndarray:
        """``xi`` of the path following ``base`` to ``t0`` then moving linearly to
        ``base(t0) + x`` at the horizon, for every ``x`` in ``xs``."""
        xs = np.asarray(xs, dtype=float)
        if self.markov is not None:
            return np.asarray(self.markov(float(base(t0)[0]) + xs), dtype=float)
        stopped = base.stopped(t0)
        out = np.empty(xs.size)
        for i, x in enumerate(xs.ravel()):
            times = np.append(stopped.times, self.horizon)
            values = np.vstack([stopped.values, stopped.values[-1] + x])
            out[i] = self(Path(times, values, self.horizon))
        return out.reshape(xs.shape)


def make_marginal(g: Callable, times: Sequence[float], horizon: float, bound=np.inf,
                  name="marginal", params=None) -> TerminalFunctional:
    """``xi(omega) = g(values, maxes, mins)`` at the observation times.

    ``values``, ``maxes`` and ``mins`` have shape ``(len(times), d)``; the
    extremes are running extremes up to each observation time.
    """
    times = tuple(float(t) for t in times)
    if not times or any(b <= a for a, b in zip(times[:-1], times[1:])):
        raise ValueError("observation times must be increasing")
    if times[0] < 0 or times[-1] > horizon:
        raise ValueError("observation times must lie in [0, T]")

    def func(omega: Path):
        vals = omega.evaluate(times)
        ext = [running_extremes(omega, t) for t in times]
        maxes = np.array([e[0] for e in ext])
        mins = np.array([e[1] for e in ext])
        return g(vals, maxes, mins)

    return TerminalFunctional(func, horizon, bound, name=name, params=params or {})


def terminal_value(f: Callable, horizon: float, bound=np.inf, name="marginal",
                   params=None) -> TerminalFunctional:
    """Markov functional ``xi(omega) = f(omega_T)`` (``f`` vectorized)."""
    def func(omega: Path):
        return f(float(omega(horizon)[0]))
    return TerminalFunctional(func, horizon, bound, markov=f, name=name, params=params or {})


_GL_NODES = 8


def segment_integral(phi: Callable, t0, t1, x0, x1, n=_GL_NODES) -> float:
    """Gauss-Legendre rule for ``int_{t0}^{t1} phi(x(t)) dt`` with ``x`` linear.

    Exact for polynomial ``phi`` of degree below ``2 n``.
    """
    if t1 <= t0:
        return 0.0
    nodes, weights = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (nodes + 1.0)
    xs = x0 + s[:, None] * (x1 - x0)
    return float(0.5 * (t1 - t0) * np.sum(weights * phi(xs)))


def path_integral(phi: Callable, omega: Path, T: float, n=_GL_NODES) -> float:
    """``int_0^T phi(omega_t) dt`` segment by segment; ``phi`` maps (k, d) to (k,).

    For non-smooth ``phi`` (``|x|^p``) segments are split where a coordinate
    changes sign so each piece stays smooth.
    """
    times, vals = omega.knots_upto(T)
    total = 0.0
    for k in range(len(times) - 1):
        t0, t1, x0, x1 = times[k], times[k + 1], vals[k], vals[k + 1]
        cuts = [0.0, 1.0]
        for i in range(x0.size):
            if x0[i] * x1[i] < 0:
                cuts.append(x0[i] / (x0[i] - x1[i]))
        cuts = sorted(cuts)
        for a, b in zip(cuts[:-1], cuts[1:]):
            total += segment_integral(phi, t0 + a * (t1 - t0), t0 + b * (t1 - t0),
                                      x0 + a * (x1 - x0), x0 + b * (x1 - x0), n)
    return total


def make_integral(g: Callable, horizon: float, phi: Optional[Callable] = None, p: float = 1.0,
                  bound=np.inf, name="integral", params=None) -> TerminalFunctional:
    """``xi(omega) = g(int_0^T phi(omega_t) dt)``; default ``phi(x) = |x|^p``."""
    if phi is None:
        if p <= 0:
            raise ValueError("p must be positive")
        phi = lambda x: np.sum(np.abs(x) ** p, axis=-1)

    def func(omega: Path):
        return g(path_integral(phi, omega, horizon))

    return TerminalFunctional(func, horizon, bound, name=name, params=params or {})


def extend_to_partition(xi: TerminalFunctional, pi: Partition, dim=1) -> float:
    """``xi`` evaluated on the interpolation of a (possibly closed) partition."""
    return xi(interp_partition(pi, horizon=xi.horizon, dim=dim))


# ---------------------------------------------------------------------------
# builtins

def constant(value=0.0, horizon=1.0) -> TerminalFunctional:
    f = lambda x: np.full_like(np.asarray(x, dtype=float), value)
    return terminal_value(f, horizon, abs(value), name="constant", params=dict(value=value))


_SHAPES = {
    "cos": lambda a, k, c: (lambda x: a * np.cos(k * np.asarray(x) + c), abs(a)),
    "sin": lambda a, k, c: (lambda x: a * np.sin(k * np.asarray(x) + c), abs(a)),
    "tanh": lambda a, k, c: (lambda x: a * np.tanh(k * np.asarray(x) + c), abs(a)),
    "linear": lambda a, k, c: (lambda x: a * np.asarray(x) + c, np.inf),
}


def marginal(shape="cos", amplitude=1.0, frequency=1.0, phase=0.0, horizon=1.0):
    """``a shape(k x_T + c)`` for ``shape`` in cos, sin, tanh, linear."""
    try:
        f, bound = _SHAPES[shape](amplitude, frequency, phase)
    except KeyError:
        raise ValueError(f"unknown marginal shape {shape!r}") from None
    return terminal_value(f, horizon, bound, name="marginal",
                          params=dict(shape=shape, amplitude=amplitude, frequency=frequency,
                                      phase=phase))


def running_max(cap=np.inf, scale=1.0, horizon=1.0) -> TerminalFunctional:
    """``min(scale * max_{t<=T} omega_t, cap)``."""
    def g(vals, maxes, mins):
        return min(scale * float(maxes[-1, 0]), cap)
    return make_marginal(g, [horizon], horizon, bound=cap,
                         name="running_max", params=dict(cap=cap, scale=scale))


def integral(p=2.0, amplitude=1.0, horizon=1.0) -> TerminalFunctional:
    """``amplitude * tanh(int_0^T |omega_t|^p dt)``."""
    return make_integral(lambda v: amplitude * np.tanh(v), horizon, p=p, bound=abs(amplitude),
                         name="integral", params=dict(p=p, amplitude=amplitude))


BUILTINS = {"constant": constant, "marginal": marginal, "running_max": running_max,
            "integral": integral}


def make_terminal(name: str, horizon: float, **params) -> TerminalFunctional:
    try:
        builder = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown terminal functional {name!r}") from None
    return builder(horizon=horizon, **params)
