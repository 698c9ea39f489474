"""Controlled diffusions, recombining lattices and nonlinear expectations (d=1).

The admissible class ``P_L`` consists of drifts ``|alpha| <= L``, volatilities
``sqrt(2 c0) <= beta <= sqrt(2 L)`` and, for the bounding problems, discount
rates ``|b| <= L``. Upper values are computed by dynamic programming on a
trinomial lattice; lower bounds by Monte Carlo under one feedback policy.

Monte Carlo work is split into fixed-size chunks with independent child seeds
of one master seed, so results do not depend on the number of threads.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .generator import ConfigurationError
from .paths import Partition, Path, hitting_skeleton
from .terminal import TerminalFunctional

CHUNK = 4096


@dataclass
class Estimate:
    """Numerical result record ``{value, stderr, method, params}``."""

    value: float
    stderr: float
    method: str
    params: dict = field(default_factory=dict)

    def to_dict(self):
        return dict(value=float(self.value), stderr=float(self.stderr), method=self.method,
                    params=self.params)


# ---------------------------------------------------------------------------
# controlled paths

@dataclass(frozen=True)
class ControlPolicy:
    """Piecewise-constant controls ``(start_time, alpha, beta, b)`` on ``[0, T]``."""

    pieces: tuple
    L: float
    c0: float = 0.0

    def __post_init__(self):
        pieces = tuple(tuple(float(v) for v in p) for p in self.pieces)
        if not pieces or pieces[0][0] != 0.0:
            raise ConfigurationError("the first control piece must start at 0")
        if any(b[0] <= a[0] for a, b in zip(pieces[:-1], pieces[1:])):
            raise ConfigurationError("control pieces must have increasing start times")
        tol = 1e-12
        for _, alpha, beta, b in pieces:
            if abs(alpha) > self.L + tol or abs(b) > self.L + tol:
                raise ConfigurationError("drift or discount exceeds L")
            if 0.5 * beta * beta > self.L + tol or beta < math.sqrt(2 * self.c0) - tol:
                raise ConfigurationError("volatility outside [sqrt(2 c0), sqrt(2 L)]")
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def constant(cls, alpha, beta, b=0.0, L=1.0, c0=0.0):
        return cls(((0.0, alpha, beta, b),), L, c0)

    def at(self, t):
        starts = [p[0] for p in self.pieces]
        return self.pieces[max(0, int(np.searchsorted(starts, t, side="right")) - 1)]


def simulate_controlled(policy: ControlPolicy, dt: float, horizon: float, seed: int) -> Path:
    """Euler path ``B_{k+1} = B_k + alpha dt + beta sqrt(dt) Z`` with knots at every step."""
    n = int(round(horizon / dt))
    if n < 1 or abs(n * dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ConfigurationError("horizon must be a multiple of dt")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    times = np.linspace(0.0, horizon, n + 1)
    ctrl = np.array([policy.at(t)[1:3] for t in times[:-1]])
    inc = ctrl[:, 0] * dt + ctrl[:, 1] * math.sqrt(dt) * z
    values = np.concatenate([[0.0], np.cumsum(inc)])
    return Path(times, values[:, None], horizon)


def hitting_cascade(omega: Path, eps: float):
    """Exit times ``H_1 <= H_2 <= ...`` capped at the horizon, with the skeleton.

    Returns ``(H, pi)``: ``H`` lists the hits before the horizon followed by
    the first capped time (the horizon itself); ``pi`` holds the hits strictly
    before the horizon.
    """
    T = omega.horizon
    hits, incs = hitting_skeleton(omega, eps, until=omega.times[-1])
    inner = [(h, x) for h, x in zip(hits, incs) if h < T]
    H = [h for h, _ in inner] + [T]
    pi = Partition(omega.origin_time, tuple(h for h, _ in inner), tuple(x for _, x in inner),
                   eps=eps * (1 + 1e-12), horizon=T)
    return H, pi


def chunk_seeds(seed, n):
    """Deterministic ``(size, Generator)`` chunks covering ``n`` samples."""
    sizes = [CHUNK] * (n // CHUNK) + ([n % CHUNK] if n % CHUNK else [])
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    return [(s, np.random.default_rng(c)) for s, c in zip(sizes, children)]


def map_chunks(fn, seed, n, threads=1):
    chunks = chunk_seeds(seed, n)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda c: fn(*c), chunks))
    else:
        parts = [fn(*c) for c in chunks]
    return np.concatenate(parts)


def _mc_estimate(samples, method, params):
    n = samples.size
    return Estimate(float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(n)), method,
                    dict(params, n_paths=n))


# ---------------------------------------------------------------------------
# lattice

@dataclass(frozen=True)
class Lattice:
    """Recombining trinomial lattice with control grids.

    ``dx = sqrt(2 L dt)``; drifts are centred when the volatility allows it and
    upwinded otherwise, so probabilities stay in ``[0, 1]`` for ``dt <= 1/(2L)``.
    """

    n_steps: int
    alpha_points: int = 5
    beta_points: int = 5
    b_points: int = 5

    def __post_init__(self):
        if self.n_steps < 1:
            raise ConfigurationError("the lattice needs at least one step")
        if min(self.alpha_points, self.beta_points, self.b_points) < 1:
            raise ConfigurationError("control grids need at least one point")

    def controls(self, L, c0):
        alphas = np.linspace(-L, L, self.alpha_points) if self.alpha_points > 1 else np.zeros(1)
        beta2 = np.linspace(2 * c0, 2 * L, self.beta_points) if self.beta_points > 1 else np.array([2 * L])
        A, B2 = np.meshgrid(alphas, beta2, indexing="ij")
        return A.ravel(), B2.ravel()

    def discounts(self, L):
        return np.linspace(-L, L, self.b_points) if self.b_points > 1 else np.zeros(1)


def transition_probabilities(alpha, beta2, dt, dx):
    """``(p_down, p_mid, p_up)`` matching mean ``alpha dt`` and (when centred)
    variance ``beta^2 dt``."""
    alpha, beta2 = np.asarray(alpha, float), np.asarray(beta2, float)
    diff = beta2 * dt / (2 * dx * dx)
    centred = beta2 >= np.abs(alpha) * dx
    pu = np.where(centred, diff + alpha * dt / (2 * dx), diff + np.maximum(alpha, 0) * dt / dx)
    pd = np.where(centred, diff - alpha * dt / (2 * dx), diff + np.maximum(-alpha, 0) * dt / dx)
    pm = 1.0 - pu - pd
    if np.any(pm < -1e-12) or np.any(pu < -1e-12) or np.any(pd < -1e-12):
        raise ConfigurationError("lattice probabilities outside [0, 1]; refine the time step")
    # rounding residue must not make a weight negative: that breaks float monotonicity
    return np.maximum(pd, 0.0), np.maximum(pm, 0.0), np.maximum(pu, 0.0)


def one_step(pd, pm, pu, v):
    """``E[v(next)]`` for every control (rows) and interior node (columns)."""
    return pd[:, None] * v[None, :-2] + pm[:, None] * v[None, 1:-1] + pu[:, None] * v[None, 2:]


def _lattice_setup(L, c0, horizon, lattice: Lattice):
    if c0 > L:
        raise ConfigurationError("c0 exceeds L")
    dt = horizon / lattice.n_steps
    if 2 * L * dt > 1:
        raise ConfigurationError("lattice step too coarse: need dt <= 1 / (2 L)")
    dx = math.sqrt(2 * L * dt) if L > 0 else 1.0
    alphas, beta2 = lattice.controls(L, c0)
    pd, pm, pu = transition_probabilities(alphas, beta2, dt, dx)
    return dt, dx, alphas, beta2, pd, pm, pu


def _pad(v):
    return np.concatenate([v[:1], v, v[-1:]])


def _dp_terminal(f, L, c0, horizon, lattice, sign=1.0, discount=None, C0=0.0):
    """Backward DP for ``sup`` (``sign=1``) or ``inf`` (``sign=-1``) of a terminal payoff.

    Returns the value grid at time 0, the optimal control index per step and node.
    """
    dt, dx, alphas, beta2, pd, pm, pu = _lattice_setup(L, c0, horizon, lattice)
    N = lattice.n_steps
    x = np.arange(-N, N + 1) * dx
    v = sign * np.asarray(f(x), dtype=float)
    policy = np.empty((N, x.size), dtype=int)
    for k in range(N - 1, -1, -1):
        cont = one_step(pd, pm, pu, _pad(v))
        policy[k] = np.argmax(cont, axis=0)
        best = cont.max(axis=0)
        if discount is not None:
            best = _discount_step(best, C0, discount, dt)
        v = best
    return sign * v, policy, dx, alphas, beta2


def _discount_step(best, C0, b, dt):
    """``max_b [C0 int_0^dt e^{b s} ds + e^{b dt} best]``.

    In the negated frame used for infima the same formula applies, since
    ``-(-C0 I + e^{b dt} E[v]) = C0 I + e^{b dt} E[-v]``.
    """
    safe = np.where(b == 0, 1.0, b)
    integral = np.where(b == 0, dt, np.expm1(b * dt) / safe)
    cand = C0 * integral[:, None] + np.exp(b * dt)[:, None] * best[None, :]
    return cand.max(axis=0)


def _path_values(payoff: TerminalFunctional, N, dx, horizon):
    """Payoff on every lattice path (3^N of them), in lexicographic order of moves."""
    times = np.linspace(0.0, horizon, N + 1)
    out = np.empty(3 ** N)
    for i, moves in enumerate(itertools.product((-1, 0, 1), repeat=N)):
        vals = np.concatenate([[0.0], np.cumsum(moves)]) * dx
        out[i] = payoff(Path(times, vals[:, None], horizon))
    return out


def _dp_paths(payoff, L, c0, horizon, lattice, sign=1.0):
    dt, dx, alphas, beta2, pd, pm, pu = _lattice_setup(L, c0, horizon, lattice)
    N = lattice.n_steps
    if N > 10:
        raise ConfigurationError("path-dependent payoffs on the lattice need n_steps <= 10")
    v = sign * _path_values(payoff, N, dx, horizon)
    for k in range(N - 1, -1, -1):
        v = v.reshape(-1, 3)
        cont = (pd[:, None] * v[None, :, 0] + pm[:, None] * v[None, :, 1]
                + pu[:, None] * v[None, :, 2])
        v = cont.max(axis=0)
    return sign * float(v[0])


def nonlinear_expectation(payoff, L, c0=0.0, bound="upper", lattice: Optional[Lattice] = None,
                          horizon=1.0, n_paths=20_000, seed=0, threads=1) -> Estimate:
    """Upper nonlinear expectation ``sup_{P in P_L} E^P[payoff]``.

    ``bound="upper"``: lattice dynamic programming. ``bound="lower"``: Monte
    Carlo under the lattice-optimal feedback policy (a lower bound up to MC
    error). ``payoff`` is a :class:`TerminalFunctional`; Markov payoffs use the
    recombining lattice, others enumerate lattice paths (``n_steps <= 10``).
    """
    lattice = lattice or Lattice(64)
    params = dict(L=L, c0=c0, horizon=horizon, n_steps=lattice.n_steps)
    f = payoff.markov
    if bound == "upper":
        if f is None:
            return Estimate(_dp_paths(payoff, L, c0, horizon, lattice), 0.0, "lattice-paths", params)
        v, *_ = _dp_terminal(f, L, c0, horizon, lattice)
        return Estimate(float(v[lattice.n_steps]), 0.0, "lattice-dp", params)
    if bound != "lower":
        raise ConfigurationError("bound must be 'upper' or 'lower'")
    if f is None:
        raise ConfigurationError("Monte Carlo lower bounds need a terminal-value payoff")
    _, policy, dx, alphas, beta2 = _dp_terminal(f, L, c0, horizon, lattice)
    N = lattice.n_steps
    dt = horizon / N

    def run(size, rng):
        x = np.zeros(size)
        for k in range(N):
            j = np.clip(np.rint(x / dx).astype(int) + N, 0, 2 * N)
            c = policy[k, j]
            x = x + alphas[c] * dt + np.sqrt(beta2[c] * dt) * rng.standard_normal(size)
        return np.asarray(f(x), dtype=float)

    samples = map_chunks(run, seed, n_paths, threads)
    return _mc_estimate(samples, "mc-feedback", dict(params, seed=seed))


def lower_expectation(payoff: TerminalFunctional, L, c0=0.0, lattice=None, horizon=1.0):
    """``inf_P E^P[payoff] = -sup_P E^P[-payoff]`` by lattice DP."""
    neg = TerminalFunctional(lambda w: -payoff(w), payoff.horizon, payoff.bound,
                             markov=(None if payoff.markov is None else (lambda x: -payoff.markov(x))))
    est = nonlinear_expectation(neg, L, c0, "upper", lattice, horizon)
    return Estimate(-est.value, est.stderr, est.method, est.params)


# ---------------------------------------------------------------------------
# optimal stopping

@dataclass(frozen=True)
class SnellProblem:
    """Reward ``X(t, x)`` (vectorized), stopped at ``H = inf{t: |B_t| >= radius} ^ t0``."""

    reward: Callable
    L: float
    c0: float = 0.0
    horizon: float = 1.0
    radius: float = np.inf
    t0: Optional[float] = None


@dataclass
class SnellResult:
    Y0: float
    Y: list
    stop: list
    absorbed: list
    dx: float
    dt: float

    @property
    def tau_star_root(self):
        """``0`` when stopping at the root is optimal, ``None`` otherwise."""
        return 0.0 if self.stop[0][0] else None

    def first_stop(self, moves) -> float:
        """``tau*`` along the lattice path given by moves in {-1, 0, 1}."""
        j = 0
        for k, row in enumerate(self.stop):
            if row[j + k]:
                return k * self.dt
            if k < len(moves):
                j += moves[k]
        return (len(self.stop) - 1) * self.dt


def snell_envelope(problem: SnellProblem, lattice: Lattice) -> SnellResult:
    """Smallest lattice supermartingale above the stopped reward.

    ``Y_k = max(X_hat_k, max_controls E[Y_{k+1}])``; the stopping rule
    ``tau* = first k with Y_k = X_hat_k``.
    """
    dt, dx, alphas, beta2, pd, pm, pu = _lattice_setup(problem.L, problem.c0, problem.horizon,
                                                       lattice)
    N = lattice.n_steps
    cap = N if problem.t0 is None else int(round(problem.t0 / dt))
    if not 0 <= cap <= N:
        raise ConfigurationError("t0 must lie in [0, T]")
    Ys, stops, absorbed = [None] * (cap + 1), [None] * (cap + 1), [None] * (cap + 1)
    x = np.arange(-cap, cap + 1) * dx
    X = np.asarray(problem.reward(cap * dt, x), dtype=float) * np.ones_like(x)
    Ys[cap] = X
    stops[cap] = np.ones(x.size, dtype=bool)
    absorbed[cap] = np.abs(x) >= problem.radius
    for k in range(cap - 1, -1, -1):
        x = np.arange(-k, k + 1) * dx
        X = np.asarray(problem.reward(k * dt, x), dtype=float) * np.ones_like(x)
        nxt = Ys[k + 1]
        cont = (pd[:, None] * nxt[None, :-2] + pm[:, None] * nxt[None, 1:-1]
                + pu[:, None] * nxt[None, 2:]).max(axis=0)
        out = np.abs(x) >= problem.radius
        Y = np.where(out, X, np.maximum(X, cont))
        Ys[k] = Y
        stops[k] = Y == X
        absorbed[k] = out
    return SnellResult(float(Ys[0][0]), Ys, stops, absorbed, dx, dt)


# ---------------------------------------------------------------------------
# bounding problems

def bounding_value_ppde(xi: TerminalFunctional, L0, C0, c0=0.0, direction="upper",
                        lattice: Optional[Lattice] = None, horizon=None) -> Estimate:
    """``sup_{P, b} E[xi e^{int b} + C0 int e^{int b}]`` (upper) or the inf with ``-C0``."""
    lattice = lattice or Lattice(64)
    horizon = xi.horizon if horizon is None else horizon
    sign = 1.0 if direction == "upper" else -1.0
    if direction not in ("upper", "lower"):
        raise ConfigurationError("direction must be 'upper' or 'lower'")
    if xi.markov is None:
        raise ConfigurationError("the bounding lattice needs a terminal-value functional")
    b = lattice.discounts(L0)
    v, *_ = _dp_terminal(xi.markov, L0, c0, horizon, lattice, sign=sign, discount=b, C0=C0)
    return Estimate(float(v[lattice.n_steps]), 0.0, "lattice-dp",
                    dict(L0=L0, C0=C0, c0=c0, direction=direction, n_steps=lattice.n_steps))


def bounding_value_pde(h: Callable, t: float, T_eta: float, eps_eta: float, L0, C0, c0=0.0,
                       direction="upper", lattice: Optional[Lattice] = None, x: float = 0.0):
    """Bounding value on a cylinder with absorbing lateral boundary.

    ``sup E[e^{int_t^H b} h(H, X_H) + C0 int_t^H e^{int b}]`` with ``H`` the exit
    time of ``X`` from ``(-eps, eps)`` capped at ``T_eta``. Returns an
    :class:`Estimate` whose ``params['degenerate']`` flags ``c0 = 0``.
    """
    lattice = lattice or Lattice(200)
    sign = 1.0 if direction == "upper" else -1.0
    if direction not in ("upper", "lower"):
        raise ConfigurationError("direction must be 'upper' or 'lower'")
    N = lattice.n_steps
    dt = (T_eta - t) / N
    if dt <= 0:
        raise ConfigurationError("need t < T_eta")
    dx_min = math.sqrt(2 * L0 * dt) if L0 > 0 else eps_eta
    J = max(1, int(math.floor(eps_eta / dx_min + 1e-12)))
    dx = eps_eta / J
    alphas, beta2 = lattice.controls(L0, c0)
    pd, pm, pu = transition_probabilities(alphas, beta2, dt, dx)
    b = lattice.discounts(L0)
    xs = np.arange(-J, J + 1) * dx
    times = t + dt * np.arange(N + 1)
    v = sign * np.asarray(h(times[N], xs), dtype=float) * np.ones_like(xs)
    ends = np.array([-eps_eta, eps_eta])
    for k in range(N - 1, -1, -1):
        cont = one_step(pd, pm, pu, v).max(axis=0)
        inner = _discount_step(cont, C0, b, dt)
        v = np.empty_like(v)
        v[1:-1] = inner
        v[[0, -1]] = sign * np.asarray(h(times[k], ends), dtype=float)
    j0 = int(round(x / dx)) + J
    return Estimate(sign * float(v[j0]), 0.0, "lattice-dp-absorbing",
                    dict(L0=L0, C0=C0, c0=c0, direction=direction, n_steps=N, space_steps=J,
                         degenerate=c0 == 0))


def degenerate_example(L0=1.0, C0=1.0, T_eta=1.0, t=0.0):
    """Closed form for boundary data ``h(s, x) = s`` with ``c0 = 0``.

    The controller can freeze the state, never exit and collect the growth, so
    the interior value ``e^{L0 s} T_eta + C0 (e^{L0 s} - 1)/L0`` (``s = T_eta - t``)
    exceeds the boundary value ``t``: the value function is discontinuous.
    """
    s = T_eta - t
    growth = math.exp(L0 * s)
    interior = growth * T_eta + (C0 * s if L0 == 0 else C0 * math.expm1(L0 * s) / L0)
    return dict(interior=interior, boundary=t)


# ---------------------------------------------------------------------------
# exit-time diagnostics

def _exit_sim(x0, alpha_fn, sigma, eps_eta, horizon, dt, n_paths, seed, threads=1):
    """Euler paths from ``x0`` until ``|X| >= eps_eta`` or ``horizon``.

    Returns exit times (``horizon`` when still inside) and the final states.
    """
    n_steps = max(1, int(math.ceil(horizon / dt - 1e-9)))
    dt = horizon / n_steps

    def run(size, rng):
        x = np.full(size, float(x0))
        tau = np.full(size, horizon)
        alive = np.ones(size, dtype=bool)
        for k in range(n_steps):
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
            xa = x[idx]
            xa = xa + alpha_fn(xa) * dt + sigma * math.sqrt(dt) * rng.standard_normal(idx.size)
            x[idx] = xa
            out = np.abs(xa) >= eps_eta
            tau[idx[out]] = (k + 1) * dt
            alive[idx[out]] = False
        return np.stack([tau, x], axis=1)

    res = map_chunks(run, seed, n_paths, threads)
    return res[:, 0], res[:, 1]


def dirichlet_mc(h: Callable, t0, T_eta, eps_eta, sigma=1.0, drift=0.0, x0=0.0, n_paths=20_000,
                 dt=1e-4, seed=0, threads=1) -> Estimate:
    """``E[h(H, X_H)]`` for ``dX = drift dt + sigma dW`` started at ``(t0, x0)``.

    Exits are detected at Euler steps, which biases ``H`` upward by
    ``O(sqrt(dt))``; ``params['monitoring_bias']`` estimates it by rerunning
    with ``4 dt``.
    """
    def value(step, s):
        tau, x = _exit_sim(x0, lambda v: drift + 0 * v, sigma, eps_eta, T_eta - t0, step, n_paths,
                           s, threads)
        H = t0 + tau
        xe = np.where(tau < T_eta - t0, np.clip(x, -eps_eta, eps_eta), x)
        return np.asarray(h(H, xe), dtype=float)

    fine = value(dt, seed)
    coarse = value(4 * dt, seed)
    est = _mc_estimate(fine, "mc-euler-exit", dict(dt=dt, sigma=sigma, drift=drift, seed=seed))
    est.params["monitoring_bias"] = abs(float(coarse.mean() - fine.mean()))
    return est


def exit_tail_check(L0, c0, eps_eta, fractions=(0.05, 0.1, 0.2, 0.4), n_paths=20_000,
                    seed=0, threads=1):
    """Fit ``C`` in ``P(H - t >= a) <= C sqrt(a)``, ``a = eps_eta - |x|``.

    The policy maximizing the survival probability is used: full inward drift
    and the smallest admissible volatility.
    """
    sigma = math.sqrt(2 * c0)
    if sigma == 0:
        raise ConfigurationError("the exit-time tail bound needs c0 > 0")
    rows = []
    for i, f in enumerate(fractions):
        a = f * eps_eta
        x0 = eps_eta - a
        tau, _ = _exit_sim(x0, lambda v: -L0 * np.sign(v), sigma, eps_eta, a, a / 200, n_paths,
                           seed + i, threads)
        p = float(np.mean(tau >= a))
        rows.append(dict(a=a, probability=p, ratio=p / math.sqrt(a)))
    C = max(r["ratio"] for r in rows)
    return dict(C=C, eps=eps_eta, rows=rows)


def exit_count_tail(L, eps, horizon, m, n_paths=4000, dt=None, seed=0, threads=1):
    """Empirical ``P(N_eps >= m)`` for the number of eps-exits before ``horizon`` under
    maximal volatility, and the constant ``C`` in ``P <= C L^2 / ((m-1) eps^2)``."""
    dt = dt or (eps * eps) / (50 * 2 * L)
    n_steps = max(1, int(math.ceil(horizon / dt)))
    dt = horizon / n_steps
    sigma = math.sqrt(2 * L)

    def run(size, rng):
        x = np.zeros(size)
        anchor = np.zeros(size)
        count = np.zeros(size)
        for _ in range(n_steps):
            x += sigma * math.sqrt(dt) * rng.standard_normal(size)
            d = x - anchor
            hit = np.abs(d) >= eps
            count += hit
            anchor = np.where(hit, anchor + np.sign(d) * eps, anchor)
        return count

    counts = map_chunks(run, seed, n_paths, threads)
    p = float(np.mean(counts >= m))
    scale = L * L / ((m - 1) * eps * eps) if m > 1 else np.inf
    return dict(probability=p, mean_exits=float(counts.mean()),
                C=(p / scale if np.isfinite(scale) and scale > 0 else np.nan),
                capacity_bound=min(1.0, scale))


def snell_by_enumeration(problem: SnellProblem, lattice: Lattice) -> float:
    """Optimal stopping value over all path-dependent stopping rules.

    Enumerates every lattice path (3^N leaves, no recombination) and takes the
    best of stopping and continuing at each node of the path tree. Used to
    validate :func:`snell_envelope`; practical for ``N <= 10``.
    """
    dt, dx, alphas, beta2, pd, pm, pu = _lattice_setup(problem.L, problem.c0, problem.horizon,
                                                       lattice)
    N = lattice.n_steps if problem.t0 is None else int(round(problem.t0 / dt))
    if N > 12:
        raise ConfigurationError("enumeration is limited to 12 steps")
    positions = [np.zeros(1, dtype=int)]
    for k in range(N):
        positions.append((positions[-1][:, None] + np.array([-1, 0, 1])[None, :]).ravel())

    def reward(k):
        j = positions[k]
        x = j * dx
        return np.asarray(problem.reward(k * dt, x), dtype=float) * np.ones(j.size), np.abs(x) >= problem.radius

    Y, _ = reward(N)
    for k in range(N - 1, -1, -1):
        X, out = reward(k)
        ch = Y.reshape(-1, 3)
        cont = (pd[:, None] * ch[None, :, 0] + pm[:, None] * ch[None, :, 1]
                + pu[:, None] * ch[None, :, 2]).max(axis=0)
        Y = np.where(out, X, np.maximum(X, cont))
    return float(Y[0])
