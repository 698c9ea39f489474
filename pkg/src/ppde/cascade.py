"""Cascade of frozen local problems glued through their lateral exits (d=1).

Node ``n`` solves the frozen local PDE on ``[t_n, T] x [-eps, eps]`` around
the displacement ``S_n``; its value on the lateral boundary at time ``s`` is the
value of the child node started at ``(s, S_n +- eps)``, taken at the child's
origin. Level ``m`` (the truncation level) is seeded with the upper and lower
bounding generators, which yields a sandwich ``theta_lower <= theta_upper``
that is monotone in ``m`` at the discrete level.

Two engines share one global time grid:

* ``markov``: generator and terminal data see only the current value, so a
  node is identified by ``(level, S)`` and all nodes advance together; the
  level-free variant (``max_levels=None``) is the limit ``m -> infinity``.
* ``tree``: explicit partition tree for path-dependent data, with exit times
  snapped down to a coarse exit grid.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .generator import ConfigurationError, GeneratorSpec, bounding_pair, freeze
from .local_pde import artificial_viscosity, explicit_update, global_barrier, steps_for
from .paths import Partition, Path, hitting_skeleton, interp_partition
from .terminal import TerminalFunctional


@dataclass(frozen=True)
class CascadeConfig:
    """Discretization of the cascade.

    Attributes
    ----------
    eps : float
        Exit radius (half-width of every local cylinder).
    max_levels : int or None
        Truncation level ``m``; ``None`` for the level-free fixed point.
    nx : int
        Odd number of space nodes per local cylinder.
    exit_time_grid : int
        Tree engine only: number of admissible exit times on ``[0, T)``.
    positions : int, optional
        Markov engine: displacements ``|S| <= positions * eps`` are solved, the
        rest are seeded. Default covers four standard deviations.
    seed_depth : int
        Tree engine with path-dependent terminal data: extra levels of the
        upper/lower bounding cascade before the constant barrier.
    """

    eps: float
    horizon: float = 1.0
    max_levels: Optional[int] = 8
    nx: int = 21
    exit_time_grid: int = 4
    positions: Optional[int] = None
    mode: str = "auto"
    seed_depth: int = 1
    node_budget: int = 50_000
    store_budget: int = 20_000_000
    threads: int = 1

    def __post_init__(self):
        if self.eps <= 0 or self.horizon <= 0:
            raise ConfigurationError("eps and horizon must be positive")
        if self.nx < 3 or self.nx % 2 == 0:
            raise ConfigurationError("nx must be odd and >= 3")
        if self.max_levels is not None and self.max_levels < 1:
            raise ConfigurationError("max_levels must be >= 1")
        if self.mode not in ("auto", "markov", "tree"):
            raise ConfigurationError(f"unknown cascade mode {self.mode!r}")
        if self.exit_time_grid < 1:
            raise ConfigurationError("exit_time_grid must be >= 1")

    @property
    def h(self):
        return 2.0 * self.eps / (self.nx - 1)

    def with_(self, **kw) -> "CascadeConfig":
        d = asdict(self)
        d.update(kw)
        return CascadeConfig(**d)


@dataclass
class TimeGrid:
    times: np.ndarray
    dt: float
    h: float
    kappa: float

    @property
    def nt(self):
        return len(self.times) - 1


def time_grid(G: GeneratorSpec, cfg: CascadeConfig) -> TimeGrid:
    h = cfg.h
    nt = max(1, steps_for(cfg.horizon, G.L0, G.c0, h))
    return TimeGrid(np.linspace(0.0, cfg.horizon, nt + 1), cfg.horizon / nt, h,
                    artificial_viscosity(G.L0, G.c0, h))


def resolve_mode(G: GeneratorSpec, xi: TerminalFunctional, cfg: CascadeConfig) -> str:
    markov_ok = G.markov and xi.markov is not None
    if cfg.mode == "markov" and not markov_ok:
        raise ConfigurationError("markov engine needs current-value generator and terminal data")
    if cfg.mode == "auto":
        return "markov" if markov_ok else "tree"
    return cfg.mode


class GlobalSeeds:
    """Upper/lower bounding PDEs on an aligned grid covering ``|x| <= (K+2) eps``.

    Node ``S = j eps`` of a local cylinder coincides with global index
    ``(K + 2 + j) * half`` so local and global values share their floats.
    """

    def __init__(self, G: GeneratorSpec, f, cfg: CascadeConfig, grid: TimeGrid, K: int,
                 bound=np.inf):
        self.half = (cfg.nx - 1) // 2
        self.K = K
        self.offset = (K + 2) * self.half
        n = 2 * self.offset + 1
        self.x = (np.arange(n) - self.offset) * grid.h
        self.gbar, self.gund = bounding_pair(G)
        self.grid = grid
        # the constant barrier dominates every solution, so pinning the edges to it
        # keeps the seeds on the safe side; without a bound fall back to copying
        self.edge = (global_barrier(bound, G.L0, G.C0, cfg.horizon)
                     if np.isfinite(bound) else None)
        term = np.asarray(f(self.x), dtype=float)
        self.cur = np.stack([term, term.copy()])
        if self.edge is not None:
            self._pin(self.cur, cfg.horizon)
        self.nxt = np.empty_like(self.cur)

    def index(self, j, i=None):
        """Global index of local node ``i`` of the cylinder around ``j eps``."""
        j = np.asarray(j)
        if i is None:
            return self.offset + j * self.half
        return self.offset + j * self.half + (np.asarray(i) - self.half)

    def step(self, s):
        """Advance both seeds one step backward; ``s`` is the later time."""
        g = self.grid
        for side, gen in ((0, self.gbar), (1, self.gund)):
            explicit_update(self.cur[side], lambda y, z, gm: gen.func(s, None, y, z, gm),
                            g.dt, g.h, g.kappa, out=self.nxt[side, 1:-1])
        if self.edge is None:
            self.nxt[:, 0] = self.nxt[:, 1]
            self.nxt[:, -1] = self.nxt[:, -2]
        else:
            self._pin(self.nxt, s - g.dt)
        self.cur, self.nxt = self.nxt, self.cur

    def _pin(self, arr, t):
        w = float(self.edge(t))
        arr[0, [0, -1]] = w
        arr[1, [0, -1]] = -w


def _stored_indices(nt, per_slice, budget):
    stride = max(1, math.ceil((nt + 1) * per_slice / budget))
    return np.unique(np.r_[np.arange(0, nt + 1, stride), nt])


# ---------------------------------------------------------------------------
# Markov engine

@dataclass
class MarkovCascade:
    """Node fields indexed by ``[side, level, position, time, x]``.

    ``side`` 0 is the upper sandwich, 1 the lower one; ``position`` ``p``
    stands for ``S = (p - K) eps``. Times are the stored subset of the grid.
    """

    config: CascadeConfig
    levels: Optional[int]
    K: int
    times: np.ndarray
    x: np.ndarray
    fields: np.ndarray
    seed_x: np.ndarray
    seeds: np.ndarray
    grid: TimeGrid
    generator: str
    terminal: str
    mode: str = "markov"

    @property
    def root(self):
        c = (len(self.x) - 1) // 2
        return float(self.fields[0, 0, self.K, 0, c]), float(self.fields[1, 0, self.K, 0, c])

    @property
    def gap(self):
        up, lo = self.root
        return up - lo

    def level_count(self):
        return self.fields.shape[1]

    def node_field(self, side, level, S_index):
        """Stored field of node ``(level, S = S_index eps)``, shape (times, nx)."""
        lv = level if self.levels is not None else 0
        if self.levels is not None and level >= self.levels or abs(S_index) > self.K:
            return self.seed_window(side, S_index)
        return self.fields[side, lv, S_index + self.K]

    def seed_window(self, side, S_index):
        half = (len(self.x) - 1) // 2
        c = int(np.searchsorted(self.seed_x, 0.0)) + S_index * half
        return self.seeds[side, :, c - half:c + half + 1]

    def value(self, side, level, S_index, t, x):
        return _interp_field(self.times, self.x, self.node_field(side, level, S_index), t, x)

    def level_values(self, side, level):
        return self.fields[side, level if self.levels is not None else 0]

    def all_values(self):
        return self.fields


def _interp_field(times, xs, values, t, x):
    k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
    t0, t1 = times[k], times[k + 1]
    w = min(max((t - t0) / (t1 - t0), 0.0), 1.0)
    row = (1 - w) * values[k] + w * values[k + 1]
    return float(np.interp(x, xs, row))


def _default_positions(G, cfg):
    spread = 4.0 * math.sqrt(2.0 * max(G.L0, 1e-12) * cfg.horizon) + 2.0 * G.L0 * cfg.horizon
    return max(1, math.ceil(spread / cfg.eps))


def run_markov(G: GeneratorSpec, xi: TerminalFunctional, cfg: CascadeConfig) -> MarkovCascade:
    grid = time_grid(G, cfg)
    f = xi.markov
    m = cfg.max_levels
    if cfg.positions is not None:
        K = cfg.positions
    else:
        K = _default_positions(G, cfg)
        if m is not None:
            K = min(K, m)
    L = 1 if m is None else m
    P = 2 * K + 1
    nx = cfg.nx
    half = (nx - 1) // 2
    seeds = GlobalSeeds(G, f, cfg, grid, K, xi.bound)
    js = np.arange(-K, K + 1)
    S = (js * cfg.eps)[None, None, :, None]
    local_idx = seeds.index(js[:, None], np.arange(nx)[None, :])
    cur = np.empty((2, L, P, nx))
    cur[:] = seeds.cur[0][local_idx]
    nxt = np.empty_like(cur)
    child_cols = seeds.index(np.arange(-K - 1, K + 2))
    ext = np.empty((2, L, P + 2))

    per_slice = cur.size + seeds.cur.size
    stored = _stored_indices(grid.nt, per_slice, cfg.store_budget)
    slot = {int(k): i for i, k in enumerate(stored)}
    fields = np.empty((2, L, P, len(stored), nx))
    seed_store = np.empty((2, len(stored), seeds.cur.shape[1]))
    if grid.nt in slot:
        fields[:, :, :, slot[grid.nt]] = cur
        seed_store[:, slot[grid.nt]] = seeds.cur

    times, dt, h, kappa = grid.times, grid.dt, grid.h, grid.kappa
    for k in range(grid.nt - 1, -1, -1):
        s = times[k + 1]
        seeds.step(s)
        explicit_update(cur, lambda y, z, gm: G.eval_state(s, S, y, z, gm), dt, h, kappa,
                        out=nxt[..., 1:-1])
        centers = nxt[..., half]
        seed_c = seeds.cur[:, child_cols]
        if m is None:
            ext[:, :, 1:-1] = centers
        else:
            ext[:, :-1, 1:-1] = centers[:, 1:]
            ext[:, -1, 1:-1] = seed_c[:, 1:-1]
        ext[:, :, 0] = seed_c[:, None, 0]
        ext[:, :, -1] = seed_c[:, None, -1]
        nxt[..., 0] = ext[:, :, :-2]
        nxt[..., -1] = ext[:, :, 2:]
        cur, nxt = nxt, cur
        if k in slot:
            fields[:, :, :, slot[k]] = cur
            seed_store[:, slot[k]] = seeds.cur

    return MarkovCascade(cfg, m, K, times[stored], np.linspace(-cfg.eps, cfg.eps, nx),
                         fields, seeds.x, seed_store, grid, G.name, xi.name)


# ---------------------------------------------------------------------------
# tree engine

@dataclass
class TreeNode:
    level: int
    key: tuple
    start: int
    S: float
    children: dict = field(default_factory=dict)


@dataclass
class TreeCascade:
    """Explicit partition tree; ``fields[side][level]`` has shape (nodes, nt+1, nx)."""

    config: CascadeConfig
    levels: int
    depth: int
    nodes: list
    index: list
    fields: list
    grid: TimeGrid
    exit_indices: np.ndarray
    seed_source: str
    generator: str
    terminal: str
    mode: str = "tree"

    @property
    def times(self):
        return self.grid.times

    @property
    def x(self):
        return np.linspace(-self.config.eps, self.config.eps, self.config.nx)

    @property
    def root(self):
        c = (self.config.nx - 1) // 2
        return float(self.fields[0][0][0, 0, c]), float(self.fields[1][0][0, 0, c])

    @property
    def gap(self):
        up, lo = self.root
        return up - lo

    def node_count(self):
        return sum(len(level) for level in self.nodes)

    def lookup(self, key):
        n = len(key)
        return self.index[n][key]

    def value(self, side, key, t, x):
        n = len(key)
        i = self.index[n][key]
        return _interp_field(self.grid.times, self.x, self.fields[side][n][i], t, x)

    def level_values(self, side, level):
        """Values of G-solved nodes on their own time domain (earlier rows masked)."""
        arr = self.fields[side][level]
        starts = np.array([nd.start for nd in self.nodes[level]])
        mask = np.arange(arr.shape[1])[None, :] >= starts[:, None]
        return arr[mask]

    def all_values(self):
        return np.concatenate([self.level_values(s, n).ravel()
                               for s in (0, 1) for n in range(self.levels)])


def _exit_indices(nt, E):
    return np.unique(np.round(np.arange(E) * nt / E).astype(int))


def _snap_table(start, exits, nt):
    """Child start index used for the lateral value at each time ``k``."""
    k = np.arange(nt + 1)
    pos = np.searchsorted(exits, k, side="right") - 1
    snapped = np.where(pos >= 0, exits[np.maximum(pos, 0)], start)
    return np.maximum(snapped, start)


def build_tree(cfg: CascadeConfig, grid: TimeGrid, depth: int):
    exits = _exit_indices(grid.nt, cfg.exit_time_grid)
    root = TreeNode(0, (), 0, 0.0)
    nodes, index = [[root]], [{(): 0}]
    total = 1
    for n in range(depth):
        level, idx = [], {}
        for parent in nodes[n]:
            starts = sorted({parent.start} | {int(e) for e in exits if e > parent.start})
            for sign in (-1, 1):
                for st in starts:
                    key = parent.key + ((st, sign),)
                    idx[key] = len(level)
                    parent.children[(sign, st)] = len(level)
                    level.append(TreeNode(n + 1, key, st, parent.S + sign * cfg.eps))
        total += len(level)
        if total > cfg.node_budget:
            raise BudgetExceeded(n + 1, total)
        nodes.append(level)
        index.append(idx)
    return nodes, index, exits


class BudgetExceeded(RuntimeError):
    def __init__(self, level, total):
        super().__init__(f"tree exceeds node budget at level {level} ({total} nodes)")
        self.level = level
        self.total = total


def run_tree(G: GeneratorSpec, xi: TerminalFunctional, cfg: CascadeConfig) -> TreeCascade:
    if cfg.max_levels is None:
        raise ConfigurationError("the tree engine needs a finite max_levels")
    grid = time_grid(G, cfg)
    m = cfg.max_levels
    seed_source = "global" if xi.markov is not None else "barrier"
    depth = m if seed_source == "global" else m + cfg.seed_depth
    nodes, index, exits = build_tree(cfg, grid, depth)
    times, nt, nx = grid.times, grid.nt, cfg.nx
    half = (nx - 1) // 2
    x = np.linspace(-cfg.eps, cfg.eps, nx)
    gbar, gund = bounding_pair(G)

    gseeds = None
    if seed_source == "global":
        gseeds = GlobalSeeds(G, xi.markov, cfg, grid, depth, xi.bound)
        gx = gseeds.x
        store = np.empty((2, nt + 1, gx.size))
        store[:, nt] = gseeds.cur
        for k in range(nt - 1, -1, -1):
            gseeds.step(times[k + 1])
            store[:, k] = gseeds.cur
        x = gx[gseeds.index(0, np.arange(nx))]
    else:
        if not np.isfinite(xi.bound):
            raise ConfigurationError("barrier seeds need a bounded terminal functional")
        barrier = global_barrier(xi.bound, G.L0, G.C0, cfg.horizon)(times)

    paths = {}

    def node_path(nd):
        if nd.key not in paths:
            tt = tuple(times[st] for st, _ in nd.key)
            pi = Partition(0.0, tt, tuple(s * cfg.eps for _, s in nd.key), eps=cfg.eps,
                           horizon=cfg.horizon, closed=True)
            paths[nd.key] = interp_partition(pi, horizon=cfg.horizon)
        return paths[nd.key]

    fields = [[None] * (depth + 1), [None] * (depth + 1)]
    # deepest level: seeds only (centres are all a parent needs)
    for side in (0, 1):
        deep = nodes[depth]
        if seed_source == "global":
            cols = gseeds.index(np.array([round(nd.S / cfg.eps) for nd in deep]), half)
            vals = np.broadcast_to(store[side][:, cols].T[:, :, None], (len(deep), nt + 1, nx))
            if depth == m:
                # seed windows are full node fields
                cols_full = gseeds.index(np.array([round(nd.S / cfg.eps) for nd in deep])[:, None],
                                         np.arange(nx)[None, :])
                vals = np.transpose(store[side][:, cols_full], (1, 0, 2))
        else:
            sign = 1.0 if side == 0 else -1.0
            vals = np.broadcast_to((sign * barrier)[None, :, None], (len(deep), nt + 1, nx))
        fields[side][depth] = np.array(vals)

    pool = ThreadPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    for side in (0, 1):
        bound_gen = gbar if side == 0 else gund
        for n in range(depth - 1, -1, -1):
            level = nodes[n]
            gen = G if n < m else bound_gen
            N = len(level)
            V = np.empty((N, nt + 1, nx))
            starts = np.array([nd.start for nd in level])
            if gseeds is not None:
                cols = gseeds.index(np.array([round(nd.S / cfg.eps) for nd in level])[:, None],
                                    np.arange(nx)[None, :])
                V[:, nt] = xi.markov(gx[cols])
            else:
                for i, nd in enumerate(level):
                    V[i, nt] = xi.terminal_values(node_path(nd), times[nd.start], x)
            child = fields[side][n + 1]
            ks = np.arange(nt + 1)
            tables = {}
            for sign in (-1, 1):
                tab = np.empty((N, nt + 1), dtype=int)
                for i, nd in enumerate(level):
                    snap = _snap_table(nd.start, exits, nt)
                    tab[i] = [nd.children[(sign, int(st))] for st in snap]
                tables[sign] = tab
            V[:, nt, 0] = child[tables[-1][:, nt], nt, half]
            V[:, nt, -1] = child[tables[1][:, nt], nt, half]
            evaluator = _level_evaluator(gen, level, node_path, times, cfg, pool)
            for k in range(nt - 1, -1, -1):
                s = times[k + 1]
                explicit_update(V[:, k + 1], lambda y, z, gm: evaluator(s, y, z, gm),
                                grid.dt, grid.h, grid.kappa, out=V[:, k, 1:-1])
                V[:, k, 0] = child[tables[-1][:, k], k, half]
                V[:, k, -1] = child[tables[1][:, k], k, half]
            # values before a node's start are never read; zero them for clean output
            V[ks[None, :] < starts[:, None]] = 0.0
            fields[side][n] = V
    if pool is not None:
        pool.shutdown()
    return TreeCascade(cfg, m, depth, nodes, index, fields, grid, exits, seed_source,
                       G.name, xi.name)


def _level_evaluator(gen: GeneratorSpec, level, node_path, times, cfg, pool):
    """Vectorized ``g(s, y, z, gamma)`` over all nodes of a level (rows)."""
    if gen.path_free:
        return lambda s, y, z, gm: gen.func(s, None, y, z, gm)
    if gen.state_func is not None:
        S = np.array([nd.S for nd in level])[:, None]
        return lambda s, y, z, gm: gen.state_func(s, S, y, z, gm)
    frozen = [freeze(gen, times[nd.start], node_path(nd), cfg.horizon) for nd in level]

    def one(args):
        i, s, y, z, gm = args
        return frozen[i](s, y, z, gm)

    def evaluate(s, y, z, gm):
        jobs = [(i, s, y[i], z[i], gm[i]) for i in range(len(frozen))]
        rows = pool.map(one, jobs) if pool is not None else map(one, jobs)
        return np.stack(list(rows))
    return evaluate


# ---------------------------------------------------------------------------
# public operations

def build_cascade(G: GeneratorSpec, xi: TerminalFunctional, cfg: CascadeConfig):
    """Run the cascade; returns a :class:`MarkovCascade` or :class:`TreeCascade`."""
    if abs(xi.horizon - cfg.horizon) > 1e-12:
        raise ConfigurationError("terminal functional and cascade disagree on the horizon")
    mode = resolve_mode(G, xi, cfg)
    if mode == "markov":
        return run_markov(G, xi, cfg)
    return run_tree(G, xi, cfg)


def sandwich_gap(state, level=0) -> float:
    """Largest ``theta_upper - theta_lower`` over the nodes of a level."""
    if isinstance(state, MarkovCascade):
        return float(np.max(state.level_values(0, level) - state.level_values(1, level)))
    up, lo = state.level_values(0, level), state.level_values(1, level)
    return float(np.max(up - lo))


def fit_decay(ms, gaps):
    """Least-squares exponent ``r`` in ``gap ~ C m^{-r}`` (positive gaps only)."""
    ms, gaps = np.asarray(ms, float), np.asarray(gaps, float)
    ok = gaps > 0
    if ok.sum() < 2:
        return float("nan")
    slope = np.polyfit(np.log(ms[ok]), np.log(gaps[ok]), 1)[0]
    return float(-slope)


def truncation_profile(G, xi, cfg: CascadeConfig, ms):
    """Root gaps for several truncation levels together with the fitted rate."""
    gaps = [build_cascade(G, xi, cfg.with_(max_levels=int(m))).gap for m in ms]
    return dict(levels=list(map(int, ms)), gaps=gaps, rate=fit_decay(ms, gaps))


def shared_node_violation(a, b) -> float:
    """Worst violation of ``up_a >= up_b >= lo_b >= lo_a`` on nodes shared by
    cascades ``a`` (level m) and ``b`` (level m+1). Non-positive means ordered."""
    worst = -np.inf
    if isinstance(a, MarkovCascade):
        if a.K != b.K or len(a.times) != len(b.times):
            raise ValueError("cascades must share positions and stored times")
        for n in range(a.level_count()):
            ua, la = a.fields[0, n], a.fields[1, n]
            ub, lb = b.fields[0, n], b.fields[1, n]
            worst = max(worst, float(np.max(ub - ua)), float(np.max(lb - ub)),
                        float(np.max(la - lb)))
        return worst
    for n in range(a.levels):
        for nd in a.nodes[n]:
            i, j = a.index[n][nd.key], b.index[n][nd.key]
            sl = slice(nd.start, None)
            ua, la = a.fields[0][n][i, sl], a.fields[1][n][i, sl]
            ub, lb = b.fields[0][n][j, sl], b.fields[1][n][j, sl]
            worst = max(worst, float(np.max(ub - ua)), float(np.max(lb - ub)),
                        float(np.max(la - lb)))
    return worst


def global_bound(G: GeneratorSpec, xi: TerminalFunctional, horizon):
    """``C0 (L0+1) e^{(L0+1) T} + ||xi|| e^{L0 T}``."""
    L0, C0, T = G.L0, G.C0, horizon
    return C0 * (L0 + 1) * math.exp((L0 + 1) * T) + xi.bound * math.exp(L0 * T)


def global_bound_check(state, G, xi, tol=1e-9):
    """All G-solved node values (both sandwich sides) against :func:`global_bound`."""
    bound = global_bound(G, xi, state.config.horizon)
    vals = state.all_values()
    worst = float(np.max(np.abs(vals)))
    return dict(bound=bound, max_abs=worst, ok=bool(worst <= bound + tol))


def evaluate_along_path(state, omega: Path, t: float):
    """Cascade value at ``(t, omega)`` through the eps-hitting skeleton of ``omega``.

    Returns ``dict(upper, lower, level, displacement)``.
    """
    cfg = state.config
    hits, incs = hitting_skeleton(omega, cfg.eps, until=t)
    n = len(hits)
    signs = [int(np.sign(x[0])) for x in incs[:n]]
    S_index = int(sum(signs))
    x = float(omega(t)[0]) - S_index * cfg.eps
    if isinstance(state, MarkovCascade):
        up = state.value(0, n, S_index, t, x)
        lo = state.value(1, n, S_index, t, x)
    else:
        if n > state.levels:
            raise ValueError("observed path leaves the computed tree")
        key, prev = [], 0
        for hval, sg in zip(hits, signs):
            k = int(np.searchsorted(state.grid.times, hval + 1e-12, side="right") - 1)
            pos = int(np.searchsorted(state.exit_indices, k, side="right")) - 1
            st = max(prev, int(state.exit_indices[pos]))
            key.append((st, sg))
            prev = st
        key = tuple(key)
        up = state.value(0, key, t, x)
        lo = state.value(1, key, t, x)
    return dict(upper=up, lower=lo, level=n, displacement=S_index * cfg.eps)


def to_json(state, extra=None) -> str:
    """Deterministic JSON summary (no timings)."""
    up, lo = state.root
    levels = state.levels
    out = dict(
        mode=state.mode, generator=state.generator, terminal=state.terminal,
        eps=state.config.eps, nx=state.config.nx, nt=state.grid.nt, dt=state.grid.dt,
        max_levels=levels, theta_upper=up, theta_lower=lo, gap=up - lo,
        midpoint=0.5 * (up + lo),
    )
    if isinstance(state, TreeCascade):
        out.update(nodes=state.node_count(), seed_source=state.seed_source,
                   exit_time_grid=state.config.exit_time_grid)
    else:
        out.update(positions=state.K)
    if extra:
        out.update(extra)
    return json.dumps(out, sort_keys=True, indent=2)
