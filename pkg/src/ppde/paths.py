"""Continuous paths represented by piecewise-linear interpolation of knots.

A :class:`Path` lives on ``[origin_time, horizon]``, starts at the zero vector
and is constant after its last knot. Zero-length segments (repeated knot
times) are allowed; they represent limits of interpolated partitions whose
hitting times coincide, and the value at such a time is the last knot.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class PathError(ValueError):
    """Raised when knots or query times violate the path invariants."""


@dataclass(frozen=True)
class Path:
    """Piecewise-linear path.

    Parameters
    ----------
    times : array_like, shape (n,)
        Non-decreasing knot times, first equal to ``origin_time``.
    values : array_like, shape (n, d) or (n,)
        Knot values; the first one must be zero.
    horizon : float
        Right end of the time domain.
    """

    times: np.ndarray
    values: np.ndarray
    horizon: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if times.size == 0 or values.shape[0] != times.size:
            raise PathError("times and values must be non-empty and aligned")
        if np.any(np.diff(times) < 0):
            raise PathError("knot times must be non-decreasing")
        if np.any(values[0] != 0.0):
            raise PathError("a path must start at the origin")
        if times[-1] > self.horizon + 1e-12:
            raise PathError("knot after the horizon")
        if not np.all(np.isfinite(values)):
            raise PathError("non-finite knot value")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "horizon", float(self.horizon))

    @classmethod
    def zero(cls, dim=1, origin_time=0.0, horizon=1.0) -> "Path":
        return cls([origin_time], np.zeros((1, dim)), horizon)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def origin_time(self) -> float:
        return float(self.times[0])

    def _check_time(self, t):
        if t < self.origin_time - 1e-12 or t > self.horizon + 1e-12:
            raise PathError(f"time {t} outside [{self.origin_time}, {self.horizon}]")

    def __call__(self, t: float) -> np.ndarray:
        """Value at time ``t`` (the last knot wins at repeated times)."""
        self._check_time(t)
        times = self.times
        k = int(np.searchsorted(times, t, side="right")) - 1
        if k >= len(times) - 1:
            return self.values[-1].copy()
        t0, t1 = times[k], times[k + 1]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * self.values[k] + w * self.values[k + 1]

    def evaluate(self, ts) -> np.ndarray:
        """Vectorized evaluation; returns shape (len(ts), d)."""
        ts = np.asarray(ts, dtype=float)
        # collapse repeated times onto the last knot for np.interp
        keep = np.append(self.times[1:] != self.times[:-1], True)
        tt, vv = self.times[keep], self.values[keep]
        return np.stack([np.interp(ts, tt, vv[:, i]) for i in range(self.dim)], axis=-1)

    def stopped(self, t: float) -> "Path":
        """The path ``s -> omega(s ^ t)``, keeping the horizon."""
        self._check_time(t)
        # keep repeated knots at t: they encode jumps of a closed partition
        mask = self.times <= t
        times, values = self.times[mask], self.values[mask]
        if times[-1] < t:
            times = np.append(times, t)
            values = np.vstack([values, self(t)])
        return Path(times, values, self.horizon)

    def knots_upto(self, t: float):
        """Knot times/values in ``[origin, t]`` including the point at ``t``."""
        mask = self.times <= t
        return (np.append(self.times[mask], t), np.vstack([self.values[mask], self(t)]))

    def to_text(self) -> str:
        lines = [f"d={self.dim} T={self.horizon!r}"]
        for t, v in zip(self.times, self.values):
            lines.append(" ".join([repr(float(t))] + [repr(float(x)) for x in v]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, horizon=None) -> "Path":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        header = dict(tok.split("=", 1) for tok in rows[0])
        if "d" not in header:
            raise PathError("missing d=<dim> header")
        dim = int(header["d"])
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
        if data.ndim != 2 or data.shape[1] != dim + 1:
            raise PathError("row width does not match the declared dimension")
        if horizon is None:
            horizon = float(header.get("T", data[-1, 0]))
        return cls(data[:, 0], data[:, 1:], horizon)


def write_path(path: Path, filename) -> None:
    with open(filename, "w") as fh:
        fh.write(path.to_text())


def read_path(filename, horizon=None) -> Path:
    with open(filename) as fh:
        return Path.from_text(fh.read(), horizon=horizon)


def _row_norms(vals):
    """Euclidean norm of each row, scaled so tiny entries do not underflow."""
    scale = np.max(np.abs(vals), axis=1)
    safe = np.where(scale > 0, scale, 1.0)
    return scale * np.sqrt(np.sum((vals / safe[:, None]) ** 2, axis=1))


def sup_norm(omega: Path, t: float) -> float:
    """``sup_{s<=t} |omega_s|`` (Euclidean norm); attained at a knot or at t."""
    omega._check_time(t)
    _, vals = omega.knots_upto(t)
    return float(np.max(_row_norms(vals)))


def running_extremes(omega: Path, t: float):
    """Componentwise running maximum and minimum on ``[origin, t]``."""
    omega._check_time(t)
    _, vals = omega.knots_upto(t)
    return vals.max(axis=0), vals.min(axis=0)


def d_infinity(t, omega: Path, t2, omega2: Path) -> float:
    """``|t - t'| + sup_s |omega_{s^t} - omega'_{s^t'}|``."""
    a, b = omega.stopped(t), omega2.stopped(t2)
    grid = np.union1d(a.times, b.times)
    grid = np.union1d(grid, [max(a.origin_time, b.origin_time), max(t, t2)])
    lo = max(a.origin_time, b.origin_time)
    grid = grid[grid >= lo]
    diff = a.evaluate(grid) - b.evaluate(grid)
    return abs(t - t2) + float(np.max(_row_norms(diff)))


def concat(omega: Path, t: float, omega2: Path) -> Path:
    """``omega (x)_t omega'``: follow omega up to t, then omega_t + omega'."""
    if abs(omega2.origin_time - t) > 1e-12:
        raise PathError("the continuation must start at the concatenation time")
    omega._check_time(t)
    mask = omega.times < t
    base = omega(t)
    times = np.concatenate([omega.times[mask], [t], omega2.times[1:]])
    values = np.vstack([omega.values[mask], base, base + omega2.values[1:]])
    return Path(times, values, omega2.horizon)


@dataclass(frozen=True)
class Partition:
    """Hitting skeleton ``((t_1, x_1), ..., (t_n, x_n))`` after ``origin_time``.

    ``closed=True`` admits coinciding times (the closure of the partition set).
    """

    origin_time: float
    times: tuple = ()
    increments: tuple = ()
    eps: float = np.inf
    horizon: float = np.inf
    closed: bool = False

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        incs = tuple(np.atleast_1d(np.asarray(x, dtype=float)) for x in self.increments)
        if len(times) != len(incs):
            raise PathError("times and increments must align")
        seq = (self.origin_time,) + times
        for a, b in zip(seq[:-1], seq[1:]):
            if b < a or (b == a and not self.closed):
                raise PathError("partition times must increase")
        if times and (times[-1] > self.horizon or (times[-1] == self.horizon and not self.closed)):
            raise PathError("partition times must precede the horizon")
        for x in incs:
            if np.linalg.norm(x) > self.eps * (1 + 1e-12):
                raise PathError("increment larger than eps")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "increments", incs)

    def __len__(self):
        return len(self.times)

    def extend(self, t, x) -> "Partition":
        return Partition(self.origin_time, self.times + (t,), self.increments + (x,),
                         self.eps, self.horizon, self.closed)

    @property
    def position(self) -> np.ndarray:
        """Sum of the increments (current displacement)."""
        if not self.increments:
            return np.zeros(1)
        return np.sum(self.increments, axis=0)


def interp_partition(pi: Partition, horizon=None, dim=None) -> Path:
    """Linear interpolation through ``(T0, 0), (t_i, sum_{j<=i} x_j)``, then flat."""
    horizon = pi.horizon if horizon is None else horizon
    if not np.isfinite(horizon):
        raise PathError("interpolation needs a finite horizon")
    if dim is None:
        dim = pi.increments[0].size if pi.increments else 1
    times = [pi.origin_time] + list(pi.times)
    values = np.zeros((len(times), dim))
    if pi.increments:
        values[1:] = np.cumsum(np.vstack(pi.increments), axis=0)
    return Path(times, values, horizon)


def path_from_points(points: Iterable[Sequence[float]], horizon=None) -> Path:
    """Convenience: ``[(t, x...), ...]`` to a Path."""
    arr = np.asarray(list(points), dtype=float)
    if horizon is None:
        horizon = arr[-1, 0]
    return Path(arr[:, 0], arr[:, 1:], horizon)


def hitting_skeleton(omega: Path, eps: float, until=None):
    """Successive eps-exit times of a piecewise-linear path.

    ``H_{m+1} = inf{s > H_m : |omega_s - omega_{H_m}| = eps}``, computed exactly
    on each linear segment. Returns ``(hits, increments)`` for the hits that
    occur at or before ``until`` (default: the last knot).
    """
    if eps <= 0:
        raise PathError("eps must be positive")
    until = omega.times[-1] if until is None else until
    times, vals = omega.knots_upto(until)
    hits, incs = [], []
    anchor = vals[0].copy()
    k, s0, x0 = 0, times[0], vals[0].copy()
    while k < len(times) - 1:
        t1, x1 = times[k + 1], vals[k + 1]
        a, b = x0 - anchor, x1 - x0
        # smallest u in (0, 1] with |a + u b| = eps
        qa, qb, qc = b @ b, 2 * (a @ b), a @ a - eps * eps
        u = None
        if qa > 0:
            disc = qb * qb - 4 * qa * qc
            if disc >= 0:
                root = (-qb + np.sqrt(disc)) / (2 * qa)
                # a hit exactly at the knot can round to 1 + ulp
                if 0 < root <= 1 + 1e-12:
                    u = min(root, 1.0)
        if u is None:
            k, s0, x0 = k + 1, t1, x1.copy()
            continue
        s = s0 + u * (t1 - s0)
        inc = a + u * b
        inc *= eps / np.linalg.norm(inc)
        hits.append(float(s))
        incs.append(inc)
        anchor = anchor + inc
        s0, x0 = s, anchor.copy()
        if u == 1:
            k, s0 = k + 1, t1
    return hits, incs
