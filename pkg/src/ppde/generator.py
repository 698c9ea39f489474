"""Nonlinear generators G(t, omega, y, z, gamma) and their transformations.

The solver works in one space dimension, where ``z`` and ``gamma`` are arrays
broadcast against ``y``. The bounding generators also accept vectors and
symmetric matrices for ``d > 1``.

A generator that depends on the path only through its current value can
provide ``state_func(t, x, y, z, gamma)``; the memoized cascade uses it to
evaluate many frozen generators in one vectorized call.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .paths import Path


class ConfigurationError(ValueError):
    """Inconsistent structural constants or malformed generator parameters."""


class DomainError(ValueError):
    """A transformation was applied outside of its domain of validity."""


@dataclass(frozen=True)
class GeneratorSpec:
    """A generator together with its structural constants.

    Attributes
    ----------
    func : callable
        ``func(t, omega, y, z, gamma)``; ``omega`` is a :class:`Path`.
    L0 : float
        Lipschitz constant in ``(y, z, gamma)``.
    C0 : float
        Bound on ``|G(t, omega, 0, 0, 0)|``.
    c0 : float
        Ellipticity: ``G(gamma1) - G(gamma2) >= c0 tr(gamma1 - gamma2)``.
    modulus : callable
        Continuity modulus in ``(t, omega)``.
    state_func : callable, optional
        ``state_func(t, x, y, z, gamma)`` when G sees only the current value.
    path_free : bool
        True when G does not depend on ``omega`` at all.
    """

    func: Callable
    L0: float
    C0: float
    c0: float
    modulus: Callable = field(default=lambda r: r)
    state_func: Optional[Callable] = None
    path_free: bool = False
    name: str = "custom"
    params: dict = field(default_factory=dict)
    dim: int = 1

    def __post_init__(self):
        if self.L0 < 0 or self.C0 < 0 or self.c0 < 0:
            raise ConfigurationError("structural constants must be non-negative")
        if self.c0 > self.L0:
            raise ConfigurationError(f"c0={self.c0} exceeds L0={self.L0}")
        if self.c0 == 0:
            warnings.warn(f"generator {self.name!r} is degenerate (c0 = 0)", stacklevel=3)

    def __call__(self, t, omega, y, z, gamma):
        return self.func(t, omega, y, z, gamma)

    @property
    def markov(self) -> bool:
        return self.path_free or self.state_func is not None

    def eval_state(self, t, x, y, z, gamma):
        """Evaluate with the path summarized by its current value ``x``."""
        if self.path_free:
            return self.func(t, None, y, z, gamma)
        if self.state_func is None:
            raise ConfigurationError(f"generator {self.name!r} is path dependent")
        return self.state_func(t, x, y, z, gamma)

    def with_constants(self, **kw) -> "GeneratorSpec":
        return replace(self, **kw)


@dataclass(frozen=True)
class FrozenGenerator:
    """``g(s, y, z, gamma) = G(min(s, T), omega stopped at t, y, z, gamma)``."""

    spec: GeneratorSpec
    t: float
    omega: Optional[Path]
    horizon: float

    def __post_init__(self):
        if self.omega is not None:
            object.__setattr__(self, "omega", self.omega.stopped(self.t))

    @property
    def current(self):
        if self.omega is None:
            return 0.0
        return float(self.omega.values[-1, 0])

    def __call__(self, s, y, z, gamma):
        s = min(s, self.horizon)
        if self.spec.path_free:
            return self.spec.func(s, None, y, z, gamma)
        if self.spec.state_func is not None:
            return self.spec.state_func(s, self.current, y, z, gamma)
        return self.spec.func(s, self.omega, y, z, gamma)


def freeze(G: GeneratorSpec, t: float, omega: Optional[Path], horizon: float) -> FrozenGenerator:
    """Freeze the path argument of ``G`` at ``(t, omega)``."""
    if not G.path_free and omega is None:
        raise ConfigurationError("a path-dependent generator needs a path to freeze")
    return FrozenGenerator(G, t, omega, horizon)


# ---------------------------------------------------------------------------
# bounding generators

def _spectral_part(gamma, L0, c0):
    """sup over symmetric beta with sqrt(2 c0) <= beta <= sqrt(2 L0) of tr(beta^2 gamma)/2."""
    gamma = np.asarray(gamma, dtype=float)
    lam = np.linalg.eigvalsh(0.5 * (gamma + np.swapaxes(gamma, -1, -2)))
    return np.sum(L0 * np.maximum(lam, 0.0) - c0 * np.maximum(-lam, 0.0), axis=-1)


def bounding_sup0(z, gamma, L0, c0, dim=1):
    """``g0_bar(z, gamma) = sup_{alpha, beta} [alpha.z + tr(beta^2 gamma)/2]``."""
    if c0 > L0:
        raise ConfigurationError("c0 exceeds L0")
    if dim == 1:
        z = np.asarray(z, dtype=float)
        gamma = np.asarray(gamma, dtype=float)
        return L0 * np.abs(z) + L0 * np.maximum(gamma, 0.0) - c0 * np.maximum(-gamma, 0.0)
    z = np.asarray(z, dtype=float)
    return L0 * np.linalg.norm(z, axis=-1) + _spectral_part(gamma, L0, c0)


def bounding_inf0(z, gamma, L0, c0, dim=1):
    """``g0_under(z, gamma) = -g0_bar(-z, -gamma)``."""
    return -bounding_sup0(-np.asarray(z, dtype=float), -np.asarray(gamma, dtype=float), L0, c0, dim)


def bounding_sup(L0, C0, c0, name="g_bar") -> GeneratorSpec:
    """``g_bar = g0_bar + L0 |y| + C0`` as a d=1 generator."""
    def f(t, omega, y, z, gamma):
        return bounding_sup0(z, gamma, L0, c0) + L0 * np.abs(y) + C0
    return _quiet(f, L0, C0, c0, name=name)


def bounding_inf(L0, C0, c0, name="g_under") -> GeneratorSpec:
    """``g_under = g0_under - L0 |y| - C0`` as a d=1 generator."""
    def f(t, omega, y, z, gamma):
        return bounding_inf0(z, gamma, L0, c0) - L0 * np.abs(y) - C0
    return _quiet(f, L0, C0, c0, name=name)


def bounding_pair(G: GeneratorSpec):
    return (bounding_sup(G.L0, G.C0, G.c0, name=f"{G.name}:sup"),
            bounding_inf(G.L0, G.C0, G.c0, name=f"{G.name}:inf"))


def _quiet(func, L0, C0, c0, **kw) -> GeneratorSpec:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return GeneratorSpec(func, L0, C0, c0, path_free=True, **kw)


# ---------------------------------------------------------------------------
# transformations

def monotonize(G: GeneratorSpec, lam: float, horizon: float = 1.0) -> GeneratorSpec:
    """Exponential change ``u~ = e^{lam t} u``.

    ``G~(t, w, y, z, g) = e^{lam t} G(t, w, e^{-lam t} y, e^{-lam t} z, e^{-lam t} g) - lam y``,
    which is non-increasing in ``y`` once ``lam >= L0 + 1``. The terminal data
    becomes ``e^{lam T} xi``.
    """
    if lam < G.L0 + 1:
        raise ConfigurationError(f"lambda={lam} below L0 + 1 = {G.L0 + 1}")

    def wrap(inner):
        def f(t, a, y, z, gamma):
            e = np.exp(-lam * t)
            return inner(t, a, e * y, e * z, e * gamma) / e - lam * y
        return f

    state = wrap(G.state_func) if G.state_func is not None else None
    return replace(G, func=wrap(G.func), state_func=state, L0=G.L0 + lam,
                   C0=np.exp(lam * horizon) * G.C0, name=f"{G.name}:monotone", params={**G.params, "lambda": lam})


@dataclass(frozen=True)
class SpaceChange:
    """Strictly increasing change of the solution variable ``u~ = Phi(t, u)``.

    ``inverse`` is ``Psi`` with its derivatives ``Psi_t``, ``Psi_x``, ``Psi_xx``.
    """

    phi: Callable
    psi: Callable
    psi_t: Callable
    psi_x: Callable
    psi_xx: Callable
    lipschitz_factor: float = 1.0
    shift_bound: float = 0.0


def affine_change(a: float, c: float) -> SpaceChange:
    """``Phi(t, x) = a x + c`` with ``a > 0``."""
    if a <= 0:
        raise DomainError("an affine change needs a positive slope")
    return SpaceChange(
        phi=lambda t, x: a * np.asarray(x) + c,
        psi=lambda t, y: (np.asarray(y) - c) / a,
        psi_t=lambda t, y: np.zeros_like(np.asarray(y, dtype=float)),
        psi_x=lambda t, y: np.full_like(np.asarray(y, dtype=float), 1.0 / a),
        psi_xx=lambda t, y: np.zeros_like(np.asarray(y, dtype=float)),
        lipschitz_factor=1.0, shift_bound=abs(c) / a,
    )


def change_of_variable(G: GeneratorSpec, change: SpaceChange, scale: float = 1.0) -> GeneratorSpec:
    """Generator of ``u~ = Phi(t, u)`` for a solution ``u`` of ``(G, xi)``.

    ``G~ = [Psi_t + G(t, w, Psi, Psi_x z, Psi_xx z^2 + Psi_x gamma)] / Psi_x``.
    ``scale`` is the range of ``Phi_x`` used to rescale ``C0``.
    """
    def wrap(inner):
        def f(t, a, y, z, gamma):
            px = change.psi_x(t, y)
            if np.any(px <= 0):
                raise DomainError("Psi_x must be positive")
            arg_y = change.psi(t, y)
            arg_z = px * z
            arg_g = change.psi_xx(t, y) * z * z + px * gamma
            return (change.psi_t(t, y) + inner(t, a, arg_y, arg_z, arg_g)) / px
        return f

    state = wrap(G.state_func) if G.state_func is not None else None
    C0 = scale * (G.C0 + G.L0 * change.shift_bound)
    return replace(G, func=wrap(G.func), state_func=state, C0=C0,
                   name=f"{G.name}:changed")


def affine_generator(G: GeneratorSpec, a: float, c: float) -> GeneratorSpec:
    """Shortcut for ``change_of_variable(G, affine_change(a, c), scale=a)``."""
    return change_of_variable(G, affine_change(a, c), scale=a)


# ---------------------------------------------------------------------------
# sampled validation

@dataclass
class ValidationReport:
    name: str
    lipschitz_ratio: float
    monotone_violation: float
    ellipticity_violation: float
    C0_ratio: float
    bound_violation: float
    n_samples: int

    @property
    def ok(self) -> bool:
        tol = 1e-9
        return (self.lipschitz_ratio <= 1 + tol and self.monotone_violation <= tol
                and self.ellipticity_violation <= tol and self.C0_ratio <= 1 + tol
                and self.bound_violation <= tol)


def random_path(rng, horizon=1.0, n=6, scale=1.0) -> Path:
    times = np.concatenate([[0.0], np.sort(rng.uniform(0, horizon, n - 1))])
    values = np.concatenate([[0.0], np.cumsum(rng.normal(0, scale, n - 1))])
    return Path(times, values[:, None], horizon)


def validate_generator(G: GeneratorSpec, n_samples=2000, seed=0, horizon=1.0,
                       scale=3.0) -> ValidationReport:
    """Sample-based check of the structural constants (d=1)."""
    rng = np.random.default_rng(seed)
    gbar, gund = bounding_pair(G)
    lip = mono = ell = c0r = bnd = 0.0
    for _ in range(max(1, n_samples // 100)):
        t = rng.uniform(0, horizon)
        omega = random_path(rng, horizon)
        y1, z1, g1, y2, z2, g2 = rng.normal(0, scale, (6, 100))
        a = G(t, omega, y1, z1, g1)
        b = G(t, omega, y2, z2, g2)
        dist = np.abs(y1 - y2) + np.abs(z1 - z2) + np.abs(g1 - g2)
        lip = max(lip, float(np.max(np.abs(a - b) / (G.L0 * dist + 1e-300))))
        dg = np.abs(rng.normal(0, scale, 100))
        c = G(t, omega, y1, z1, g1 + dg)
        mono = max(mono, float(np.max(a - c)))
        ell = max(ell, float(np.max(G.c0 * dg - (c - a))))
        zero = np.zeros(1)
        base = abs(float(np.asarray(G(t, omega, zero, zero, zero)).ravel()[0]))
        c0r = max(c0r, base / G.C0 if G.C0 > 0 else (np.inf if base > 1e-12 else 0.0))
        up = gbar(t, None, y1, z1, g1)
        lo = gund(t, None, y1, z1, g1)
        bnd = max(bnd, float(np.max(a - up)), float(np.max(lo - a)))
    return ValidationReport(G.name, lip, mono, ell, c0r, bnd, n_samples)


# ---------------------------------------------------------------------------
# builtins

def _path_feature(kind):
    if kind == "current":
        return lambda t, omega: float(omega(t)[0]) if omega is not None else 0.0
    if kind == "running_max":
        def f(t, omega):
            if omega is None:
                return 0.0
            _, vals = omega.knots_upto(min(t, omega.horizon))
            return float(vals[:, 0].max())
        return f
    raise ConfigurationError(f"unknown path feature {kind!r}")


def heat(sigma=1.0, drift=0.0, rate=0.0, source=0.0, source_freq=1.0) -> GeneratorSpec:
    """Linear ``sigma^2 gamma / 2 + drift z + rate y + source sin(freq x_t)``."""
    half = 0.5 * sigma ** 2

    def state(t, x, y, z, gamma):
        out = half * gamma + drift * z + rate * y
        if source:
            out = out + source * np.sin(source_freq * x)
        return out

    def func(t, omega, y, z, gamma):
        x = float(omega(min(t, omega.horizon))[0]) if omega is not None else 0.0
        return state(t, x, y, z, gamma)

    L0 = max(half, abs(drift), abs(rate))
    return GeneratorSpec(func, L0, abs(source), half, state_func=state,
                         path_free=(source == 0), name="heat",
                         params=dict(sigma=sigma, drift=drift, rate=rate, source=source,
                                     source_freq=source_freq))


def semilinear(k_y=0.5, k_z=0.5, k_f=0.0, feature="current", sigma=1.0) -> GeneratorSpec:
    """``sigma^2 gamma/2 + k_y sin(y) + k_z |z| + k_f sin(feature(omega))``."""
    half = 0.5 * sigma ** 2
    feat = _path_feature(feature)

    def base(y, z, gamma):
        return half * gamma + k_y * np.sin(y) + k_z * np.abs(z)

    def func(t, omega, y, z, gamma):
        out = base(y, z, gamma)
        if k_f:
            out = out + k_f * np.sin(feat(t, omega))
        return out

    state = None
    if feature == "current":
        def state(t, x, y, z, gamma):
            return base(y, z, gamma) + k_f * np.sin(x)
    L0 = max(half, abs(k_y), abs(k_z))
    return GeneratorSpec(func, L0, abs(k_f), half, state_func=state, path_free=(k_f == 0),
                         name="semilinear",
                         params=dict(k_y=k_y, k_z=k_z, k_f=k_f, feature=feature, sigma=sigma))


def hjb(drift_max=0.5, sigma_min=0.8, sigma_max=1.2, discount=0.0, k_f=0.0,
        feature="current") -> GeneratorSpec:
    """Bellman generator ``sup_{|a|<=A, s in [s-, s+]} [a z + s^2 gamma/2] - r y + f``."""
    if not 0 <= sigma_min <= sigma_max:
        raise ConfigurationError("need 0 <= sigma_min <= sigma_max")
    hi, lo = 0.5 * sigma_max ** 2, 0.5 * sigma_min ** 2
    feat = _path_feature(feature)

    def base(y, z, gamma):
        return drift_max * np.abs(z) + hi * np.maximum(gamma, 0) - lo * np.maximum(-gamma, 0) - discount * y

    def func(t, omega, y, z, gamma):
        out = base(y, z, gamma)
        if k_f:
            out = out + k_f * np.sin(feat(t, omega))
        return out

    state = None
    if feature == "current":
        def state(t, x, y, z, gamma):
            return base(y, z, gamma) + k_f * np.sin(x)
    L0 = max(hi, abs(drift_max), abs(discount))
    return GeneratorSpec(func, L0, abs(k_f), lo, state_func=state, path_free=(k_f == 0),
                         name="hjb", params=dict(drift_max=drift_max, sigma_min=sigma_min,
                                                 sigma_max=sigma_max, discount=discount,
                                                 k_f=k_f, feature=feature))


def isaacs(s0=1.0, s1=0.4, mu=0.3, n_controls=5, discount=0.0) -> GeneratorSpec:
    """Upper Isaacs generator in d=1.

    ``sup_a inf_b [ (s0 + s1 a b)^2 gamma / 2 + mu (a - b) z ] - r y`` with
    ``a, b`` on a uniform grid of ``[-1, 1]``.
    """
    if s0 <= s1 or s1 < 0:
        raise ConfigurationError("need s0 > s1 >= 0")
    grid = np.linspace(-1.0, 1.0, n_controls)
    A, B = np.meshgrid(grid, grid, indexing="ij")
    half_var = 0.5 * (s0 + s1 * A * B) ** 2
    drift = mu * (A - B)

    def func(t, omega, y, z, gamma):
        y, z, gamma = np.broadcast_arrays(np.asarray(y, float), np.asarray(z, float),
                                          np.asarray(gamma, float))
        vals = half_var[..., None] * gamma.reshape(-1) + drift[..., None] * z.reshape(-1)
        out = vals.min(axis=1).max(axis=0).reshape(gamma.shape)
        return out - discount * y

    L0 = max(0.5 * (s0 + s1) ** 2, 2 * abs(mu), abs(discount))
    c0 = 0.5 * (s0 - s1) ** 2
    return GeneratorSpec(func, L0, 0.0, c0, path_free=True, name="isaacs",
                         params=dict(s0=s0, s1=s1, mu=mu, n_controls=n_controls, discount=discount))


BUILTINS = {"heat": heat, "semilinear": semilinear, "hjb": hjb, "isaacs": isaacs}


def make_generator(name: str, **params) -> GeneratorSpec:
    """Build a registered generator by name; used by config loading."""
    try:
        builder = BUILTINS[name]
    except KeyError:
        raise ConfigurationError(f"unknown generator {name!r}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None
