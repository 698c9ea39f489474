import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppde import generator as gen
from ppde.paths import path_from_points

finite = st.floats(-5, 5, allow_nan=False)


def _builtins():
    return [gen.heat(), gen.heat(sigma=1.2, drift=0.3, rate=-0.2, source=0.5),
            gen.semilinear(k_f=0.3), gen.semilinear(k_f=0.2, feature="running_max"),
            gen.hjb(k_f=0.2), gen.hjb(discount=0.3), gen.isaacs(), gen.isaacs(discount=0.2)]


@pytest.mark.parametrize("G", _builtins(), ids=lambda G: f"{G.name}-{sorted(G.params.items())}")
def test_builtin_constants_hold(G):
    rep = gen.validate_generator(G, n_samples=1000, seed=3)
    assert rep.ok, rep


def test_transformed_generators_keep_constants():
    G = gen.semilinear(k_f=0.3)
    for H in (gen.monotonize(G, G.L0 + 1), gen.affine_generator(gen.isaacs(), 2.0, -0.5),
              gen.affine_generator(gen.hjb(k_f=0.2), 0.5, 1.0)):
        assert gen.validate_generator(H, n_samples=1000, seed=1).ok


def test_constant_checks():
    with pytest.raises(gen.ConfigurationError):
        gen.GeneratorSpec(lambda *a: 0.0, L0=0.5, C0=0.0, c0=1.0)
    with pytest.warns(UserWarning, match="degenerate"):
        gen.GeneratorSpec(lambda *a: 0.0, L0=0.5, C0=0.0, c0=0.0)
    with pytest.raises(gen.ConfigurationError):
        gen.make_generator("nope")
    with pytest.raises(gen.ConfigurationError):
        gen.make_generator("heat", bogus=1)


def test_freeze_needs_a_path_when_path_dependent():
    G = gen.semilinear(k_f=0.3, feature="running_max")
    with pytest.raises(gen.ConfigurationError):
        gen.freeze(G, 0.5, None, 1.0)
    om = path_from_points([(0, 0), (0.2, 1.0), (1.0, -1.0)])
    g = gen.freeze(G, 0.5, om, 1.0)
    # stopped at 0.5: running max 1.0 whatever happens later
    assert g(0.9, 0.0, 0.0, 0.0) == pytest.approx(0.3 * np.sin(1.0))


@settings(max_examples=100, deadline=None)
@given(z=finite, gamma=finite, L0=st.floats(0.1, 2.0), frac=st.floats(0.0, 1.0))
def test_bounding_sup0_is_the_control_supremum(z, gamma, L0, frac):
    c0 = frac * L0
    alphas = np.linspace(-L0, L0, 11)
    betas2 = np.linspace(2 * c0, 2 * L0, 11)
    brute = np.max(alphas[:, None] * z + 0.5 * betas2[None, :] * gamma)
    assert gen.bounding_sup0(z, gamma, L0, c0) == pytest.approx(brute, abs=1e-12)
    assert gen.bounding_inf0(z, gamma, L0, c0) == pytest.approx(
        np.min(alphas[:, None] * z + 0.5 * betas2[None, :] * gamma), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10 ** 6), L0=st.floats(0.2, 2.0), frac=st.floats(0.0, 1.0))
def test_bounding_sup0_matrix_form(seed, L0, frac):
    rng = np.random.default_rng(seed)
    c0 = frac * L0
    d = 3
    z = rng.normal(size=d)
    M = rng.normal(size=(d, d))
    gamma = M + M.T
    val = gen.bounding_sup0(z, gamma, L0, c0, dim=d)
    # attained by alpha = L0 z/|z| and beta^2/2 diagonal in the eigenbasis of gamma
    lam, Q = np.linalg.eigh(gamma)
    half_b2 = Q @ np.diag(np.where(lam > 0, L0, c0)) @ Q.T
    attained = L0 * np.linalg.norm(z) + np.trace(half_b2 @ gamma)
    assert val == pytest.approx(attained, rel=1e-12, abs=1e-12)
    # no admissible control does better
    for _ in range(20):
        R, _ = np.linalg.qr(rng.normal(size=(d, d)))
        hb = R @ np.diag(rng.uniform(c0, L0, d)) @ R.T
        a = rng.normal(size=d)
        a *= rng.uniform(0, L0) / np.linalg.norm(a)
        assert a @ z + np.trace(hb @ gamma) <= val + 1e-10


def test_bounding_pair_brackets_builtins():
    for G in _builtins():
        up, lo = gen.bounding_pair(G)
        rng = np.random.default_rng(0)
        y, z, g = rng.normal(0, 3, (3, 200))
        om = path_from_points([(0, 0), (0.5, 0.7), (1.0, -0.3)])
        val = G(0.5, om, y, z, g)
        assert np.all(val <= up(0.5, None, y, z, g) + 1e-12)
        assert np.all(val >= lo(0.5, None, y, z, g) - 1e-12)


@settings(max_examples=60, deadline=None)
@given(y=finite, z=finite, g=finite, t=st.floats(0, 1), dy=st.floats(0, 3))
def test_monotonize_is_decreasing_in_y_and_conjugate(y, z, g, t, dy):
    G = gen.semilinear(k_y=0.7)
    lam = G.L0 + 1
    M = gen.monotonize(G, lam)
    assert M(t, None, y + dy, z, g) <= M(t, None, y, z, g) + 1e-12
    # u = e^{-lam t} u~ solves the original: G~ = e^{lam t} G(u, ...) - lam u~
    e = np.exp(lam * t)
    expect = e * G(t, None, y / e, z / e, g / e) - lam * y
    assert M(t, None, y, z, g) == pytest.approx(expect, rel=1e-12, abs=1e-12)
    with pytest.raises(gen.ConfigurationError):
        gen.monotonize(G, lam - 0.5)


@settings(max_examples=60, deadline=None)
@given(y=finite, z=finite, g=finite, a=st.floats(0.1, 5), c=finite)
def test_affine_generator_conjugates(y, z, g, a, c):
    G = gen.isaacs(discount=0.3)
    H = gen.affine_generator(G, a, c)
    lhs = H(0.0, None, a * y + c, a * z, a * g)
    assert lhs == pytest.approx(a * G(0.0, None, y, z, g), rel=1e-10, abs=1e-10)
    assert H.C0 == pytest.approx(a * G.C0 + G.L0 * abs(c))


def test_affine_change_rejects_decreasing_map():
    with pytest.raises(gen.DomainError):
        gen.affine_change(-1.0, 0.0)


def test_isaacs_against_fine_control_grid():
    G = gen.isaacs(n_controls=41)
    rng = np.random.default_rng(4)
    z, g = rng.normal(0, 2, (2, 50))
    a = np.linspace(-1, 1, 41)
    A, B = np.meshgrid(a, a, indexing="ij")
    ref = [np.max(np.min(0.5 * (1 + 0.4 * A * B) ** 2 * gi + 0.3 * (A - B) * zi, axis=1))
           for zi, gi in zip(z, g)]
    np.testing.assert_allclose(G(0.0, None, 0.0, z, g), ref, rtol=1e-12, atol=1e-12)


def test_degenerate_builtin_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        gen.hjb(sigma_min=0.0)
    assert any("degenerate" in str(w.message) for w in caught)
