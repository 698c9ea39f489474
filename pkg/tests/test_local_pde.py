import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppde import generator as gen
from ppde.local_pde import (BoundaryData, CFLError, Cylinder, ValueField, artificial_viscosity,
                            barrier_lambda, barrier_super, cache_key, cached_solve,
                            check_stability, global_barrier, max_time_step, solve_frozen)


def _heat_cos(T=1.0):
    return BoundaryData.from_function(lambda s, x: np.exp(-0.5 * (T - s)) * np.cos(x), T)


def test_heat_matches_closed_form_with_second_order_space_error():
    errs = []
    for nx in (11, 21, 41):
        v = solve_frozen(gen.heat(), Cylinder(0.0, 1.0, 1.0, nx), _heat_cos())
        exact = np.exp(-0.5 * (1.0 - v.times))[:, None] * np.cos(v.x)[None, :]
        errs.append(np.max(np.abs(v.values - exact)))
    assert errs[-1] < 1e-4
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_linear_data_is_reproduced():
    G = gen.hjb(drift_max=0.3)
    bd = BoundaryData.from_function(lambda s, x: 0.7 + 0 * s + 0 * x, 1.0)
    v = solve_frozen(G, Cylinder(0.0, 1.0, 0.5, 21), bd)
    np.testing.assert_allclose(v.values, 0.7, rtol=0, atol=1e-14)
    # drift acts on a linear profile at rate drift_max * |slope|
    bd = BoundaryData.from_function(lambda s, x: 2.0 * x + 0.6 * (1.0 - s), 1.0)
    v = solve_frozen(G, Cylinder(0.0, 1.0, 0.5, 21), bd)
    np.testing.assert_allclose(v.values, 2.0 * v.x[None, :] + 0.6 * (1.0 - v.times[:, None]),
                               atol=1e-12)


def test_cfl_error_suggests_a_valid_step_count():
    Q = Cylinder(0.0, 1.0, 0.5, 21, nt=5)
    with pytest.raises(CFLError) as info:
        solve_frozen(gen.heat(), Q, _heat_cos())
    nt = info.value.suggested_nt
    Q2 = Cylinder(0.0, 1.0, 0.5, 21, nt=nt)
    assert solve_frozen(gen.heat(), Q2, _heat_cos()).meta["dt"] <= max_time_step(0.5, 0.5, Q2.h)


def test_cylinder_validation():
    with pytest.raises(ValueError):
        Cylinder(0.0, 1.0, 0.5, 20)
    with pytest.raises(ValueError):
        Cylinder(1.0, 1.0, 0.5, 21)
    with pytest.raises(NotImplementedError):
        Cylinder(0.0, 1.0, 0.5, 21, dim=2)


def test_viscosity_only_when_needed():
    assert artificial_viscosity(1.0, 0.5, 0.1) == 0.0
    assert artificial_viscosity(1.0, 0.0, 0.1) == pytest.approx(0.05)


def test_degenerate_generator_is_flagged_and_still_ordered():
    G = gen.hjb(sigma_min=0.0)
    Q = Cylinder(0.0, 1.0, 0.5, 21)
    lo = BoundaryData.from_function(lambda s, x: np.sin(3 * x + s), 1.0)
    hi = BoundaryData.from_function(lambda s, x: np.sin(3 * x + s) + 0.1 * x * x, 1.0)
    rep = check_stability(G, Q, lo, hi)
    assert rep.ordered_input and rep.order_violation <= 0.0
    assert solve_frozen(G, Q, lo).meta["degenerate"]


@settings(max_examples=40, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(-3, 3), c=st.floats(-2, 2),
       which=st.sampled_from(["isaacs", "hjb", "heat"]))
def test_maximum_principle(a, b, c, which):
    G = {"isaacs": gen.isaacs(), "hjb": gen.hjb(discount=0.2),
         "heat": gen.heat(drift=0.3, rate=-0.1)}[which]
    bd = BoundaryData.from_function(lambda s, x: a * np.sin(b * x + c * s), 1.0)
    v = solve_frozen(G, Cylinder(0.0, 1.0, 0.5, 15), bd)
    edge = np.concatenate([v.values[:, 0], v.values[:, -1], v.values[-1]])
    assert np.max(np.abs(v.values)) <= np.max(np.abs(edge)) + 1e-12


def test_value_field_roundtrip(tmp_path):
    v = solve_frozen(gen.heat(), Cylinder(0.0, 1.0, 0.5, 11), _heat_cos())
    v.save(tmp_path / "v.npz")
    w = ValueField.load(tmp_path / "v.npz")
    np.testing.assert_array_equal(v.values, w.values)
    assert w.meta == v.meta
    v.to_csv(tmp_path / "v.csv")
    rows = np.loadtxt(tmp_path / "v.csv", delimiter=",", skiprows=1)
    assert rows.shape == (v.values.size, 3)
    assert v.at(0.0, 0.0) == pytest.approx(v.initial[5])


def test_cache_hits_and_key_sensitivity(tmp_path):
    Q = Cylinder(0.0, 1.0, 0.5, 11)
    bd = _heat_cos()
    a = cached_solve(gen.heat(), Q, bd, tmp_path)
    assert len(list(tmp_path.iterdir())) == 1
    b = cached_solve(gen.heat(), Q, bd, tmp_path)
    np.testing.assert_array_equal(a.values, b.values)
    other = BoundaryData.from_function(lambda s, x: np.cos(x) + 1e-9, 1.0)
    assert cache_key(gen.heat(), Q, bd) != cache_key(gen.heat(), Q, other)
    assert cache_key(gen.heat(), Q, bd) != cache_key(gen.heat(sigma=1.1), Q, bd)


@settings(max_examples=60, deadline=None)
@given(h=st.floats(0, 3), delta=st.floats(0.01, 1), L0=st.floats(0.1, 2), C0=st.floats(0, 2),
       t=st.floats(0, 1))
def test_barrier_is_a_supersolution(h, delta, L0, C0, t):
    w = barrier_super(h, delta, L0, C0, 1.0)
    assert w.residual(t, L0, C0) >= -1e-9 * max(1.0, float(w(t)))
    assert w.lam == barrier_lambda(h, delta, L0, C0)
    with pytest.raises(ValueError):
        barrier_lambda(h, 0.0, L0, C0)


def test_global_barrier_solves_its_ode():
    L0, C0, T = 0.7, 0.4, 1.0
    w = global_barrier(1.5, L0, C0, T)
    ts = np.linspace(0, T, 11)
    dw = (w(ts + 1e-6) - w(ts - 1e-6)) / 2e-6
    np.testing.assert_allclose(-dw, L0 * w(ts) + C0, rtol=1e-7)
    assert w(T) == pytest.approx(1.5)
    assert global_barrier(1.0, 0.0, 2.0, 1.0)(0.0) == pytest.approx(3.0)


def test_corner_mismatch_warns():
    bd = BoundaryData(lambda s, x: 0 * x + 1.0, lambda x: 0 * x)
    with pytest.warns(UserWarning, match="corners"):
        solve_frozen(gen.heat(), Cylinder(0.0, 1.0, 0.5, 11), bd)
    assert bd.corner_mismatch(Cylinder(0.0, 1.0, 0.5, 11)) == 1.0
    assert math.isfinite(bd.corner_mismatch(Cylinder(0.0, 1.0, 0.5, 11)))
