import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppde import generator as gen
from ppde import terminal as term
from ppde.cascade import (BudgetExceeded, CascadeConfig, build_cascade, evaluate_along_path,
                          fit_decay, global_bound_check, resolve_mode, sandwich_gap,
                          shared_node_violation, time_grid, to_json, truncation_profile)
from ppde.generator import ConfigurationError
from ppde.paths import Path, path_from_points

COS = term.marginal("cos")


def test_config_validation():
    with pytest.raises(ConfigurationError):
        CascadeConfig(eps=0.0)
    with pytest.raises(ConfigurationError):
        CascadeConfig(eps=0.5, nx=10)
    with pytest.raises(ConfigurationError):
        CascadeConfig(eps=0.5, mode="fast")
    with pytest.raises(ConfigurationError):
        CascadeConfig(eps=0.5, max_levels=0)
    assert CascadeConfig(eps=0.5).with_(nx=7).nx == 7


def test_mode_resolution():
    cfg = CascadeConfig(eps=0.5)
    assert resolve_mode(gen.heat(), COS, cfg) == "markov"
    assert resolve_mode(gen.heat(), term.running_max(), cfg) == "tree"
    with pytest.raises(ConfigurationError):
        resolve_mode(gen.heat(), term.running_max(), cfg.with_(mode="markov"))


def test_heat_root_converges_to_closed_form():
    exact = math.exp(-0.5)
    errs = []
    for eps in (0.4, 0.2):
        st_ = build_cascade(gen.heat(), COS, CascadeConfig(eps=eps, nx=11, max_levels=None))
        up, lo = st_.root
        assert lo <= up
        errs.append(abs(0.5 * (up + lo) - exact))
    assert errs[1] < 1e-3


def test_bounding_generator_has_zero_gap_without_truncation():
    G = gen.isaacs()
    Gb = gen.bounding_sup(G.L0, 0.0, G.c0)
    st_ = build_cascade(Gb, COS, CascadeConfig(eps=0.5, nx=11, max_levels=None))
    assert st_.gap == 0.0
    # truncated cascades keep a gap: lower seeds use the lower bounding generator
    assert build_cascade(Gb, COS, CascadeConfig(eps=0.5, nx=11, max_levels=3)).gap > 0


def test_tree_engine_reproduces_markov_engine():
    G = gen.isaacs()
    cfg = CascadeConfig(eps=0.5, nx=5, max_levels=2)
    nt = time_grid(G, cfg).nt
    a = build_cascade(G, COS, cfg)
    b = build_cascade(G, COS, cfg.with_(mode="tree", exit_time_grid=nt))
    assert a.root == b.root


def test_levels_sandwich_the_level_free_value():
    G = gen.hjb(discount=0.1)
    cfg = CascadeConfig(eps=0.5, nx=11, positions=6)
    free = build_cascade(G, COS, cfg.with_(max_levels=None)).root
    for m in (2, 4):
        up, lo = build_cascade(G, COS, cfg.with_(max_levels=m)).root
        assert lo <= free[1] and free[0] <= up


@settings(max_examples=8, deadline=None)
@given(seed=st.integers(0, 10 ** 6), m=st.integers(1, 4))
def test_shared_nodes_are_ordered(seed, m):
    rng = np.random.default_rng(seed)
    G = gen.isaacs(s0=rng.uniform(0.8, 1.2), s1=rng.uniform(0.1, 0.5), mu=rng.uniform(0, 0.5))
    xi = term.marginal("sin", frequency=rng.uniform(0.5, 2), phase=rng.uniform(-1, 1))
    cfg = CascadeConfig(eps=0.5, nx=7, max_levels=m, positions=m + 1)
    a = build_cascade(G, xi, cfg)
    b = build_cascade(G, xi, cfg.with_(max_levels=m + 1))
    assert shared_node_violation(a, b) <= 0.0
    assert global_bound_check(b, G, xi)["ok"]


def test_tree_for_path_dependent_data():
    G = gen.hjb(drift_max=0.3)
    xi = term.running_max(cap=1.5)
    cfg = CascadeConfig(eps=0.5, nx=7, max_levels=2, exit_time_grid=2)
    a = build_cascade(G, xi, cfg)
    b = build_cascade(G, xi, cfg.with_(max_levels=3))
    assert a.mode == "tree" and a.seed_source == "barrier"
    assert shared_node_violation(a, b) <= 0.0
    assert b.gap < a.gap
    assert sandwich_gap(b) >= b.gap


def test_node_budget():
    cfg = CascadeConfig(eps=0.5, nx=5, max_levels=6, exit_time_grid=8, node_budget=100)
    with pytest.raises(BudgetExceeded) as info:
        build_cascade(gen.hjb(), term.running_max(cap=1.0), cfg)
    assert info.value.total > 100


def test_threads_do_not_change_tree_values():
    cfg = CascadeConfig(eps=0.5, nx=7, max_levels=2, exit_time_grid=3)
    G = gen.semilinear(k_f=0.3, feature="running_max")
    xi = term.running_max(cap=1.0)
    a = build_cascade(G, xi, cfg)
    b = build_cascade(G, xi, cfg.with_(threads=4))
    np.testing.assert_array_equal(a.all_values(), b.all_values())


def test_evaluate_along_path():
    st_ = build_cascade(gen.isaacs(), COS, CascadeConfig(eps=0.5, nx=11, max_levels=None))
    root = evaluate_along_path(st_, Path.zero(), 0.0)
    assert (root["upper"], root["lower"]) == st_.root and root["level"] == 0
    om = path_from_points([(0, 0), (0.3, 0.7)])
    out = evaluate_along_path(st_, om, 0.3)
    assert out["level"] == 1 and out["displacement"] == 0.5
    assert out["lower"] <= out["upper"]


def test_json_is_deterministic_and_complete():
    cfg = CascadeConfig(eps=0.5, nx=7, max_levels=3)
    a = to_json(build_cascade(gen.heat(), COS, cfg))
    b = to_json(build_cascade(gen.heat(), COS, cfg))
    assert a == b
    rec = json.loads(a)
    for key in ("theta_upper", "theta_lower", "gap", "eps", "nx", "nt", "mode", "positions"):
        assert key in rec
    assert "seconds" not in a


def test_fit_decay_recovers_power_law():
    ms = np.array([2, 4, 8, 16])
    assert fit_decay(ms, 3.0 * ms ** -1.5) == pytest.approx(1.5)
    assert math.isnan(fit_decay([2], [0.1]))
    prof = truncation_profile(gen.isaacs(), COS, CascadeConfig(eps=0.5, nx=7, positions=5), [2, 3, 4])
    assert all(b <= a for a, b in zip(prof["gaps"][:-1], prof["gaps"][1:]))
    assert prof["rate"] > 0
