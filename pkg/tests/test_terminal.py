import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ppde import terminal as term
from ppde.paths import Partition, Path, path_from_points


def test_marginal_shapes():
    om = path_from_points([(0, 0), (1.0, 0.5)])
    assert term.marginal("cos")(om) == pytest.approx(math.cos(0.5))
    assert term.marginal("sin", amplitude=2.0, frequency=3.0)(om) == pytest.approx(2 * math.sin(1.5))
    assert term.marginal("cos").bound == 1.0
    with pytest.raises(ValueError):
        term.marginal("erf")


def test_terminal_values_follow_the_base_path():
    xi = term.marginal("cos")
    base = path_from_points([(0, 0), (0.5, 0.3)], horizon=1.0)
    xs = np.array([-0.1, 0.0, 0.2])
    np.testing.assert_allclose(xi.terminal_values(base, 0.5, xs), np.cos(0.3 + xs))


def test_running_max_capped():
    om = path_from_points([(0, 0), (0.3, 2.0), (1.0, -1.0)])
    assert term.running_max()(om) == 2.0
    assert term.running_max(cap=1.5)(om) == 1.5
    # nonmarkov terminal values see the history
    vals = term.running_max().terminal_values(om, 1.0, np.array([0.0, 4.0]))
    np.testing.assert_allclose(vals, [2.0, 3.0])


def test_make_marginal_rejects_bad_times():
    with pytest.raises(ValueError):
        term.make_marginal(lambda v, a, b: 0.0, [0.5, 0.2], 1.0)
    with pytest.raises(ValueError):
        term.make_marginal(lambda v, a, b: 0.0, [1.5], 1.0)


def test_segment_integral_exact_for_polynomials():
    # int_0^2 (1 + 3t)^5 dt with x linear from 1 to 7
    exact = (7 ** 6 - 1) / 18
    assert term.segment_integral(lambda x: x[:, 0] ** 5, 0.0, 2.0, np.array([1.0]),
                                 np.array([7.0])) == pytest.approx(exact, rel=1e-13)


def test_path_integral_abs_splits_at_zero():
    # |x| on the line from -1 to 1 over [0, 1] integrates to 1/2
    om = Path([0.0, 0.0, 1.0], [0.0, -1.0, 1.0], 1.0)
    val = term.path_integral(lambda x: np.abs(x[:, 0]), om, 1.0)
    assert val == pytest.approx(0.5, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(pts=st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=6),
       p=st.sampled_from([1.0, 2.0, 3.0]))
def test_integral_matches_fine_trapezoid(pts, p):
    times = np.linspace(0, 1, len(pts) + 1)
    om = Path(times, np.concatenate([[0.0], pts]), 1.0)
    ts = np.linspace(0, 1, 20001)
    ref = np.trapezoid(np.abs(om.evaluate(ts)[:, 0]) ** p, ts)
    val = term.path_integral(lambda x: np.sum(np.abs(x) ** p, axis=-1), om, 1.0)
    assert val == pytest.approx(ref, rel=1e-6, abs=1e-7)


def test_integral_functional_bounded():
    om = path_from_points([(0, 0), (1.0, 3.0)])
    xi = term.integral(p=2.0, amplitude=0.5)
    assert xi(om) == pytest.approx(0.5 * math.tanh(3.0))
    assert abs(xi(om)) <= xi.bound


def test_extend_to_closed_partition():
    pi = Partition(0.0, (0.5, 0.5), (0.5, 0.5), eps=0.5, horizon=1.0, closed=True)
    assert term.extend_to_partition(term.running_max(), pi) == pytest.approx(1.0)


def test_registry():
    xi = term.make_terminal("constant", 1.0, value=0.3)
    assert xi(path_from_points([(0, 0), (1, 5)])) == 0.3
    with pytest.raises(ValueError):
        term.make_terminal("nope", 1.0)
