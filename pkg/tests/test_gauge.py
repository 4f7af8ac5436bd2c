import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonrecip.dynamics import conversion_closed_form
from nonrecip.gauge import GaugeFrame, equal_phase_frame, is_nonreciprocal, transform
from nonrecip.network import Netlist, NetworkComponent, connect, ideal

QUARTER = GaugeFrame(t0=math.pi / 2, frequencies=(0.0, 1.0))  # (w2 - w1) t0 = pi/2


def test_gyrator_and_line_swap_under_quarter_frame():
    np.testing.assert_allclose(transform(ideal("gyrator").S, QUARTER), 1j * np.array([[0, 1], [1, 0]]),
                               atol=1e-15)
    np.testing.assert_allclose(transform(ideal("transmission_line").S, QUARTER),
                               1j * np.array([[0, 1], [-1, 0]]), atol=1e-15)


def test_identity_frame_and_shape_check():
    S = ideal("beam_splitter").S
    np.testing.assert_array_equal(transform(S, GaugeFrame(0.0, (1, 2, 3, 4))), S)
    with pytest.raises(ValueError):
        transform(S, GaugeFrame(0.0, (1, 2)))


def test_nonreciprocity_verdicts():
    assert not is_nonreciprocal(ideal("gyrator").S)[0]  # phase-only asymmetry
    verdict, witness = is_nonreciprocal(ideal("isolator").S)
    assert verdict and witness == (1, 0)  # zero-based (out, in): S21
    assert not is_nonreciprocal(ideal("isolator").S, tol=math.inf)[0]
    assert is_nonreciprocal([[0.3]]) == (False, None)


def test_equal_phase_frame_for_converter():
    s21, s12 = conversion_closed_form(1.0, 1.0, math.pi / 2)
    S = np.array([[0, s12], [s21, 0]])
    w = (2.0, 5.0)
    t0 = equal_phase_frame(S, w)
    assert t0 == pytest.approx(math.pi / (2 * (w[1] - w[0])))
    T = transform(S, GaugeFrame(t0, w))
    assert np.angle(T[1, 0]) == pytest.approx(np.angle(T[0, 1]), abs=1e-12)


def test_equal_phase_frame_edge_cases():
    S = np.array([[0, 0.5], [0.5, 0]])
    assert equal_phase_frame(S, (1.0, 3.0)) == 0.0
    with pytest.raises(ValueError, match="share one frequency"):
        equal_phase_frame(ideal("gyrator").S, (1.0, 1.0))
    with pytest.raises(ValueError, match="nonzero"):
        equal_phase_frame(ideal("isolator").S, (1.0, 2.0))


def test_frame_commutes_with_composition():
    # gyrator feeding a line; the inner node carries frequency w_mid
    w_in, w_mid, w_out, t0 = 0.3, 1.1, 2.0, 0.7
    gyr, line = ideal("gyrator"), ideal("transmission_line")

    def chain(a, b):
        return connect(Netlist({"x": a, "y": b}, [(("x", "2"), ("y", "1"))],
                               [("x", "1"), ("y", "2")], labels=("1", "2"))).S

    g2 = NetworkComponent("g", gyr.ports, transform(gyr.S, GaugeFrame(t0, (w_in, w_mid))))
    l2 = NetworkComponent("l", line.ports, transform(line.S, GaugeFrame(t0, (w_mid, w_out))))
    np.testing.assert_allclose(chain(g2, l2), transform(chain(gyr, line), GaugeFrame(t0, (w_in, w_out))),
                               atol=1e-12)


def _random_matrix(seed, n):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)), rng.normal(size=n) * 10


@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.floats(-50, 50), st.floats(-50, 50))
def test_magnitudes_and_group_law(seed, n, t0, t1):
    S, w = _random_matrix(seed, n)
    A = transform(S, GaugeFrame(t0, tuple(w)))
    np.testing.assert_allclose(np.abs(A), np.abs(S), atol=1e-12)
    np.testing.assert_allclose(transform(A, GaugeFrame(t1, tuple(w))),
                               transform(S, GaugeFrame(t0 + t1, tuple(w))), atol=1e-9)
    np.testing.assert_allclose(transform(A, GaugeFrame(-t0, tuple(w))), S, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_verdict_is_frame_independent(seed):
    S, w = _random_matrix(seed, 3)
    rng = np.random.default_rng(seed)
    verdict = is_nonreciprocal(S)
    for t0 in rng.uniform(-100, 100, size=100):
        assert is_nonreciprocal(transform(S, GaugeFrame(t0, tuple(w))))[0] == verdict[0]
