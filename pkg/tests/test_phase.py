import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcokey.errors import ConfigError, DomainError
from pcokey.phase import PhaseFunction, validate_phase_function


@pytest.fixture(scope="module")
def pf():
    return PhaseFunction.peskin(2.0)


def mp_f(x, g=2):
    x, g = mp.mpf(x), mp.mpf(g)
    return (1 - mp.exp(-g * x)) / (1 - mp.exp(-g))


@pytest.mark.parametrize("x", [0.0, 1e-9, 0.1, 0.5, 0.9398740, 0.999, 1.0])
def test_peskin_matches_high_precision(pf, x):
    assert pf.f(x) == pytest.approx(float(mp_f(x)), abs=1e-15)


def test_reference_values(pf):
    assert pf.f(0.5) == pytest.approx(0.7310586, abs=1e-7)
    assert pf.inverse(0.98) == pytest.approx(0.9398740, abs=1e-7)
    assert pf.inverse(0.02) == pytest.approx(0.0087223, abs=1e-7)


def test_endpoints_exact(pf):
    assert pf.f(0.0) == 0.0 and pf.f(1.0) == 1.0
    assert pf.inverse(0.0) == 0.0 and pf.inverse(1.0) == 1.0
    arr = pf.f(np.array([0.0, 1.0]))
    assert arr[0] == 0.0 and arr[1] == 1.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.05, 20.0))
def test_inverse_round_trip(x, gamma):
    pf = PhaseFunction.peskin(gamma)
    assert pf.inverse(pf.f(x)) == pytest.approx(x, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.99))
def test_derivative_matches_central_difference(x):
    pf = PhaseFunction.peskin(2.0)
    hstep = 1e-6
    fd = (pf.f(x + hstep) - pf.f(x - hstep)) / (2 * hstep)
    assert pf.derivative(x) == pytest.approx(fd, rel=1e-7)


def test_array_and_scalar_agree(pf):
    xs = np.linspace(0, 1, 11)
    assert np.allclose(pf.f(xs), [pf.f(float(x)) for x in xs], rtol=0, atol=1e-15)
    assert np.allclose(pf.inverse(xs), [pf.inverse(float(x)) for x in xs], rtol=0, atol=1e-15)


def test_out_of_domain_raises(pf):
    with pytest.raises(DomainError):
        pf.f(1.1)
    with pytest.raises(DomainError):
        pf.inverse(-0.2)
    with pytest.raises(DomainError):
        pf.f(np.array([0.2, 2.0]))
    # tiny overshoot is treated as the endpoint
    assert pf.f(1.0 + 1e-13) == 1.0


@pytest.mark.parametrize("gamma", [0.0, -1.0, math.inf, math.nan])
def test_bad_gamma(gamma):
    with pytest.raises(ConfigError) as exc:
        PhaseFunction.peskin(gamma)
    assert exc.value.path == "phase_function.gamma"


def test_peskin_validates():
    assert validate_phase_function(PhaseFunction.peskin(2.0)).valid


def test_tabulated_tracks_peskin():
    grid = np.linspace(0, 1, 401)
    pk = PhaseFunction.peskin(2.0)
    tab = PhaseFunction.tabulated(pk.f(grid))
    assert validate_phase_function(tab).valid
    xs = np.linspace(0, 1, 997)
    assert np.max(np.abs(tab.f(xs) - pk.f(xs))) < 1e-7
    ys = np.linspace(0, 1, 101)
    assert np.max(np.abs(tab.inverse(ys) - pk.inverse(ys))) < 1e-6
    assert tab.inverse(0.5) == pytest.approx(pk.inverse(0.5), abs=1e-6)


@pytest.mark.parametrize("table, reason", [
    (np.linspace(0, 1, 21), "concave"),                  # linear: not strictly concave
    (np.linspace(0, 1, 21) ** 2, "concave"),             # convex
    ([0.0, 0.6, 0.5, 1.0], "increasing"),
    (0.9 * (1 - np.exp(-2 * np.linspace(0, 1, 21))) / (1 - np.exp(-2)), "f(1)"),
])
def test_validation_flags_bad_tables(table, reason):
    report = validate_phase_function(PhaseFunction.tabulated(table))
    assert not report.valid
    assert any(reason in v for v in report.violations)


def test_short_table_rejected():
    with pytest.raises(ConfigError):
        PhaseFunction.tabulated([0.0, 1.0])
