import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from osc_spectra.errors import ConfigurationError, DomainError
from osc_spectra.potential import Potential, classify, decay_fit, t_exponent, v_norm_profile


@pytest.mark.parametrize("p, expected", [(2, -1 / 12), (3, -1 / 9), (8, -1 / 16)])
def test_t_exponent_spot_values(p, expected):
    assert t_exponent(p) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("p", [4, 1.5, math.inf])
def test_t_exponent_domain(p):
    with pytest.raises(DomainError):
        t_exponent(p)


def test_t_exponent_log_case_message():
    with pytest.raises(DomainError, match="log"):
        t_exponent(4)


@given(st.floats(2, 1e6).filter(lambda p: p != 4))
def test_t_exponent_negative(p):
    assert t_exponent(p) < 0


@given(st.floats(2, 3.999), st.floats(4.001, 1e5))
def test_t_exponent_continuous_pieces(p, q):
    eps = 1e-9
    assert abs(t_exponent(p + eps) - t_exponent(p)) < 1e-8
    assert abs(t_exponent(q + eps) - t_exponent(q)) < 1e-8


def test_space_tags():
    assert classify(2, 0.0).embeds_in_V
    assert not classify(math.inf).embeds_in_V
    assert not classify(4, 0.25).embeds_in_V
    assert classify(8, 0.1).embeds_in_V  # 0.05 - 1/16 < 0


def test_profile_constant_does_not_decay():
    prof = v_norm_profile(Potential.constant(1.0), 60)
    np.testing.assert_allclose(prof.norms, 1.0, atol=1e-10)
    assert not prof.decays


def test_profile_indicator_slope():
    prof = v_norm_profile(Potential.indicator(-1, 1), 400)
    assert prof.decays
    fit = decay_fit(prof, 100, 400)
    assert abs(fit.slope + 0.25) <= 0.05


def test_profile_gaussian_matches_plateau_asymptotics():
    # For n large, h_n^2 averages to 1/(pi sqrt(2n)) on compacts, so
    # ||e^{-x^2} h_n||^2 ~ sqrt(pi/2) / (pi sqrt(2n)) = 1 / (2 sqrt(pi n)).
    prof = v_norm_profile(Potential.gaussian(1.0), 400)
    assert prof.decays
    approx = (2 * math.sqrt(math.pi * 400)) ** -0.5
    assert prof.norms[400] == pytest.approx(approx, rel=0.01)
    assert abs(decay_fit(prof, 100, 400).slope + 0.25) < 0.01


@given(st.floats(0.5, 3.0), st.floats(-2, 2))
def test_compact_support_tail_decays(width, center):
    b = Potential.indicator(center - width, center + width)
    assert v_norm_profile(b, 80).decays


def test_profile_scaling():
    b = Potential.gaussian(0.7, 1.3)
    c = -2.5 + 1.5j
    p1 = v_norm_profile(b, 50).norms
    p2 = v_norm_profile(b * c, 50).norms
    np.testing.assert_allclose(p2, abs(c) * p1, rtol=1e-13)


def test_decay_fit_exact_power():
    n = np.arange(500)
    fit = decay_fit(3.0 * (n + 1.0) ** (-1 / 12), 100, 400)
    assert fit.slope == pytest.approx(-1 / 12, abs=1e-6)
    assert not fit.log_factor_detected


def test_decay_fit_log_factor():
    n = np.arange(500)
    fit = decay_fit(2.0 * (n + 1.0) ** (-1 / 8) * np.log(n + 2.0), 100, 400)
    assert fit.log_factor_detected


def test_decay_fit_errors():
    prof = np.ones(50)
    prof[20] = 0
    with pytest.raises(DomainError):
        decay_fit(prof, 10, 30)
    with pytest.raises(DomainError):
        decay_fit(np.ones(50), 10, 15)


def test_block_potential_has_no_profile():
    from osc_spectra.counterexample import BlockSpec

    with pytest.raises(DomainError):
        v_norm_profile(Potential.block(BlockSpec()), 10)


@pytest.mark.parametrize("b", [
    Potential.gaussian(0.1),
    Potential.indicator(-1, 2, 0.5j),
    Potential.piecewise_constant([-1, 0, 1], [1, -1]),
    Potential.power_weight(2.0, 0.75),
    Potential.polynomial([0, 0, 1]),
])
def test_config_round_trip(b):
    b2 = Potential.from_config(b.to_config())
    x = np.linspace(-3, 3, 41)
    np.testing.assert_array_equal(b.evaluate(x), b2.evaluate(x))


@pytest.mark.parametrize("cfg", [{"kind": "nope"}, {"kind": "indicator", "bogus": 1},
                                 {"kind": "analytic-formula", "name": "gaussian", "width": -1},
                                 {"kind": "piecewise-constant", "breaks": [0, 1]}])
def test_config_errors(cfg):
    with pytest.raises(ConfigurationError):
        Potential.from_config(cfg)


def test_evaluable_everywhere():
    x = np.array([-1e8, -1.0, 0.0, 1.0, 1e8])
    for b in (Potential.gaussian(), Potential.indicator(), Potential.alternating(2.0), Potential.power_weight()):
        assert np.all(np.isfinite(b.evaluate(x)))
