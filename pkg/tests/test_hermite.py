import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import eval_hermite as hermite_poly

from osc_spectra.errors import AccuracyError, ConfigurationError, DomainError
from osc_spectra.hermite import (
    ENVELOPE_C,
    SUP_C,
    build_grid,
    composite_legendre,
    default_grid,
    envelope_check,
    eval_hermite,
    gauss_hermite_modified,
    hermite_table,
    weighted_norm,
)
from osc_spectra.potential import Potential

PI_M14 = math.pi ** -0.25


def reference_h(n, x):
    """h_n from scipy's physicists' polynomial, fine for moderate n."""
    c = 1.0 / math.sqrt(2.0**n * math.factorial(n) * math.sqrt(math.pi))
    return c * hermite_poly(n, x) * np.exp(-x * x / 2)


def test_values_at_zero():
    v = eval_hermite(0.0, 2).values
    assert v[0] == pytest.approx(PI_M14, abs=1e-15)
    assert v[0] == pytest.approx(0.7511255, abs=1e-7)
    assert v[1] == 0.0
    assert v[2] == pytest.approx(-PI_M14 / math.sqrt(2), abs=1e-15)
    assert v[2] == pytest.approx(-0.5311259, abs=1e-7)


def test_h0_closed_form():
    x = np.linspace(-30, 30, 601)
    np.testing.assert_allclose(hermite_table(x, 0)[0], PI_M14 * np.exp(-x * x / 2), rtol=1e-15, atol=0)


def test_against_scipy_polynomials():
    x = np.linspace(-8, 8, 161)
    tab = hermite_table(x, 30)
    for n in (0, 1, 5, 17, 30):
        np.testing.assert_allclose(tab[n], reference_h(n, x), atol=1e-13)


def test_non_finite_abscissa():
    with pytest.raises(DomainError):
        eval_hermite(float("nan"), 3)
    with pytest.raises(DomainError):
        hermite_table([0.0, np.inf], 3)


def test_orthonormality_256_nodes():
    g = gauss_hermite_modified(256)
    H = hermite_table(g.nodes, 50)
    G = (H * g.weights) @ H.T
    np.testing.assert_allclose(G, np.eye(51), atol=1e-12)


def test_single_node_rule():
    g = gauss_hermite_modified(1)
    assert g.nodes.tolist() == [0.0]
    assert g.weights[0] == pytest.approx(math.sqrt(math.pi), rel=1e-15)


def test_gauss_hermite_moment():
    g = gauss_hermite_modified(64)
    assert g.max_degree_exact == 127
    val = g.integrate(g.nodes**2 * np.exp(-g.nodes**2))
    assert abs(val - math.sqrt(math.pi) / 2) < 1e-13


def test_composite_legendre_norm():
    g = composite_legendre(X=10, panels=40, order=8)
    h5 = hermite_table(g.nodes, 5)[5]
    assert abs(g.integrate(h5**2) - 1.0) < 1e-10


@pytest.mark.parametrize("bad", [dict(kind="gauss-hermite-modified", Q=0),
                                 dict(kind="composite-legendre", X=10, panels=0),
                                 dict(kind="nope")])
def test_grid_parameter_errors(bad):
    with pytest.raises(ConfigurationError):
        build_grid(**bad)


def test_grid_invariants():
    for g in (gauss_hermite_modified(33), composite_legendre(X=6, panels=7, order=5)):
        assert np.all(g.weights > 0)
        assert np.all(np.diff(g.nodes) > 0)


def test_grids_agree_on_smooth_integrals():
    b = Potential.gaussian(0.3, 1.5)
    gh = gauss_hermite_modified(256)
    gl = composite_legendre(X=20, panels=200, order=16)
    vals = []
    for g in (gh, gl):
        H = hermite_table(g.nodes, 60)
        vals.append((H * (b.evaluate(g.nodes) * g.weights)) @ H.T)
    np.testing.assert_allclose(vals[0], vals[1], atol=1e-8)


def test_weighted_norm_constant_and_zero():
    g = default_grid(40)
    for k in (0, 7, 39):
        assert weighted_norm(Potential.constant(1.0), k, g) == pytest.approx(1.0, abs=1e-10)
        assert weighted_norm(Potential.zero(), k, g) == 0.0


def test_weighted_norm_indicator():
    b = Potential.indicator(-1, 1)
    val = weighted_norm(b, 0, default_grid(8, b))
    assert val == pytest.approx(math.sqrt(math.erf(1.0)), abs=1e-10)
    # brute-force midpoint sum as a second oracle
    x = np.linspace(-1, 1, 200001)
    mid = 0.5 * (x[1:] + x[:-1])
    riemann = math.sqrt(np.sum(PI_M14**2 * np.exp(-mid**2)) * (x[1] - x[0]))
    assert val == pytest.approx(riemann, abs=1e-9)


def test_weighted_norm_accuracy_error():
    b = Potential.formula(lambda x: np.sin(400 * x), smooth=True, label="fast")
    g = composite_legendre(X=10, panels=1, order=8)
    with pytest.raises(AccuracyError) as info:
        weighted_norm(b, 3, g)
    assert info.value.coarse is not None and info.value.fine is not None


def test_envelope_small_n():
    rep = envelope_check(0)
    assert rep["inner_holds"]
    assert rep["C_inner"] <= ENVELOPE_C


def test_envelope_reports_constant_at_100():
    rep = envelope_check(100)
    assert math.isfinite(rep["C_inner"]) and rep["C_inner"] > 0
    assert rep["inner_holds"]


@pytest.mark.parametrize("n", [0, 1, 10, 50, 120, 200])
def test_sup_bound_calibration(n):
    assert envelope_check(n)["sup_ratio"] <= SUP_C


def test_recurrence_never_exceeds_one():
    x = np.linspace(-45, 45, 4001)
    assert np.abs(hermite_table(x, 500)).max() <= 1.0


@given(st.floats(-40, 40, allow_nan=False), st.integers(0, 60))
def test_parity(x, n):
    a = hermite_table([x, -x], n)[n]
    assert a[1] == pytest.approx((-1) ** n * a[0], abs=1e-15)


def test_refine_doubles_resolution():
    g = gauss_hermite_modified(20)
    assert g.refine().nodes.size == 40
    g = composite_legendre(X=5, panels=3, order=4)
    assert g.refine().nodes.size == 2 * g.nodes.size
