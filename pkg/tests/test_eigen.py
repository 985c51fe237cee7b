import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from osc_spectra.assembly import operator_from_matrix
from osc_spectra.counterexample import block_matrix
from osc_spectra.eigen import (
    Resolvent,
    eigen,
    eigvals,
    hessenberg,
    lu_factor,
    lu_solve,
    operator_norm,
    schur_qr,
)
from osc_spectra.errors import ConfigurationError, ConvergenceError, PoleError


def cubic_roots(a, b, c):
    """Roots of x^3 + a x^2 + b x + c by Cardano's formula."""
    p = b - a * a / 3
    q = 2 * a**3 / 27 - a * b / 3 + c
    disc = cmath.sqrt(q * q / 4 + p**3 / 27)
    u = (-q / 2 + disc) ** (1 / 3)
    if abs(u) < 1e-300:
        u = (-q / 2 - disc) ** (1 / 3)
    w = cmath.exp(2j * cmath.pi / 3)
    out = []
    for j in range(3):
        uj = u * w**j
        vj = -p / (3 * uj) if abs(uj) > 0 else 0
        out.append(uj + vj - a / 3)
    return np.array(out)


def match(a, b):
    """Largest distance after pairing each value of a with its nearest in b."""
    b = list(b)
    worst = 0.0
    for x in a:
        j = int(np.argmin([abs(x - y) for y in b]))
        worst = max(worst, abs(x - b.pop(j)))
    return worst


def random_complex(n, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


def test_diagonal():
    dec = eigen(np.diag([1.0, 3.0, 5.0]))
    order = np.argsort(dec.eigenvalues.real)
    np.testing.assert_allclose(dec.eigenvalues[order], [1, 3, 5], atol=1e-14)
    np.testing.assert_allclose(np.abs(dec.right_eigenvectors[:, order]), np.eye(3), atol=1e-12)


def test_block_example():
    E, t, k = 4.0, 0.5, 0.25
    A = np.diag([E, E + 2]) + block_matrix(t, k)
    dec = eigen(A)
    for lam, g in [((E + 1) + t * k, np.array([1, 1 + k])), ((E + 1) - t * k, np.array([1, 1 - k]))]:
        i = int(np.argmin(np.abs(dec.eigenvalues - lam)))
        assert abs(dec.eigenvalues[i] - lam) < 1e-13
        v = dec.right_eigenvectors[:, i]
        g = g / np.linalg.norm(g)
        assert abs(abs(np.vdot(g, v)) - 1) < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_cubic_oracle(seed):
    A = random_complex(3, seed)
    # characteristic polynomial x^3 - tr x^2 + (sum of principal 2-minors) x - det
    tr = np.trace(A)
    m2 = (A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0] + A[0, 0] * A[2, 2] - A[0, 2] * A[2, 0]
          + A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
    det = (A[0, 0] * (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1]) - A[0, 1] * (A[1, 0] * A[2, 2] - A[1, 2] * A[2, 0])
           + A[0, 2] * (A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0]))
    roots = cubic_roots(-tr, m2, -det)
    assert match(eigen(A).eigenvalues, roots) < 1e-9


@pytest.mark.parametrize("n, seed", [(5, 0), (40, 1), (100, 2), (200, 3)])
def test_residuals(n, seed):
    A = random_complex(n, seed)
    dec = eigen(A)
    assert np.all(dec.residuals <= 1e-10 * np.linalg.norm(A))
    np.testing.assert_allclose(np.linalg.norm(dec.right_eigenvectors, axis=0), 1.0, atol=1e-13)


@settings(max_examples=15)
@given(st.integers(2, 30), st.integers(0, 10_000))
def test_unitary_invariance(n, seed):
    A = random_complex(n, seed)
    U = unitary_group.rvs(n, random_state=seed) if n > 1 else np.eye(1)
    assert match(eigvals(A), eigvals(U @ A @ U.conj().T)) < 1e-9 * max(1, np.linalg.norm(A))


@settings(max_examples=15)
@given(st.integers(2, 40), st.integers(0, 10_000))
def test_transpose_spectrum(n, seed):
    A = random_complex(n, seed)
    assert match(eigvals(A), eigvals(A.T)) < 1e-9 * max(1, np.linalg.norm(A))


@pytest.mark.parametrize("n", [2, 17, 120])
def test_hessenberg_reconstruction(n):
    A = random_complex(n, n)
    H, Q = hessenberg(A)
    assert np.allclose(np.tril(H, -2), 0)
    assert np.linalg.norm(Q @ H @ Q.conj().T - A) <= 1e-12 * np.linalg.norm(A)


def test_engines_agree():
    A = random_complex(50, 7)
    H, _ = hessenberg(A, want_q=False)
    H1, H2 = H.copy(), H.copy()
    schur_qr(H1, engine="numpy")
    schur_qr(H2, engine="jit")
    assert match(np.diagonal(H1), np.diagonal(H2)) < 1e-10


def test_convergence_error():
    H, _ = hessenberg(random_complex(12, 1), want_q=False)
    with pytest.raises(ConvergenceError):
        schur_qr(H, max_sweeps=1)


def test_lu_reconstruction():
    A = random_complex(30, 4)
    fac = lu_factor(A)
    assert np.linalg.norm(A[fac.perm] - fac.L @ fac.U) <= 1e-12 * np.linalg.norm(A)


def test_lu_solve_examples():
    x = lu_solve(2.0, np.diag([1.0, 3.0]), np.array([1.0, 0.0]))
    np.testing.assert_allclose(x, [1, 0], atol=1e-15)
    N, z = 12, 2.0 + 1.0j
    A0 = np.diag(2.0 * np.arange(N) + 1)
    for k in (0, 5, 11):
        e = np.zeros(N)
        e[k] = 1
        np.testing.assert_allclose(lu_solve(z, operator_from_matrix(A0), e), e / (z - (2 * k + 1)), atol=1e-15)


def test_lu_solve_pole():
    with pytest.raises(PoleError):
        lu_solve(3.0, np.diag([1.0, 3.0]), np.ones(2))


def test_lu_round_trip_random_systems():
    rng = np.random.default_rng(11)
    for i in range(100):
        n = 256 if i == 0 else int(rng.integers(2, 65))
        A = random_complex(n, 1000 + i)
        z = complex(rng.standard_normal(), rng.standard_normal()) + 3 * np.sqrt(n)
        rhs = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        x = lu_solve(z, A, rhs)
        assert np.linalg.norm((z * np.eye(n) - A) @ x - rhs) <= 1e-10 * np.linalg.norm(rhs)


def test_resolvent_matches_lu():
    A = random_complex(20, 5)
    R = Resolvent(A)
    z = 7.0 + 2.0j
    rhs = np.arange(20.0)
    np.testing.assert_allclose(R.solve(z, rhs), lu_solve(z, A, rhs), atol=1e-11)
    np.testing.assert_allclose(R.matrix(z) @ rhs, lu_solve(z, A, rhs), atol=1e-11)


@pytest.mark.parametrize("A, lo, hi", [
    (np.eye(4), 1.0, 1.0),
    (np.diag([2.0, 1.0]), 2.0, 2.0),
    (block_matrix(0.5, 0.5), 0.9375, 0.96875),
])
def test_operator_norm_examples(A, lo, hi):
    est = operator_norm(A, iters=2000, tol=1e-14)
    assert est.converged
    assert lo - 1e-9 <= est.value <= hi + 1e-9


def test_operator_norm_callable_and_iters():
    A = random_complex(15, 2)
    est = operator_norm(lambda v: A @ v, adjoint=lambda v: A.conj().T @ v, shape=(15, 15), iters=3000, tol=1e-14)
    assert est.value == pytest.approx(np.linalg.norm(A, 2), rel=1e-7)
    with pytest.raises(ConfigurationError):
        operator_norm(A, iters=5)


def test_unperturbed_resolvent_norm():
    N = 40
    A0 = np.diag(2.0 * np.arange(N) + 1)
    z = 4.0 + 0.5j
    R = Resolvent(A0).matrix(z)
    est = operator_norm(R, iters=500)
    assert est.value == pytest.approx(1 / abs(z - 3), rel=1e-8)
