"""Dense complex non-symmetric eigensolver and shifted linear solves.

Pipeline: optional diagonal balancing, Householder reduction to upper
Hessenberg form, single-shift complex QR with Wilkinson shifts and
deflation (Schur vectors accumulated when asked), and eigenvectors by
inverse iteration on the triangular Schur factor.

Triangular sweeps (back/forward substitution, triangular inverse) go through
scipy's LAPACK wrappers; factorizations and the QR iteration are in-repo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numba
import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import ConfigurationError, ConvergenceError, DomainError, PoleError

DEFLATION_TOL = 1e-14
INVERSE_ITERATION_SHIFT = 1e-13
POLE_TOL = 1e-12


def _as_square(A):
    A = np.asarray(getattr(A, "matrix", A))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    return A.astype(complex)


# ---------------------------------------------------------------------------
# reductions


def balance(A, max_sweeps=100):
    """Parlett-Reinsch scaling by powers of two: returns (D^{-1} A D, d)."""
    B = np.array(A, dtype=complex)
    n = B.shape[0]
    d = np.ones(n)
    for _ in range(max_sweeps):
        done = True
        for i in range(n):
            c = np.linalg.norm(np.delete(B[:, i], i))
            r = np.linalg.norm(np.delete(B[i, :], i))
            if c == 0 or r == 0:
                continue
            s = c + r
            f = 1.0
            while c < r / 2:
                c, r, f = c * 2, r / 2, f * 2
            while c >= r * 2:
                c, r, f = c / 2, r * 2, f / 2
            if (c + r) / f < 0.95 * s:
                done = False
                d[i] *= f
                B[:, i] *= f
                B[i, :] /= f
        if done:
            break
    return B, d


def hessenberg(A, want_q=True):
    """Householder reduction A = Q H Q^H with H upper Hessenberg."""
    H = np.array(A, dtype=complex)
    n = H.shape[0]
    Q = np.eye(n, dtype=complex) if want_q else None
    for k in range(n - 2):
        x = H[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        H[k + 1:, k:] -= 2.0 * np.outer(v, v.conj() @ H[k + 1:, k:])
        H[:, k + 1:] -= 2.0 * np.outer(H[:, k + 1:] @ v, v.conj())
        if want_q:
            Q[:, k + 1:] -= 2.0 * np.outer(Q[:, k + 1:] @ v, v.conj())
        H[k + 2:, k] = 0.0
    return H, Q


def _rotation(a, b):
    """c, s with [[c, s], [-conj(s), c]] @ [a, b] = [r, 0]."""
    if b == 0:
        return 1.0, 0.0j
    na = abs(a)
    nrm = math.hypot(na, abs(b))
    if na == 0:
        return 0.0, b.conjugate() / abs(b)
    return na / nrm, (a / na) * b.conjugate() / nrm


def _wilkinson(a, b, c, d):
    half_tr = 0.5 * (a + d)
    disc = np.sqrt(0.25 * (a - d) ** 2 + b * c)
    l1, l2 = half_tr + disc, half_tr - disc
    return l1 if abs(l1 - d) < abs(l2 - d) else l2


def _deflation_point(H, hi):
    sub = np.abs(np.diagonal(H, -1)[:hi])
    dg = np.abs(np.diagonal(H)[: hi + 1])
    tol = DEFLATION_TOL * (dg[1:] + dg[:-1])
    small = np.flatnonzero(sub <= np.maximum(tol, np.finfo(float).tiny * H.shape[0]))
    return int(small[-1]) + 1 if small.size else 0


def _schur_qr_numpy(H, Q, max_sweeps):
    n = H.shape[0]
    full = Q is not None
    hi = n - 1
    sweeps = 0
    stalled = 0
    while hi > 0:
        lo = _deflation_point(H, hi)
        if lo > 0:
            H[lo, lo - 1] = 0.0
        if lo == hi:
            hi -= 1
            stalled = 0
            continue
        if sweeps >= max_sweeps:
            return sweeps, lo, hi
        sweeps += 1
        stalled += 1
        if stalled % 11 == 0:
            mu = H[hi, hi] + 0.75 * abs(H[hi, hi - 1])
        else:
            mu = _wilkinson(H[hi - 1, hi - 1], H[hi - 1, hi], H[hi, hi - 1], H[hi, hi])
        col_end = n if full else hi + 1
        row_start = 0 if full else lo
        x, y = H[lo, lo] - mu, H[lo + 1, lo]
        for k in range(lo, hi):
            c, s = _rotation(x, y)
            G = np.array([[c, s], [-s.conjugate(), c]])
            j0 = k - 1 if k > lo else lo
            H[k:k + 2, j0:col_end] = G @ H[k:k + 2, j0:col_end]
            if k > lo:
                H[k + 1, k - 1] = 0.0
            i1 = min(k + 3, hi + 1)
            Gh = G.conj().T
            H[row_start:i1, k:k + 2] = H[row_start:i1, k:k + 2] @ Gh
            if full:
                Q[:, k:k + 2] = Q[:, k:k + 2] @ Gh
            if k < hi - 1:
                x, y = H[k + 1, k], H[k + 2, k]
    return sweeps, -1, -1


@numba.njit(cache=True)
def _schur_qr_jit(H, Q, full, max_sweeps, deflation_tol):  # pragma: no cover - compiled
    n = H.shape[0]
    tiny = 2.2250738585072014e-308 * n
    hi = n - 1
    sweeps = 0
    stalled = 0
    while hi > 0:
        lo = 0
        for i in range(hi, 0, -1):
            tol = deflation_tol * (abs(H[i, i]) + abs(H[i - 1, i - 1]))
            if abs(H[i, i - 1]) <= max(tol, tiny):
                lo = i
                break
        if lo > 0:
            H[lo, lo - 1] = 0.0
        if lo == hi:
            hi -= 1
            stalled = 0
            continue
        if sweeps >= max_sweeps:
            return sweeps, lo, hi
        sweeps += 1
        stalled += 1
        if stalled % 11 == 0:
            mu = H[hi, hi] + 0.75 * abs(H[hi, hi - 1])
        else:
            a = H[hi - 1, hi - 1]
            b = H[hi - 1, hi]
            c = H[hi, hi - 1]
            d = H[hi, hi]
            half = 0.5 * (a + d)
            disc = np.sqrt(0.25 * (a - d) ** 2 + b * c)
            l1 = half + disc
            l2 = half - disc
            mu = l1 if abs(l1 - d) < abs(l2 - d) else l2
        col_end = n if full else hi + 1
        row_start = 0 if full else lo
        x = H[lo, lo] - mu
        y = H[lo + 1, lo]
        for k in range(lo, hi):
            if y == 0:
                cr = 1.0
                s = 0.0j
            else:
                na = abs(x)
                nrm = np.hypot(na, abs(y))
                if na == 0:
                    cr = 0.0
                    s = np.conj(y) / abs(y)
                else:
                    cr = na / nrm
                    s = (x / na) * np.conj(y) / nrm
            sc = np.conj(s)
            j0 = k - 1 if k > lo else lo
            for j in range(j0, col_end):
                u = H[k, j]
                v = H[k + 1, j]
                H[k, j] = cr * u + s * v
                H[k + 1, j] = -sc * u + cr * v
            if k > lo:
                H[k + 1, k - 1] = 0.0
            i1 = min(k + 3, hi + 1)
            for i in range(row_start, i1):
                u = H[i, k]
                v = H[i, k + 1]
                H[i, k] = cr * u + sc * v
                H[i, k + 1] = -s * u + cr * v
            if full:
                for i in range(n):
                    u = Q[i, k]
                    v = Q[i, k + 1]
                    Q[i, k] = cr * u + sc * v
                    Q[i, k + 1] = -s * u + cr * v
            if k < hi - 1:
                x = H[k + 1, k]
                y = H[k + 2, k]
    return sweeps, -1, -1


JIT_THRESHOLD = 64


def schur_qr(H, Q=None, max_sweeps=None, engine="auto"):
    """Shifted complex QR on an upper Hessenberg H, in place.

    Returns the number of sweeps.  With ``Q`` given, rotations are
    accumulated into it and the full triangular factor is formed; otherwise
    only the active window is updated (eigenvalues only).  Matrices above
    ``JIT_THRESHOLD`` run the compiled kernel; both engines do the same
    arithmetic.
    """
    n = H.shape[0]
    max_sweeps = 40 * n if max_sweeps is None else max_sweeps
    if engine == "auto":
        engine = "jit" if n > JIT_THRESHOLD else "numpy"
    if engine == "jit":
        Qarg = Q if Q is not None else np.zeros((1, 1), dtype=complex)
        sweeps, lo, hi = _schur_qr_jit(H, Qarg, Q is not None, max_sweeps, DEFLATION_TOL)
    elif engine == "numpy":
        sweeps, lo, hi = _schur_qr_numpy(H, Q, max_sweeps)
    else:
        raise ConfigurationError(f"unknown QR engine {engine!r}")
    if lo >= 0:
        raise ConvergenceError(f"QR did not deflate block [{lo}, {hi}] within {max_sweeps} sweeps", block=(lo, hi))
    return sweeps


# ---------------------------------------------------------------------------
# public eigen interface


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    right_eigenvectors: np.ndarray
    residuals: np.ndarray
    iterations_used: int
    schur: np.ndarray
    schur_vectors: np.ndarray
    scaling: np.ndarray
    balanced: bool
    # eigenvectors of the triangular factor: T Y = Y diag(eigenvalues), Y upper triangular
    schur_eigenvectors: np.ndarray | None = None

    def sorted_order(self):
        lam = self.eigenvalues
        return np.lexsort((lam.imag, lam.real))


def eigvals(A, balanced=True, engine="auto"):
    """Eigenvalues only (active-window QR, no Schur vectors)."""
    A = _as_square(A)
    if A.shape[0] == 1:
        return A[0].copy()
    B, _ = balance(A) if balanced else (A, None)
    H, _ = hessenberg(B, want_q=False)
    schur_qr(H, engine=engine)
    return np.diagonal(H).copy()


def eigen(A, balanced=True, engine="auto"):
    """Full spectrum, Schur form and unit right eigenvectors of a square matrix."""
    A = _as_square(A)
    n = A.shape[0]
    if balanced:
        B, d = balance(A)
    else:
        B, d = A.copy(), np.ones(n)
    H, Q = hessenberg(B)
    sweeps = schur_qr(H, Q, engine=engine) if n > 1 else 0
    T = np.triu(H)
    lam = np.diagonal(T).copy()
    Y = np.zeros((n, n), dtype=complex)
    for i in range(n):
        Y[: i + 1, i] = _inverse_iteration(T, i)
    V = d[:, None] * (Q @ Y)
    V /= np.linalg.norm(V, axis=0)
    j = np.argmax(np.abs(V), axis=0)
    piv = V[j, np.arange(n)]
    V *= (np.abs(piv) / piv)[None, :]
    res = np.linalg.norm(A @ V - V * lam[None, :], axis=0)
    return EigenDecomposition(lam, V, res, sweeps, T, Q, d, balanced, Y)


def _inverse_iteration(T, i):
    """Eigenvector of T for T[i, i], supported on the leading i+1 entries."""
    lam = T[i, i]
    # relative shift keeps lam + delta distinct from lam in floating point
    sigma = lam + INVERSE_ITERATION_SHIFT * max(1.0, abs(lam))
    M = T[: i + 1, : i + 1] - sigma * np.eye(i + 1)
    y = np.ones(i + 1, dtype=complex)
    for _ in range(2):
        y = solve_triangular(M, y, check_finite=False)
        y /= np.linalg.norm(y)
    return y


# ---------------------------------------------------------------------------
# LU with partial pivoting


@dataclass(frozen=True)
class LuFactorization:
    lu: np.ndarray
    perm: np.ndarray
    rcond: float
    norm1: float

    @property
    def L(self):
        return np.tril(self.lu, -1) + np.eye(self.lu.shape[0])

    @property
    def U(self):
        return np.triu(self.lu)

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=complex)
        y = solve_triangular(self.lu, rhs[self.perm], lower=True, unit_diagonal=True)
        return solve_triangular(self.lu, y)

    def solve_adjoint(self, rhs):
        rhs = np.asarray(rhs, dtype=complex)
        t = solve_triangular(self.lu, rhs, trans="C")
        s = solve_triangular(self.lu, t, lower=True, unit_diagonal=True, trans="C")
        out = np.empty_like(s)
        out[self.perm] = s
        return out


def lu_factor(M):
    A = np.array(M, dtype=complex)
    n = A.shape[0]
    perm = np.arange(n)
    for k in range(n - 1):
        p = k + int(np.argmax(np.abs(A[k:, k])))
        if p != k:
            A[[k, p]] = A[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        if A[k, k] == 0:
            continue
        A[k + 1:, k] /= A[k, k]
        A[k + 1:, k + 1:] -= np.outer(A[k + 1:, k], A[k, k + 1:])
    norm1 = float(np.abs(M).sum(axis=0).max()) if n else 0.0
    if np.any(np.diagonal(A) == 0):
        return LuFactorization(A, perm, 0.0, norm1)
    fac = LuFactorization(A, perm, 1.0, norm1)
    inv_norm = _inverse_norm1_estimate(fac, n)
    rcond = 1.0 / (norm1 * inv_norm) if norm1 > 0 else 0.0
    return LuFactorization(A, perm, rcond, norm1)


def _inverse_norm1_estimate(fac, n, max_iter=5):
    """Hager's estimator of ||M^{-1}||_1 from a handful of solves."""
    x = np.full(n, 1.0 / n, dtype=complex)
    est = 0.0
    for _ in range(max_iter):
        y = fac.solve(x)
        est = float(np.abs(y).sum())
        xi = np.where(y == 0, 1.0, y / np.where(y == 0, 1.0, np.abs(y)))
        z = fac.solve_adjoint(xi)
        j = int(np.argmax(np.abs(z)))
        if np.abs(z[j]) <= np.real(np.vdot(z, x)):
            break
        x = np.zeros(n, dtype=complex)
        x[j] = 1.0
    return est


def lu_solve(z, op, rhs):
    """Solve (z I - A) x = rhs, refusing shifts numerically on the spectrum."""
    A = _as_square(op)
    n = A.shape[0]
    M = z * np.eye(n) - A
    fac = lu_factor(M)
    if fac.rcond == 0.0 or fac.rcond * fac.norm1 < POLE_TOL:
        raise PoleError(f"z = {z} is numerically an eigenvalue (rcond {fac.rcond:.2e})", z=z, condition=fac.rcond)
    rhs = np.asarray(rhs, dtype=complex)
    x = fac.solve(rhs)
    r = rhs - M @ x
    if np.linalg.norm(r) > 1e-10 * np.linalg.norm(rhs):
        x = x + fac.solve(r)
    return x


# ---------------------------------------------------------------------------
# resolvent via the Schur form


class Resolvent:
    """(z I - A)^{-1} applied through A = D Q T Q^H D^{-1}.

    Factoring once makes every shift a triangular solve, which is what the
    contour quadratures need.
    """

    def __init__(self, A, decomposition=None):
        self.A = _as_square(A)
        dec = decomposition if decomposition is not None else eigen(self.A)
        self.decomposition = dec
        self.T = dec.schur
        self.Q = dec.schur_vectors
        self.Qh = self.Q.conj().T
        self.d = dec.scaling
        self.n = self.T.shape[0]
        self.eigenvalues = np.diagonal(self.T).copy()

    def distance(self, z):
        return float(np.min(np.abs(z - self.eigenvalues)))

    def _check(self, z):
        dist = self.distance(z)
        if dist < POLE_TOL:
            raise PoleError(f"z = {z} is within {dist:.1e} of an eigenvalue", z=z, condition=dist)

    def shifted_schur(self, z):
        return z * np.eye(self.n) - self.T

    def solve(self, z, rhs):
        self._check(z)
        rhs = np.asarray(rhs, dtype=complex)
        d = self.d if rhs.ndim == 1 else self.d[:, None]
        y = solve_triangular(self.shifted_schur(z), self.Qh @ (rhs / d))
        return d * (self.Q @ y)

    def solve_adjoint(self, z, rhs):
        self._check(z)
        rhs = np.asarray(rhs, dtype=complex)
        d = self.d if rhs.ndim == 1 else self.d[:, None]
        y = solve_triangular(self.shifted_schur(z), self.Qh @ (rhs * d), trans="C")
        return (self.Q @ y) / d

    def schur_inverse(self, z):
        """(z - T)^{-1}, the resolvent in Schur coordinates."""
        self._check(z)
        inv, info = lapack.ztrtri(self.shifted_schur(z), lower=0)
        if info != 0:
            raise PoleError(f"singular shifted Schur factor at z = {z}", z=z)
        return np.triu(inv)

    def from_schur(self, X):
        """Map a Schur-coordinate operator back: D Q X Q^H D^{-1}."""
        return (self.d[:, None] * (self.Q @ X @ self.Qh)) / self.d[None, :]

    def matrix(self, z):
        return self.from_schur(self.schur_inverse(z))


# ---------------------------------------------------------------------------
# norms


class NormEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int


def _real_times_complex(M, x):
    """M @ x for real M and complex x in one real BLAS call.

    A contiguous complex array viewed as floats interleaves real and
    imaginary parts column-wise, so M acts on both at once.
    """
    x = np.ascontiguousarray(x)
    if x.ndim == 1:
        return (M @ x.view(float).reshape(-1, 2)).view(complex).reshape(-1)
    return (M @ x.view(float)).view(complex)


def operator_norm(apply, iters=500, tol=1e-8, adjoint=None, shape=None, seed=0):
    """Largest singular value by power iteration on A^H A (a lower bound).

    ``apply`` is a matrix or a callable; callables need ``adjoint`` and the
    input ``shape``.  Inputs may be vectors or blocks of columns.
    """
    if iters < 20:
        raise ConfigurationError(f"power iteration needs iters >= 20, got {iters}")
    if callable(apply):
        if adjoint is None or shape is None:
            raise ConfigurationError("callable operators need adjoint and shape")
        fwd, bwd = apply, adjoint
    else:
        M = np.asarray(apply)
        if np.iscomplexobj(M):
            fwd, bwd = (lambda x: M @ x), (lambda x: M.conj().T @ x)
        else:
            Mt = np.ascontiguousarray(M.T)
            fwd, bwd = (lambda x: _real_times_complex(M, x)), (lambda x: _real_times_complex(Mt, x))
        shape = (M.shape[1],) if shape is None else shape
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    x /= np.linalg.norm(x)
    est = 0.0
    for it in range(1, iters + 1):
        y = fwd(x)
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return NormEstimate(0.0, True, it)
        x = bwd(y)
        nx = np.linalg.norm(x)
        if nx == 0.0:
            return NormEstimate(new, True, it)
        x /= nx
        if it > 1 and abs(new - est) <= tol * new:
            return NormEstimate(max(new, math.sqrt(nx)), True, it)
        est = new
    return NormEstimate(max(est, math.sqrt(nx)), False, iters)
