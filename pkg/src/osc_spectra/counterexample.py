"""The 2x2 block family, the block-diagonal non-basis operator and the
dissipative-spectrum basis test.

Each block b(t, k) = [[1-t, t], [-s t, -1+t]] with s = 1 - k^2 sits on the
index pair (2m, 2m+1), where the unperturbed eigenvalues are E = 4m+1 and
E+2.  On that pair l = (E+1) I + t c with c = [[-1, 1], [-s, 1]], and
c g = +-k g for g = (1, 1 +- k), so the eigenvalues are (E+1) +- t k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError


def _check_unit(name, v):
    if not (0.0 < v < 1.0):
        raise ConfigurationError(f"{name} must lie in (0, 1), got {v}")


def block_matrix(t, k):
    _check_unit("t", t)
    _check_unit("k", k)
    s = 1.0 - k * k
    return np.array([[1.0 - t, t], [-s * t, -1.0 + t]])


def norm_bounds(t, k):
    """Coarse and refined intervals for ||b(t, k)|| and their intersection."""
    coarse = (1.0 - t, 1.0)
    refined = (1.0 - 0.5 * t * k * k, 1.0 - 0.5 * t * (1.0 - t) * k * k)
    return {
        "coarse": coarse,
        "refined": refined,
        "intersection": (max(coarse[0], refined[0]), min(coarse[1], refined[1])),
    }


@dataclass(frozen=True)
class BlockSpec:
    t: float = 0.5
    m_max: int = 8
    k_sequence: tuple | None = None

    def __post_init__(self):
        _check_unit("t", self.t)
        if self.m_max < 0:
            raise ConfigurationError(f"m_max must be >= 0, got {self.m_max}")
        if self.k_sequence is not None:
            if len(self.k_sequence) < self.m_max + 1:
                raise ConfigurationError(f"k_sequence needs {self.m_max + 1} entries, got {len(self.k_sequence)}")
            for m, k in enumerate(self.k_sequence):
                _check_unit(f"k_sequence[{m}]", k)

    @property
    def default_k(self):
        return self.k_sequence is None

    def k(self, m):
        return 2.0 ** (-m - 1) if self.k_sequence is None else float(self.k_sequence[m])

    def s(self, m):
        return 1.0 - self.k(m) ** 2

    def block(self, m):
        return block_matrix(self.t, self.k(m))

    @property
    def size(self):
        return 2 * (self.m_max + 1)

    def to_config(self):
        out = {"t": self.t, "m_max": self.m_max}
        if self.k_sequence is not None:
            out["k_sequence"] = [float(k) for k in self.k_sequence]
        return out

    @classmethod
    def from_config(cls, cfg):
        cfg = dict(cfg)
        known = {"t", "m_max", "k_sequence"}
        extra = sorted(set(cfg) - known)
        if extra:
            raise ConfigurationError(f"blocks.{extra[0]}: unknown field")
        ks = cfg.get("k_sequence")
        return cls(t=float(cfg.get("t", 0.5)), m_max=int(cfg.get("m_max", 8)),
                   k_sequence=None if ks is None else tuple(float(k) for k in ks))


@dataclass(frozen=True)
class BlockEigensystem:
    eigenvalues: tuple
    vectors: tuple
    dense_error: float | None


def block_eigensystem(E, t, k, cross_check=True):
    """Closed-form eigenpairs of diag(E, E+2) + b(t, k)."""
    b = block_matrix(t, k)
    lam = (E + 1.0 + t * k, E + 1.0 - t * k)
    vecs = (np.array([1.0, 1.0 + k]), np.array([1.0, 1.0 - k]))
    err = None
    if cross_check:
        from .eigen import eigen

        dec = eigen(np.diag([E, E + 2.0]) + b)
        got = np.sort(dec.eigenvalues.real)[::-1]
        err = float(np.max(np.abs(got - np.array(lam))))
    return BlockEigensystem(lam, vecs, err)


@dataclass(frozen=True)
class FunctionalNorms:
    k: float
    cos2_alpha: float
    sin_alpha: float
    phi_norm: float
    gram_phi_norm: float
    # sin(alpha) < k holds exactly; for k below ~1e-4 the two round to the same double
    sin_below_k: bool

    @property
    def agreement(self):
        return abs(self.phi_norm - self.gram_phi_norm)


def functional_norms(k):
    """Angle between the block eigenvectors and the coordinate functional norms.

    sin^2 alpha = k^2 / (1 + k^4/4) is used directly (1 - cos^2 would cancel
    for small k).  The Gram route inverts G = U^H U for the normalized basis
    U = [u+, u-] by the adjugate, with det G = |det U|^2.
    """
    _check_unit("k", k)
    q = 1.0 + k**4 / 4.0
    cos2 = 1.0 - k * k / q
    sin_a = k / math.sqrt(q)
    phi = 1.0 / sin_a

    gp, gm = np.array([1.0, 1.0 + k]), np.array([1.0, 1.0 - k])
    np_, nm = np.linalg.norm(gp), np.linalg.norm(gm)
    U = np.column_stack([gp / np_, gm / nm])
    # determinant from the raw vectors: (1-k) - (1+k) has no cancellation error
    det_u = (gp[0] * gm[1] - gm[0] * gp[1]) / (np_ * nm)
    G = U.T @ U
    g_inv_00 = G[1, 1] / det_u**2
    gram_phi = math.sqrt(g_inv_00)

    return FunctionalNorms(k, cos2, sin_a, phi, gram_phi, bool(sin_a <= k))


@dataclass(frozen=True)
class WitnessRow:
    m: int
    k: float
    lambda_plus: float
    lambda_minus: float
    closed_plus: float
    closed_minus: float
    phi_norm: float
    psi_norm: float
    bound: float
    block_norm: float


@dataclass(frozen=True)
class NonBasisWitness:
    rows: list
    max_eigen_error: float
    sup_block_norm: float
    norm_gap: float
    phi_bound_holds: bool
    phi_increasing: bool
    reconstruction_residual: float
    operator: object

    def to_rows(self):
        return [
            {"m": r.m, "lambda_plus": r.lambda_plus, "lambda_minus": r.lambda_minus, "phi_norm": r.phi_norm,
             "psi_norm": r.psi_norm, "bound": r.bound, "k": r.k, "block_norm": r.block_norm}
            for r in self.rows
        ]


def non_basis_witness(spec, seed=0):
    """Spectrum and functional norms of the block-diagonal operator, block by block."""
    from .assembly import assemble_block
    from .eigen import eigen, operator_norm

    op = assemble_block(spec, spec.size)
    dec = eigen(op.matrix)
    lam = np.sort(dec.eigenvalues.real)
    rows = []
    for m in range(spec.m_max + 1):
        k = spec.k(m)
        E = 4.0 * m + 1.0
        cp, cm = E + 1.0 + spec.t * k, E + 1.0 - spec.t * k
        pair = lam[2 * m:2 * m + 2]
        fn = functional_norms(k)
        est = operator_norm(spec.block(m), iters=5000, tol=1e-15).value
        rows.append(WitnessRow(m, k, float(pair[1]), float(pair[0]), cp, cm, fn.phi_norm, fn.phi_norm, 1.0 / k, est))
    err = max(max(abs(r.lambda_plus - r.closed_plus), abs(r.lambda_minus - r.closed_minus)) for r in rows)
    sup_norm = max(r.block_norm for r in rows)
    phis = [r.phi_norm for r in rows]
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(spec.size)
    pieces = np.zeros((spec.m_max + 1, spec.size))
    for m in range(spec.m_max + 1):
        pieces[m, 2 * m:2 * m + 2] = f[2 * m:2 * m + 2]
    recon = float(np.linalg.norm(pieces.sum(axis=0) - f))
    return NonBasisWitness(
        rows=rows,
        max_eigen_error=float(err),
        sup_block_norm=float(sup_norm),
        norm_gap=float(1.0 - sup_norm),
        phi_bound_holds=all(r.phi_norm >= r.bound for r in rows),
        phi_increasing=all(b > a for a, b in zip(phis, phis[1:])) if spec.default_k else True,
        reconstruction_residual=recon,
        operator=op,
    )


# ---------------------------------------------------------------------------
# dissipative spectra


@dataclass(frozen=True)
class DissipativeSpectrum:
    mu: np.ndarray
    rho: float | None = None

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=complex)
        if np.any(mu.imag < 0):
            j = int(np.argmin(mu.imag))
            raise DomainError(f"Im mu_{j} = {mu.imag[j]:.3g} < 0: spectrum is not dissipative")
        object.__setattr__(self, "mu", mu)

    @classmethod
    def shifted_harmonic(cls, window, rho, xi=None):
        """mu_k = 2k + 1 + xi_k + i rho."""
        k = np.arange(window)
        lam = 2.0 * k + 1.0 + (0.0 if xi is None else np.asarray(xi, dtype=complex))
        return cls(lam + 1j * rho, rho)


@dataclass(frozen=True)
class KatsnelsonResult:
    window: int
    pair_sup: float
    s_star: float
    s_star_unweighted: float
    passes: bool
    mode: str
    pair_bound: float | None = None
    s_bound: float | None = None
    pair_within_bound: bool | None = None
    s_within_bound: bool | None = None

    def as_dict(self):
        return dict(self.__dict__)


def katsnelson_check(spectrum, rho=None):
    """The two sums of the dissipative unconditional-basis criterion on a finite window.

    ``s_star`` is sup_j sum_{k != j} Im mu_j Im mu_k / |mu_j - conj(mu_k)|^2;
    ``s_star_unweighted`` drops the Im factors.  With a shift rho (given or
    carried by the spectrum) the analytic bounds for the shifted model are
    evaluated too.
    """
    if not isinstance(spectrum, DissipativeSpectrum):
        spectrum = DissipativeSpectrum(np.asarray(spectrum), rho)
    rho = spectrum.rho if rho is None else rho
    mu = spectrum.mu
    n = mu.size
    if n < 2:
        raise ConfigurationError("the criterion needs at least two eigenvalues")
    im = mu.imag
    d2 = np.abs(mu[:, None] - mu.conj()[None, :]) ** 2
    off = ~np.eye(n, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(off & (d2 > 0), 1.0 / d2, 0.0)
    weighted = (im[:, None] * im[None, :]) * inv
    pair_sup = float(4.0 * weighted[off].max())
    s_star = float(weighted.sum(axis=1).max())
    s_unw = float(inv.sum(axis=1).max())
    if rho is None:
        passes = pair_sup < 1.0 and math.isfinite(s_star)
        return KatsnelsonResult(n, pair_sup, s_star, s_unw, passes, "finite window")
    if not (0.0 <= rho < 1.0):
        raise ConfigurationError(f"shift rho must lie in [0, 1), got {rho}")
    pair_bound = 4 * rho**2 / ((1 - rho) ** 2 + 4 * rho**2) if rho > 0 else 0.0
    s_bound = 1.0 / (1.0 - rho) ** 2
    pair_ok = pair_sup <= pair_bound + 1e-12
    s_ok = s_star < s_bound and s_unw < s_bound
    return KatsnelsonResult(n, pair_sup, s_star, s_unw, pair_sup < 1.0 and s_ok, "shifted model",
                            pair_bound, s_bound, pair_ok, s_ok)
