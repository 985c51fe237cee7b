"""Discrete Hilbert transforms on finite sections and weighted l2 machinery."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .eigen import operator_norm
from .errors import ConfigurationError, DomainError

SHIFT_BOUND = 1.0 / 16.0
EXHAUSTIVE_LENGTHS = 2048
DENSE_LIMIT = 4_000_000


class TruncatedConstructionWarning(UserWarning):
    """A construction or scan ran out of window before completing."""


# ---------------------------------------------------------------------------
# transforms


def hilbert_matrix(n_out, n_in):
    """Section [(Gxi)_n]_{n < n_out} acting on xi_k, k < n_in: entries 1/(k - n), zero at k = n."""
    m = np.arange(n_in)[None, :] - np.arange(n_out)[:, None]
    with np.errstate(divide="ignore"):
        G = np.where(m != 0, 1.0 / m, 0.0)
    return G


def apply_G(xi, n_out=None):
    """(G xi)_n = sum_{k != n} xi_k / (k - n) for n < n_out (default len(xi))."""
    xi = np.asarray(xi)
    K = xi.shape[0]
    L = K if n_out is None else int(n_out)
    if K * L <= DENSE_LIMIT:
        return hilbert_matrix(L, K) @ xi
    # (G xi)_n = (xi * g)(n) with g(j) = -1/j, j != 0
    j = np.arange(-(K - 1), L, dtype=float)
    with np.errstate(divide="ignore"):
        g = np.where(j != 0, -1.0 / j, 0.0)
    if xi.ndim == 1:
        return fftconvolve(xi, g)[K - 1:K - 1 + L]
    return np.column_stack([fftconvolve(xi[:, c], g)[K - 1:K - 1 + L] for c in range(xi.shape[1])])


@dataclass(frozen=True)
class ShiftSequence:
    """Pole shifts tau_k; with ``strict`` every |tau_k| must stay within ``sup_bound``."""

    values: np.ndarray
    sup_bound: float = SHIFT_BOUND
    strict: bool = True

    def __post_init__(self):
        v = np.asarray(self.values)
        if not np.iscomplexobj(v):
            v = v.astype(float)
        object.__setattr__(self, "values", v)
        if self.strict and v.size and np.abs(v).max() > self.sup_bound:
            raise DomainError(f"|tau| reaches {np.abs(v).max():.4g} > {self.sup_bound:g}")

    @classmethod
    def random(cls, K, bound=SHIFT_BOUND, seed=0, complex_=False):
        rng = np.random.default_rng(seed)
        r = bound * np.sqrt(rng.uniform(0, 1, K))
        if complex_:
            return cls(r * np.exp(2j * np.pi * rng.uniform(0, 1, K)), bound)
        return cls(r * rng.choice([-1.0, 1.0], K), bound)

    def __len__(self):
        return self.values.size


def _tau_values(tau, K):
    t = tau.values if isinstance(tau, ShiftSequence) else np.asarray(tau)
    if t.size < K:
        raise ConfigurationError(f"shift sequence has {t.size} entries, input needs {K}")
    return t[:K]


def hilbert_tau_matrix(tau, n_out, n_in):
    """Section of G_tau: entries 1/(k + tau_k - n) for k != n, zero on the diagonal."""
    t = _tau_values(tau, n_in)
    n = np.arange(n_out)[:, None]
    k = np.arange(n_in)[None, :]
    den = (k + t[None, :]) - n
    off = k != n
    if np.any(off & (den == 0)):
        i, j = np.argwhere(off & (den == 0))[0]
        raise DomainError(f"pole collision: k={j}, tau_k={t[j]} hits n={i}")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(off, 1.0 / np.where(off, den, 1.0), 0.0)


def apply_G_tau(xi, tau, n_out=None):
    """(G_tau xi)_n = sum_{k != n} xi_k / (k + tau_k - n)."""
    xi = np.asarray(xi)
    K = xi.shape[0]
    L = K if n_out is None else int(n_out)
    return hilbert_tau_matrix(tau, L, K) @ xi


def vector_valued_apply(Xi, tau, W=None):
    """Apply G_tau to every column of Xi (one column per coefficient index).

    With a weight the map acts on l2(W)-valued columns; the weight is only
    used by the norm estimates and does not change the values.
    """
    Xi = np.asarray(Xi)
    if Xi.ndim == 1:
        Xi = Xi[:, None]
    if W is not None and _weight_values(W).size < Xi.shape[0]:
        raise ConfigurationError("weight shorter than the columns")
    return hilbert_tau_matrix(tau, Xi.shape[0], Xi.shape[0]) @ Xi


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightSequence:
    values: np.ndarray
    T: tuple = ()
    t: tuple = ()
    R: float | None = None
    thresholds: tuple = ()
    warnings: tuple = ()
    label: str = ""
    w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ConfigurationError("weight must be a non-empty sequence")
        if np.any(~(v > 0)) or not np.all(np.isfinite(v)):
            raise DomainError("weight values must be positive and finite")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "w", 1.0 / v)

    @classmethod
    def constant(cls, K, value=1.0):
        return cls(np.full(K, float(value)), label="constant")

    @classmethod
    def power(cls, K, alpha):
        return cls((np.arange(K) + 1.0) ** alpha, label=f"(k+1)^{alpha:g}")

    @classmethod
    def geometric(cls, K, base=2.0):
        return cls(float(base) ** np.arange(K), label=f"{base:g}^k")

    @property
    def K(self):
        return self.values.size

    @property
    def dyadic(self):
        return bool(self.T)

    def construction_log(self):
        return {"label": self.label, "R": self.R, "T": list(self.T), "t": list(self.t),
                "thresholds": list(self.thresholds), "warnings": list(self.warnings), "K_max": self.K}

    def to_rows(self):
        return [{"index": i, "value": float(x)} for i, x in enumerate(self.values)]


def _weight_values(W):
    return W.values if isinstance(W, WeightSequence) else np.asarray(W, dtype=float)


def _lengths(scan):
    """Interval lengths n examined by the A2 scan: all below 2048, then a 5% geometric grid."""
    base = np.arange(min(scan, EXHAUSTIVE_LENGTHS))
    if scan <= EXHAUSTIVE_LENGTHS:
        return base
    geo = np.unique(np.floor(EXHAUSTIVE_LENGTHS * 1.05 ** np.arange(1, 400)).astype(np.int64))
    return np.concatenate([base, geo[geo < scan]])


def a2_condition(W, scan):
    """max sigma+(k,n) sigma-(k,n) over 0 <= k, k+n < scan.

    sigma+ and sigma- are the averages of W and 1/W over k..k+n.  Lengths are
    exhaustive below 2048 and geometrically sampled beyond, with the sampled
    set fixed independently of ``scan`` so the estimate is monotone in it.
    """
    v = _weight_values(W)
    if scan > v.size:
        raise ConfigurationError(f"scan {scan} exceeds the weight length {v.size}")
    if scan < 1:
        raise ConfigurationError("scan must be >= 1")
    cW = np.concatenate([[0.0], np.cumsum(v[:scan])])
    cw = np.concatenate([[0.0], np.cumsum(1.0 / v[:scan])])
    best = 0.0
    for n in _lengths(scan):
        k = np.arange(scan - n)
        m = n + 1.0
        prod = ((cW[k + n + 1] - cW[k]) / m) * ((cw[k + n + 1] - cw[k]) / m)
        best = max(best, float(prod.max()))
    return best


@dataclass(frozen=True)
class A2Profile:
    scans: list
    values: list
    plateau: bool
    last_ratio: float

    def as_dict(self):
        return dict(self.__dict__)


def a2_profile(W, scan, levels=6, plateau_tol=0.05):
    """a2_condition on scan/2^j, j = levels-1..0, with a plateau verdict on the last doubling."""
    scans = sorted({max(1, scan >> j) for j in range(levels)})
    vals = [a2_condition(W, s) for s in scans]
    ratio = vals[-1] / vals[-2] if len(vals) > 1 and vals[-2] > 0 else 1.0
    return A2Profile(scans, vals, ratio - 1.0 <= plateau_tol, float(ratio))


def psi_from_profile(norms, floor=1e-300):
    """psi(k) = 1 / sup_{j >= k} norms[j] on the computed window."""
    a = np.asarray(getattr(norms, "norms", norms), dtype=float)
    tail = np.maximum.accumulate(a[::-1])[::-1]
    return 1.0 / np.maximum(tail, floor)


def _psi_array(psi, K_max):
    if callable(psi):
        vals = np.asarray(psi(np.arange(K_max)), dtype=float) * np.ones(K_max)
    else:
        vals = np.asarray(psi, dtype=float)
        if vals.size < K_max:
            raise ConfigurationError(f"psi has {vals.size} values, K_max is {K_max}")
        vals = vals[:K_max]
    if np.any(vals < 0) or np.any(np.isnan(vals)):
        raise DomainError("psi must be non-negative")
    return vals


def construct_weight(psi, R=3.0, K_max=4096):
    """Dyadic weight W(j) = 2^k on T_k <= j < T_{k+1} below psi.

    T_0 = 0 and T_1 = min{t >= 1 : psi(t) >= 2}; afterwards
    T_{k+1} = min{T_k + t : psi(T_k + t) >= 2^{k+1}, t >= R t_k} with
    t_k = T_k - T_{k-1}.  Thresholds are tested on the running minimum of
    psi from the right, so W <= psi holds everywhere, not only at block
    starts.  A threshold missed inside the window ends the construction with
    a TruncatedConstructionWarning and the last completed level continued.
    """
    if not R > 2:
        raise ConfigurationError(f"ratio R must exceed 2, got {R}")
    vals = _psi_array(psi, K_max)
    env = np.minimum.accumulate(vals[::-1])[::-1]
    notes = []
    T, t, thresholds = [0], [], []
    start = 1
    level = 0
    while True:
        need = 2.0 ** (level + 1)
        if start >= K_max:
            break
        hit = np.flatnonzero(env[start:] >= need)
        if hit.size == 0:
            notes.append(f"psi stays below {need:g} on [{start}, {K_max}); construction stopped at level {level}")
            break
        nxt = start + int(hit[0])
        T.append(nxt)
        t.append(nxt - T[-2])
        thresholds.append(need)
        level += 1
        start = nxt + int(math.ceil(R * t[-1]))
    W = np.ones(K_max)
    for k in range(len(T)):
        end = T[k + 1] if k + 1 < len(T) else K_max
        W[T[k]:end] = 2.0 ** k
    base = env[: T[1] if len(T) > 1 else K_max]
    if np.any(base < 1.0):
        low = W[: base.size]
        if np.any(base <= 0):
            raise DomainError("psi vanishes on the first block; no positive weight lies below it")
        W[: base.size] = np.minimum(low, base)
        notes.append("psi < 1 on the first block; W follows psi there")
    if len(T) == 1:
        notes.append("psi never reaches 2: the construction is degenerate (constant weight)")
    for msg in notes:
        warnings.warn(msg, TruncatedConstructionWarning, stacklevel=2)
    return WeightSequence(W, tuple(T), tuple(t), float(R), tuple(thresholds), tuple(notes), "dyadic")


# ---------------------------------------------------------------------------
# sums


@dataclass(frozen=True)
class RSumReport:
    r: np.ndarray
    partial_sums: np.ndarray
    envelope: np.ndarray | None
    envelope_holds: bool | None
    beta: float | None
    gamma: float | None
    window: int
    warnings: tuple

    def as_dict(self):
        return {"N": int(self.r.size - 1), "final_partial_sum": float(self.partial_sums[-1]),
                "envelope_holds": self.envelope_holds, "beta": self.beta, "gamma": self.gamma,
                "window": self.window, "max_r": float(self.r.max()), "warnings": list(self.warnings)}


def r_values(W, N, window=None):
    """r(n) = max_i W(i+n)/W(i) over 0 <= i < window (default len(W) - N)."""
    v = _weight_values(W)
    avail = v.size - N
    window = avail if window is None else int(window)
    if avail <= 0:
        raise ConfigurationError(f"weight of length {v.size} is too short for N = {N}")
    notes = ()
    if window > avail:
        notes = (f"window {window} exhausted: only {avail} offsets available",)
        window = avail
    inv = 1.0 / v[:window]
    r = np.array([float((v[n:n + window] * inv).max()) for n in range(N + 1)])
    return r, window, notes


def r_sum_check(W, N, window=None):
    """Partial sums of sum_{n <= N} r(n)/(1+n)^2; dyadic weights also get the envelope 2 + (beta n)^gamma."""
    r, window, notes = r_values(W, N, window)
    for msg in notes:
        warnings.warn(msg, TruncatedConstructionWarning, stacklevel=2)
    n = np.arange(N + 1)
    partial = np.cumsum(r / (1.0 + n) ** 2)
    env = holds = beta = gamma = None
    if isinstance(W, WeightSequence) and W.dyadic and W.t:
        beta = W.R**2 / W.t[0]
        gamma = math.log(2.0) / math.log(W.R)
        env = 2.0 + (beta * n) ** gamma
        holds = bool(np.all(r <= env * (1 + 1e-12)))
    return RSumReport(r, partial, env, holds, beta, gamma, window, notes)


def s_series(W):
    """Partial sums of sum_j W(j)/(1+j)^2 and, for dyadic W, the bound t_1 + 2R/(R-2)."""
    v = _weight_values(W)
    partial = np.cumsum(v / (1.0 + np.arange(v.size)) ** 2)
    bound = None
    if isinstance(W, WeightSequence) and W.dyadic and W.t:
        bound = W.t[0] + 2.0 * W.R / (W.R - 2.0)
    return partial, bound


# ---------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class WeightedNorm:
    value: float
    converged: bool
    truncation: int
    method: str
    plateau: list

    def as_dict(self):
        return dict(self.__dict__)


def _section(transform, K, tau):
    if transform == "G":
        return hilbert_matrix(K, K)
    if transform == "G_tau":
        if tau is None:
            raise ConfigurationError("G_tau needs a shift sequence")
        return hilbert_tau_matrix(tau, K, K)
    raise ConfigurationError(f"transform must be 'G' or 'G_tau', got {transform!r}")


def weighted_norm_estimate(transform, W, truncation, tau=None, method="power", iters=500, tol=1e-10,
                           plateau_levels=3, seed=0):
    """Norm of the K-section on l2(W), via sqrt(W) M / sqrt(W) in plain l2.

    ``method='power'`` runs power iteration (a lower bound); ``'svd'`` takes
    the exact largest singular value of the section.  Estimates at K/2, K/4,
    ... are returned as a plateau trace.
    """
    v = np.ones(truncation) if W is None else _weight_values(W)
    if truncation > v.size:
        raise ConfigurationError(f"truncation {truncation} exceeds the weight length {v.size}")

    def one(K):
        s = np.sqrt(v[:K])
        M = s[:, None] * _section(transform, K, tau) / s[None, :]
        if method == "svd":
            return float(np.linalg.norm(M, 2)), True
        if method != "power":
            raise ConfigurationError(f"method must be 'power' or 'svd', got {method!r}")
        est = operator_norm(M, iters=iters, tol=tol, seed=seed)
        return est.value, est.converged

    value, conv = one(truncation)
    trace = [(truncation >> j, one(truncation >> j)[0]) for j in range(plateau_levels - 1, 0, -1) if truncation >> j >= 2]
    trace.append((truncation, value))
    return WeightedNorm(value, conv, truncation, method, trace)


def vector_norm_estimate(tau, W, truncation, columns=16, iters=500, tol=1e-10, seed=0):
    """Power-iteration norm of Xi -> G_tau Xi on l2(W)-valued blocks with ``columns`` columns."""
    v = np.ones(truncation) if W is None else _weight_values(W)[:truncation]
    s = np.sqrt(v)
    M = s[:, None] * hilbert_tau_matrix(tau, truncation, truncation) / s[None, :]
    return operator_norm(M, iters=iters, tol=tol, shape=(truncation, columns), seed=seed)


def difference_norm(tau, truncation=1024, method="svd"):
    """||G - G_tau|| on a section against the flat-weight bound pi^2/3."""
    D = hilbert_matrix(truncation, truncation) - hilbert_tau_matrix(tau, truncation, truncation)
    if method == "svd":
        val = float(np.linalg.norm(D, 2))
    else:
        val = operator_norm(D, iters=500, tol=1e-10).value
    bound = math.pi**2 / 3.0
    return {"truncation": truncation, "norm": val, "bound": bound, "within_bound": val <= bound}
