"""Orthonormal Hermite functions, quadrature grids and weighted norms.

The Hermite functions h_k include the Gaussian factor, so the recurrence

    h_{k+1}(x) = sqrt(2/(k+1)) x h_k(x) - sqrt(k/(k+1)) h_{k-1}(x)

never overflows.  For |x| beyond ~38 the starting value exp(-x^2/2)
underflows, so the recurrence is run on a rescaled copy and the Gaussian
is folded back in per step (log-scale bookkeeping).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import AccuracyError, ConfigurationError, DomainError

PI_M14 = math.pi ** -0.25

# Calibrated on n <= 200 by `envelope_check` (see tests/test_hermite.py);
# rounded up, so the sampled inequalities hold with a little slack.
ENVELOPE_C = 0.9
SUP_C = 0.76

_RESCALE = 1e150
_LOG_RESCALE = math.log(_RESCALE)


def _rows(x, K):
    """Yield h_0(x), ..., h_K(x) one row at a time."""
    cur = np.full(x.size, PI_M14)
    prev = np.zeros(x.size)
    logscale = -0.5 * x * x
    yield cur * np.exp(logscale)
    for k in range(K):
        nxt = math.sqrt(2.0 / (k + 1)) * x * cur - math.sqrt(k / (k + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > _RESCALE
        if big.any():
            cur[big] /= _RESCALE
            prev[big] /= _RESCALE
            logscale[big] += _LOG_RESCALE
        yield cur * np.exp(logscale)


def _check_args(x, K):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(x)):
        raise DomainError("Hermite functions need finite abscissas")
    if K < 0:
        raise DomainError(f"K must be non-negative, got {K}")
    return x


def hermite_table(x, K):
    """Return the (K+1, len(x)) array of h_0..h_K at the points x."""
    x = _check_args(x, K)
    out = np.empty((K + 1, x.size))
    for k, row in enumerate(_rows(x, K)):
        out[k] = row
    return out


@dataclass(frozen=True)
class HermiteValues:
    x: float
    values: np.ndarray
    K: int


def eval_hermite(x, K):
    """h_0(x), ..., h_K(x) at a single finite point."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"non-finite abscissa {x!r}")
    return HermiteValues(x=x, values=hermite_table([x], K)[:, 0], K=K)


@dataclass(frozen=True)
class HermiteGrid:
    """Nodes and weights with sum(weights * f(nodes)) ~ integral of f over R.

    For ``gauss-hermite-modified`` the Gauss weights are stored multiplied by
    exp(x_i^2), so integrands such as b h_j h_k are sampled as they are.
    """

    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    max_degree_exact: int | None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.weights <= 0):
            raise ConfigurationError("quadrature weights must be positive")
        if np.any(np.diff(self.nodes) <= 0):
            raise ConfigurationError("quadrature nodes must be strictly increasing")

    def integrate(self, values):
        return np.asarray(values) @ self.weights

    def refine(self):
        """The same rule family at doubled resolution."""
        p = dict(self.params)
        if self.kind == "gauss-hermite-modified":
            p["Q"] = 2 * p["Q"]
        else:
            p["panels"] = 2 * p["panels"]
        return build_grid(self.kind, **p)

    def describe(self):
        return {"kind": self.kind, "size": int(self.nodes.size), **_jsonable(self.params)}


def _jsonable(params):
    out = {}
    for key, val in params.items():
        if isinstance(val, (tuple, list, np.ndarray)):
            out[key] = [float(v) for v in val]
        else:
            out[key] = val
    return out


def gauss_hermite_modified(Q):
    """Golub-Welsch Gauss-Hermite rule with weights times exp(x^2).

    The modified weight at node x_i is the reciprocal Christoffel sum
    1 / sum_{k<Q} h_k(x_i)^2, which avoids the underflow of w_i itself.
    """
    if Q < 1:
        raise ConfigurationError(f"Gauss-Hermite needs Q >= 1, got {Q}")
    if Q == 1:
        nodes = np.zeros(1)
    else:
        nodes = eigh_tridiagonal(np.zeros(Q), np.sqrt(np.arange(1, Q) / 2.0), eigvals_only=True)
        # one Newton step on h_Q, using h_Q' = sqrt(2Q) h_{Q-1} - x h_Q
        hq1 = hq = None
        for row in _rows(nodes, Q):
            hq1, hq = hq, row
        nodes = nodes - hq / (math.sqrt(2.0 * Q) * hq1 - nodes * hq)
        nodes = 0.5 * (nodes - nodes[::-1])
    christoffel = np.zeros(Q)
    for row in _rows(nodes, Q - 1):
        christoffel += row * row
    weights = 1.0 / christoffel
    return HermiteGrid(nodes, weights, "gauss-hermite-modified", 2 * Q - 1, {"Q": Q})


def composite_legendre(X=None, panels=1, order=8, interval=None, breakpoints=()):
    """Composite Gauss-Legendre rule on [-X, X] (or ``interval``).

    ``breakpoints`` inside the interval become panel edges in addition to the
    uniform ones, so piecewise integrands are integrated panel-wise smoothly.
    """
    if interval is None:
        if X is None or X <= 0:
            raise ConfigurationError(f"composite-legendre needs cutoff X > 0, got {X}")
        a, b = -float(X), float(X)
    else:
        a, b = map(float, interval)
        if not b > a:
            raise ConfigurationError(f"empty interval {interval}")
    if panels < 1:
        raise ConfigurationError(f"panel count must be >= 1, got {panels}")
    if order < 2:
        raise ConfigurationError(f"panel order must be >= 2, got {order}")
    edges = np.linspace(a, b, panels + 1)
    extra = [p for p in breakpoints if a < p < b]
    if extra:
        edges = np.unique(np.concatenate([edges, extra]))
    t, wt = np.polynomial.legendre.leggauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * wt[None, :]).ravel()
    params = {"panels": panels, "order": order, "interval": (a, b), "breakpoints": tuple(extra)}
    return HermiteGrid(nodes, weights, "composite-legendre", None, params)


def build_grid(kind, **params):
    if kind == "gauss-hermite-modified":
        return gauss_hermite_modified(int(params["Q"]))
    if kind == "composite-legendre":
        if "interval" not in params and "X" not in params:
            raise ConfigurationError("composite-legendre needs X or interval")
        return composite_legendre(
            X=params.get("X"),
            panels=int(params.get("panels", 1)),
            order=int(params.get("order", 8)),
            interval=params.get("interval"),
            breakpoints=params.get("breakpoints", ()),
        )
    raise ConfigurationError(f"unknown grid kind {kind!r}")


def default_grid(N, potential=None):
    """Module default rule for resolving h_0..h_{N-1} against ``potential``.

    Smooth potentials get Gauss-Hermite with Q = max(4N, 256).  Piecewise
    ones get composite Legendre on [-X, X], X = sqrt(2(2N+1)) + 6 (or on the
    potential's support), with panels half a local wavelength wide.
    """
    smooth = True if potential is None else getattr(potential, "smooth", True)
    if smooth:
        return gauss_hermite_modified(max(4 * N, 256))
    X = math.sqrt(2 * (2 * N + 1)) + 6.0
    support = getattr(potential, "support", None)
    a, b = (-X, X) if support is None else (max(-X, support[0]), min(X, support[1]))
    width = math.pi / math.sqrt(2 * N + 1)
    panels = max(1, int(math.ceil((b - a) / width)))
    breaks = tuple(getattr(potential, "breakpoints", ()))
    return composite_legendre(panels=panels, order=16, interval=(a, b), breakpoints=breaks)


def _evaluate(b, x):
    fn = getattr(b, "evaluate", b)
    return np.asarray(fn(x)) * np.ones_like(x)


def _norms(b, ks, grid):
    K = int(max(ks))
    vals = _evaluate(b, grid.nodes)
    tab = hermite_table(grid.nodes, K)[np.asarray(ks)]
    return np.sqrt(np.abs(vals) ** 2 * tab**2 @ grid.weights)


def weighted_norm(b, k, grid, rtol=1e-8, return_info=False):
    """||b h_k||_2 by quadrature, accepted when a doubled grid agrees to rtol.

    One extra refinement is tried before giving up with AccuracyError.
    """
    if k < 0:
        raise DomainError(f"k must be non-negative, got {k}")
    coarse = float(_norms(b, [k], grid)[0])
    current = grid
    for refinements in (1, 2):
        current = current.refine()
        fine = float(_norms(b, [k], current)[0])
        if abs(fine - coarse) <= rtol * max(abs(fine), 1e-300) or fine == coarse:
            if return_info:
                return fine, {"refinements": refinements, "change": abs(fine - coarse)}
            return fine
        coarse = fine
    raise AccuracyError(
        f"||b h_{k}|| did not converge under two refinements", coarse=coarse, fine=fine, where=k
    )


def envelope_check(n, samples=2000):
    """Sample-sharp constants for the two-regime Hermite envelope.

    Inner regime (x^2 <= 2N, N = 2n+1): the smallest C with
    |h_n(x)| <= C (N^{1/3} + |x^2 - N|)^{-1/4}.  Outer regime: the largest
    gamma with |h_n(x)| <= C exp(-gamma x^2) for that same C.  Also reports
    sup |h_n| (1+n)^{1/12}.  Calibration only, not proof.
    """
    if n < 0:
        raise DomainError(f"n must be non-negative, got {n}")
    N = 2 * n + 1
    edge = math.sqrt(2 * N)
    x = np.concatenate([np.linspace(0.0, edge, samples), np.linspace(edge, 2 * edge + 4, samples)[1:]])
    h = np.abs(hermite_table(x, n)[n])
    inner = x * x <= 2 * N
    C = float(np.max(h[inner] * (N ** (1 / 3) + np.abs(x[inner] ** 2 - N)) ** 0.25))
    outer = (~inner) & (h > 0)
    gamma = float(np.min((math.log(C) - np.log(h[outer])) / x[outer] ** 2)) if outer.any() else math.inf
    sup_ratio = float(h.max() * (1 + n) ** (1 / 12))
    inner_holds = bool(np.all(h[inner] <= ENVELOPE_C * (N ** (1 / 3) + np.abs(x[inner] ** 2 - N)) ** -0.25))
    return {
        "n": n,
        "N": N,
        "samples": int(x.size),
        "C_inner": C,
        "gamma": gamma,
        "sup_ratio": sup_ratio,
        "calibrated_C": ENVELOPE_C,
        "calibrated_sup_C": SUP_C,
        "inner_holds": inner_holds,
        "sup_holds": sup_ratio <= SUP_C,
    }
