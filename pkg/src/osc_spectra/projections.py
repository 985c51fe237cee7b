"""Enclosure region, eigenvalue localization and contour-integral projections.

All contour integrals are (1/2 pi i) \\oint F(z) dz with F built from the
resolvent R(z) = (z - A)^{-1} of a truncation A.  Circles use the trapezoid
rule (spectrally accurate, nested under doubling); the rectangle uses
Gauss-Legendre panels per edge.  For real A and contours symmetric under
conjugation only the upper half is evaluated: F(conj z) = conj F(z), so the
lower half contributes the complex conjugate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .assembly import truncation_trust_index, unperturbed_diagonal
from .eigen import Resolvent, eigen, operator_norm
from .errors import ConfigurationError, ContourError, DomainError, NotInVError, PoleError
from .parallel import ordered_sum

DISK_RADIUS = 1.0 / 16.0
J_THRESHOLD = 1.0 / 68.0
TAIL_THRESHOLD = 1.0 / 70.0
RESOLVENT_BOUND = 32.0
PROJECTION_BOUND = 32.0
ANALYTIC_BOUND = 35.0
BARI_MARKUS_BOUND = 0.5

DEFAULT_M = 64
RADIUS_PROJECTION = 0.5
RADIUS_DEVIATION = 0.25
RADIUS_ANALYTIC = 1.0
PROJECTION_RTOL = 1e-9
PANEL_ORDER = 16
EIGEN_EVALUATOR_MAX_COND = 1e8


# ---------------------------------------------------------------------------
# enclosure


@dataclass(frozen=True)
class EnclosureRegion:
    """S(N*) = Pi(2N*, Y) together with the disks D(2k+1, 1/16), k >= N*."""

    N_star: int
    Y: float
    J: int
    b_norm: float
    n_star_bound: float
    J_tail: int | None = None
    disk_radius: float = DISK_RADIUS

    @property
    def half_strip(self):
        return (2.0 * self.N_star, self.Y)

    @property
    def contour_height(self):
        # any height >= Y encloses the same eigenvalues; keep the contour off the axis
        return max(self.Y, 1.0)

    def in_strip(self, z):
        return abs(z.real) < 2 * self.N_star and abs(z.imag) < self.Y

    def in_closure(self, z):
        if abs(z.real) <= 2 * self.N_star and abs(z.imag) <= self.Y:
            return True
        k = int(round((z.real - 1.0) / 2.0))
        return k >= self.N_star and abs(z - (2 * k + 1)) <= self.disk_radius

    def disk_index(self, z):
        k = int(round((z.real - 1.0) / 2.0))
        if k >= self.N_star and abs(z - (2 * k + 1)) < self.disk_radius:
            return k
        return None

    def contains(self, z):
        return self.in_strip(z) or self.disk_index(z) is not None

    def as_dict(self):
        return {
            "N_star": self.N_star,
            "Y": self.Y,
            "J": self.J,
            "J_tail": self.J_tail,
            "b_norm": self.b_norm,
            "n_star_bound": self.n_star_bound,
            "disk_radius": self.disk_radius,
            "half_strip": list(self.half_strip),
        }


def enclosure_constants(J, b_norm):
    """(Y, lower bound for N*, N*) for given J and V-norm."""
    Y = 8.0 * (b_norm + 2.0 * math.pi * b_norm**2)
    bound = (2.0 * J + 4.0 * b_norm * math.sqrt(J) + 1.0) / 2.0
    return Y, bound, max(1, math.ceil(bound))


def _last_crossing(norms, threshold):
    above = np.flatnonzero(norms > threshold)
    if above.size and above[-1] == norms.size - 1:
        return None
    return 0 if above.size == 0 else int(above[-1]) + 1


def build_enclosure(profile, b_norm=None):
    """Constants of the enclosure from a profile k -> ||b h_k||.

    J is the first index after which the computed profile stays at or below
    1/68; the V-norm defaults to the profile's maximum.
    """
    norms = np.asarray(getattr(profile, "norms", profile), dtype=float)
    if norms.ndim != 1 or norms.size == 0:
        raise ConfigurationError("profile must be a non-empty sequence")
    J = _last_crossing(norms, J_THRESHOLD)
    if J is None:
        raise NotInVError(
            f"profile is still above 1/68 at k = {norms.size - 1}; b looks outside V on this range "
            "(block-operator perturbations are handled by the counterexample commands)"
        )
    b_norm = float(norms.max()) if b_norm is None else float(b_norm)
    Y, bound, N_star = enclosure_constants(J, b_norm)
    return EnclosureRegion(N_star, Y, J, b_norm, bound, _last_crossing(norms, TAIL_THRESHOLD))


# ---------------------------------------------------------------------------
# shared state for one truncation


class SpectralContext:
    """A truncation with its eigen-decomposition, resolvent and cached projections."""

    def __init__(self, op, region=None, n_trust=None, decomposition=None, threads=None):
        self.op = op
        self.A = np.asarray(op.matrix, dtype=complex)
        self.N = self.A.shape[0]
        self.dec = decomposition if decomposition is not None else eigen(self.A)
        self.res = Resolvent(self.A, self.dec)
        self.real = not np.any(self.A.imag)
        self.B = op.perturbation
        self.region = region
        self.n_trust = truncation_trust_index(op) if n_trust is None else int(n_trust)
        self.threads = threads
        self.eigenvalues = self.dec.eigenvalues
        self.order = np.lexsort((self.eigenvalues.imag, self.eigenvalues.real))
        self.norm_F = float(np.linalg.norm(self.A))
        self._projections = {}
        self._eig_factor = None

    def require_region(self, region=None):
        region = region if region is not None else self.region
        if region is None:
            raise ConfigurationError("this operation needs an enclosure region")
        return region

    def disk_eigenvalues(self, n, radius=DISK_RADIUS):
        lam = self.eigenvalues
        return lam[np.abs(lam - (2 * n + 1)) < radius]

    def eigenvalue(self, n):
        """The unique eigenvalue in D(2n+1, 1/16)."""
        inside = self.disk_eigenvalues(n)
        if inside.size != 1:
            raise DomainError(f"D({2 * n + 1}, 1/16) holds {inside.size} eigenvalues, expected one")
        return complex(inside[0])

    # resolvent evaluation in Schur coordinates ----------------------------
    def eigen_factor(self):
        """(Y, Y^{-1}, condition) for T = Y diag(lam) Y^{-1}."""
        if self._eig_factor is None:
            Y = self.dec.schur_eigenvectors
            Yi, info = lapack.ztrtri(Y, lower=0)
            cond = math.inf if info != 0 else float(np.linalg.norm(Y, 1) * np.linalg.norm(np.triu(Yi), 1))
            self._eig_factor = (Y, np.triu(Yi), cond)
        return self._eig_factor

    def _schur_sum(self, nodes, weights, evaluator):
        if evaluator == "eigen":
            Y, Yi, _ = self.eigen_factor()
            lam = np.diagonal(self.res.T)
            s = (weights[:, None] / (nodes[:, None] - lam[None, :])).sum(axis=0)
            return (Y * s[None, :]) @ Yi
        pairs = list(zip(nodes, weights))
        return ordered_sum(lambda p: p[1] * self.res.schur_inverse(p[0]), pairs, threads=self.threads)

    def contour_matrix(self, rule, evaluator="schur"):
        """sum_j w_j R(z_j) for a ContourRule, as a full matrix."""
        if evaluator == "auto":
            evaluator = "eigen" if self.eigen_factor()[2] <= EIGEN_EVALUATOR_MAX_COND else "schur"
        for z in rule.nodes:
            if self.res.distance(z) < 1e-12:
                raise ContourError(f"contour node {z} lies on an eigenvalue; adjust the radius", z=z)
        S = self.res.from_schur(self._schur_sum(rule.nodes, rule.weights, evaluator))
        if rule.folded:
            return 2.0 * S.real
        return S

    def contour_vector(self, rule, f):
        f = np.asarray(f, dtype=complex)
        acc = np.zeros(self.N, dtype=complex)
        for z, w in zip(rule.nodes, rule.weights):
            acc += w * self.res.solve(z, f)
        if rule.folded and not np.any(f.imag):
            return 2.0 * acc.real
        if rule.folded:
            raise ConfigurationError("folded rules need real data")
        return acc


@dataclass(frozen=True)
class ContourRule:
    """Nodes and weights for (1/2 pi i) \\oint F dz; ``folded`` means the
    conjugate half is implied (result = 2 Re of the listed sum)."""

    nodes: np.ndarray
    weights: np.ndarray
    folded: bool
    description: dict = field(default_factory=dict)

    def scaled(self, factor):
        return ContourRule(self.nodes, self.weights * factor(self.nodes), self.folded, self.description)


def circle_rule(center, radius, M, fold=False):
    """Trapezoid rule with nodes c + r e^{2 pi i j / M}."""
    theta = 2.0 * np.pi * np.arange(M) / M
    nodes = center + radius * np.exp(1j * theta)
    weights = (nodes - center) / M
    if fold:
        keep = np.arange(M // 2 + 1)
        w = weights[keep].copy()
        w[0] *= 0.5
        w[-1] *= 0.5
        return ContourRule(nodes[keep], w, True, {"kind": "circle", "center": center, "radius": radius, "M": M})
    return ContourRule(nodes, weights, False, {"kind": "circle", "center": center, "radius": radius, "M": M})


def _coarse_half(rule_2m):
    """The M-node trapezoid rule embedded in a 2M-node one (even nodes, doubled weights)."""
    idx = np.arange(0, rule_2m.nodes.size, 2)
    # with folding, the halved endpoint weights of the fine rule carry over
    w = 2.0 * rule_2m.weights[idx]
    d = dict(rule_2m.description)
    d["M"] = d["M"] // 2
    return ContourRule(rule_2m.nodes[idx], w, rule_2m.folded, d)


def _segment_panels(a, b, breaks, order):
    """Gauss-Legendre nodes on the segment a -> b with interior breakpoints (fractions in [0,1])."""
    t, wt = np.polynomial.legendre.leggauss(order)
    edges = np.unique(np.concatenate([[0.0], np.asarray(breaks, dtype=float), [1.0]]))
    nodes, weights = [], []
    for s0, s1 in zip(edges[:-1], edges[1:]):
        za, zb = a + (b - a) * s0, a + (b - a) * s1
        nodes.append(0.5 * (za + zb) + 0.5 * (zb - za) * t)
        weights.append(0.5 * (zb - za) * wt / (2j * np.pi))
    return np.concatenate(nodes), np.concatenate(weights), len(edges) - 1


def _horizontal_breaks(a):
    """Panel edges on [-a, a]: even integers on the right, geometric to the left."""
    right = np.arange(0.0, a + 1e-12, 2.0)
    left = []
    x = 1.0
    while x < a:
        left.append(-x)
        x *= 2.0
    return np.unique(np.concatenate([[-a], left, right, [a]]))


def rectangle_rule(half_width, half_height, order=PANEL_ORDER, fold=False, split=1):
    """Counter-clockwise panels on the boundary of {|Re z| < a, |Im z| < Y}."""
    a, Y = float(half_width), float(half_height)
    xs = _horizontal_breaks(a)
    if split > 1:
        xs = np.unique(np.concatenate([xs] + [xs[:-1] + np.diff(xs) * j / split for j in range(1, split)]))

    def vertical(n_min):
        n = max(n_min, int(math.ceil(Y / 1.0)))
        return np.linspace(0.0, 1.0, n * split + 1)[1:-1]

    segments = []
    # right edge upward, top edge leftward, left edge downward
    if fold:
        segments.append((complex(a, 0.0), complex(a, Y), vertical(1)))
    else:
        segments.append((complex(a, -Y), complex(a, Y), vertical(2)))
    top_fracs = (a - xs[::-1]) / (2 * a)
    segments.append((complex(a, Y), complex(-a, Y), top_fracs[1:-1]))
    lv = np.linspace(0.0, 1.0, split + 1)[1:-1]
    if fold:
        segments.append((complex(-a, Y), complex(-a, 0.0), lv))
    else:
        segments.append((complex(-a, Y), complex(-a, -Y), lv))
        bot_fracs = (xs + a) / (2 * a)
        segments.append((complex(-a, -Y), complex(a, -Y), bot_fracs[1:-1]))
    nodes, weights, panels = [], [], 0
    for za, zb, br in segments:
        n, w, p = _segment_panels(za, zb, br, order)
        nodes.append(n)
        weights.append(w)
        panels += p
    desc = {"kind": "rectangle", "half_width": a, "half_height": Y, "order": order, "panels": panels, "split": split}
    return ContourRule(np.concatenate(nodes), np.concatenate(weights), fold, desc)


# ---------------------------------------------------------------------------
# projections


@dataclass(frozen=True)
class RieszProjection:
    matrix: np.ndarray
    contour: dict
    rank_estimate: int
    norm_estimate: float
    refinement_change: float
    accurate: bool
    idempotency_error: float
    evaluator: str = "schur"

    def apply(self, f):
        return self.matrix @ f


def _finish(P, coarse, contour, rtol, evaluator):
    sv = np.linalg.svd(P, compute_uv=False)
    norm = float(sv[0]) if sv.size else 0.0
    rank = int(np.count_nonzero(sv > 1e-6 * norm)) if norm > 0 else 0
    change = float(np.linalg.norm(P - coarse))
    idem = float(np.linalg.norm(P @ P - P))
    return RieszProjection(P, contour, rank, norm, change, change < rtol, idem, evaluator)


def _as_context(op_or_ctx, **kw):
    return op_or_ctx if isinstance(op_or_ctx, SpectralContext) else SpectralContext(op_or_ctx, **kw)


def _check_circle(ctx, center, radius):
    gap = np.min(np.abs(np.abs(ctx.eigenvalues - center) - radius))
    if gap <= 10.0 * np.finfo(float).eps * max(ctx.norm_F, 1.0):
        raise ContourError(f"an eigenvalue lies on the circle |z - {center}| = {radius}; adjust the radius",
                           z=center, condition=float(gap))


def riesz_projection(op, center, radius=RADIUS_PROJECTION, M=DEFAULT_M, rtol=PROJECTION_RTOL, evaluator="schur"):
    """(1/2 pi i) \\oint_{|z-c|=r} R(z) dz by the M-point trapezoid rule.

    The 2M-point rule is evaluated too; its even nodes are the M-point rule,
    so the doubling check costs nothing extra.  The 2M result is returned.
    """
    ctx = _as_context(op)
    if M < 16 or M % 2:
        raise ConfigurationError(f"contour node count must be even and >= 16, got {M}")
    if radius <= 0:
        raise ConfigurationError(f"contour radius must be positive, got {radius}")
    center = complex(center)
    _check_circle(ctx, center, radius)
    fold = ctx.real and center.imag == 0
    fine = circle_rule(center, radius, 2 * M, fold=fold)
    coarse = _coarse_half(fine)
    P_fine = ctx.contour_matrix(fine, evaluator)
    P_coarse = ctx.contour_matrix(coarse, evaluator)
    contour = {"center": [center.real, center.imag], "radius": radius, "M": M, "nodes_evaluated": int(fine.nodes.size)}
    return _finish(P_fine, P_coarse, contour, rtol, evaluator)


def unperturbed_projection(N, center, radius=RADIUS_PROJECTION, M=DEFAULT_M):
    """Trapezoid quadrature of the diagonal resolvent of L0 on a circle."""
    rule = circle_rule(complex(center), radius, 2 * M)
    lam0 = unperturbed_diagonal(N)
    d = (rule.weights[:, None] / (rule.nodes[:, None] - lam0[None, :])).sum(axis=0)
    return np.diag(d)


def projection(ctx, n, radius=RADIUS_PROJECTION, M=DEFAULT_M):
    """P_n around 2n+1, cached on the context."""
    key = (n, radius, M)
    if key not in ctx._projections:
        ctx._projections[key] = riesz_projection(ctx, 2 * n + 1, radius, M)
    return ctx._projections[key]


def strip_projection(op, region=None, order=PANEL_ORDER, rtol=PROJECTION_RTOL, evaluator="auto"):
    """(1/2 pi i) over the boundary of Pi(2N*, Y), with a panel-splitting check."""
    ctx = _as_context(op, region=region)
    region = ctx.require_region(region)
    a, Y = 2.0 * region.N_star, region.contour_height
    lam = ctx.eigenvalues
    edge_gap = np.minimum(np.abs(np.abs(lam.real) - a), np.abs(np.abs(lam.imag) - Y))
    on_edge = (np.abs(lam.real) <= a) & (np.abs(lam.imag) <= Y) & (edge_gap <= 10 * np.finfo(float).eps * max(ctx.norm_F, 1.0))
    if np.any(on_edge):
        raise ContourError("an eigenvalue lies on the strip boundary; adjust N* or Y")
    if evaluator == "auto":
        evaluator = "eigen" if ctx.eigen_factor()[2] <= EIGEN_EVALUATOR_MAX_COND else "schur"
    coarse_rule = rectangle_rule(a, Y, order, fold=ctx.real)
    fine_rule = rectangle_rule(a, Y, order, fold=ctx.real, split=2)
    P_coarse = ctx.contour_matrix(coarse_rule, evaluator)
    P_fine = ctx.contour_matrix(fine_rule, evaluator)
    contour = {**fine_rule.description, "nodes_evaluated": int(coarse_rule.nodes.size + fine_rule.nodes.size),
               "eigen_factor_condition": ctx.eigen_factor()[2]}
    return _finish(P_fine, P_coarse, contour, rtol, evaluator)


def analytic_part(ctx, center, zeta, radius=RADIUS_ANALYTIC, M=DEFAULT_M):
    """(1/2 pi i) \\oint R(z)/(z - zeta) dz: the regular part of R at zeta
    when the circle isolates a single simple eigenvalue."""
    center, zeta = complex(center), complex(zeta)
    if abs(zeta - center) >= radius:
        raise DomainError("zeta must lie inside the contour")
    _check_circle(ctx, center, radius)
    fold = ctx.real and center.imag == 0 and zeta.imag == 0
    rule = circle_rule(center, radius, 2 * M, fold=fold).scaled(lambda z: 1.0 / (z - zeta))
    return ctx.contour_matrix(rule, "schur")


# ---------------------------------------------------------------------------
# localization


@dataclass(frozen=True)
class LocalizationReport:
    rows: list
    violations: list
    strip_count: int
    N_star: int
    n_range: tuple
    uncontained: list

    @property
    def strip_matches(self):
        return self.strip_count == self.N_star

    @property
    def ok(self):
        return not self.violations and self.strip_matches and not self.uncontained

    def as_dict(self):
        return {
            "N_star": self.N_star,
            "n_range": list(self.n_range),
            "strip_count": self.strip_count,
            "strip_matches": self.strip_matches,
            "violations": self.violations,
            "uncontained": self.uncontained,
            "ok": self.ok,
        }


def localize(op, region=None, n_hi=None):
    """Count eigenvalues per disk D(2n+1, 1/16), N* <= n <= n_hi, and in the strip."""
    ctx = _as_context(op, region=region)
    region = ctx.require_region(region)
    n_hi = ctx.n_trust if n_hi is None else int(n_hi)
    lam = ctx.eigenvalues
    rows, violations = [], []
    for n in range(region.N_star, n_hi + 1):
        inside = lam[np.abs(lam - (2 * n + 1)) < region.disk_radius]
        nearest = lam[np.argmin(np.abs(lam - (2 * n + 1)))]
        rows.append({"n": n, "count": int(inside.size), "lambda_re": float(nearest.real),
                     "lambda_im": float(nearest.imag), "distance": float(abs(nearest - (2 * n + 1)))})
        if inside.size != 1:
            violations.append({"n": n, "count": int(inside.size)})
    a, h = 2 * region.N_star, region.contour_height
    strip = int(np.count_nonzero((np.abs(lam.real) < a) & (np.abs(lam.imag) < h)))
    limit = 2 * n_hi + 2
    uncontained = [[float(z.real), float(z.imag)] for z in lam if z.real < limit and not region.in_closure(z)]
    return LocalizationReport(rows, violations, strip, region.N_star, (region.N_star, n_hi), uncontained)


# ---------------------------------------------------------------------------
# resolvent bounds


def default_scan_points(region, n_hi, count=200):
    """Points outside S: on the disk boundaries, the strip boundary and the gaps."""
    a, Y = 2.0 * region.N_star, region.contour_height
    eps = 1e-12
    n_disks = max(0, n_hi - region.N_star + 1)
    strip_pts = [complex(x, Y) for x in np.linspace(-a, a, 24)]
    strip_pts += [complex(a, y) for y in np.linspace(-Y, Y, 9)]
    gaps = [complex(2 * n + 2, 0.0) for n in range(region.N_star, n_hi)]
    need = count - len(strip_pts) - len(gaps)
    per_disk = max(8, math.ceil(need / n_disks)) if n_disks else 0
    disk_pts = []
    for n in range(region.N_star, n_hi + 1):
        th = 2 * np.pi * (np.arange(per_disk) + 0.5) / per_disk
        disk_pts += list((2 * n + 1) + region.disk_radius * (1 + eps) * np.exp(1j * th))
    pts = [z for z in strip_pts + gaps + disk_pts if not region.contains(z)]
    k = 0
    while len(pts) < count:
        # pad along a vertical line left of the strip
        pts.append(complex(-a - 1.0, (k - count / 2) * 0.5))
        k += 1
    return pts


def resolvent_norm(ctx, z, iters=300, tol=1e-8):
    est = operator_norm(lambda x: ctx.res.solve(z, x), iters=iters, tol=tol,
                        adjoint=lambda x: ctx.res.solve_adjoint(z, x), shape=(ctx.N,))
    if est.converged:
        return est.value, "power"
    return float(np.linalg.norm(ctx.res.matrix(z), 2)), "svd"


@dataclass(frozen=True)
class ResolventScan:
    points: list
    norms: list
    methods: list
    max_norm: float
    argmax: complex
    bound: float
    analytic: list

    @property
    def ok(self):
        return self.max_norm <= self.bound and all(r["within_bound"] for r in self.analytic)

    def as_dict(self):
        return {
            "samples": len(self.points),
            "max_norm": self.max_norm,
            "argmax": [self.argmax.real, self.argmax.imag],
            "bound": self.bound,
            "within_bound": self.max_norm <= self.bound,
            "analytic_part": self.analytic,
            "ok": self.ok,
        }


def resolvent_bound_scan(op, region=None, sample_points=None, n_hi=None, count=200, analytic_ns=None,
                         M=DEFAULT_M, radius=RADIUS_ANALYTIC):
    """max ||R(z)|| over sample points outside S, and ||Phi_n(lambda_n)|| for a few n."""
    ctx = _as_context(op, region=region)
    region = ctx.require_region(region)
    n_hi = ctx.n_trust if n_hi is None else int(n_hi)
    pts = default_scan_points(region, n_hi, count) if sample_points is None else [complex(z) for z in sample_points]
    bad = [z for z in pts if region.contains(z)]
    if bad:
        raise DomainError(f"{len(bad)} sample points lie inside S, e.g. {bad[0]}")
    norms, methods = [], []
    for z in pts:
        v, how = resolvent_norm(ctx, z)
        norms.append(v)
        methods.append(how)
    i = int(np.argmax(norms))
    if analytic_ns is None:
        analytic_ns = sorted(set(np.linspace(region.N_star, n_hi, 5).round().astype(int).tolist())) if n_hi >= region.N_star else []
    analytic = []
    for n in analytic_ns:
        lam_n = ctx.eigenvalue(n)
        Phi = analytic_part(ctx, 2 * n + 1, lam_n, radius, M)
        val = float(np.linalg.norm(Phi, 2))
        analytic.append({"n": int(n), "lambda_re": lam_n.real, "lambda_im": lam_n.imag, "norm": val,
                         "bound": ANALYTIC_BOUND, "within_bound": val <= ANALYTIC_BOUND})
    return ResolventScan(pts, norms, methods, float(norms[i]), pts[i], RESOLVENT_BOUND, analytic)


# ---------------------------------------------------------------------------
# Psi representation of P_n - P0_n


@dataclass(frozen=True)
class PsiCheck:
    n: int
    discrepancy: float
    lhs_norm: float
    term_norms: tuple
    triangle_holds: bool
    discrepancy_at_lambda_n: float
    discrepancy_flipped_sign: float

    def as_dict(self):
        return dict(self.__dict__, term_norms=list(self.term_norms))


def psi_representation_check(op, n, radius=RADIUS_DEVIATION, M=DEFAULT_M, slack=1e-6):
    """Frobenius gap between P_n - P0_n from two contours and P_n B Psi0 + Psi B P0.

    Psi0 = sum_{k != n} P0_k / (lambda_n - lambda0_k) is the regular part of R0
    at lambda_n and Psi is the regular part of R at lambda0_n; with those
    evaluation points the identity is exact.  Evaluating Psi at lambda_n, or
    flipping the sign of Psi0, only holds to first order; both gaps are
    reported alongside.
    """
    ctx = _as_context(op)
    lam_n = ctx.eigenvalue(n)
    c = 2 * n + 1
    P = riesz_projection(ctx, c, radius, M).matrix
    P0 = unperturbed_projection(ctx.N, c, radius, M)
    lhs = P - P0
    lam0 = unperturbed_diagonal(ctx.N)
    d = np.zeros(ctx.N, dtype=complex)
    mask = np.arange(ctx.N) != n
    d[mask] = 1.0 / (lam_n - lam0[mask])
    B = ctx.B
    left = (P @ B) * d[None, :]
    Psi = analytic_part(ctx, c, c, radius, M)
    right = Psi @ B @ P0
    disc = float(np.linalg.norm(lhs - left - right))
    Psi_paper = analytic_part(ctx, c, lam_n, radius, M)
    disc_paper = float(np.linalg.norm(lhs - left - Psi_paper @ B @ P0))
    disc_flip = float(np.linalg.norm(lhs + left - right))
    t1, t2 = float(np.linalg.norm(left, 2)), float(np.linalg.norm(right, 2))
    lhs_norm = float(np.linalg.norm(lhs, 2))
    return PsiCheck(n, disc, lhs_norm, (t1, t2), lhs_norm <= t1 + t2 + slack, disc_paper, disc_flip)


# ---------------------------------------------------------------------------
# Bari-Markus sums and the decomposition residual


@dataclass(frozen=True)
class BariMarkusReport:
    ns: list
    terms: list
    partial_sums: list
    deviations: list
    final_sum: float
    bound: float
    deviation_slope: float | None
    f_norm: float

    @property
    def ok(self):
        return self.final_sum <= self.bound

    def rows(self):
        return [{"n": n, "term": t, "partial_sum": s, "deviation": d}
                for n, t, s, d in zip(self.ns, self.terms, self.partial_sums, self.deviations)]

    def as_dict(self):
        return {"n_from": self.ns[0] if self.ns else None, "n_to": self.ns[-1] if self.ns else None,
                "final_sum": self.final_sum, "bound": self.bound, "within_bound": self.ok,
                "deviation_slope": self.deviation_slope, "f_norm_supplied": self.f_norm,
                "note": "finite-section partial sum; the tail beyond the trusted range is not computed"}


def _unit(f):
    f = np.asarray(f, dtype=complex)
    nrm = float(np.linalg.norm(f))
    if nrm == 0:
        raise ConfigurationError("f must be non-zero")
    return f / nrm, nrm


def bari_markus_sum(op, f, N_from=None, n_to=None, region=None, radius=RADIUS_PROJECTION, M=DEFAULT_M):
    """Partial sums of sum_n |(P_n f)_n - f_n|^2 = sum_n ||P0_n (P_n - P0_n) f||^2."""
    ctx = _as_context(op, region=region)
    region = ctx.require_region(region)
    N_from = region.N_star if N_from is None else int(N_from)
    if N_from < region.N_star:
        raise ConfigurationError(f"N_from = {N_from} is below N* = {region.N_star}")
    n_to = ctx.n_trust if n_to is None else int(n_to)
    f, f_norm = _unit(f)
    ns, terms, devs = [], [], []
    for n in range(N_from, n_to + 1):
        pr = projection(ctx, n, radius, M)
        g = pr.matrix @ f
        terms.append(float(abs(g[n] - f[n]) ** 2))
        D = pr.matrix.copy()
        D[n, n] -= 1.0
        devs.append(float(np.linalg.norm(D, 2)))
        ns.append(n)
    partial = np.cumsum(terms).tolist() if terms else []
    slope = None
    if len(devs) >= 3 and min(devs) > 0:
        slope = float(np.polyfit(np.log(np.asarray(ns, float) + 1), np.log(devs), 1)[0])
    final = float(partial[-1]) if partial else 0.0
    return BariMarkusReport(ns, terms, partial, devs, final, BARI_MARKUS_BOUND, slope, f_norm)


def trusted_vector(ctx, seed=0):
    """A random unit vector in the span of the trusted eigenvectors."""
    rng = np.random.default_rng(seed)
    idx = ctx.order[: ctx.n_trust + 1]
    c = rng.standard_normal(idx.size)
    f = ctx.dec.right_eigenvectors[:, idx] @ c
    if ctx.real:
        f = f.real if np.abs(f.imag).max() < 1e-10 * np.abs(f).max() else f
    return f / np.linalg.norm(f)


@dataclass(frozen=True)
class DecompositionReport:
    residual: float
    final_spread: float
    sup_norm_spread: float
    orders: int
    untrusted_weight: float
    sum_rule_error: float

    def as_dict(self):
        return dict(self.__dict__)


def decomposition_residual(op, f, region=None, orders=20, seed=0, radius=RADIUS_PROJECTION, M=DEFAULT_M):
    """||f - S* f - sum_{N* <= k <= n_trust} P_k f|| and a reordering witness.

    ``untrusted_weight`` is the relative size of f's eigen-coordinates beyond
    the trusted range; the residual is only expected to vanish when it does.
    """
    ctx = _as_context(op, region=region)
    region = ctx.require_region(region)
    f, _ = _unit(f)
    S = strip_projection(ctx, region)
    pieces = [S.matrix @ f]
    for n in range(region.N_star, ctx.n_trust + 1):
        pieces.append(projection(ctx, n, radius, M).matrix @ f)
    pieces = np.array(pieces)
    total = pieces.sum(axis=0)
    residual = float(np.linalg.norm(f - total))

    V = ctx.dec.right_eigenvectors[:, ctx.order]
    coords = np.linalg.solve(V, f)
    untrusted = float(np.linalg.norm(coords[ctx.n_trust + 1:]) / max(np.linalg.norm(coords), 1e-300))
    trusted = V[:, : ctx.n_trust + 1] @ coords[: ctx.n_trust + 1]
    sum_rule = float(np.linalg.norm(total - trusted))

    rng = np.random.default_rng(seed)
    finals, sups = [], []
    for _ in range(orders):
        perm = rng.permutation(len(pieces))
        partial = np.cumsum(pieces[perm], axis=0)
        finals.append(partial[-1])
        sups.append(float(np.linalg.norm(partial, axis=1).max()))
    finals = np.array(finals)
    spread = float(max(np.linalg.norm(a - b) for a in finals for b in finals))
    return DecompositionReport(residual, spread, float(max(sups) - min(sups)), orders, untrusted, sum_rule)


def projection_table(op, ns, radius=RADIUS_PROJECTION, M=DEFAULT_M):
    """Per-n rows: lambda_n, |lambda_n - lambda0_n|, ||P_n||, ||P_n - P0_n||."""
    ctx = _as_context(op)
    rows = []
    for n in ns:
        lam = ctx.eigenvalue(n)
        pr = projection(ctx, n, radius, M)
        D = pr.matrix.copy()
        D[n, n] -= 1.0
        rows.append({"n": n, "lambda_re": lam.real, "lambda_im": lam.imag, "shift": abs(lam - (2 * n + 1)),
                     "P_norm": pr.norm_estimate, "deviation": float(np.linalg.norm(D, 2)),
                     "rank": pr.rank_estimate, "refinement_change": pr.refinement_change})
    return rows
