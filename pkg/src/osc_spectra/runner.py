"""Command pipelines behind the CLI.  Each returns (findings, violations, provenance)."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import assembly, counterexample, hermite, hilbert, potential, projections
from .eigen import DEFLATION_TOL, POLE_TOL, operator_norm
from .errors import ConfigurationError, DomainError, NotInVError
from .parallel import thread_count
from .report import FigureSpec, ReportWriter, Series

EXIT_OK, EXIT_ERROR, EXIT_FINDING = 0, 1, 2


@dataclass(frozen=True)
class RunResult:
    status: int
    report: dict
    out_dir: str


def _grid(cfg, pot):
    g = cfg.grid
    if g.kind == "auto":
        return None
    if g.kind == "gauss-hermite-modified":
        return hermite.build_grid(g.kind, Q=g.Q or max(4 * cfg.N, 256))
    params = {"order": g.order, "panels": g.panels or 1}
    if g.interval is not None:
        params["interval"] = tuple(g.interval)
    else:
        params["X"] = math.sqrt(2 * (2 * cfg.N + 1)) + 6.0
    return hermite.build_grid(g.kind, **params)


def _base_provenance(cfg):
    return {
        "tolerances": {
            "assembly_rtol": assembly.ASSEMBLY_RTOL,
            "trust_tol": assembly.TRUST_TOL,
            "deflation_tol": DEFLATION_TOL,
            "pole_tol": POLE_TOL,
            "projection_rtol": cfg.contour.rtol,
        },
        "seed": cfg.seed,
        "threads": thread_count(),
    }


class _Operator:
    """Assembled truncation plus everything derived from it that several commands share."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.pot = cfg.build_potential()
        self.op = assembly.assemble(self.pot, cfg.N, grid=_grid(cfg, self.pot))
        self.trust = assembly.truncation_trust_index(self.op, certify=cfg.certify_trust, return_report=True)
        self.region = None
        self.region_note = None
        self.profile = None
        if self.pot.pointwise:
            self.profile = potential.v_norm_profile(self.pot, cfg.N - 1)
            try:
                self.region = projections.build_enclosure(self.profile)
            except NotInVError as exc:
                self.region_note = str(exc)
        else:
            self.region_note = "block-operator perturbation: no pointwise V-norm profile"
        self.ctx = projections.SpectralContext(self.op, self.region, n_trust=self.trust.n_trust)

    def provenance(self):
        return {
            "N": self.cfg.N,
            "grid": self.op.grid,
            "assembly": self.op.metadata,
            "n_trust": self.trust.n_trust,
            "trust_reason": self.trust.reason,
            "trust_certified": self.trust.certified,
            "region": None if self.region is None else self.region.as_dict(),
            "region_note": self.region_note,
            "contour": self.cfg.contour.model_dump(),
        }


# ---------------------------------------------------------------------------


def cmd_spectrum(cfg, w):
    S = _Operator(cfg)
    ctx = S.ctx
    lam = ctx.eigenvalues[ctx.order]
    res = ctx.dec.residuals[ctx.order]
    rows = []
    for k, (z, r) in enumerate(zip(lam, res)):
        rows.append({"k": k, "re": z.real, "im": z.imag, "shift": abs(z - (2 * k + 1)), "residual": r,
                     "trusted": k <= S.trust.n_trust})
    w.table("eigenvalues", ["k", "re", "im", "shift", "residual", "trusted"], rows)
    w.figure(FigureSpec("eigenvalue_shifts", "Eigenvalue shifts from 2k+1", "k", "|lambda_k - (2k+1)|",
                        (Series("eigenvalues", "k", "shift", "shift", "points"),), logy=True))
    findings = {
        "eigenvalues": [[z.real, z.imag] for z in lam],
        "max_residual": float(res.max()),
        "qr_sweeps": ctx.dec.iterations_used,
        "n_trust": S.trust.n_trust,
        "max_trusted_shift_under_doubling": S.trust.max_shift,
    }
    violations = []
    if S.profile is not None:
        w.table("profile", ["k", "norm"], [{"k": k, "norm": v} for k, v in enumerate(S.profile.norms)])
    if S.region is not None:
        loc = projections.localize(ctx)
        findings["localization"] = loc.as_dict()
        w.table("localization", ["n", "count", "lambda_re", "lambda_im", "distance"], loc.rows)
        if not loc.ok:
            violations.append("localization")
    return findings, violations, S.provenance()


def _vector(cfg, vc, ctx, rng_seed):
    N = ctx.N
    if vc.kind == "hermite":
        if vc.index >= N:
            raise ConfigurationError(f"vectors.index {vc.index} is outside the truncation N={N}")
        f = np.zeros(N)
        f[vc.index] = 1.0
        return f"h{vc.index}", f
    if vc.kind == "random":
        f = np.random.default_rng(rng_seed).standard_normal(N)
        return "random", f / np.linalg.norm(f)
    return "random-trusted", projections.trusted_vector(ctx, rng_seed)


def cmd_projections(cfg, w):
    S = _Operator(cfg)
    ctx, region, c = S.ctx, S.region, cfg.contour
    if region is None:
        raise DomainError(f"projections need an enclosure region: {S.region_note}")
    violations = []
    loc = projections.localize(ctx)
    if not loc.ok:
        violations.append("localization")
    strip = projections.strip_projection(ctx, region, order=c.panel_order, rtol=c.rtol)
    if strip.rank_estimate != region.N_star:
        violations.append("strip_rank")
    ns = list(range(region.N_star, S.trust.n_trust + 1))
    good = [r["n"] for r in loc.rows if r["count"] == 1]
    table = projections.projection_table(ctx, [n for n in ns if n in good], c.radius_projection, c.M)
    w.table("projections", ["n", "lambda_re", "lambda_im", "shift", "P_norm", "deviation", "rank",
                            "refinement_change"], table)
    if any(r["P_norm"] > projections.PROJECTION_BOUND for r in table):
        violations.append("projection_norm")
    scan = projections.resolvent_bound_scan(ctx, region, count=cfg.scan.samples,
                                            analytic_ns=_spread(good, cfg.scan.analytic_ns),
                                            M=c.M, radius=c.radius_analytic)
    w.table("resolvent_scan", ["re", "im", "norm", "method"],
            [{"re": z.real, "im": z.imag, "norm": v, "method": m} for z, v, m in zip(scan.points, scan.norms, scan.methods)])
    w.table("analytic_part", ["n", "lambda_re", "lambda_im", "norm", "bound"], scan.analytic)
    if scan.max_norm > projections.RESOLVENT_BOUND:
        violations.append("resolvent_bound")
    if not all(r["within_bound"] for r in scan.analytic):
        violations.append("analytic_part_bound")
    psi_rows = [projections.psi_representation_check(ctx, n, c.radius_deviation, c.M).as_dict()
                for n in _spread(good, 3)]
    w.table("psi_check", ["n", "discrepancy", "lhs_norm", "triangle_holds", "discrepancy_at_lambda_n",
                          "discrepancy_flipped_sign"], psi_rows)
    f = projections.trusted_vector(ctx, cfg.seed)
    dec = projections.decomposition_residual(ctx, f, region, seed=cfg.seed, radius=c.radius_projection, M=c.M)
    c_w = _weight_constant(S)
    if table:
        w.figure(FigureSpec("projection_norms", "Projection norms and deviations", "n", "norm",
                            (Series("projections", "n", "P_norm", "||P_n||"),
                             Series("projections", "n", "deviation", "||P_n - P0_n||")),
                            logy=True, hlines=((projections.PROJECTION_BOUND, "bound 32"),)))
    findings = {
        "localization": loc.as_dict(),
        "strip": {"rank": strip.rank_estimate, "N_star": region.N_star, "norm": strip.norm_estimate,
                  "refinement_change": strip.refinement_change, "idempotency_error": strip.idempotency_error,
                  "evaluator": strip.evaluator, "contour": strip.contour},
        "max_projection_norm": max((r["P_norm"] for r in table), default=None),
        "resolvent_scan": scan.as_dict(),
        "psi_representation": psi_rows,
        "decomposition": dec.as_dict(),
        "weight_constant_estimate": c_w,
    }
    return findings, violations, S.provenance()


def _spread(ns, count):
    if not ns or count <= 0:
        return []
    idx = np.unique(np.linspace(0, len(ns) - 1, min(count, len(ns))).round().astype(int))
    return [ns[i] for i in idx]


def _weight_constant(S, size=512):
    """Finite-section l2(W_psi) norm of G, with W_psi built from the computed profile."""
    psi = hilbert.psi_from_profile(S.profile)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        W = hilbert.construct_weight(psi, 3.0, psi.size)
    K = min(size, W.K)
    est = hilbert.weighted_norm_estimate("G", W, K, method="svd", plateau_levels=2)
    return {"value": est.value, "truncation": K, "weight_blocks": list(W.T),
            "warnings": [str(c.message) for c in caught]}


def cmd_bari_markus(cfg, w):
    S = _Operator(cfg)
    ctx, region, c = S.ctx, S.region, cfg.contour
    if region is None:
        raise DomainError(f"the Bari-Markus sum needs an enclosure region: {S.region_note}")
    rows, results, violations = [], [], []
    for i, vc in enumerate(cfg.vectors):
        name, f = _vector(cfg, vc, ctx, cfg.seed + i)
        rep = projections.bari_markus_sum(ctx, f, region=region, radius=c.radius_projection, M=c.M)
        results.append({"vector": name, **rep.as_dict()})
        rows += [{"vector": name, **r} for r in rep.rows()]
        if not rep.ok:
            violations.append(f"bari_markus:{name}")
    w.table("bari_markus", ["vector", "n", "term", "partial_sum", "deviation"], rows)
    first = [r for r in rows if r["vector"] == results[0]["vector"]] if results else []
    if first:
        w.table("deviations", ["n", "deviation"], [{"n": r["n"], "deviation": r["deviation"]} for r in first])
        w.figure(FigureSpec("deviations", "Projection deviations", "n", "||P_n - P0_n||",
                            (Series("deviations", "n", "deviation", "deviation"),), logy=True))
    findings = {"sums": results, "bound": projections.BARI_MARKUS_BOUND,
                "note": "finite-section surrogate: partial sum over [N*, n_trust] plus the per-term decay"}
    return findings, violations, S.provenance()


def _weight_for(hc, K):
    if hc.weight == "flat":
        return hilbert.WeightSequence.constant(K)
    if hc.weight == "power":
        return hilbert.WeightSequence.power(K, hc.alpha)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", hilbert.TruncatedConstructionWarning)
        return hilbert.construct_weight(lambda k: k + 1.0, 3.0, K)


def cmd_hilbert(cfg, w):
    hc = cfg.hilbert
    K = hc.truncation
    W = _weight_for(hc, max(K, hc.difference_truncation))
    violations = []
    est = hilbert.weighted_norm_estimate("G", W, K, method=hc.method, seed=cfg.seed)
    w.table("norm_plateau", ["truncation", "estimate"], [{"truncation": a, "estimate": b} for a, b in est.plateau])
    w.figure(FigureSpec("norm_plateau", "Finite-section norm of G", "truncation", "norm estimate",
                        (Series("norm_plateau", "truncation", "estimate", hc.weight),), logx=True,
                        hlines=((math.pi, "pi"),) if hc.weight == "flat" else ()))
    if hc.weight == "flat" and est.value > math.pi + 0.01:
        violations.append("hilbert_norm")
    tau = hilbert.ShiftSequence.random(max(K, hc.difference_truncation), hc.shift_bound, cfg.seed, hc.complex_shifts)
    diff = hilbert.difference_norm(tau, hc.difference_truncation)
    if not diff["within_bound"]:
        violations.append("difference_norm")
    Kv = min(K, 512)
    scalar = hilbert.weighted_norm_estimate("G_tau", W, Kv, tau=tau, method="svd", plateau_levels=1).value
    vec = hilbert.vector_norm_estimate(tau, W, Kv, columns=hc.columns, seed=cfg.seed).value
    if vec > scalar + 1e-8:
        violations.append("vector_valued_norm")
    rng = np.random.default_rng(cfg.seed)
    x, y = rng.standard_normal(K), rng.standard_normal(K)
    anti = abs(float(hilbert.apply_G(x) @ y + x @ hilbert.apply_G(y)))
    a2 = hilbert.a2_profile(W, min(W.K, 4096))
    findings = {
        "weight": W.label,
        "norm_estimate": est.as_dict(),
        "pi_bound": math.pi + 0.01 if hc.weight == "flat" else None,
        "difference": diff,
        "vector_valued": {"truncation": Kv, "columns": hc.columns, "scalar_norm": scalar, "block_norm": vec,
                          "within": vec <= scalar + 1e-8},
        "antisymmetry_defect": anti,
        "a2": a2.as_dict(),
    }
    return findings, violations, {"truncation": K}


def _psi(wc, cfg):
    if wc.psi == "linear":
        return (lambda k: k + 1.0), wc.K_max, "k+1"
    if wc.psi == "exponential":
        return (lambda k: 2.0 ** np.minimum(k, 1000)), wc.K_max, "2^k"
    pot = cfg.build_potential()
    prof = potential.v_norm_profile(pot, wc.profile_K)
    psi = hilbert.psi_from_profile(prof)
    return psi, min(wc.K_max, psi.size), "1/sup_{j>=k} ||b h_j||"


def cmd_weights(cfg, w):
    wc = cfg.weights
    psi, K, label = _psi(wc, cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        W = hilbert.construct_weight(psi, wc.R, K)
        N = min(wc.r_sum_N, K - 1)
        rs = hilbert.r_sum_check(W, N)
    psi_vals = hilbert._psi_array(psi, K)
    violations = []
    below = bool(np.all(W.values <= psi_vals))
    gaps = [b / a for a, b in zip(W.t, W.t[1:])]
    if not below:
        violations.append("weight_above_psi")
    if any(g < wc.R for g in gaps):
        violations.append("gap_ratio")
    if rs.envelope_holds is False:
        violations.append("r_envelope")
    s_partial, s_bound = hilbert.s_series(W)
    if s_bound is not None and s_partial.max() > s_bound:
        violations.append("s_series")
    a2 = hilbert.a2_profile(W, min(wc.a2_scan, K))
    w.table("weight", ["index", "value"], W.to_rows())
    n = np.arange(rs.r.size)
    w.table("r_sum", ["n", "r", "partial_sum", "envelope"],
            [{"n": int(i), "r": rs.r[i], "partial_sum": rs.partial_sums[i],
              "envelope": None if rs.envelope is None else rs.envelope[i]} for i in n])
    w.json("weights_log", W.construction_log())
    w.figure(FigureSpec("r_sum", "r(n) against its envelope", "n", "r(n)",
                        (Series("r_sum", "n", "r", "r(n)", "lines"),
                         Series("r_sum", "n", "envelope", "2 + (beta n)^gamma", "lines")), logy=True))
    findings = {
        "psi": label,
        "R": wc.R,
        "blocks": {"T": list(W.T), "t": list(W.t), "gap_ratios": gaps},
        "below_psi": below,
        "r_sum": rs.as_dict(),
        "s_series": {"final": float(s_partial[-1]), "max": float(s_partial.max()), "bound": s_bound},
        "a2": a2.as_dict(),
        "warnings": [str(c.message) for c in caught],
    }
    return findings, violations, {"K_max": K}


def cmd_counterexample(cfg, w):
    bc = cfg.blocks
    spec = counterexample.BlockSpec(bc.t, bc.m_max, None if bc.k_sequence is None else tuple(bc.k_sequence))
    wit = counterexample.non_basis_witness(spec, seed=cfg.seed)
    rows = []
    for r in wit.rows:
        fn = counterexample.functional_norms(r.k)
        rows.append({"m": r.m, "k": r.k, "lambda_plus": r.lambda_plus, "lambda_minus": r.lambda_minus,
                     "closed_plus": r.closed_plus, "closed_minus": r.closed_minus, "phi_norm": r.phi_norm,
                     "gram_phi_norm": fn.gram_phi_norm, "bound": r.bound, "block_norm": r.block_norm})
    w.table("counterexample", ["m", "k", "lambda_plus", "lambda_minus", "closed_plus", "closed_minus",
                               "phi_norm", "gram_phi_norm", "bound", "block_norm"], rows)
    w.figure(FigureSpec("functional_norms", "Coordinate functional norms", "m", "norm",
                        (Series("counterexample", "m", "phi_norm", "||Phi_m||"),
                         Series("counterexample", "m", "bound", "1/k_m", "lines")), logy=True))
    violations = []
    if wit.max_eigen_error > 1e-12:
        violations.append("eigenvalue_closed_form")
    if not wit.phi_bound_holds:
        violations.append("phi_bound")
    agreement = max(abs(r["phi_norm"] - r["gram_phi_norm"]) / r["phi_norm"] for r in rows)
    sweep = []
    if bc.sweep:
        grid = np.arange(1, bc.sweep + 1) / (bc.sweep + 1)
        for t in grid:
            for k in grid:
                est = operator_norm(counterexample.block_matrix(t, k), iters=5000, tol=1e-15).value
                lo, hi = counterexample.norm_bounds(t, k)["intersection"]
                sweep.append({"t": t, "k": k, "norm": est, "lower": lo, "upper": hi,
                              "inside": lo - 1e-12 <= est <= hi + 1e-12})
        w.table("norm_sweep", ["t", "k", "norm", "lower", "upper", "inside"], sweep)
        if not all(r["inside"] for r in sweep):
            violations.append("block_norm_bounds")
    findings = {
        "t": bc.t, "m_max": bc.m_max,
        "max_eigen_error": wit.max_eigen_error,
        "sup_block_norm": wit.sup_block_norm,
        "norm_gap": wit.norm_gap,
        "phi_bound_holds": wit.phi_bound_holds,
        "phi_increasing": wit.phi_increasing,
        "max_relative_gram_disagreement": agreement,
        "reconstruction_residual": wit.reconstruction_residual,
        "sweep_cells": len(sweep),
        "sweep_all_inside": all(r["inside"] for r in sweep) if sweep else None,
    }
    return findings, violations, {"block_spec": spec.to_config()}


def cmd_katsnelson(cfg, w):
    kc = cfg.katsnelson
    rows, violations = [], []
    for rho in kc.rho:
        res = counterexample.katsnelson_check(counterexample.DissipativeSpectrum.shifted_harmonic(kc.window, rho))
        rows.append({"rho": rho, **res.as_dict()})
        if not (res.passes and res.pair_within_bound and res.s_within_bound):
            violations.append(f"katsnelson:rho={rho:g}")
    cols = ["rho", "window", "pair_sup", "pair_bound", "s_star", "s_star_unweighted", "s_bound", "passes"]
    w.table("katsnelson", cols, rows)
    w.figure(FigureSpec("katsnelson", "Pair supremum against the shifted-model bound", "rho", "value",
                        (Series("katsnelson", "rho", "pair_sup", "pair_sup"),
                         Series("katsnelson", "rho", "pair_bound", "bound"))))
    return {"results": rows}, violations, {"window": kc.window}


def cmd_decay(cfg, w):
    dc = cfg.decay
    exps = []
    for p in dc.exponents:
        try:
            exps.append({"p": p, "t": potential.t_exponent(p), "note": ""})
        except DomainError as exc:
            exps.append({"p": p, "t": None, "note": str(exc)})
    w.table("t_exponents", ["p", "t", "note"], exps)
    pot = cfg.build_potential()
    prof = potential.v_norm_profile(pot, dc.K)
    fit = potential.decay_fit(prof, dc.n_min, dc.n_max)
    ks = np.arange(prof.norms.size)
    rows = [{"k": int(k), "norm": float(v), "fit": float(math.exp(fit.intercept) * (k + 1.0) ** fit.slope)}
            for k, v in zip(ks, prof.norms)]
    w.table("profile", ["k", "norm", "fit"], rows)
    w.figure(FigureSpec("profile", "||b h_k|| and the power-law fit", "k+1", "||b h_k||",
                        (Series("profile", "k", "norm", "profile", "points"),
                         Series("profile", "k", "fit", f"slope {fit.slope:.4f}", "lines")), logx=True, logy=True))
    findings = {"t_exponents": exps, "fit": {"slope": fit.slope, "intercept": fit.intercept,
                                              "window": list(fit.window), "log_factor_detected": fit.log_factor_detected},
                "profile_sup": prof.sup, "profile_refinement_change": prof.refinement_change}
    return findings, [], {"K": dc.K, "potential": cfg.potential}


COMMANDS = {
    "spectrum": cmd_spectrum,
    "projections": cmd_projections,
    "bari-markus": cmd_bari_markus,
    "hilbert": cmd_hilbert,
    "weights": cmd_weights,
    "counterexample": cmd_counterexample,
    "katsnelson": cmd_katsnelson,
    "decay": cmd_decay,
}


def run(cfg):
    """Dispatch a validated RunConfig; returns a RunResult (status 0 or 2).

    Library errors propagate; the CLI maps them to status 1.
    """
    t0 = time.perf_counter()
    w = ReportWriter(cfg.out, cfg.command, cfg, plots=cfg.plots)
    findings, violations, prov = COMMANDS[cfg.command](cfg, w)
    status = EXIT_FINDING if violations else EXIT_OK
    report = w.finish(findings, {**_base_provenance(cfg), **prov}, violations, status, time.perf_counter() - t0)
    return RunResult(status, report, str(w.out_dir))
