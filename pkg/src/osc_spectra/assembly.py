"""Galerkin truncations of L = L0 + B in the Hermite basis."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AssemblyError, ConfigurationError, DomainError
from .hermite import default_grid, hermite_table
from .potential import Potential

ASSEMBLY_RTOL = 1e-8
TRUST_TOL = 1e-8


def unperturbed_diagonal(N):
    return 2.0 * np.arange(N) + 1.0


@dataclass(frozen=True)
class TruncatedOperator:
    N: int
    matrix: np.ndarray
    source: dict
    grid: dict | None
    assembly_rtol: float
    metadata: dict = field(default_factory=dict)

    @property
    def perturbation(self):
        return self.matrix - np.diag(unperturbed_diagonal(self.N))

    @property
    def is_block(self):
        return self.source.get("kind") == "block-operator"

    @property
    def is_unperturbed(self):
        return not np.any(self.perturbation)

    def leading(self, M):
        """Leading M x M corner as an operator of its own."""
        return TruncatedOperator(M, self.matrix[:M, :M].copy(), self.source, self.grid, self.assembly_rtol,
                                 {**self.metadata, "leading_of": self.N})


def _galerkin(vals, grid, N):
    H = hermite_table(grid.nodes, N - 1)
    return (H * (vals * grid.weights)[None, :]) @ H.T


def _source(pot, fn):
    if pot is None:
        return {"kind": "callable", "label": getattr(fn, "__name__", "callable")}
    try:
        return pot.to_config()
    except ConfigurationError:
        # sums and user formulas have no config form
        return {"kind": "callable", "label": str(pot.params.get("label", pot.params.get("name")))}


def assemble(b, N, grid=None, rtol=ASSEMBLY_RTOL, potential=None):
    """Matrix of L0 + b on span{h_0..h_{N-1}}.

    Each entry is recomputed on the refined grid; one more refinement is
    allowed before the worst entry is reported as an AssemblyError.
    """
    if N < 2:
        raise ConfigurationError(f"truncation size must be >= 2, got {N}")
    pot = b if isinstance(b, Potential) else potential
    if pot is not None and pot.kind == "block-operator":
        return assemble_block(pot.params["spec"], N)
    grid = default_grid(N, pot) if grid is None else grid
    fn = getattr(b, "evaluate", b)
    diag = np.diag(unperturbed_diagonal(N))
    source = _source(pot, b)

    vals = np.asarray(fn(grid.nodes)) * np.ones(grid.nodes.size)
    if not np.any(vals):
        return TruncatedOperator(N, diag.astype(complex), source, grid.describe(), rtol,
                                 {"max_rel_discrepancy": 0.0, "refinements": 0})
    B = _galerkin(vals, grid, N)
    current = grid
    for refinements in (1, 2):
        current = current.refine()
        fine_vals = np.asarray(fn(current.nodes)) * np.ones(current.nodes.size)
        B_fine = _galerkin(fine_vals, current, N)
        scale = max(np.abs(B_fine).max(), np.finfo(float).tiny)
        diff = np.abs(B_fine - B)
        worst = np.unravel_index(int(np.argmax(diff)), diff.shape)
        rel = float(diff[worst] / scale)
        if rel < rtol:
            if not np.iscomplexobj(B_fine):
                B_fine = 0.5 * (B_fine + B_fine.T)
            meta = {"max_rel_discrepancy": rel, "refinements": refinements, "worst_entry": [int(worst[0]), int(worst[1])],
                    "accepted_grid": current.describe()}
            return TruncatedOperator(N, (diag + B_fine).astype(complex), source, grid.describe(), rtol, meta)
        coarse_entry = complex(B[worst])
        B = B_fine
    raise AssemblyError(
        f"entry ({worst[0]}, {worst[1]}) of the perturbation changed by {rel:.2e} (relative) under refinement",
        coarse=coarse_entry, fine=complex(B_fine[worst]), where=(int(worst[0]), int(worst[1])),
    )


def operator_from_matrix(A, label="matrix"):
    """Wrap an explicit N x N truncation (e.g. diag(2j+1) plus a hand-built B)."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 2:
        raise ConfigurationError(f"expected a square matrix of size >= 2, got shape {A.shape}")
    return TruncatedOperator(A.shape[0], A.copy(), {"kind": "matrix", "label": label}, None, 0.0,
                             {"max_rel_discrepancy": 0.0})


def assemble_block(spec, N_even):
    """diag(2j+1) plus the 2x2 blocks b(m) placed on index pairs (2m, 2m+1)."""
    if N_even % 2 or N_even < 2:
        raise ConfigurationError(f"block assembly needs an even size >= 2, got {N_even}")
    M = N_even // 2
    if M > spec.m_max + 1:
        raise ConfigurationError(f"block spec has {spec.m_max + 1} blocks, size {N_even} needs {M}")
    A = np.diag(unperturbed_diagonal(N_even)).astype(complex)
    for m in range(M):
        A[2 * m:2 * m + 2, 2 * m:2 * m + 2] += spec.block(m)
    source = {"kind": "block-operator", "spec": spec.to_config()}
    return TruncatedOperator(N_even, A, source, None, 0.0, {"max_rel_discrepancy": 0.0, "blocks": M})


@dataclass(frozen=True)
class TrustReport:
    n_trust: int
    default: int
    certified: bool
    max_shift: float
    shifts: np.ndarray | None
    reason: str


def truncation_trust_index(op, certify=False, tol=TRUST_TOL, doubled=None, return_report=False):
    """Largest mode index whose truncation eigenvalue is taken as an eigenvalue of L.

    The default is N/2.  With ``certify`` the operator is re-assembled at 2N
    and the index becomes the last n with every eigenvalue up to n moving by
    less than ``tol``; that can lower the default or extend it.  Block and
    unperturbed operators are exact and need no certificate.
    """
    from .eigen import eigvals

    N = op.N
    default = N // 2
    if op.is_block:
        rep = TrustReport(N - 1, default, True, 0.0, None, "block-diagonal: no truncation coupling")
    elif op.is_unperturbed:
        rep = TrustReport(default, default, True, 0.0, None, "unperturbed: eigenvalues exact")
    elif not certify or (doubled is None and op.source.get("kind") in ("matrix", "callable")):
        why = "default N/2 rule" if not certify else "default N/2 rule (source cannot be re-assembled at 2N)"
        rep = TrustReport(default, default, False, float("nan"), None, why)
    else:
        if doubled is None:
            pot = Potential.from_config(op.source)
            doubled = assemble(pot, 2 * N)
        lam = np.sort_complex(eigvals(op.matrix))
        lam = lam[np.argsort(lam.real, kind="stable")]
        ref = eigvals(doubled.matrix if hasattr(doubled, "matrix") else doubled)
        shifts = np.array([np.min(np.abs(ref - x)) for x in lam])
        bad = np.flatnonzero(shifts >= tol)
        n_trust = int(bad[0]) - 1 if bad.size else N - 1
        rep = TrustReport(n_trust, default, True, float(shifts[: max(n_trust + 1, 1)].max()), shifts,
                          f"doubling N={N} -> {2 * N}, tol {tol:g}")
    return rep if return_report else rep.n_trust


def write_matrix(path, op):
    """Header '<N> <rows> complex', then one row per line as 're im' pairs."""
    A = np.asarray(getattr(op, "matrix", op), dtype=complex)
    n, rows = A.shape[1], A.shape[0]
    with open(path, "w") as fh:
        fh.write(f"{n} {rows} complex\n")
        for row in A:
            fh.write(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row))
            fh.write("\n")


def read_matrix(path):
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 3 or head[2] != "complex":
            raise DomainError(f"{path}: bad matrix header {' '.join(head)!r}")
        n, rows = int(head[0]), int(head[1])
        tokens = np.array(fh.read().split(), dtype=float)
    if tokens.size != 2 * n * rows:
        raise DomainError(f"{path}: expected {2 * n * rows} numbers, found {tokens.size}")
    pairs = tokens.reshape(rows, n, 2)
    return pairs[..., 0] + 1j * pairs[..., 1]
