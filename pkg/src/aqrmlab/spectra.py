"""Eigenproblems and static observables.

Dense Hermitian solves below DENSE_LIMIT; above it a Lanczos iteration with
full reorthogonalization and a deterministic start vector.  The returned
eigenvector phases are fixed so the largest-magnitude amplitude is real
positive, which makes ground-state overlaps reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import models
from .hilbert import (
    DENSE_LIMIT,
    Operator,
    SpaceShape,
    StateVector,
    hermiticity_defect,
    parity_operator,
    position_quadrature,
)

RESIDUAL_TOL = 1e-9
HERMITIAN_TOL = 1e-12


class IterationError(RuntimeError):
    """Iterative eigensolver failed to converge; diagnostics attached."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class EigenResult:
    energies: np.ndarray
    states: list
    cutoff_used: int
    converged: bool = True

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        object.__setattr__(self, "energies", e)
        if np.any(np.diff(e) < -1e-12):
            raise ValueError("energies must be sorted ascending")


def _fix_phase(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    ph = vec[k] / abs(vec[k])
    return vec / ph


def _matrix_norm(h) -> float:
    # infinity norm: cheap upper bound on the spectral norm
    m = h.matrix if isinstance(h, Operator) else h
    import scipy.sparse as sp
    if sp.issparse(m):
        return float(abs(m).sum(axis=1).max())
    return float(np.max(np.sum(np.abs(m), axis=1)))


def _check_hermitian(h: Operator):
    if not h.hermitian_hint:
        defect = hermiticity_defect(h.matrix)
        if defect > HERMITIAN_TOL:
            raise ValueError(f"low_spectrum needs a Hermitian operator; "
                             f"defect {defect:.3e}")


def lanczos_lowest(matvec, dim: int, k: int, max_iter: int = None,
                   tol: float = RESIDUAL_TOL, seed: int = 7,
                   norm_scale: float = 1.0):
    """k lowest eigenpairs by Lanczos with full reorthogonalization.

    Deterministically seeded start vector; iterates until every requested
    Ritz pair has residual |beta_m s_mi| <= tol * norm_scale.
    """
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    if max_iter is None:
        max_iter = min(dim, max(8 * k + 60, 120))
    basis = np.empty((max_iter, dim), dtype=complex)
    alphas, betas = [], []
    basis[0] = v
    w = matvec(v)
    alpha = np.vdot(v, w).real
    alphas.append(alpha)
    w = w - alpha * v
    beta = 0.0
    m = 1
    check_every = max(10, 2 * k)
    for j in range(1, max_iter):
        # full reorthogonalization, twice for numerical safety
        for _ in range(2):
            w = w - basis[:j].T @ (basis[:j].conj() @ w)
        beta = np.linalg.norm(w)
        if beta < 1e-14:
            # invariant subspace found; spectrum of T is exact
            m = j
            break
        betas.append(beta)
        v = w / beta
        basis[j] = v
        w = matvec(v) - beta * basis[j - 1]
        alpha = np.vdot(v, w).real
        alphas.append(alpha)
        w = w - alpha * v
        m = j + 1
        if m >= k and (m % check_every == 0 or m == max_iter):
            theta, s = _tridiag_eig(alphas, betas)
            resid = abs(beta) * np.abs(s[-1, :k])
            if np.all(resid <= tol * norm_scale):
                break
    theta, s = _tridiag_eig(alphas, betas)
    if len(theta) < k:
        raise IterationError(
            "Lanczos basis smaller than requested eigenpair count",
            {"basis_size": len(theta), "k": k})
    # `beta` is the edge coefficient at exit: tiny if an invariant subspace
    # was found, otherwise the last appended off-diagonal element.
    resid = abs(beta) * np.abs(s[-1, :k])
    if np.any(resid > tol * norm_scale):
        raise IterationError(
            f"Lanczos did not converge in {m} iterations",
            {"residuals": resid.tolist(), "iterations": m,
             "tol": tol * norm_scale})
    vecs = (s[:, :k].T @ basis[:m]).T
    return theta[:k], vecs, m


def _tridiag_eig(alphas, betas):
    from scipy.linalg import eigh_tridiagonal
    return eigh_tridiagonal(np.asarray(alphas, float), np.asarray(betas, float))


def low_spectrum(h: Operator, k: int, method: str = "auto",
                 cutoff_used: int = None, seed: int = 7) -> EigenResult:
    """k lowest eigenpairs of a Hermitian operator.

    method: "dense" (LAPACK), "lanczos", or "auto" (dense below DENSE_LIMIT).
    """
    if not 1 <= k <= h.dim:
        raise ValueError(f"k must be in [1, {h.dim}], got {k}")
    _check_hermitian(h)
    if method == "auto":
        method = "dense" if h.dim < DENSE_LIMIT else "lanczos"
    if method == "dense":
        evals, evecs = np.linalg.eigh(h.dense())
        energies = evals[:k]
        vecs = [evecs[:, i] for i in range(k)]
        iterations = 0
    elif method == "lanczos":
        scale = _matrix_norm(h)
        m = h.matrix
        energies, vec_mat, iterations = lanczos_lowest(
            lambda x: m @ x, h.dim, k, seed=seed, norm_scale=scale)
        vecs = [vec_mat[:, i] for i in range(k)]
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    scale = _matrix_norm(h)
    states = []
    for e, v in zip(energies, vecs):
        v = _fix_phase(v / np.linalg.norm(v))
        resid = np.linalg.norm(h.matrix @ v - e * v)
        if resid > RESIDUAL_TOL * max(scale, 1e-300):
            raise IterationError(
                f"eigenpair residual {resid:.3e} exceeds {RESIDUAL_TOL:.0e}*|H|",
                {"energy": float(e), "residual": float(resid), "method": method})
        states.append(StateVector(h.shape, v))
    return EigenResult(np.asarray(energies, float), states,
                       cutoff_used or h.shape.boson_cutoff)


# ---------------------------------------------------------------------------
# parity sectors
# ---------------------------------------------------------------------------

def parity_values(h_shape: SpaceShape) -> np.ndarray:
    """Diagonal of the parity operator in the product basis."""
    return np.real(np.diag(parity_operator(h_shape).dense()))


def parity_sector_indices(shape: SpaceShape, sector: float) -> np.ndarray:
    vals = parity_values(shape)
    return np.nonzero(np.isclose(vals, sector))[0]


def ground_sector_value(shape: SpaceShape) -> float:
    """Parity eigenvalue of the sector containing the decoupled ground state
    |g...g, 0> (the even total-excitation sector)."""
    return float((-1.0) ** shape.n_qubits)


def sector_spectrum(h: Operator, sector: float, k: int = 2) -> np.ndarray:
    """Lowest k eigenvalues inside one parity sector (dense path)."""
    idx = parity_sector_indices(h.shape, sector)
    block = h.dense()[np.ix_(idx, idx)]
    evals = np.linalg.eigvalsh(block)
    return evals[:k]


def spectrum_by_sectors(h: Operator, k: int = 2):
    """Merged (and per-sector) low spectra from the two parity blocks."""
    out = {}
    for sector in (+1.0, -1.0):
        out[sector] = sector_spectrum(h, sector, k=min(k, len(
            parity_sector_indices(h.shape, sector))))
    merged = np.sort(np.concatenate(list(out.values())))
    return merged, out


def ground_state(h: Operator, method: str = "auto", seed: int = 7) -> tuple:
    """(E0, ground StateVector), resolved inside the even-excitation sector.

    In the broken phase the lowest doublet is near-degenerate with opposite
    parity; restricting to the decoupled ground state's sector removes the
    branch ambiguity that would contaminate ground-state overlaps.
    """
    sector = ground_sector_value(h.shape)
    idx = parity_sector_indices(h.shape, sector)
    if h.is_sparse:
        sub = h.matrix.tocsc()[:, idx][idx, :]
    else:
        sub = h.dense()[np.ix_(idx, idx)]
    sub_op = Operator(SpaceShape(0, len(idx)), sub, hermitian_hint=True)
    res = low_spectrum(sub_op, 1, method=method, seed=seed)
    full = np.zeros(h.dim, dtype=complex)
    full[idx] = res.states[0].amplitudes
    return float(res.energies[0]), StateVector(h.shape, _fix_phase(full))


# ---------------------------------------------------------------------------
# observables and gaps
# ---------------------------------------------------------------------------

def quadrature_moment(psi: StateVector, order: int) -> float:
    """<X^{2 order}> of the field factor, order in {1, 2}."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    x = position_quadrature(psi.shape.boson_cutoff).dense()
    xp = np.linalg.matrix_power(x, 2 * order)
    m = psi.amplitudes.reshape(-1, psi.shape.boson_cutoff)
    # <I x X^2n> = sum over qubit blocks of <block| X^2n |block>
    return float(np.real(np.sum(m.conj() * (m @ xp.T))))


def momentum_second_moment(psi: StateVector) -> float:
    from .hilbert import momentum_quadrature
    p = momentum_quadrature(psi.shape.boson_cutoff).dense()
    p2 = p @ p
    m = psi.amplitudes.reshape(-1, psi.shape.boson_cutoff)
    return float(np.real(np.sum(m.conj() * (m @ p2.T))))


@dataclass
class CutoffPolicy:
    """Doubling-sequence convergence policy for the Fock cutoff."""

    tol: float = 1e-8
    start: int = 32
    cap: int = 1024

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be > 0")


@dataclass
class CutoffDiagnostics:
    cutoffs: list = field(default_factory=list)
    e0: list = field(default_factory=list)
    x2: list = field(default_factory=list)
    converged: bool = False


def converge_cutoff(builder, policy: CutoffPolicy = None):
    """Smallest cutoff in {start, 2*start, ...} where E0 and <X^2> settle.

    builder(cutoff) must return a Hermitian Operator.  Returns (cutoff,
    diagnostics); diagnostics.converged is False when the cap is reached, and
    callers must not treat that silently.
    """
    policy = policy or CutoffPolicy()
    diag = CutoffDiagnostics()
    cutoff = policy.start
    prev = None
    while cutoff <= policy.cap:
        h = builder(cutoff)
        e0, psi = ground_state(h)
        x2 = quadrature_moment(psi, 1)
        diag.cutoffs.append(cutoff)
        diag.e0.append(e0)
        diag.x2.append(x2)
        if prev is not None:
            de = abs(e0 - prev[0]) / max(abs(e0), 1e-300)
            dx = abs(x2 - prev[1]) / max(abs(x2), 1e-300)
            if de < policy.tol and dx < policy.tol:
                diag.converged = True
                return prev[2], diag
        prev = (e0, x2, cutoff)
        cutoff *= 2
    return diag.cutoffs[-1], diag


def converged_ground_state(p: "models.AqrmParams", policy: CutoffPolicy = None):
    """(E0, psi, cutoff, diagnostics) for an AQRM parameter set."""
    policy = policy or CutoffPolicy()
    cutoff, diag = converge_cutoff(lambda c: models.build_aqrm(p, c), policy)
    if not diag.converged:
        raise IterationError(
            f"cutoff convergence failed at cap {policy.cap}", {"diag": diag})
    h = models.build_aqrm(p, cutoff)
    e0, psi = ground_state(h)
    return e0, psi, cutoff, diag


def excitation_gap(p: "models.AqrmParams", policy: CutoffPolicy = None,
                   intra_sector: bool = False) -> float:
    """E1 - E0 at a converged cutoff.

    intra_sector=True restricts both levels to the even-excitation sector,
    which stays finite across the broken-phase parity doublet.
    """
    policy = policy or CutoffPolicy()
    cutoff, diag = converge_cutoff(lambda c: models.build_aqrm(p, c), policy)
    if not diag.converged:
        raise IterationError("cutoff convergence failed", {"diag": diag})
    h = models.build_aqrm(p, cutoff)
    if intra_sector:
        sector = ground_sector_value(h.shape)
        evals = sector_spectrum(h, sector, k=2)
        return float(evals[1] - evals[0])
    res = low_spectrum(h, 2)
    return float(res.energies[1] - res.energies[0])
