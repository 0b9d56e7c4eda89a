"""Phase-transition diagnostics: fidelity susceptibility, peak scaling,
cumulant-ratio fixed point, and data collapse.

Sweeps over (frequency ratio, anisotropy, coupling) points are embarrassingly
parallel; `jobs > 1` fans grid points out to a process pool and reassembles
results in grid order.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import models, spectra
from .models import AqrmParams, aqrm_from_dimensionless
from .spectra import CutoffPolicy

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
DEFAULT_DG_REL = 1e-4          # overlap stencil, relative to g_c
RICHARDSON_REL_TOL = 1e-3
DEGENERACY_FLOOR = 1e-12       # spectral-sum term exclusion
SPECTRAL_MAX_STATES = 200
SPECTRAL_TAIL_REL = 1e-10
DEFAULT_BRACKET = (0.5, 1.1)   # peak search, units of g_c


class BracketingError(ValueError):
    """Peak bracket does not contain an interior maximum."""


class AmbiguousCrossingError(ValueError):
    def __init__(self, message, candidates):
        super().__init__(message)
        self.candidates = candidates


@dataclass(frozen=True)
class FsCurve:
    """Fidelity-susceptibility sweep over an ascending coupling grid."""

    params: AqrmParams
    g_grid: np.ndarray
    chi: np.ndarray
    eta: float
    anisotropy: float
    cutoff_used: int = 0

    def __post_init__(self):
        g = np.asarray(self.g_grid, float)
        c = np.asarray(self.chi, float)
        object.__setattr__(self, "g_grid", g)
        object.__setattr__(self, "chi", c)
        if np.any(np.diff(g) <= 0):
            raise ValueError("coupling grid must be strictly ascending")
        if np.any(c < 0):
            raise ValueError("fidelity susceptibility must be >= 0 (metric positivity)")


@dataclass(frozen=True)
class ScalingFit:
    """Log-log least-squares fit y ~ x^exponent."""

    exponent: float
    intercept: float
    r_squared: float
    points_used: int
    std_err: float = float("nan")

    def __post_init__(self):
        if not 0.0 <= self.r_squared <= 1.0 + 1e-12:
            raise ValueError(f"r_squared {self.r_squared} outside [0, 1]")
        if self.points_used < 3:
            raise ValueError("a scaling fit needs at least 3 points")


@dataclass(frozen=True)
class CollapseCurve:
    """One rescalable curve: scale variable, g/g_c grid, ordinate values."""

    scale: float
    u: np.ndarray
    y: np.ndarray
    label: str = ""


@dataclass(frozen=True)
class CollapseResult:
    adiabatic_dimension: float
    nu: float
    x_window: np.ndarray
    mean_curve: np.ndarray
    rescaled: list
    residual: float

    def __post_init__(self):
        if self.residual < 0:
            raise ValueError("collapse residual must be >= 0")


# ---------------------------------------------------------------------------
# fidelity susceptibility
# ---------------------------------------------------------------------------

def _ground(p: AqrmParams, cutoff: int):
    h = models.build_aqrm(p, cutoff)
    return spectra.ground_state(h)


def _overlap_chi(template: AqrmParams, g: float, dg: float, cutoff: int) -> float:
    _, psi_m = _ground(template.with_coupling(g - dg), cutoff)
    _, psi_0 = _ground(template.with_coupling(g), cutoff)
    _, psi_p = _ground(template.with_coupling(g + dg), cutoff)
    fwd = 2.0 * (1.0 - abs(psi_0.overlap(psi_p))) / dg ** 2
    bwd = 2.0 * (1.0 - abs(psi_m.overlap(psi_0))) / dg ** 2
    return 0.5 * (fwd + bwd)


def fidelity_susceptibility(p: AqrmParams, g: float, dg: float = None,
                            method: str = "overlap", cutoff: int = None,
                            policy: CutoffPolicy = None,
                            richardson: bool = True) -> float:
    """Ground-state fidelity susceptibility at coupling g.

    p supplies the frequencies and the anisotropy (its own couplings are a
    template).  "overlap" symmetrizes forward/backward finite-difference
    stencils of the overlap decay and refines dg until a half-step Richardson
    check agrees to RICHARDSON_REL_TOL; "spectral" evaluates the second-order
    perturbation sum over the coupling operator at fixed anisotropy.
    """
    lam = p.anisotropy
    gc = p.critical_coupling
    if dg is None:
        dg = DEFAULT_DG_REL * gc
    if dg <= 0:
        raise ValueError("dg must be > 0")
    if method == "overlap" and g - dg < 0:
        raise ValueError(f"g - dg = {g - dg} below the model's valid range")
    if cutoff is None:
        probe = p.with_coupling(max(g + dg, 1e-12))
        cutoff, diag = spectra.converge_cutoff(
            lambda c: models.build_aqrm(probe, c), policy or CutoffPolicy())
        if not diag.converged:
            raise spectra.IterationError("cutoff convergence failed",
                                         {"diag": diag})
    if method == "overlap":
        chi = _overlap_chi(p, g, dg, cutoff)
        if richardson:
            for _ in range(4):
                chi_half = _overlap_chi(p, g, dg / 2.0, cutoff)
                if abs(chi - chi_half) <= RICHARDSON_REL_TOL * max(abs(chi_half), 1e-300):
                    break
                dg /= 2.0
                chi = chi_half
            else:
                warnings.warn("overlap stencil did not settle after 4 dg refinements")
        return float(chi)
    if method == "spectral":
        return _spectral_chi(p, g, cutoff, lam)
    raise ValueError(f"unknown method {method!r}")


def _spectral_chi(p: AqrmParams, g: float, cutoff: int, lam: float) -> float:
    h = models.build_aqrm(p.with_coupling(g), cutoff)
    evals, evecs = np.linalg.eigh(h.dense())
    parity = spectra.parity_values(h.shape)
    sector = spectra.ground_sector_value(h.shape)
    par_exp = np.real(np.einsum("ij,i,ij->j", evecs.conj(), parity, evecs))
    ground_candidates = np.nonzero(par_exp * sector > 0)[0]
    i0 = int(ground_candidates[0])
    psi0 = evecs[:, i0]
    h_i = models.coupling_operator(lam, cutoff, p.phi_r, p.phi_b).dense()
    amps = evecs.conj().T @ (h_i @ psi0)
    de = evals - evals[i0]
    usable = np.abs(de) >= DEGENERACY_FLOOR
    usable[i0] = False
    excluded = int(np.count_nonzero(~usable) - 1)
    if excluded:
        warnings.warn(f"spectral sum excluded {excluded} near-degenerate term(s)")
    terms = np.zeros_like(de)
    terms[usable] = np.abs(amps[usable]) ** 2 / de[usable] ** 2
    # eigh returns ascending energies; stop at 200 states or once the running
    # tail is negligible, whichever comes first
    n_cap = min(terms.size, SPECTRAL_MAX_STATES + 1)
    csum = np.cumsum(terms)
    total = csum[-1]
    tail = total - csum
    enough = np.nonzero(tail <= SPECTRAL_TAIL_REL * total)[0]
    n_stop = int(enough[0]) + 1 if enough.size else terms.size
    return float(csum[min(n_stop, n_cap) - 1])


def fs_curve(p: AqrmParams, u_grid, policy: CutoffPolicy = None,
             method: str = "overlap", dg: float = None) -> FsCurve:
    """Fidelity-susceptibility curve over u = g/g_c, at one fixed cutoff
    converged at the grid's most demanding point."""
    policy = policy or CutoffPolicy()
    u_grid = np.asarray(u_grid, float)
    gc = p.critical_coupling
    probe = p.with_coupling(float(u_grid.max()) * gc)
    cutoff, diag = spectra.converge_cutoff(
        lambda c: models.build_aqrm(probe, c), policy)
    if not diag.converged:
        raise spectra.IterationError("cutoff convergence failed", {"diag": diag})
    chi = np.array([
        fidelity_susceptibility(p, u * gc, dg=dg, method=method, cutoff=cutoff,
                                richardson=False)
        for u in u_grid])
    return FsCurve(params=p, g_grid=u_grid * gc, chi=chi,
                   eta=p.frequency_ratio, anisotropy=p.anisotropy,
                   cutoff_used=cutoff)


# ---------------------------------------------------------------------------
# peak location and exponent fits
# ---------------------------------------------------------------------------

def find_peak(f, bracket, xtol: float, coarse: int = 9):
    """Golden-section maximization refined by parabolic interpolation.

    f must have a single interior maximum inside the bracket; a coarse scan
    verifies that and raises BracketingError otherwise.
    """
    a, b = float(bracket[0]), float(bracket[1])
    if not b > a:
        raise ValueError("bracket must satisfy b > a")
    xs = np.linspace(a, b, coarse)
    ys = np.array([f(x) for x in xs])
    i = int(np.argmax(ys))
    if i in (0, coarse - 1):
        raise BracketingError(
            f"no interior maximum in bracket [{a}, {b}]; "
            f"edge value is largest at x = {xs[i]}")
    lo, hi = xs[i - 1], xs[i + 1]
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > xtol:
        if f1 < f2:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
        else:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
    # parabolic refinement through the best bracketed triple
    xm, fm = (x1, f1) if f1 >= f2 else (x2, f2)
    xl, xr = lo, hi
    fl, fr = f(xl), f(xr)
    denom = (xm - xl) * (fm - fr) - (xm - xr) * (fm - fl)
    if abs(denom) > 0:
        xv = xm - 0.5 * ((xm - xl) ** 2 * (fm - fr)
                         - (xm - xr) ** 2 * (fm - fl)) / denom
        if xl < xv < xr:
            fv = f(xv)
            if fv >= fm:
                return float(xv), float(fv)
    return float(xm), float(fm)


def fit_exponent(xs, ys) -> ScalingFit:
    """Least-squares slope of log y vs log x."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    if xs.size < 3:
        raise ValueError("need at least 3 points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("power-law fit needs strictly positive data")
    lx, ly = np.log(xs), np.log(ys)
    (slope, intercept), cov = np.polyfit(lx, ly, 1, cov=True)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return ScalingFit(exponent=float(slope), intercept=float(intercept),
                      r_squared=float(min(max(r2, 0.0), 1.0)),
                      points_used=int(xs.size),
                      std_err=float(np.sqrt(max(cov[0, 0], 0.0))))


def rescaled_eta(eta: float, anisotropy: float) -> float:
    """Anisotropy-modified scale variable eta * (1 + lam) / (2 sqrt|lam|)."""
    if anisotropy == 0:
        raise ValueError("anisotropy must be nonzero (JC limit excluded)")
    return eta * (1.0 + anisotropy) / (2.0 * np.sqrt(abs(anisotropy)))


@dataclass(frozen=True)
class PeakRecord:
    eta: float
    anisotropy: float
    g_max: float
    g_max_over_gc: float
    chi_max: float
    cutoff_used: int


def adaptive_bracket(eta: float) -> tuple:
    """Peak bracket in units of g_c, tracking the pseudocritical drift.

    The peak sits ~1.4 eta^{-2/3} above g_c, so a fixed bracket either misses
    it at small eta or wastes cutoff headroom at large eta; both edges follow
    that scale with generous safety factors.
    """
    w = eta ** (-2.0 / 3.0)
    return (max(0.5, 1.0 - 8.0 * w), 1.0 + 4.0 * w)


def locate_fs_peak(eta: float, anisotropy: float,
                   policy: CutoffPolicy = None,
                   bracket=None,
                   dg_rel: float = DEFAULT_DG_REL,
                   xtol_rel: float = 1e-5) -> PeakRecord:
    """Pseudocritical point of the fidelity susceptibility at one (eta, lam).

    The cutoff is converged once at the bracket's upper end and then held
    fixed so the golden-section objective stays smooth.
    """
    policy = policy or CutoffPolicy()
    if bracket is None:
        bracket = adaptive_bracket(eta)
    template = aqrm_from_dimensionless(eta, anisotropy, 1.0)
    gc = template.critical_coupling
    probe = template.with_coupling(bracket[1] * gc)
    cutoff, diag = spectra.converge_cutoff(
        lambda c: models.build_aqrm(probe, c), policy)
    if not diag.converged:
        raise spectra.IterationError("cutoff convergence failed", {"diag": diag})
    dg = dg_rel * gc

    def chi_of_g(g):
        return _overlap_chi(template, g, dg, cutoff)

    g_max, chi_max = find_peak(chi_of_g, (bracket[0] * gc, bracket[1] * gc),
                               xtol=xtol_rel * gc, coarse=11)
    return PeakRecord(eta=eta, anisotropy=anisotropy, g_max=g_max,
                      g_max_over_gc=g_max / gc, chi_max=chi_max,
                      cutoff_used=cutoff)


def _peak_worker(args):
    eta, anisotropy, policy_fields, bracket, dg_rel = args
    return locate_fs_peak(eta, anisotropy, CutoffPolicy(**policy_fields),
                          bracket=bracket, dg_rel=dg_rel)


def peak_sweep(anisotropy: float, etas, policy: CutoffPolicy = None,
               bracket=None, dg_rel: float = DEFAULT_DG_REL,
               jobs: int = 1) -> list:
    """PeakRecord per frequency ratio, in the given eta order."""
    policy = policy or CutoffPolicy()
    args = [(float(e), anisotropy,
             {"tol": policy.tol, "start": policy.start, "cap": policy.cap},
             tuple(bracket) if bracket is not None else None, dg_rel)
            for e in etas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_peak_worker, args))
    return [_peak_worker(a) for a in args]


def peak_exponents(records) -> dict:
    """d_a^c and -1/nu fits from a peak sweep."""
    etas = np.array([r.eta for r in records])
    chi = np.array([r.chi_max for r in records])
    dist = np.array([abs(1.0 - r.g_max_over_gc) for r in records])
    return {
        "adiabatic_dimension": fit_exponent(etas, chi),
        "peak_shift": fit_exponent(etas, dist),
    }


# ---------------------------------------------------------------------------
# cumulant ratio, crossings, collapse
# ---------------------------------------------------------------------------

def cumulant_ratio(p: AqrmParams, policy: CutoffPolicy = None,
                   cutoff: int = None) -> float:
    """<X^4> / <X^2>^2 over the converged ground state."""
    if cutoff is None:
        _, psi, cutoff, _ = spectra.converged_ground_state(p, policy)
    else:
        _, psi = _ground(p, cutoff)
    x2 = spectra.quadrature_moment(psi, 1)
    x4 = spectra.quadrature_moment(psi, 2)
    return float(x4 / x2 ** 2)


@dataclass(frozen=True)
class CumulantCurve:
    eta: float
    anisotropy: float
    u_grid: np.ndarray
    values: np.ndarray
    cutoff_used: int

    @property
    def eta_prime(self) -> float:
        return rescaled_eta(self.eta, self.anisotropy)


def cumulant_curve(eta: float, anisotropy: float, u_grid,
                   policy: CutoffPolicy = None) -> CumulantCurve:
    """Cumulant-ratio curve over u = g/g_c at one converged cutoff."""
    policy = policy or CutoffPolicy()
    u_grid = np.asarray(u_grid, float)
    template = aqrm_from_dimensionless(eta, anisotropy, 1.0)
    gc = template.critical_coupling
    probe = template.with_coupling(float(u_grid.max()) * gc)
    cutoff, diag = spectra.converge_cutoff(
        lambda c: models.build_aqrm(probe, c), policy)
    if not diag.converged:
        raise spectra.IterationError("cutoff convergence failed", {"diag": diag})
    vals = np.array([
        cumulant_ratio(template.with_coupling(u * gc), cutoff=cutoff)
        for u in u_grid])
    return CumulantCurve(eta=eta, anisotropy=anisotropy, u_grid=u_grid,
                         values=vals, cutoff_used=cutoff)


def _cumulant_worker(args):
    eta, anisotropy, u_grid, policy_fields = args
    return cumulant_curve(eta, anisotropy, np.asarray(u_grid),
                          CutoffPolicy(**policy_fields))


def cumulant_family(pairs, u_grid, policy: CutoffPolicy = None,
                    jobs: int = 1) -> list:
    """Cumulant curves for a list of (eta, anisotropy) pairs."""
    policy = policy or CutoffPolicy()
    u = np.asarray(u_grid, float)
    args = [(float(e), float(l), u,
             {"tol": policy.tol, "start": policy.start, "cap": policy.cap})
            for e, l in pairs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_cumulant_worker, args))
    return [_cumulant_worker(a) for a in args]


def find_crossing(x_grid, y_a, y_b, refine_iters: int = 60):
    """Crossing of two curves sharing a grid: (abscissa, ordinate).

    Requires exactly one sign change of the difference; otherwise raises
    AmbiguousCrossingError listing every candidate abscissa.
    """
    x = np.asarray(x_grid, float)
    ya = np.asarray(y_a, float)
    yb = np.asarray(y_b, float)
    d = ya - yb
    sign = np.sign(d)
    nonzero = sign != 0
    changes = []
    idx = np.nonzero(nonzero)[0]
    for i, j in zip(idx[:-1], idx[1:]):
        if sign[i] != sign[j]:
            changes.append((i, j))
    if len(changes) != 1:
        cands = [float(x[i] - d[i] * (x[j] - x[i]) / (d[j] - d[i]))
                 for i, j in changes]
        raise AmbiguousCrossingError(
            f"expected exactly one crossing, found {len(changes)}", cands)
    i, j = changes[0]
    lo, hi = x[i], x[j]

    def diff(xq):
        return np.interp(xq, x, d)

    flo = diff(lo)
    for _ in range(refine_iters):
        mid = 0.5 * (lo + hi)
        fm = diff(mid)
        if fm == 0:
            lo = hi = mid
            break
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    # linear interpolation inside the final bisection interval
    dlo, dhi = diff(lo), diff(hi)
    xc = lo if dlo == dhi else lo - dlo * (hi - lo) / (dhi - dlo)
    yc = 0.5 * (np.interp(xc, x, ya) + np.interp(xc, x, yb))
    return float(xc), float(yc)


def collapse(curves, adiabatic_dimension: float, nu: float,
             scale_ordinate: bool = False, window: float = 2.0,
             n_common: int = 201) -> CollapseResult:
    """Rescale curves onto x = scale^{1/nu} (u - 1) and score their spread.

    scale_ordinate divides each ordinate by scale^{adiabatic_dimension}
    (used for susceptibility collapse; the cumulant ratio is already
    dimensionless).  The residual is the mean pointwise standard deviation
    across curves inside |x| <= window, normalized by the mean curve's range.
    """
    if len(curves) < 2:
        raise ValueError("collapse needs at least 2 curves")
    rescaled = []
    for c in curves:
        x = c.scale ** (1.0 / nu) * (np.asarray(c.u, float) - 1.0)
        y = np.asarray(c.y, float)
        if scale_ordinate:
            y = y * c.scale ** (-adiabatic_dimension)
        rescaled.append(CollapseCurve(scale=c.scale, u=x, y=y, label=c.label))
    lo = max(float(c.u.min()) for c in rescaled)
    hi = min(float(c.u.max()) for c in rescaled)
    lo, hi = max(lo, -window), min(hi, window)
    if not hi > lo:
        raise ValueError("curves share no overlap window after rescaling")
    xs = np.linspace(lo, hi, n_common)
    ys = np.vstack([np.interp(xs, c.u, c.y) for c in rescaled])
    mean = ys.mean(axis=0)
    spread = ys.std(axis=0)
    rng = float(mean.max() - mean.min())
    residual = float(spread.mean() / rng) if rng > 0 else float(spread.mean())
    return CollapseResult(adiabatic_dimension=adiabatic_dimension, nu=nu,
                          x_window=xs, mean_curve=mean, rescaled=rescaled,
                          residual=residual)
