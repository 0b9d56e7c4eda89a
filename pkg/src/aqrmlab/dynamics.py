"""Time propagation, dynamical observables, Wigner functions, and the
cat-state / phase-gate protocols.

Propagation is plain RK4 on the Schrodinger equation with the harmonic drive
coefficients evaluated per stage (a midpoint-exponential stepper is available
for stiff cross-checks).  States are renormalized at each record point after
the norm drift is checked against the per-interval bound.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import models
from .hilbert import (
    DensityMatrix,
    SpaceShape,
    StateVector,
    boson_annihilator,
    coherent_amplitudes,
    entanglement_entropy,
    fock_state,
    product_state,
    qubit_state,
    reduce_to_field,
    reduce_to_qubits,
)

DRIFT_BOUND = 1e-6          # per recorded interval, before renormalization
STEPS_PER_PERIOD = 200
COVERAGE_FLOOR = 0.98

try:
    import numba as _numba
except ImportError:         # pure-numpy stepping still works, just slower
    _numba = None


class StepSizeError(RuntimeError):
    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class ProtocolError(RuntimeError):
    """A state-engineering protocol failed its exactness check."""


class CoverageWarning(UserWarning):
    """Phase-space grid fails to capture the state."""


@dataclass(frozen=True)
class DrivenHamiltonian:
    """H(t) = static + sum_i trig_i(omega_i t + phi_i) * M_i.

    drives entries are (matrix, omega, phi, kind) with kind "cos" or "sin".
    """

    shape: SpaceShape
    static: np.ndarray
    drives: tuple = ()

    @property
    def max_drive_omega(self) -> float:
        return max((abs(d[1]) for d in self.drives), default=0.0)

    @property
    def reference_omega(self) -> float:
        """Largest angular frequency present: drive frequencies or the static
        part's infinity norm (an upper bound on its spectral radius)."""
        static_scale = float(np.max(np.sum(np.abs(self.static), axis=1)))
        return max(self.max_drive_omega, static_scale)

    def coefficient(self, i: int, t: float) -> float:
        _, om, ph, kind = self.drives[i]
        arg = om * t + ph
        return math.cos(arg) if kind == "cos" else math.sin(arg)

    def matrix(self, t: float) -> np.ndarray:
        h = self.static.copy()
        for i, (m, _, _, _) in enumerate(self.drives):
            h += self.coefficient(i, t) * m
        return h

    def apply(self, t: float, psi: np.ndarray) -> np.ndarray:
        out = self.static @ psi
        for i, (m, _, _, _) in enumerate(self.drives):
            out += self.coefficient(i, t) * (m @ psi)
        return out


def lab_factory(c: models.CircuitParams, cutoff: int) -> DrivenHamiltonian:
    """Full driven circuit Hamiltonian as a propagation factory."""
    static = models.lab_static_part(c, cutoff).dense()
    dr = models.lab_drive_part(c, "r", cutoff).dense()
    db = models.lab_drive_part(c, "b", cutoff).dense()
    return DrivenHamiltonian(
        shape=SpaceShape(1, cutoff), static=static,
        drives=((dr, c.omega_r, c.phi_r, "cos"), (db, c.omega_b, c.phi_b, "cos")))


def interaction_factory(c: models.CircuitParams, cutoff: int) -> DrivenHamiltonian:
    """Sideband interaction picture: e^{i(delta t + phi)} terms split into
    cos/sin Hermitian pairs."""
    shape, _, _, _, sp_a, sp_adag = models._single_qubit_parts(cutoff)
    red_c = 0.5 * c.Lambda_r * (sp_a.matrix + sp_a.matrix.conj().T)
    red_s = 0.5 * c.Lambda_r * 1j * (sp_a.matrix - sp_a.matrix.conj().T)
    blue_c = 0.5 * c.Lambda_b * (sp_adag.matrix + sp_adag.matrix.conj().T)
    blue_s = 0.5 * c.Lambda_b * 1j * (sp_adag.matrix - sp_adag.matrix.conj().T)
    zero = np.zeros_like(red_c)
    return DrivenHamiltonian(
        shape=shape, static=zero,
        drives=((red_c, c.delta_r, c.phi_r, "cos"),
                (red_s, c.delta_r, c.phi_r, "sin"),
                (blue_c, c.delta_b, c.phi_b, "cos"),
                (blue_s, c.delta_b, c.phi_b, "sin")))


def degenerate_factory(d: models.DegenerateParams, cutoff: int) -> DrivenHamiltonian:
    """Collective conditional-displacement generator as a factory."""
    shape = SpaceShape(d.n_qubits, cutoff)
    from .hilbert import collective_sigma_x
    jx = collective_sigma_x(shape).dense()
    a_full = np.kron(np.eye(2 ** d.n_qubits, dtype=complex),
                     boson_annihilator(cutoff).dense())
    x = a_full + a_full.conj().T
    p = 1j * (a_full.conj().T - a_full)
    zero = np.zeros_like(x)
    return DrivenHamiltonian(
        shape=shape, static=zero,
        drives=((d.g_bar * (jx @ x), d.delta, d.phi, "cos"),
                (d.g_bar * (jx @ p), d.delta, d.phi, "sin")))


def static_factory(h) -> DrivenHamiltonian:
    """Time-independent Hamiltonian wrapped for the propagator."""
    m = h.dense() if hasattr(h, "dense") else np.asarray(h, complex)
    shape = h.shape if hasattr(h, "shape") and isinstance(h.shape, SpaceShape) \
        else SpaceShape(0, m.shape[0])
    return DrivenHamiltonian(shape=shape, static=m)


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    observables: dict
    states: list = None
    dt: float = 0.0
    method: str = "rk4"

    def series(self, name: str) -> np.ndarray:
        return self.observables[name]


def ground_population(psi: StateVector) -> float:
    """Population of the all-ground qubit projector in the qubit reduction."""
    rho = reduce_to_qubits(psi).entries
    return float(np.real(rho[-1, -1]))


def qubit_entropy(psi: StateVector) -> float:
    return entanglement_entropy(reduce_to_qubits(psi))


def mean_photon_number(psi: StateVector) -> float:
    m = psi.amplitudes.reshape(-1, psi.shape.boson_cutoff)
    n = np.arange(psi.shape.boson_cutoff)
    return float(np.real(np.sum((np.abs(m) ** 2) * n[None, :])))


def entropy_trace(traj: Trajectory) -> np.ndarray:
    """Qubit entanglement entropy series; recomputed from stored states if
    present, otherwise the recorded series."""
    if traj.states is not None:
        return np.array([qubit_entropy(s) for s in traj.states])
    return traj.observables["S_G"]


def _rk4_segment_python(fac: DrivenHamiltonian, t0: float, t1: float,
                        y: np.ndarray, nsteps: int) -> np.ndarray:
    h = (t1 - t0) / nsteps
    t = t0
    for _ in range(nsteps):
        k1 = -1j * fac.apply(t, y)
        k2 = -1j * fac.apply(t + 0.5 * h, y + (0.5 * h) * k1)
        k3 = -1j * fac.apply(t + 0.5 * h, y + (0.5 * h) * k2)
        k4 = -1j * fac.apply(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += h
    return y


if _numba is not None:
    @_numba.njit(cache=True)
    def _apply_jit(static, mats, omegas, phis, kinds, t, y):
        out = np.dot(static, y)
        for i in range(mats.shape[0]):
            arg = omegas[i] * t + phis[i]
            c = math.cos(arg) if kinds[i] == 0 else math.sin(arg)
            out += c * np.dot(mats[i], y)
        return -1j * out

    @_numba.njit(cache=True)
    def _rk4_jit(static, mats, omegas, phis, kinds, t0, h, nsteps, y):
        for s in range(nsteps):
            t = t0 + s * h
            k1 = _apply_jit(static, mats, omegas, phis, kinds, t, y)
            k2 = _apply_jit(static, mats, omegas, phis, kinds, t + 0.5 * h,
                            y + (0.5 * h) * k1)
            k3 = _apply_jit(static, mats, omegas, phis, kinds, t + 0.5 * h,
                            y + (0.5 * h) * k2)
            k4 = _apply_jit(static, mats, omegas, phis, kinds, t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return y


def _drive_arrays(fac: DrivenHamiltonian):
    n = fac.static.shape[0]
    nd = len(fac.drives)
    mats = np.empty((nd, n, n), dtype=np.complex128)
    omegas = np.empty(nd)
    phis = np.empty(nd)
    kinds = np.empty(nd, dtype=np.int64)
    for i, (m, om, ph, kind) in enumerate(fac.drives):
        mats[i] = m
        omegas[i] = om
        phis[i] = ph
        kinds[i] = 0 if kind == "cos" else 1
    return mats, omegas, phis, kinds


def _rk4_segment(fac: DrivenHamiltonian, t0: float, t1: float,
                 y: np.ndarray, nsteps: int) -> np.ndarray:
    if _numba is None:
        return _rk4_segment_python(fac, t0, t1, y, nsteps)
    mats, omegas, phis, kinds = _drive_arrays(fac)
    static = np.ascontiguousarray(fac.static, dtype=np.complex128)
    return _rk4_jit(static, mats, omegas, phis, kinds, float(t0),
                    (t1 - t0) / nsteps, nsteps, y.astype(np.complex128))


def _magnus2_segment(fac: DrivenHamiltonian, t0: float, t1: float,
                     y: np.ndarray, nsteps: int) -> np.ndarray:
    from scipy.linalg import expm
    h = (t1 - t0) / nsteps
    t = t0
    for _ in range(nsteps):
        u = expm(-1j * h * fac.matrix(t + 0.5 * h))
        y = u @ y
        t += h
    return y


def default_dt(fac: DrivenHamiltonian, dt_max: float = None) -> float:
    """min(dt_max, T_shortest / STEPS_PER_PERIOD).

    T_shortest is the shortest drive period; for drive-free factories the
    static part's norm sets the scale instead.
    """
    om = fac.max_drive_omega if fac.max_drive_omega > 0 else fac.reference_omega
    if om <= 0:
        if dt_max is None:
            raise ValueError("factory has no frequency scale; pass dt_max")
        return dt_max
    dt = 2.0 * math.pi / om / STEPS_PER_PERIOD
    return min(dt, dt_max) if dt_max else dt


def propagate(fac: DrivenHamiltonian, psi0: StateVector, t_grid,
              method: str = "rk4", dt_max: float = None,
              store_states: bool = False) -> Trajectory:
    """Propagate psi0 across the record grid; deterministic.

    The state is renormalized at each record point after asserting the norm
    drift stayed within DRIFT_BOUND for the interval; a violation raises
    StepSizeError carrying a suggested dt.
    """
    ts = np.asarray(t_grid, float)
    if ts.ndim != 1 or ts.size < 1 or np.any(np.diff(ts) <= 0):
        raise ValueError("t_grid must be a strictly increasing 1-d grid")
    om_drive = fac.max_drive_omega
    if dt_max is not None and om_drive > 0:
        f_max = om_drive / (2.0 * math.pi)
        if dt_max > 1.0 / (50.0 * f_max):
            raise ValueError(
                f"dt_max {dt_max:.3e} exceeds 1/(50 f_max) = "
                f"{1.0 / (50.0 * f_max):.3e}")
    dt = default_dt(fac, dt_max)
    stepper = {"rk4": _rk4_segment, "magnus2": _magnus2_segment}.get(method)
    if stepper is None:
        raise ValueError(f"unknown propagation method {method!r}")

    y = psi0.amplitudes.copy()
    obs = {"P_g": [], "S_G": [], "n_mean": [], "norm": []}
    states = [] if store_states else None

    def record(vec):
        nrm = float(np.linalg.norm(vec))
        drift = abs(nrm - 1.0)
        if drift > DRIFT_BOUND:
            raise StepSizeError(
                f"norm drift {drift:.3e} exceeds {DRIFT_BOUND:.0e}",
                suggested_dt=dt * 0.8 * (DRIFT_BOUND / drift) ** 0.25)
        vec = vec / nrm
        state = StateVector(fac.shape, vec)
        obs["P_g"].append(ground_population(state))
        obs["S_G"].append(qubit_entropy(state))
        obs["n_mean"].append(mean_photon_number(state))
        obs["norm"].append(nrm)
        if store_states:
            states.append(state)
        return vec

    y = record(y)
    for t0, t1 in zip(ts[:-1], ts[1:]):
        nsteps = max(1, int(math.ceil((t1 - t0) / dt)))
        y = stepper(fac, t0, t1, y, nsteps)
        y = record(y)
    return Trajectory(times=ts, observables={k: np.array(v) for k, v in obs.items()},
                      states=states, dt=dt, method=method)


def evolve_static(h, psi0: StateVector, t_grid, store_states: bool = True) -> Trajectory:
    """Exact evolution under a time-independent Hermitian operator via its
    eigendecomposition, sampled on the record grid."""
    m = h.dense() if hasattr(h, "dense") else np.asarray(h, complex)
    shape = h.shape if hasattr(h, "shape") and isinstance(h.shape, SpaceShape) \
        else psi0.shape
    ts = np.asarray(t_grid, float)
    evals, evecs = np.linalg.eigh(m)
    coeffs = evecs.conj().T @ psi0.amplitudes
    obs = {"P_g": [], "S_G": [], "n_mean": [], "norm": []}
    states = [] if store_states else None
    for t in ts:
        vec = evecs @ (np.exp(-1j * evals * t) * coeffs)
        vec = vec / np.linalg.norm(vec)
        state = StateVector(shape, vec)
        obs["P_g"].append(ground_population(state))
        obs["S_G"].append(qubit_entropy(state))
        obs["n_mean"].append(mean_photon_number(state))
        obs["norm"].append(1.0)
        if store_states:
            states.append(state)
    return Trajectory(times=ts, observables={k: np.array(v) for k, v in obs.items()},
                      states=states, dt=0.0, method="eigh")


def rotate_frame(psi: StateVector, generator, t: float) -> StateVector:
    """e^{-i H_0 t} |psi> for a Hermitian generator."""
    m = generator.dense() if hasattr(generator, "dense") else np.asarray(generator)
    offdiag = np.max(np.abs(m - np.diag(np.diag(m))))
    if offdiag < 1e-15:
        vec = np.exp(-1j * np.real(np.diag(m)) * t) * psi.amplitudes
    else:
        evals, evecs = np.linalg.eigh(m)
        vec = evecs @ (np.exp(-1j * evals * t) * (evecs.conj().T @ psi.amplitudes))
    return StateVector(psi.shape, vec)


# ---------------------------------------------------------------------------
# Wigner function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WignerGrid:
    """W(X, P) on a rectangular grid; values[i, j] = W(x[j], p[i])."""

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray

    def riemann_sum(self) -> float:
        dx = float(self.x[1] - self.x[0])
        dp = float(self.p[1] - self.p[0])
        return float(self.values.sum() * dx * dp)


def wigner(rho_field: DensityMatrix, x_grid, p_grid) -> WignerGrid:
    """Displaced-parity evaluation: W(beta) = (2/pi) Tr[rho D(2 beta) Pi].

    D(beta) Pi D(-beta) = D(2 beta) Pi collapses the three-factor form to a
    single displacement per grid point; D is built with exact sub-cutoff
    matrix elements.  Grid coordinates are beta = X + iP, which makes the
    vacuum peak 2/pi, the total mass sum(W) dX dP = 1, and the P-marginal the
    position distribution in the same X scale all hold at once.
    """
    xs = np.asarray(x_grid, float)
    ps = np.asarray(p_grid, float)
    n = rho_field.dimension
    parity = (-1.0) ** np.arange(n)
    # weight matrix: W = (2/pi) sum_{mn} rho_mn (-1)^m D_nm(2 beta)
    weight = (rho_field.entries * parity[:, None]).T  # [n, m] ordering
    vals = np.empty((ps.size, xs.size))
    for i, p in enumerate(ps):
        for j, x in enumerate(xs):
            gamma = 2.0 * (x + 1j * p)
            d = models.displacement_operator(n, gamma, method="exact-elements")
            vals[i, j] = (2.0 / math.pi) * float(np.real(np.sum(weight * d.matrix)))
    grid = WignerGrid(x=xs, p=ps, values=vals)
    cover = grid.riemann_sum()
    if cover < COVERAGE_FLOOR:
        warnings.warn(
            f"Wigner grid captures only {cover:.3f} of the state", CoverageWarning)
    return grid


# ---------------------------------------------------------------------------
# cat-state protocol
# ---------------------------------------------------------------------------

def ideal_cat(cutoff: int, alpha: complex, parity: int = +1) -> StateVector:
    """Normalized even/odd superposition N(|alpha> + parity |-alpha>)."""
    amps = coherent_amplitudes(cutoff, alpha) + parity * coherent_amplitudes(cutoff, -alpha)
    return StateVector.normalized(SpaceShape(0, cutoff), amps)


@dataclass(frozen=True)
class CatBranch:
    outcome: str
    probability: float
    field_state: StateVector
    fidelity_vs_ideal: float


@dataclass(frozen=True)
class CatReport:
    alpha: complex
    time: float
    method: str
    branches: dict
    sampled_outcome: str = None

    def __post_init__(self):
        total = sum(b.probability for b in self.branches.values())
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"branch probabilities sum to {total}, not 1")


def cat_protocol(d: models.DegenerateParams, t: float, cutoff: int = None,
                 method: str = "analytic", outcome: str = None,
                 seed: int = None, steps: int = 2000) -> CatReport:
    """Evolve |g,0>, project the qubit, and report both measurement branches.

    outcome "sample" draws one outcome from a seeded generator; "g"/"e"
    select a branch label to expose in sampled_outcome; None reports both
    without sampling (the default).
    """
    if d.n_qubits != 1:
        raise ValueError("the single-qubit protocol needs n_qubits = 1")
    if t <= 0:
        raise ValueError("t must be > 0")
    alpha = models.displacement_amplitude(d, t)
    if cutoff is None:
        cutoff = max(models.required_cutoff(abs(alpha)), 16)
    shape = SpaceShape(1, cutoff)
    psi0 = product_state(shape, "g", 0)
    if method == "analytic":
        u = models.analytic_evolution(d, t, cutoff)
        vec = u.matrix @ psi0.amplitudes
    elif method == "numeric":
        fac = degenerate_factory(d, cutoff)
        vec = _rk4_segment(fac, 0.0, t, psi0.amplitudes.copy(), steps)
        vec = vec / np.linalg.norm(vec)
    else:
        raise ValueError(f"unknown method {method!r}")
    blocks = vec.reshape(2, cutoff)  # index 0 = |e>, 1 = |g>
    branches = {}
    for label, idx, parity in (("g", 1, +1), ("e", 0, -1)):
        branch = blocks[idx]
        prob = float(np.linalg.norm(branch) ** 2)
        if prob > 0:
            field = StateVector.normalized(SpaceShape(0, cutoff), branch)
            ideal = ideal_cat(cutoff, alpha, parity)
            fid = float(abs(field.overlap(ideal)) ** 2)
        else:
            field = StateVector(SpaceShape(0, cutoff), fock_state(cutoff, 0))
            fid = 0.0
        branches[label] = CatBranch(outcome=label, probability=prob,
                                    field_state=field, fidelity_vs_ideal=fid)
    sampled = None
    if outcome == "sample":
        rng = np.random.default_rng(seed)
        sampled = rng.choice(["g", "e"], p=[branches["g"].probability,
                                            branches["e"].probability])
    elif outcome in ("g", "e"):
        sampled = outcome
    return CatReport(alpha=complex(alpha), time=t, method=method,
                     branches=branches, sampled_outcome=sampled)


@dataclass(frozen=True)
class MultiqubitCatResult:
    state: StateVector
    overlap_vs_numeric: float
    alpha: complex
    global_phase: float


def multiqubit_cat(d: models.DegenerateParams, t: float, cutoff: int = None,
                   steps: int = 4000) -> MultiqubitCatResult:
    """Amplitude-enhanced cat from (|+...+> - |-...->)|0>/sqrt(2).

    Returns the analytic final state and its overlap against numerical
    propagation of the collective Hamiltonian.
    """
    if d.n_qubits % 2 != 0:
        raise ValueError("the enhanced-cat construction needs an even qubit count")
    alpha = models.displacement_amplitude(d, t)
    if cutoff is None:
        cutoff = max(models.required_cutoff(abs(alpha) * d.n_qubits), 16)
    shape = SpaceShape(d.n_qubits, cutoff)
    plus = qubit_state("+" * d.n_qubits)
    minus = qubit_state("-" * d.n_qubits)
    vac = fock_state(cutoff, 0)
    psi0 = StateVector(shape, np.kron(plus - minus, vac) / math.sqrt(2.0))
    phase = d.n_qubits ** 2 * models.geometric_phase(d, t)
    big = abs(alpha) * d.n_qubits
    if models.required_cutoff(big) > cutoff:
        raise models.TruncationWarning(
            f"cutoff {cutoff} insufficient for displacement {big:.2f}")
    analytic = np.exp(1j * phase) / math.sqrt(2.0) * (
        np.kron(plus, coherent_amplitudes(cutoff, d.n_qubits * alpha))
        - np.kron(minus, coherent_amplitudes(cutoff, -d.n_qubits * alpha)))
    analytic_state = StateVector.normalized(shape, analytic)
    fac = degenerate_factory(d, cutoff)
    vec = _rk4_segment(fac, 0.0, t, psi0.amplitudes.copy(), steps)
    vec /= np.linalg.norm(vec)
    overlap = float(abs(np.vdot(analytic_state.amplitudes, vec)))
    return MultiqubitCatResult(state=analytic_state, overlap_vs_numeric=overlap,
                               alpha=complex(alpha), global_phase=float(phase))


# ---------------------------------------------------------------------------
# two-qubit phase gate
# ---------------------------------------------------------------------------

def gate_target(theta: float) -> np.ndarray:
    """cos/sin checkerboard matrix in the (|ee>, |eg>, |ge>, |gg>) basis."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 0, 0, 1j * s],
                     [0, c, 1j * s, 0],
                     [0, 1j * s, c, 0],
                     [1j * s, 0, 0, c]], dtype=complex)


@dataclass(frozen=True)
class GateResult:
    matrix: np.ndarray
    theta_bar: float
    field_purity: float
    method: str

    def error_vs_target(self) -> float:
        return float(np.max(np.abs(self.matrix - gate_target(self.theta_bar))))


def gate_unitary(d: models.DegenerateParams, cutoff: int = None,
                 method: str = "numeric", steps: int = 4000) -> GateResult:
    """Two-qubit unitary after one full detuning period T = 2 pi / delta.

    The field must disentangle at T (purity of the field reduction >= 1-1e-8)
    or a ProtocolError is raised; the global phase is fixed so the |ee><ee|
    entry carries the phase of cos(theta_bar).
    """
    if d.n_qubits != 2:
        raise ValueError("gate extraction needs n_qubits = 2")
    if d.delta <= 0:
        raise ValueError("delta must be > 0")
    t_gate = 2.0 * math.pi / d.delta
    theta = 2.0 * models.geometric_phase(d, t_gate)
    if cutoff is None:
        max_disp = 2.0 * d.g_bar / d.delta * d.n_qubits
        cutoff = max(models.required_cutoff(max_disp), 16)
    shape = SpaceShape(2, cutoff)
    if method == "analytic":
        u_full = models.analytic_evolution(d, t_gate, cutoff).dense()
        columns = []
        for q in range(4):
            vec = np.zeros(shape.dim, dtype=complex)
            vec[q * cutoff] = 1.0
            columns.append(u_full @ vec)
    elif method == "numeric":
        fac = degenerate_factory(d, cutoff)
        columns = []
        for q in range(4):
            vec = np.zeros(shape.dim, dtype=complex)
            vec[q * cutoff] = 1.0
            out = _rk4_segment(fac, 0.0, t_gate, vec, steps)
            columns.append(out / np.linalg.norm(out))
    else:
        raise ValueError(f"unknown method {method!r}")
    purity = 1.0
    m4 = np.zeros((4, 4), dtype=complex)
    for q, col in enumerate(columns):
        st = StateVector.normalized(shape, col)
        rho_f = reduce_to_field(st).entries
        purity = min(purity, float(np.real(np.trace(rho_f @ rho_f))))
        m4[:, q] = col.reshape(4, cutoff)[:, 0]
    if purity < 1.0 - 1e-8:
        raise ProtocolError(
            f"field fails to disentangle at T: purity {purity:.10f}")
    # global phase: make the |ee> entry carry the phase of cos(theta)
    ph = np.angle(m4[0, 0])
    target_ph = 0.0 if math.cos(theta) >= 0 else math.pi
    m4 = m4 * np.exp(1j * (target_ph - ph))
    return GateResult(matrix=m4, theta_bar=theta, field_purity=purity,
                      method=method)
