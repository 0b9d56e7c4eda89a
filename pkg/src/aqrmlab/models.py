"""Hamiltonian builders and frame transformations.

Three parameter records feed the builders: AqrmParams (effective two-parameter
coupling model), CircuitParams (lab-frame driven circuit), DegenerateParams
(zero-frequency collective model).  hbar = 1 throughout; every frequency and
coupling is an angular frequency.  Criticality work uses dimensionless units
with the resonator frequency set to 1; dynamics uses rad/s with times in
seconds.  `aqrm_from_dimensionless` owns that boundary.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .hilbert import (
    Operator,
    SpaceShape,
    boson_annihilator,
    collective_sigma_x,
    identity,
    number_operator,
    pauli,
    tensor,
    _wrap,
)

DEGENERATE_PHASE_THRESHOLD = 1e-6  # |delta * t| below this uses series limits
MAX_DEGENERATE_QUBITS = 4


class TruncationWarning(UserWarning):
    """Displacement pushes population too close to the Fock cutoff."""


@dataclass(frozen=True)
class AqrmParams:
    """Effective model: qubit splitting, boson frequency, two couplings, two phases."""

    omega: float
    omega_q: float
    g_r: float
    g_cr: float
    phi_r: float = 0.0
    phi_b: float = 0.0

    @property
    def anisotropy(self) -> float:
        """Ratio of counter-rotating to rotating coupling; needs g_r != 0."""
        if self.g_r == 0:
            raise ValueError("anisotropy undefined: g_r = 0")
        return self.g_cr / self.g_r

    @property
    def frequency_ratio(self) -> float:
        if self.omega == 0:
            raise ValueError("frequency ratio undefined: omega = 0")
        return self.omega_q / self.omega

    @property
    def critical_coupling(self) -> float:
        """sqrt(omega_q * omega) / (1 + anisotropy)."""
        if self.omega_q * self.omega <= 0:
            raise ValueError("critical coupling needs omega_q * omega > 0")
        return math.sqrt(self.omega_q * self.omega) / (1.0 + self.anisotropy)

    def with_coupling(self, g: float) -> "AqrmParams":
        """Same frequencies, phases and anisotropy, rotating coupling set to g."""
        lam = self.anisotropy
        return replace(self, g_r=g, g_cr=lam * g)


def aqrm_from_dimensionless(eta: float, anisotropy: float, g_over_gc: float,
                            omega: float = 1.0, phi_r: float = 0.0,
                            phi_b: float = 0.0) -> AqrmParams:
    """AqrmParams from (frequency ratio, anisotropy, g/g_c); omega sets units."""
    if eta <= 0 or anisotropy <= 0:
        raise ValueError("eta and anisotropy must be > 0")
    omega_q = eta * omega
    g_c = math.sqrt(omega_q * omega) / (1.0 + anisotropy)
    g = g_over_gc * g_c
    return AqrmParams(omega=omega, omega_q=omega_q, g_r=g, g_cr=anisotropy * g,
                      phi_r=phi_r, phi_b=phi_b)


@dataclass(frozen=True)
class CircuitParams:
    """Lab-frame circuit: static qubit/LC/coupling plus two cosine drives."""

    omega: float
    omega_q: float
    g: float
    Omega_r: float
    Lambda_r: float
    omega_r: float
    Omega_b: float
    Lambda_b: float
    omega_b: float
    phi_r: float = 0.0
    phi_b: float = 0.0

    def __post_init__(self):
        for name in ("omega", "omega_q", "omega_r", "omega_b"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("Omega_r", "Lambda_r", "Omega_b", "Lambda_b"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def delta_r(self) -> float:
        """Red-sideband detuning: omega_r = omega_q - omega - delta_r."""
        return self.omega_q - self.omega - self.omega_r

    @property
    def delta_b(self) -> float:
        """Blue-sideband detuning: omega_b = omega_q + omega - delta_b."""
        return self.omega_q + self.omega - self.omega_b

    def validity_ratios(self, warn_threshold: float = 0.1) -> dict:
        """Small-parameter ratios behind the effective model; not enforced.

        Each entry maps a named ratio (should be << 1) to (value, flagged).
        """
        ratios = {
            "g_over_omega_q_minus_omega": self.g / abs(self.omega_q - self.omega),
            "g_over_omega_q_plus_omega": self.g / (self.omega_q + self.omega),
            "Omega_r_over_min_qubit_scale": self.Omega_r / min(
                self.omega_q, abs(self.omega_q - self.omega_r),
                self.omega_q + self.omega_r),
            "Omega_b_over_min_qubit_scale": self.Omega_b / min(
                self.omega_q, abs(self.omega_q - self.omega_b),
                self.omega_q + self.omega_b),
            "Lambda_r_over_fast_detuning": self.Lambda_r / min(
                abs(self.omega - self.omega_r + self.omega_q),
                abs(self.omega - self.omega_r - self.omega_q)),
            "Lambda_b_over_fast_detuning": self.Lambda_b / min(
                abs(self.omega - self.omega_q + self.omega_b),
                abs(self.omega - self.omega_q - self.omega_b)),
        }
        return {k: (v, v > warn_threshold) for k, v in ratios.items()}


@dataclass(frozen=True)
class DegenerateParams:
    """Collective zero-frequency model: coupling g_bar, detuning delta, phase."""

    n_qubits: int
    g_bar: float
    delta: float
    phi: float = 0.0

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_DEGENERATE_QUBITS:
            raise ValueError(
                f"n_qubits must be in [1, {MAX_DEGENERATE_QUBITS}], got {self.n_qubits}")
        if self.g_bar < 0:
            raise ValueError("g_bar must be >= 0")


# ---------------------------------------------------------------------------
# effective-model builders
# ---------------------------------------------------------------------------

def _single_qubit_parts(cutoff: int):
    shape = SpaceShape(1, cutoff)
    a = tensor(identity(SpaceShape(1, 1)), boson_annihilator(cutoff))
    sz = tensor(pauli("z"), identity(SpaceShape(0, cutoff)))
    n_op = tensor(identity(SpaceShape(1, 1)), number_operator(cutoff))
    sp_a = tensor(pauli("plus"), boson_annihilator(cutoff))          # sigma_+ a
    sp_adag = tensor(pauli("plus"), boson_annihilator(cutoff).dag())  # sigma_+ a^dag
    return shape, a, sz, n_op, sp_a, sp_adag


def build_aqrm(p: AqrmParams, cutoff: int) -> Operator:
    """H = omega_q/2 sigma_z + omega n + g_r (sigma_+ a e^{i phi_r} + h.c.)
    + g_cr (sigma_+ a^dag e^{i phi_b} + h.c.)."""
    if cutoff < 2:
        raise ValueError(f"cutoff must be >= 2, got {cutoff}")
    shape, _, sz, n_op, sp_a, sp_adag = _single_qubit_parts(cutoff)
    rot = p.g_r * np.exp(1j * p.phi_r) * sp_a.matrix
    crot = p.g_cr * np.exp(1j * p.phi_b) * sp_adag.matrix
    h = (0.5 * p.omega_q * sz.matrix + p.omega * n_op.matrix
         + rot + rot.conj().T + crot + crot.conj().T)
    return Operator(shape, h, hermitian_hint=True)


def coupling_operator(anisotropy: float, cutoff: int, phi_r: float = 0.0,
                      phi_b: float = 0.0) -> Operator:
    """The operator multiplying the overall coupling g at fixed anisotropy."""
    shape, _, _, _, sp_a, sp_adag = _single_qubit_parts(cutoff)
    rot = np.exp(1j * phi_r) * sp_a.matrix
    crot = anisotropy * np.exp(1j * phi_b) * sp_adag.matrix
    h = rot + rot.conj().T + crot + crot.conj().T
    return Operator(shape, h, hermitian_hint=True)


def excitation_number(cutoff: int) -> Operator:
    """N = a^dag a + sigma_+ sigma_- on the one-qubit space."""
    shape, _, _, n_op, _, _ = _single_qubit_parts(cutoff)
    sp_sm = tensor(pauli("plus") @ pauli("minus"), identity(SpaceShape(0, cutoff)))
    return Operator(shape, n_op.matrix + sp_sm.matrix, hermitian_hint=True)


# ---------------------------------------------------------------------------
# drive -> effective mapping
# ---------------------------------------------------------------------------

def map_drives_to_aqrm(c: CircuitParams) -> AqrmParams:
    """Text mapping: omega_q_eff = (d_r + d_b)/2, omega_eff = (d_b - d_r)/2,
    couplings Lambda/2, phases copied."""
    dr, db = c.delta_r, c.delta_b
    return AqrmParams(omega=(db - dr) / 2.0, omega_q=(dr + db) / 2.0,
                      g_r=c.Lambda_r / 2.0, g_cr=c.Lambda_b / 2.0,
                      phi_r=c.phi_r, phi_b=c.phi_b)


def drives_from_aqrm(p: AqrmParams, omega: float, omega_q: float, g: float,
                     direct_drive_ratio: float = 1.0) -> CircuitParams:
    """Invert the text mapping: choose drive frequencies realizing p.

    delta_r = omega_q_eff - omega_eff and delta_b = omega_q_eff + omega_eff,
    Lambda_j = 2 g_j.  Omega_j defaults to Lambda_j (the hardware produces both
    with comparable strength); direct_drive_ratio scales that choice.
    """
    dr = p.omega_q - p.omega
    db = p.omega_q + p.omega
    lam_r, lam_b = 2.0 * p.g_r, 2.0 * p.g_cr
    return CircuitParams(
        omega=omega, omega_q=omega_q, g=g,
        Omega_r=direct_drive_ratio * lam_r, Lambda_r=lam_r,
        omega_r=omega_q - omega - dr,
        Omega_b=direct_drive_ratio * lam_b, Lambda_b=lam_b,
        omega_b=omega_q + omega - db,
        phi_r=p.phi_r, phi_b=p.phi_b)


@dataclass(frozen=True)
class MappingReport:
    """Both readings of the detuning-to-effective-frequency assignment."""

    delta_r: float
    delta_b: float
    text: AqrmParams
    swapped: AqrmParams
    validity: dict

    def summary(self) -> dict:
        out = {"delta_r": self.delta_r, "delta_b": self.delta_b}
        for tag, p in (("text", self.text), ("swapped", self.swapped)):
            entry = {"omega_q": p.omega_q, "omega": p.omega,
                     "g_r": p.g_r, "g_cr": p.g_cr}
            try:
                entry["eta"] = p.frequency_ratio
                entry["g_over_gc"] = p.g_r / p.critical_coupling
            except (ValueError, ZeroDivisionError):
                entry["eta"] = None
                entry["g_over_gc"] = None
            out[tag] = entry
        out["validity_ratios"] = {k: {"value": v, "flagged": f}
                                  for k, (v, f) in self.validity.items()}
        return out


def mapping_report(c: CircuitParams) -> MappingReport:
    """Companion report comparing the text and swapped frequency assignments."""
    text = map_drives_to_aqrm(c)
    swapped = replace(text, omega=text.omega_q, omega_q=text.omega)
    return MappingReport(delta_r=c.delta_r, delta_b=c.delta_b, text=text,
                         swapped=swapped, validity=c.validity_ratios())


# ---------------------------------------------------------------------------
# lab-frame and interaction-picture builders
# ---------------------------------------------------------------------------

def lab_static_part(c: CircuitParams, cutoff: int) -> Operator:
    """omega_q/2 sigma_z + omega n + g sigma_x (a + a^dag)."""
    shape, a, sz, n_op, _, _ = _single_qubit_parts(cutoff)
    sx = tensor(pauli("x"), identity(SpaceShape(0, cutoff)))
    x = a.matrix + a.matrix.conj().T
    h = 0.5 * c.omega_q * sz.matrix + c.omega * n_op.matrix + c.g * (sx.matrix @ x)
    return Operator(shape, h, hermitian_hint=True)


def lab_drive_part(c: CircuitParams, which: str, cutoff: int) -> Operator:
    """Omega_j sigma_x - Lambda_j sigma_x (a + a^dag) for drive j in {r, b}."""
    shape, a, _, _, _, _ = _single_qubit_parts(cutoff)
    sx = tensor(pauli("x"), identity(SpaceShape(0, cutoff)))
    x = a.matrix + a.matrix.conj().T
    if which == "r":
        big_omega, lam = c.Omega_r, c.Lambda_r
    elif which == "b":
        big_omega, lam = c.Omega_b, c.Lambda_b
    else:
        raise ValueError(f"drive label must be 'r' or 'b', got {which!r}")
    h = big_omega * sx.matrix - lam * (sx.matrix @ x)
    return Operator(shape, h, hermitian_hint=True)


def build_lab_hamiltonian(c: CircuitParams, t: float, cutoff: int) -> Operator:
    """Instantaneous driven circuit Hamiltonian at time t."""
    if t < 0:
        raise ValueError("t must be >= 0")
    h = lab_static_part(c, cutoff).matrix.copy()
    h += math.cos(c.omega_r * t + c.phi_r) * lab_drive_part(c, "r", cutoff).matrix
    h += math.cos(c.omega_b * t + c.phi_b) * lab_drive_part(c, "b", cutoff).matrix
    return Operator(SpaceShape(1, cutoff), h, hermitian_hint=True)


def build_interaction_hamiltonian(c: CircuitParams, t: float, cutoff: int) -> Operator:
    """Sideband interaction picture: slowly rotating red/blue coupling terms."""
    if t < 0:
        raise ValueError("t must be >= 0")
    shape, _, _, _, sp_a, sp_adag = _single_qubit_parts(cutoff)
    red = 0.5 * c.Lambda_r * np.exp(1j * (c.delta_r * t + c.phi_r)) * sp_a.matrix
    blue = 0.5 * c.Lambda_b * np.exp(1j * (c.delta_b * t + c.phi_b)) * sp_adag.matrix
    h = red + red.conj().T + blue + blue.conj().T
    return Operator(shape, h, hermitian_hint=True)


def interaction_frame_generator(c: CircuitParams, cutoff: int) -> Operator:
    """H_0 = (d_r + d_b) sigma_z / 4 + (d_b - d_r) n / 2.

    Propagation under the static effective model equals e^{-i H_0 t} times
    propagation under the interaction-picture Hamiltonian.
    """
    shape, _, sz, n_op, _, _ = _single_qubit_parts(cutoff)
    h = 0.25 * (c.delta_r + c.delta_b) * sz.matrix \
        + 0.5 * (c.delta_b - c.delta_r) * n_op.matrix
    return Operator(shape, h, hermitian_hint=True)


# ---------------------------------------------------------------------------
# degenerate collective model and its analytic evolution
# ---------------------------------------------------------------------------

def build_degenerate_hamiltonian(d: DegenerateParams, t: float, cutoff: int) -> Operator:
    """g_bar J_x (a e^{-i(delta t + phi)} + a^dag e^{i(delta t + phi)})."""
    if cutoff < 2:
        raise ValueError(f"cutoff must be >= 2, got {cutoff}")
    shape = SpaceShape(d.n_qubits, cutoff)
    if shape.dim > 65536:
        raise MemoryError(f"degenerate space dim {shape.dim} exceeds memory budget")
    jx = collective_sigma_x(shape)
    a_full = np.kron(np.eye(2 ** d.n_qubits, dtype=complex),
                     boson_annihilator(cutoff).dense())
    phase = np.exp(-1j * (d.delta * t + d.phi))
    ja = d.g_bar * (jx.dense() @ (phase * a_full))
    return Operator(shape, ja + ja.conj().T, hermitian_hint=True)


def displacement_amplitude(d: DegenerateParams, t: float) -> complex:
    """alpha(t) = g_bar (1 - e^{i delta t}) e^{i phi} / delta, with series limit."""
    if abs(d.delta * t) < DEGENERATE_PHASE_THRESHOLD:
        return -1j * d.g_bar * t * np.exp(1j * d.phi)
    return d.g_bar * (1.0 - np.exp(1j * d.delta * t)) * np.exp(1j * d.phi) / d.delta


def geometric_phase(d: DegenerateParams, t: float) -> float:
    """Phi(t) = (g_bar/delta)^2 (delta t - sin delta t), with series limit."""
    if abs(d.delta * t) < DEGENERATE_PHASE_THRESHOLD:
        return d.g_bar ** 2 * d.delta * t ** 3 / 6.0
    return (d.g_bar / d.delta) ** 2 * (d.delta * t - math.sin(d.delta * t))


def displacement_operator(cutoff: int, alpha: complex,
                          method: str = "unitary") -> Operator:
    """Truncated displacement operator D(alpha).

    method="unitary": exponential of the truncated anti-Hermitian generator
    alpha a^dag - alpha* a (unitary to machine precision; boundary elements
    deviate from the untruncated operator).
    method="exact-elements": e^{-|a|^2/2} e^{alpha a^dag} e^{-alpha* a}; the
    raising/lowering series terminate on the truncated space and every element
    (m, n) with m, n < cutoff only routes through levels < cutoff, so it equals
    the untruncated matrix element exactly (at the price of norm leakage in the
    top columns).
    """
    a = boson_annihilator(cutoff).dense()
    adag = a.conj().T
    if method == "unitary":
        h_gen = -1j * (alpha * adag - np.conj(alpha) * a)  # Hermitian
        evals, evecs = np.linalg.eigh(h_gen)
        m = (evecs * np.exp(1j * evals)) @ evecs.conj().T
    elif method == "exact-elements":
        upper = np.eye(cutoff, dtype=complex)
        term = np.eye(cutoff, dtype=complex)
        for k in range(1, cutoff):
            term = term @ (alpha * adag) / k
            upper += term
        lower = np.eye(cutoff, dtype=complex)
        term = np.eye(cutoff, dtype=complex)
        for k in range(1, cutoff):
            term = term @ (-np.conj(alpha) * a) / k
            lower += term
        m = math.exp(-0.5 * abs(alpha) ** 2) * (upper @ lower)
    else:
        raise ValueError(f"unknown displacement method {method!r}")
    return Operator(SpaceShape(0, cutoff), m)


def required_cutoff(max_displacement: float) -> int:
    """Poisson-tail bound: cutoff >= M^2 + 6M + 10 for displacement M."""
    m = abs(max_displacement)
    return int(math.ceil(m * m + 6.0 * m + 10.0))


def analytic_evolution(d: DegenerateParams, t: float, cutoff: int) -> Operator:
    """U(t) = exp[i Phi(t) J_x^2] D(alpha(t) J_x) on the truncated space."""
    if t < 0:
        raise ValueError("t must be >= 0")
    alpha = displacement_amplitude(d, t)
    phi_bar = geometric_phase(d, t)
    max_disp = abs(alpha) * d.n_qubits
    if required_cutoff(max_disp) > cutoff:
        warnings.warn(
            f"displacement |alpha|*N = {max_disp:.3f} needs cutoff >= "
            f"{required_cutoff(max_disp)}, have {cutoff}", TruncationWarning)
    nq_dim = 2 ** d.n_qubits
    shape = SpaceShape(d.n_qubits, cutoff)
    jx = collective_sigma_x(shape)
    # J_x acts on the qubit factor only; diagonalize the 2^N x 2^N block.
    jx_qubit = jx.dense().reshape(nq_dim, cutoff, nq_dim, cutoff)[:, 0, :, 0]
    evals, evecs = np.linalg.eigh(jx_qubit)
    u = np.zeros((shape.dim, shape.dim), dtype=complex)
    for m_val in np.unique(np.round(evals, 9)):
        sel = np.isclose(evals, m_val, atol=1e-9)
        proj = evecs[:, sel] @ evecs[:, sel].conj().T
        disp = displacement_operator(cutoff, alpha * m_val).dense()
        u += np.kron(proj, np.exp(1j * phi_bar * m_val ** 2) * disp)
    return Operator(shape, u)
