"""Truncated Hilbert-space kernel: operators, states, partial traces, entropy.

Basis ordering is fixed across the whole package: qubit indices vary slowest,
the Fock index fastest.  A product state |q_0 q_1 ... q_{n-1}> |m> sits at flat
index (bits q_0...q_{n-1} read as a binary number, q_0 most significant) *
boson_cutoff + m.  Within each qubit factor index 0 is |e> and index 1 is |g>,
so sigma_z = diag(+1, -1) and the decoupled ground state is |g, 0>.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-10
PSD_TOL = 1e-10

# Builders return dense matrices below this dimension and CSR above it.
DENSE_LIMIT = 1024

_QUBIT_LABELS = {"e": np.array([1.0, 0.0]), "g": np.array([0.0, 1.0]),
                 "+": np.array([1.0, 1.0]) / np.sqrt(2.0),
                 "-": np.array([1.0, -1.0]) / np.sqrt(2.0)}


@dataclass(frozen=True)
class SpaceShape:
    """Shape of a qubit(s) x truncated-boson product space.

    n_qubits may be 0 (field-only factor) and boson_cutoff 1 (qubit-only
    factor); the total dimension 2**n_qubits * boson_cutoff is always > 0.
    """

    n_qubits: int
    boson_cutoff: int

    def __post_init__(self):
        if self.n_qubits < 0:
            raise ValueError(f"n_qubits must be >= 0, got {self.n_qubits}")
        if self.boson_cutoff < 1:
            raise ValueError(f"boson_cutoff must be >= 1, got {self.boson_cutoff}")

    @property
    def dim(self) -> int:
        return (2 ** self.n_qubits) * self.boson_cutoff


def _as_matrix(m):
    if sp.issparse(m):
        return m.tocsr()
    return np.asarray(m, dtype=complex)


def hermiticity_defect(matrix) -> float:
    """Max-entry |A - A^dagger|."""
    if sp.issparse(matrix):
        d = matrix - matrix.getH()
        return 0.0 if d.nnz == 0 else np.max(np.abs(d.data))
    return float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0


@dataclass(frozen=True)
class Operator:
    """Square complex matrix on a SpaceShape; storage dense or sparse.

    All instances are treated as immutable after construction.
    """

    shape: SpaceShape
    matrix: object = field(repr=False)
    hermitian_hint: bool = False

    def __post_init__(self):
        m = _as_matrix(self.matrix)
        object.__setattr__(self, "matrix", m)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"operator matrix must be square, got {m.shape}")
        if m.shape[0] != self.shape.dim:
            raise ValueError(
                f"matrix dimension {m.shape[0]} does not match shape dim {self.shape.dim}")
        if self.hermitian_hint:
            defect = hermiticity_defect(m)
            if defect > HERMITIAN_TOL:
                raise ValueError(
                    f"hermitian_hint set but max |A - A^dagger| = {defect:.3e}")

    @property
    def dim(self) -> int:
        return self.shape.dim

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else self.matrix

    def dag(self) -> "Operator":
        return Operator(self.shape, self.matrix.conj().T, self.hermitian_hint)

    def __add__(self, other: "Operator") -> "Operator":
        self._check_compatible(other)
        return Operator(self.shape, self.matrix + other.matrix,
                        self.hermitian_hint and other.hermitian_hint)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_compatible(other)
        return Operator(self.shape, self.matrix - other.matrix,
                        self.hermitian_hint and other.hermitian_hint)

    def __mul__(self, scalar) -> "Operator":
        hint = self.hermitian_hint and (np.imag(scalar) == 0)
        return Operator(self.shape, self.matrix * scalar, bool(hint))

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check_compatible(other)
            return Operator(self.shape, self.matrix @ other.matrix, False)
        if isinstance(other, StateVector):
            return self.matrix @ other.amplitudes
        return self.matrix @ other

    def _check_compatible(self, other: "Operator"):
        if other.shape.dim != self.shape.dim:
            raise ValueError(
                f"dimension mismatch: {self.shape.dim} vs {other.shape.dim}")

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec

    def expectation(self, psi: "StateVector") -> complex:
        v = psi.amplitudes
        return complex(np.vdot(v, self.matrix @ v))


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state on a SpaceShape."""

    shape: SpaceShape
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).ravel()
        object.__setattr__(self, "amplitudes", v)
        if v.size != self.shape.dim:
            raise ValueError(
                f"amplitude length {v.size} does not match shape dim {self.shape.dim}")
        nrm = np.linalg.norm(v)
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {nrm} deviates from 1 beyond {NORM_TOL}")

    @classmethod
    def normalized(cls, shape: SpaceShape, amplitudes) -> "StateVector":
        v = np.asarray(amplitudes, dtype=complex).ravel()
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(shape, v / nrm)

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, unit-trace, positive-semidefinite matrix."""

    dimension: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        object.__setattr__(self, "entries", m)
        if m.shape != (self.dimension, self.dimension):
            raise ValueError(f"entries shape {m.shape} != ({self.dimension},)*2")
        defect = hermiticity_defect(m)
        if defect > HERMITIAN_TOL:
            raise ValueError(f"density matrix not Hermitian: defect {defect:.3e}")
        tr = np.trace(m).real
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"density matrix trace {tr} deviates from 1")
        evals = np.linalg.eigvalsh((m + m.conj().T) / 2)
        if evals.min() < -PSD_TOL:
            raise ValueError(
                f"density matrix has negative eigenvalue {evals.min():.3e}")

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh((self.entries + self.entries.conj().T) / 2)


# ---------------------------------------------------------------------------
# elementary operators
# ---------------------------------------------------------------------------

def _wrap(shape: SpaceShape, matrix, hermitian=False) -> Operator:
    if shape.dim >= DENSE_LIMIT and not sp.issparse(matrix):
        matrix = sp.csr_matrix(matrix)
    return Operator(shape, matrix, hermitian)


def boson_annihilator(cutoff: int) -> Operator:
    """Truncated annihilation operator: entry (m-1, m) = sqrt(m)."""
    if cutoff < 2:
        raise ValueError(f"boson cutoff must be >= 2, got {cutoff}")
    shape = SpaceShape(0, cutoff)
    m = np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), k=1).astype(complex)
    return _wrap(shape, m)


def boson_creator(cutoff: int) -> Operator:
    return boson_annihilator(cutoff).dag()


def number_operator(cutoff: int) -> Operator:
    shape = SpaceShape(0, cutoff)
    return _wrap(shape, np.diag(np.arange(cutoff, dtype=complex)), hermitian=True)


def position_quadrature(cutoff: int) -> Operator:
    """X = (a + a^dagger)/sqrt(2) on the truncated Fock space."""
    a = boson_annihilator(cutoff).dense()
    shape = SpaceShape(0, cutoff)
    return _wrap(shape, (a + a.conj().T) / np.sqrt(2.0), hermitian=True)


def momentum_quadrature(cutoff: int) -> Operator:
    """P = i (a^dagger - a)/sqrt(2)."""
    a = boson_annihilator(cutoff).dense()
    shape = SpaceShape(0, cutoff)
    return _wrap(shape, 1j * (a.conj().T - a) / np.sqrt(2.0), hermitian=True)


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    # basis order (|e>, |g>): sigma_plus |g> = |e>
    "plus": np.array([[0, 1], [0, 0]], dtype=complex),
    "minus": np.array([[0, 0], [1, 0]], dtype=complex),
}


def pauli(which: str) -> Operator:
    """2x2 Pauli operator in the (|e>, |g>) basis; sigma_z |e> = +|e>."""
    try:
        m = _PAULI[which]
    except KeyError:
        raise ValueError(f"unknown Pauli label {which!r}; use x, y, z, plus, minus")
    return Operator(SpaceShape(1, 1), m.copy(), hermitian_hint=which in ("x", "y", "z"))


def identity(shape: SpaceShape) -> Operator:
    if shape.dim >= DENSE_LIMIT:
        return Operator(shape, sp.identity(shape.dim, dtype=complex, format="csr"), True)
    return Operator(shape, np.eye(shape.dim, dtype=complex), True)


def tensor(a: Operator, b: Operator) -> Operator:
    """Kronecker product; a's factors are slower than b's.

    Shapes compose as (a.n_qubits + b.n_qubits, a.cutoff * b.cutoff), which
    matches the repo basis ordering when qubit factors come first.
    """
    shape = SpaceShape(a.shape.n_qubits + b.shape.n_qubits,
                       a.shape.boson_cutoff * b.shape.boson_cutoff)
    if a.is_sparse or b.is_sparse or shape.dim >= DENSE_LIMIT:
        m = sp.kron(sp.csr_matrix(a.matrix), sp.csr_matrix(b.matrix), format="csr")
    else:
        m = np.kron(a.dense(), b.dense())
    return Operator(shape, m, a.hermitian_hint and b.hermitian_hint)


def embed_qubit(op: Operator, site: int, shape: SpaceShape) -> Operator:
    """Place a single-qubit operator at the given site, identities elsewhere."""
    if op.dim != 2:
        raise ValueError(f"embed_qubit needs a 2x2 operator, got dim {op.dim}")
    if not 0 <= site < shape.n_qubits:
        raise ValueError(f"site {site} out of range for {shape.n_qubits} qubits")
    left = np.eye(2 ** site, dtype=complex)
    right = np.eye(2 ** (shape.n_qubits - site - 1), dtype=complex)
    q = np.kron(np.kron(left, op.dense()), right)
    full = np.kron(q, np.eye(shape.boson_cutoff, dtype=complex))
    return _wrap(shape, full, hermitian=op.hermitian_hint)


def collective_sigma_x(shape: SpaceShape) -> Operator:
    """Sum of sigma_x over all qubit sites (field factor untouched)."""
    total = embed_qubit(pauli("x"), 0, shape)
    for site in range(1, shape.n_qubits):
        total = total + embed_qubit(pauli("x"), site, shape)
    return total


def parity_operator(shape: SpaceShape) -> Operator:
    """(tensor of sigma_z over qubits) * exp(i pi a^dagger a); diagonal."""
    qubit_diag = np.ones(1)
    for _ in range(shape.n_qubits):
        qubit_diag = np.kron(qubit_diag, np.array([1.0, -1.0]))
    fock_diag = (-1.0) ** np.arange(shape.boson_cutoff)
    diag = np.kron(qubit_diag, fock_diag).astype(complex)
    return _wrap(shape, np.diag(diag), hermitian=True)


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

def qubit_state(labels: str) -> np.ndarray:
    """Product qubit vector from a label string over {e, g, +, -}."""
    v = np.array([1.0 + 0j])
    for ch in labels:
        if ch not in _QUBIT_LABELS:
            raise ValueError(f"unknown qubit label {ch!r}")
        v = np.kron(v, _QUBIT_LABELS[ch])
    return v


def fock_state(cutoff: int, n: int) -> np.ndarray:
    if not 0 <= n < cutoff:
        raise ValueError(f"Fock index {n} out of range for cutoff {cutoff}")
    v = np.zeros(cutoff, dtype=complex)
    v[n] = 1.0
    return v


def coherent_amplitudes(cutoff: int, alpha: complex) -> np.ndarray:
    """Truncated coherent-state amplitudes e^{-|a|^2/2} a^n / sqrt(n!)."""
    n = np.arange(cutoff)
    log_fact = np.cumsum(np.log(np.maximum(n, 1)))
    amps = np.exp(-0.5 * abs(alpha) ** 2) * np.exp(
        n * np.log(complex(alpha)) - 0.5 * log_fact) if alpha != 0 else fock_state(cutoff, 0)
    return np.asarray(amps, dtype=complex)


def product_state(shape: SpaceShape, qubit_labels: str, fock: int = 0) -> StateVector:
    """|labels> x |fock>, e.g. product_state(shape, 'g', 0) -> |g,0>."""
    if len(qubit_labels) != shape.n_qubits:
        raise ValueError(
            f"{len(qubit_labels)} qubit labels for {shape.n_qubits} qubits")
    amps = np.kron(qubit_state(qubit_labels), fock_state(shape.boson_cutoff, fock))
    return StateVector(shape, amps)


def coherent_state(cutoff: int, alpha: complex) -> StateVector:
    """Field-only coherent state, renormalized on the truncated space."""
    return StateVector.normalized(SpaceShape(0, cutoff),
                                  coherent_amplitudes(cutoff, alpha))


# ---------------------------------------------------------------------------
# reductions and entropy
# ---------------------------------------------------------------------------

def _psi_matrix(psi: StateVector) -> np.ndarray:
    nq = 2 ** psi.shape.n_qubits
    return psi.amplitudes.reshape(nq, psi.shape.boson_cutoff)


def reduce_to_qubits(psi: StateVector) -> DensityMatrix:
    """Partial trace over the field factor."""
    m = _psi_matrix(psi)
    rho = m @ m.conj().T
    return DensityMatrix(rho.shape[0], rho)


def reduce_to_field(psi: StateVector) -> DensityMatrix:
    """Partial trace over all qubit factors."""
    m = _psi_matrix(psi)
    rho = m.T @ m.conj()
    return DensityMatrix(rho.shape[0], rho)


def entanglement_entropy(rho: DensityMatrix) -> float:
    """Von Neumann entropy -Tr[rho log2 rho] in bits, with 0 log 0 := 0."""
    p = rho.eigenvalues()
    if p.min() < -PSD_TOL:
        raise ValueError(f"eigenvalue {p.min():.3e} below PSD tolerance")
    p = np.clip(p, 0.0, None)
    p = p[p > 0]
    return float(max(0.0, -np.sum(p * np.log2(p))))
