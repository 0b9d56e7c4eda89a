"""aqrmlab: numerical laboratory for the anisotropic quantum Rabi model.

Criticality diagnostics (fidelity susceptibility, finite-frequency scaling,
cumulant-ratio fixed point), validation of the effective model against the
full driven circuit Hamiltonian, and state-engineering protocols (cat states,
two-qubit phase gates) on truncated qubit(s) x boson Hilbert spaces.
"""

__version__ = "0.1.0"
