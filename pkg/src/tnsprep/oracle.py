"""Dense ground truth: spectra, gaps, expectations and noisy energies.

Eigensolves here go through :func:`scipy.linalg.eigh` so that they share no
code path with the feasibility audit in :mod:`tnsprep.sdp`, which uses numpy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .models import ModelSpec
from .operators import LocalMatrix, embed_matrix
from .state import (
    DENSE_MAX_QUBITS,
    BudgetError,
    ParentHamiltonian,
    StateVector,
    build_parent_hamiltonian,
    build_state,
)

DEGENERACY_TOL = 1e-8
DENSITY_MAX_QUBITS = 8


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    ground_degeneracy: int
    gap: float
    ground_vector: StateVector
    max_residual: float

    @property
    def E0(self) -> float:
        return float(self.eigenvalues[0])


def spectrum(ph: ParentHamiltonian, k: int = 4, driver: str = "evd") -> SpectrumReport:
    """Lowest ``k`` eigenvalues of the assembled Hamiltonian.

    The degeneracy count uses a threshold of ``1e-8`` relative to the
    spectral norm, and the gap is measured from the ground level to the first
    level outside that window.
    """
    H = ph.dense()
    w, v = scipy.linalg.eigh(H, driver=driver)
    scale = max(1.0, float(np.max(np.abs(w))))
    deg = int(np.sum(w - w[0] <= DEGENERACY_TOL * scale))
    gap = float(w[deg] - w[0]) if deg < w.size else 0.0
    kk = min(max(k, deg + 1), w.size)
    resid = max(float(np.linalg.norm(H @ v[:, n] - w[n] * v[:, n])) for n in range(kk))
    return SpectrumReport(w[:kk].copy(), deg, gap, StateVector(v[:, 0].copy()), resid)


def exact_gap(model: ModelSpec) -> float:
    return spectrum(build_parent_hamiltonian(model), k=2).gap


def exact_expectation(state: StateVector | np.ndarray, op: LocalMatrix) -> float:
    psi = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
    n = int(round(np.log2(psi.size)))
    if 2**n != psi.size or (op.support and max(op.support) >= n):
        raise ValueError("operator support does not fit the state")
    full = embed_matrix(op.matrix, op.support, list(range(n)))
    val = complex(np.vdot(psi, full @ psi))
    return val.real


def depolarize(rho: np.ndarray, n_qubits: int, p: float) -> np.ndarray:
    """Independent single-qubit depolarizing ``rho -> (1-p) rho + p tr_q(rho) I/2`` on every qubit."""
    if not 0 <= p <= 1:
        raise ValueError("depolarizing probability must lie in [0, 1]")
    t = rho.reshape((2,) * (2 * n_qubits))
    for q in range(n_qubits):
        traced = np.trace(t, axis1=q, axis2=n_qubits + q)
        mixed = np.multiply.outer(np.eye(2) / 2, traced)
        # outer product puts (q, n+q) first; move them back
        mixed = np.moveaxis(mixed, [0, 1], [q, n_qubits + q])
        t = (1 - p) * t + p * mixed
    return t.reshape(rho.shape)


def noisy_energy(model: ModelSpec, p: float, ph: ParentHamiltonian | None = None) -> float:
    """``tr(H rho)`` with ``rho`` the depolarized model state."""
    if model.N > DENSITY_MAX_QUBITS:
        raise BudgetError(f"density matrix on {model.N} qubits exceeds the cap of {DENSITY_MAX_QUBITS}")
    ph = ph or build_parent_hamiltonian(model)
    psi = build_state(model).amplitudes
    rho = depolarize(np.outer(psi, psi.conj()), model.N, p)
    return float(np.real(np.trace(ph.dense(DENSE_MAX_QUBITS) @ rho)))


def gap_sweep(model: ModelSpec, betas) -> list[tuple[float, float, float]]:
    """``(beta, E0, gap)`` rows for a beta grid."""
    rows = []
    for b in betas:
        rep = spectrum(build_parent_hamiltonian(model.with_params(beta=float(b))), k=2)
        rows.append((float(b), rep.E0, rep.gap))
    return rows
