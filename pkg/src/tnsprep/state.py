"""Statevectors, parent Hamiltonians and adiabatic preparation.

The deformed state is ``exp(beta K1) exp(i t K2) |phi_1 ... phi_N>`` up to
normalization. Each site ``j`` contributes a frustration-free term
``h_j = O_j^dagger (1 - |phi_j><phi_j|) O_j`` that annihilates it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .lattice import Region
from .models import ModelSpec
from .operators import LocalMatrix, LocalOperator, embed_matrix, herm_exp

STATEVECTOR_MAX_QUBITS = 14
DENSE_MAX_QUBITS = 10


class BudgetError(ValueError):
    """Requested object exceeds the dense statevector/matrix budget."""


def _check_budget(n: int, cap: int, what: str) -> None:
    if n > cap:
        raise BudgetError(f"{what} on {n} qubits exceeds the cap of {cap}")


# Statevector primitives ------------------------------------------------------------


def apply_local(psi: np.ndarray, n_qubits: int, matrix: np.ndarray, support: Sequence[int]) -> np.ndarray:
    """Apply ``matrix`` acting on ``support`` (sorted, MSB first) to ``psi``."""
    k = len(support)
    if k == 0:
        return psi * matrix[0, 0]
    t = psi.reshape((2,) * n_qubits)
    m = matrix.reshape((2,) * (2 * k))
    t = np.tensordot(m, t, axes=(list(range(k, 2 * k)), list(support)))
    # tensordot puts the k output axes first; move them back into place
    rest = [q for q in range(n_qubits) if q not in support]
    order = list(support) + rest
    t = np.moveaxis(t, list(range(n_qubits)), order)
    return t.reshape(-1)


def product_vector(states: Iterable[np.ndarray]) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for s in states:
        out = np.kron(out, s)
    return out


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray = field(repr=False)
    norm_constant: float = 1.0

    @property
    def n_qubits(self) -> int:
        return int(round(math.log2(self.amplitudes.size)))

    def overlap(self, other: StateVector | np.ndarray) -> complex:
        b = other.amplitudes if isinstance(other, StateVector) else np.asarray(other)
        return complex(np.vdot(self.amplitudes, b))

    def fidelity(self, other: StateVector | np.ndarray) -> float:
        return abs(self.overlap(other)) ** 2

    def expectation(self, op: LocalMatrix) -> complex:
        return complex(np.vdot(self.amplitudes, apply_local(self.amplitudes, self.n_qubits, op.matrix, op.support)))

    def apply(self, op: LocalMatrix) -> np.ndarray:
        return apply_local(self.amplitudes, self.n_qubits, op.matrix, op.support)


def _normalized(vec: np.ndarray) -> StateVector:
    z = float(np.linalg.norm(vec))
    if z == 0:
        raise ValueError("state has zero norm")
    return StateVector(vec / z, z)


def build_state(model: ModelSpec, max_qubits: int = STATEVECTOR_MAX_QUBITS) -> StateVector:
    """``exp(beta K1) exp(i t K2) |phi>``, applied term by term, normalized.

    The pre-normalization 2-norm is recorded as ``norm_constant``.
    """
    _check_budget(model.N, max_qubits, "statevector")
    psi = product_vector(model.product_state)
    for kappa in model.K2:
        u = herm_exp(kappa, 1j * model.t)
        psi = apply_local(psi, model.N, u.matrix, u.support)
    for kappa in model.K1:
        e = herm_exp(kappa, model.beta)
        psi = apply_local(psi, model.N, e.matrix, e.support)
    return _normalized(psi)


def apply_entangler(model: ModelSpec, state: StateVector | np.ndarray, t: float | None = None) -> StateVector:
    """Apply ``exp(i t K2)`` as a product of commuting local unitaries."""
    t = model.t if t is None else t
    psi = state.amplitudes if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    if psi.size != 2**model.N:
        raise ValueError(f"state dimension {psi.size} does not match {model.N} qubits")
    for kappa in model.K2:
        u = herm_exp(kappa, 1j * t)
        psi = apply_local(psi, model.N, u.matrix, u.support)
    return StateVector(psi, 1.0)


# Index sets and local deformations ---------------------------------------------------


def mu_nu_sets(model: ModelSpec, j: int) -> tuple[list[int], list[int]]:
    """Indices of K2 terms touching ``j`` and of K1 terms overlapping those.

    When no K2 term touches ``j``, the K1 terms containing ``j`` are used
    instead so that ``h_j`` still annihilates the state.
    """
    model.graph.check_vertex(j)
    mu = [n for n, k in enumerate(model.K2) if j in k.support]
    if mu:
        touched = set().union(*(set(model.K2[n].support) for n in mu))
        nu = [m for m, k in enumerate(model.K1) if touched & set(k.support)]
    else:
        nu = [m for m, k in enumerate(model.K1) if j in k.support]
    return mu, nu


def region_mu_nu(model: ModelSpec, region: Iterable[int]) -> tuple[list[int], list[int]]:
    mu: set[int] = set()
    nu: set[int] = set()
    for j in region:
        m, n = mu_nu_sets(model, j)
        mu.update(m)
        nu.update(n)
    return sorted(mu), sorted(nu)


def deformation_support(model: ModelSpec, mu: Iterable[int], nu: Iterable[int], extra: Iterable[int] = ()) -> Region:
    sup = set(extra)
    for n in mu:
        sup |= set(model.K2[n].support)
    for m in nu:
        sup |= set(model.K1[m].support)
    return Region(sup)


def build_O(
    model: ModelSpec,
    mu: Sequence[int],
    nu: Sequence[int],
    extra: Iterable[int] = (),
    inverse: bool = False,
) -> LocalMatrix:
    """``prod_{mu} exp(-i t kappa_2) prod_{nu} exp(-beta kappa_1)`` on the joint support.

    With ``inverse=True`` the exact inverse ``prod_{nu} exp(+beta kappa_1)
    prod_{mu} exp(+i t kappa_2)`` is returned instead.
    """
    sup = deformation_support(model, mu, nu, extra)
    sign = -1.0 if inverse else 1.0
    unitary = [herm_exp(model.K2[n], -1j * model.t * sign) for n in mu]
    damping = [herm_exp(model.K1[m], -model.beta * sign) for m in nu]
    factors = (damping[::-1] + unitary[::-1]) if inverse else (unitary + damping)
    out = np.eye(2 ** len(sup), dtype=complex)
    for f in factors:
        out = out @ embed_matrix(f.matrix, f.support, sup)
    return LocalMatrix(sup, out)


def build_O_j(model: ModelSpec, j: int) -> LocalMatrix:
    mu, nu = mu_nu_sets(model, j)
    return build_O(model, mu, nu, extra=[j])


def site_projector(model: ModelSpec, j: int) -> LocalMatrix:
    """``1 - |phi_j><phi_j|`` on site ``j``."""
    phi = model.product_state[j]
    return LocalMatrix([j], np.eye(2) - np.outer(phi, phi.conj()))


# Parent Hamiltonian -----------------------------------------------------------------


@dataclass(frozen=True)
class ParentTerm:
    site: int
    h: LocalOperator
    mu: tuple[int, ...]
    nu: tuple[int, ...]
    o_support: Region


@dataclass(frozen=True)
class ParentHamiltonian:
    terms: tuple[ParentTerm, ...]
    model: ModelSpec = field(repr=False)

    @property
    def N(self) -> int:
        return self.model.N

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    @property
    def h(self) -> list[LocalOperator]:
        return [term.h for term in self.terms]

    def dense(self, max_qubits: int = DENSE_MAX_QUBITS) -> np.ndarray:
        """``H = sum_j h_j`` as a dense ``2^N x 2^N`` matrix."""
        _check_budget(self.N, max_qubits, "dense Hamiltonian")
        full = list(range(self.N))
        dim = 2**self.N
        H = np.zeros((dim, dim), dtype=complex)
        for term in self.terms:
            H += embed_matrix(term.h.matrix, term.h.support, full)
        return H

    def apply(self, psi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(psi)
        for term in self.terms:
            out += apply_local(psi, self.N, term.h.matrix, term.h.support)
        return out

    def annihilation_residuals(self, state: StateVector) -> np.ndarray:
        """``|<Psi|h_j|Psi>|`` for every term."""
        return np.array([abs(state.expectation(term.h)) for term in self.terms])


def build_parent_hamiltonian(model: ModelSpec) -> ParentHamiltonian:
    terms = []
    for j in range(model.N):
        mu, nu = mu_nu_sets(model, j)
        O = build_O(model, mu, nu, extra=[j])
        h = (O.dagger() @ site_projector(model, j) @ O).as_hermitian()
        terms.append(ParentTerm(j, h, tuple(mu), tuple(nu), O.support))
    return ParentHamiltonian(tuple(terms), model)


class HamiltonianPath:
    """``beta -> H(beta, t)`` at fixed ``t`` with per-term precomputation.

    Each term is ``E_j(beta) S_j E_j(beta)`` with ``S_j`` the beta-independent
    conjugated projector and ``E_j = exp(-beta G_j)``, ``G_j`` the sum of the
    overlapping K1 terms; ``G_j`` is diagonalized once.
    """

    def __init__(self, model: ModelSpec, max_qubits: int = DENSE_MAX_QUBITS):
        _check_budget(model.N, max_qubits, "dense Hamiltonian path")
        self.model = model
        self.N = model.N
        self._parts = []
        full = list(range(self.N))
        for j in range(self.N):
            mu, nu = mu_nu_sets(model, j)
            U = build_O(model.with_params(beta=0.0), mu, [], extra=[j])
            sup = deformation_support(model, mu, nu, extra=[j])
            S = embed_matrix((U.dagger() @ site_projector(model, j) @ U).matrix, U.support, sup)
            G = np.zeros((2 ** len(sup),) * 2, dtype=complex)
            for m in nu:
                G += embed_matrix(model.K1[m].matrix, model.K1[m].support, sup)
            evals, vecs = np.linalg.eigh(G)
            S_rot = vecs.conj().T @ S @ vecs
            self._parts.append((sup, evals, vecs, S_rot))
        # full-space copies: H(beta) = sum_j V_j (e_j S_j e_j) V_j^dagger with e_j diagonal
        self._V = np.array([embed_matrix(v, sup, full) for sup, _, v, _ in self._parts])
        self._S = np.array([embed_matrix(s, sup, full) for sup, _, _, s in self._parts])
        self._Vh = self._V.conj().transpose(0, 2, 1)
        self._G = np.array([np.real(np.diag(embed_matrix(np.diag(e), sup, full))) for sup, e, _, _ in self._parts])

    def local_terms(self, beta: float) -> list[tuple[Region, np.ndarray]]:
        out = []
        for sup, evals, vecs, S_rot in self._parts:
            d = np.exp(-beta * evals)
            out.append((sup, vecs @ (d[:, None] * S_rot * d[None, :]) @ vecs.conj().T))
        return out

    def __call__(self, beta: float) -> np.ndarray:
        if not self._parts:
            return np.zeros((2**self.N,) * 2, dtype=complex)
        d = np.exp(-beta * self._G)
        inner = d[:, :, None] * self._S * d[:, None, :]
        return (self._V @ inner @ self._Vh).sum(axis=0)


# Adiabatic preparation --------------------------------------------------------------


def smoothstep(s: float) -> float:
    return s * s * (3.0 - 2.0 * s)


@dataclass(frozen=True)
class AdiabaticSchedule:
    """Ramp ``beta(s)`` for ``s`` in ``[0, 1]`` at fixed ``t``.

    ``shape`` maps ``[0, 1]`` onto itself monotonically; the default
    smoothstep has vanishing slope at both ends.
    """

    total_time: float
    beta_target: float
    t_fixed: float
    shape: Callable[[float], float] = smoothstep
    steps: int = 200
    max_steps: int = 2**21
    tol: float = 1e-6

    def beta(self, s: float) -> float:
        return self.beta_target * self.shape(s)

    def check(self, samples: int = 257) -> AdiabaticSchedule:
        if self.total_time <= 0:
            raise ValueError("total_time must be positive")
        if abs(self.beta(0.0)) > 1e-15 or abs(self.beta(1.0) - self.beta_target) > 1e-12:
            raise ValueError("beta path must start at 0 and end at the target")
        grid = np.array([self.beta(s) for s in np.linspace(0, 1, samples)])
        if np.any(np.diff(grid) * np.sign(self.beta_target or 1.0) < -1e-15):
            raise ValueError("beta path is not monotone")
        return self


@dataclass(frozen=True)
class AdiabaticResult:
    final: StateVector
    fidelity: float
    steps: int
    norm_drift: float
    step_error: float


class IntegrationError(RuntimeError):
    pass


def _expm_herm(H: np.ndarray, c: complex) -> np.ndarray:
    evals, vecs = np.linalg.eigh(H)
    return (vecs * np.exp(c * evals)) @ vecs.conj().T


_GL_OFFSET = math.sqrt(3) / 6
_CF4_A = (3 - 2 * math.sqrt(3)) / 12
_CF4_B = (3 + 2 * math.sqrt(3)) / 12


def _propagate(path: HamiltonianPath, sched: AdiabaticSchedule, psi0: np.ndarray, steps: int) -> np.ndarray:
    """Fourth-order commutator-free Magnus integration of ``i dpsi/ds = T H(beta(s)) psi``."""
    psi = psi0.copy()
    ds = 1.0 / steps
    T = sched.total_time
    for k in range(steps):
        s0 = k * ds
        H1 = path(sched.beta(s0 + (0.5 - _GL_OFFSET) * ds))
        H2 = path(sched.beta(s0 + (0.5 + _GL_OFFSET) * ds))
        A = _CF4_A * H1 + _CF4_B * H2
        B = _CF4_B * H1 + _CF4_A * H2
        psi = _expm_herm(B, -1j * T * ds) @ (_expm_herm(A, -1j * T * ds) @ psi)
    return psi


def adiabatic_evolve(
    model: ModelSpec,
    schedule: AdiabaticSchedule,
    seed_state: StateVector | np.ndarray | None = None,
    norm_tol: float = 1e-8,
) -> AdiabaticResult:
    """Ramp ``beta`` from 0 to ``schedule.beta_target`` and report the target overlap.

    Starting from ``|Psi(0, t)>`` (by default the entangler applied to the
    product state), the step count is doubled until two successive runs agree
    to ``schedule.tol`` in 2-norm; exceeding ``max_steps`` or the norm-drift
    tolerance raises :class:`IntegrationError`.
    """
    schedule.check()
    m = model.with_params(beta=0.0, t=schedule.t_fixed)
    if seed_state is None:
        seed = apply_entangler(m, product_vector(m.product_state)).amplitudes
    else:
        seed = seed_state.amplitudes if isinstance(seed_state, StateVector) else np.asarray(seed_state, dtype=complex)
    target = build_state(model.with_params(beta=schedule.beta_target, t=schedule.t_fixed))
    if schedule.beta_target == 0:
        return AdiabaticResult(StateVector(seed), target.fidelity(seed), 0, 0.0, 0.0)

    path = HamiltonianPath(m)
    steps = schedule.steps
    prev = _propagate(path, schedule, seed, steps)
    while True:
        steps *= 2
        if steps > schedule.max_steps:
            raise IntegrationError(f"no convergence to tol={schedule.tol} within {schedule.max_steps} steps")
        cur = _propagate(path, schedule, seed, steps)
        err = float(np.linalg.norm(cur - prev))
        if err <= schedule.tol:
            break
        prev = cur
    drift = abs(float(np.linalg.norm(cur)) - float(np.linalg.norm(seed)))
    if drift > norm_tol:
        raise IntegrationError(f"norm drift {drift:.3e} exceeds {norm_tol:.1e}")
    final = StateVector(cur, 1.0)
    return AdiabaticResult(final, target.fidelity(cur), steps, drift, err)


def runtime_estimate(N: int, gap_lower_bound: float, epsilon: float, constant: float = 1.0) -> float:
    """Heuristic adiabatic runtime ``C N^2 / (delta^3 epsilon)``."""
    if gap_lower_bound <= 0:
        raise ValueError("gap lower bound must be positive")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return constant * N**2 / gap_lower_bound**3 / epsilon
