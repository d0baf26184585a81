"""Problem instances and the named fixture models.

A :class:`ModelSpec` bundles the graph, the two commuting families, the
parameters ``(beta, t)`` and the per-site product state the deformed state is
built from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import lattice
from .lattice import Graph
from .operators import (
    CommutingFamily,
    FamilyReport,
    LocalMatrix,
    LocalOperator,
    family_radius,
    ising_edge,
    kron_all,
    projector11,
    validate_family,
)

KET0 = np.array([1, 0], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)

FIXTURES = ("FX-CHAIN4", "FX-GIBBS4", "FX-PROD")


@dataclass(frozen=True)
class ModelSpec:
    graph: Graph
    K1: CommutingFamily
    K2: CommutingFamily
    beta: float
    t: float
    product_state: np.ndarray = field(repr=False)
    name: str = ""

    def __post_init__(self):
        ps = np.asarray(self.product_state, dtype=complex)
        if ps.shape != (self.graph.vertex_count, 2):
            raise ValueError(f"product_state must have shape ({self.graph.vertex_count}, 2), got {ps.shape}")
        object.__setattr__(self, "product_state", ps)
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "t", float(self.t))

    @property
    def N(self) -> int:
        return self.graph.vertex_count

    def with_params(self, beta: float | None = None, t: float | None = None) -> ModelSpec:
        return replace(
            self,
            beta=self.beta if beta is None else beta,
            t=self.t if t is None else t,
        )

    def validate(self) -> list[str]:
        """All ModelSpec invariant violations as human-readable strings."""
        problems: list[str] = []
        for label, fam in (("K1", self.K1), ("K2", self.K2)):
            report: FamilyReport = validate_family(fam, self.graph)
            problems.extend(f"{label}: {v}" for v in report.violations)
            for n, kappa in enumerate(fam):
                for v in kappa.support:
                    if v >= self.N:
                        problems.append(f"{label}: term {n} acts on vertex {v} outside the graph")
        norms = np.linalg.norm(self.product_state, axis=1)
        for j, nrm in enumerate(norms):
            if abs(nrm - 1) > 1e-12:
                problems.append(f"product_state[{j}] has norm {nrm:.15f}")
        if self.beta < 0:
            problems.append(f"beta must be non-negative, got {self.beta}")
        if self.t < 0:
            problems.append(f"t must be non-negative, got {self.t}")
        return problems

    def check(self) -> ModelSpec:
        problems = self.validate()
        if problems:
            raise ValueError("invalid model:\n  " + "\n  ".join(problems))
        return self

    def is_zero_product(self, sites=None, tol: float = 1e-12) -> bool:
        sites = range(self.N) if sites is None else sites
        return all(abs(abs(self.product_state[j, 0]) - 1) <= tol for j in sites)


def _family(g: Graph, terms: Sequence[LocalOperator]) -> CommutingFamily:
    return CommutingFamily(terms, family_radius(g, terms))


def empty_family() -> CommutingFamily:
    return CommutingFamily([], 0)


def build_cluster_model(g: Graph) -> ModelSpec:
    """``|+>`` on every site, ``|11><11|`` per edge at ``t = pi`` (CZ gates), ``beta = 0``."""
    K2 = _family(g, [projector11(a, b) for a, b in g.sorted_edges()])
    ps = np.tile(KET_PLUS, (g.vertex_count, 1))
    return ModelSpec(g, empty_family(), K2, 0.0, math.pi, ps, name="cluster")


def build_gibbs_ising_model(g: Graph, coupling_sign: int = -1, beta: float = 0.0) -> ModelSpec:
    """Coherent Gibbs state of the classical Ising model ``H_cl = sign * sum_e Z Z``.

    Uses ``kappa_e = (1 - sign Z Z) / 2`` so that the amplitudes are
    proportional to ``exp(-beta H_cl / 2)``. ``coupling_sign=-1`` is the
    ferromagnet.
    """
    if coupling_sign not in (1, -1):
        raise ValueError("coupling_sign must be +1 or -1")
    K1 = _family(g, [ising_edge(a, b, sign=coupling_sign) for a, b in g.sorted_edges()])
    ps = np.tile(KET_PLUS, (g.vertex_count, 1))
    return ModelSpec(g, K1, empty_family(), beta, 0.0, ps, name="gibbs-ising")


def classical_ising_energy(g: Graph, bits: Sequence[int], coupling_sign: int = -1) -> float:
    spins = [1 - 2 * b for b in bits]
    return float(coupling_sign * sum(spins[a] * spins[b] for a, b in g.sorted_edges()))


# Injective MPS -----------------------------------------------------------------

_PHI = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
_KET00 = np.array([1, 0, 0, 0], dtype=complex)


def bell_reflection_generator() -> np.ndarray:
    """Rank-1 projector ``|v><v|`` with ``exp(i pi |v><v|) |00> = |Phi+>``.

    ``v`` is the Householder vector ``|00> - |Phi+>`` (normalized), so the
    generator is PSD with unit norm.
    """
    v = _KET00 - _PHI
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def mps_min_beta(Q_list: Sequence[np.ndarray]) -> float:
    """Smallest ``beta`` for which every single-site ``kappa_1`` has norm <= 1."""
    return max((float(np.max(np.abs(np.linalg.eigvalsh(_hermitian_log(q))), initial=0.0)) for q in Q_list), default=0.0)


def _hermitian_log(q: np.ndarray) -> np.ndarray:
    ev, vec = np.linalg.eigh(q)
    return (vec * np.log(ev)) @ vec.conj().T


def _check_Q(q: np.ndarray, n: int) -> np.ndarray:
    q = np.asarray(q, dtype=complex)
    if q.shape != (4, 4):
        raise ValueError(f"Q[{n}] must be 4x4 (two virtual qubits), got {q.shape}")
    if np.max(np.abs(q - q.conj().T)) > 1e-12:
        raise ValueError(f"Q[{n}] is not Hermitian")
    ev = np.linalg.eigvalsh(q)
    if ev.min() <= 1e-12:
        raise ValueError(f"Q[{n}] is not positive definite/invertible (min eigenvalue {ev.min():.3e})")
    if ev.max() > 1 + 1e-12:
        raise ValueError(f"Q[{n}] is not contractive (max eigenvalue {ev.max():.3e})")
    return q


def build_injective_mps_model(
    N: int,
    Q_list: Sequence[np.ndarray],
    beta: float | None = None,
    periodic: bool = False,
) -> ModelSpec:
    """Injective MPS ``(Q_1 x ... x Q_N) |Phi>`` on ``2N`` qubits.

    Physical site ``n`` is the qubit pair ``(L_n, R_n) = (2n, 2n+1)``; bond
    ``n`` entangles ``R_n`` with ``L_{n+1}``. Unpaired end qubits of an open
    chain stay in ``|0>``.

    ``kappa_{1,n} = (log Q_n + c_n) / beta`` with ``c_n = ||log Q_n||``, so
    ``exp(beta kappa_{1,n}) = e^{c_n} Q_n`` and the term is PSD. Its norm is
    at most 1 iff ``beta >= c_n``; ``beta`` defaults to the minimal admissible
    value :func:`mps_min_beta` and smaller values are rejected.
    """
    if len(Q_list) != N:
        raise ValueError(f"need {N} Q operators, got {len(Q_list)}")
    Qs = [_check_Q(q, n) for n, q in enumerate(Q_list)]
    min_beta = mps_min_beta(Qs)
    if beta is None:
        beta = min_beta
    if beta < min_beta - 1e-12:
        raise ValueError(f"beta={beta} too small; -log(Q)/beta needs beta >= {min_beta}")

    n_qubits = 2 * N
    edges = [(2 * n, 2 * n + 1) for n in range(N)]
    bonds = [(2 * n + 1, 2 * n + 2) for n in range(N - 1)]
    if periodic and N > 1:
        bonds.append((2 * N - 1, 0))
    g = Graph(n_qubits, edges + bonds)

    gen = bell_reflection_generator()
    K2_terms = [LocalOperator([a, b], gen if a < b else _swap_qubits(gen)) for a, b in bonds]
    K1_terms = []
    for n, q in enumerate(Qs):
        if beta > 0:
            logq = _hermitian_log(q)
            shift = float(np.max(np.abs(np.linalg.eigvalsh(logq)), initial=0.0))
            kappa = LocalOperator([2 * n, 2 * n + 1], (logq + shift * np.eye(4)) / beta)
            if kappa.support:
                K1_terms.append(kappa)
    ps = np.tile(KET0, (n_qubits, 1))
    return ModelSpec(g, _family(g, K1_terms), _family(g, K2_terms), beta, math.pi, ps, name="injective-mps")


def _swap_qubits(m: np.ndarray) -> np.ndarray:
    return m.reshape(2, 2, 2, 2).transpose(1, 0, 3, 2).reshape(4, 4)


# Bond dimension bound -------------------------------------------------------------


def bond_dimension_bound(z: int, r1: int, r2: int, d: int = 2) -> tuple[float, float]:
    """Neighbour-count bound ``x`` and the order-of-magnitude bond bound.

    For ``z != 2`` ``x = z (1 - (z-1)^(2 r1)) / (2 - z)``; for ``z = 2`` the
    series ``z * sum_{i=1}^{2 r1 - 1} (z-1)^i`` is summed directly. The two
    expressions differ by the ``i = 0`` term, which the closed form includes.
    The bond bound is ``d ** z ** (2 (r1 + r2))``.
    """
    if z < 1 or r1 < 0 or r2 < 0 or d < 2:
        raise ValueError("need z >= 1, r1, r2 >= 0, d >= 2")
    if r1 == 0:
        x = 0.0
    elif z == 2:
        x = float(z * sum((z - 1) ** i for i in range(1, 2 * r1)))
    else:
        x = float(z * (1 - (z - 1) ** (2 * r1)) / (2 - z))
    bond = float(d) ** (float(z) ** (2 * (r1 + r2)))
    return x, bond


# Unitarily rotated variants ---------------------------------------------------------


def zero_variant(model: ModelSpec) -> ModelSpec:
    """Equivalent model whose product state is ``|0...0>``.

    Every site is rotated by a unitary ``U_j`` with ``U_j |phi_j> = |0>`` and
    all kappa terms are conjugated accordingly; the built state is mapped to
    ``(prod_j U_j) |Psi>`` and the spectrum of the parent Hamiltonian is
    unchanged.
    """
    Us = []
    for phi in model.product_state:
        phi = phi / np.linalg.norm(phi)
        perp = np.array([-np.conj(phi[1]), np.conj(phi[0])])
        Us.append(np.vstack([phi.conj(), perp.conj()]))

    def rotate(kappa: LocalOperator) -> LocalOperator:
        u = kron_all(Us[v] for v in kappa.support)
        return LocalOperator(kappa.support, u @ kappa.matrix @ u.conj().T)

    K1 = CommutingFamily([rotate(k) for k in model.K1], model.K1.declared_radius)
    K2 = CommutingFamily([rotate(k) for k in model.K2], model.K2.declared_radius)
    ps = np.tile(KET0, (model.N, 1))
    name = f"{model.name}-Z" if model.name else "zero-variant"
    return ModelSpec(model.graph, K1, K2, model.beta, model.t, ps, name=name)


def site_rotations(model: ModelSpec) -> list[np.ndarray]:
    """The per-site unitaries used by :func:`zero_variant`."""
    out = []
    for phi in model.product_state:
        perp = np.array([-np.conj(phi[1]), np.conj(phi[0])])
        out.append(np.vstack([phi.conj(), perp.conj()]))
    return out


# Fixtures --------------------------------------------------------------------------


def fx_chain4(beta: float = 0.0) -> ModelSpec:
    """Path of 4: ``|11><11|`` per edge at ``t = pi``, ``(1 - ZZ)/2`` per edge, ``|+>`` sites."""
    g = lattice.path(4)
    K2 = _family(g, [projector11(a, b) for a, b in g.sorted_edges()])
    K1 = _family(g, [ising_edge(a, b, sign=1) for a, b in g.sorted_edges()])
    ps = np.tile(KET_PLUS, (4, 1))
    return ModelSpec(g, K1, K2, beta, math.pi, ps, name="FX-CHAIN4")


def fx_gibbs4(beta: float = 0.0) -> ModelSpec:
    """Ferromagnetic Gibbs-Ising state on the open 2x2 grid."""
    m = build_gibbs_ising_model(lattice.grid(2, 2), coupling_sign=-1, beta=beta)
    return replace(m, name="FX-GIBBS4")


def fx_prod(N: int) -> ModelSpec:
    """``|0...0>`` with no deformation: ``beta = t = 0`` and empty families."""
    g = lattice.path(N)
    ps = np.tile(KET0, (N, 1))
    return ModelSpec(g, empty_family(), empty_family(), 0.0, 0.0, ps, name=f"FX-PROD({N})")


def fixture(name: str, beta: float | None = None, n: int = 3) -> ModelSpec:
    """Look up a fixture by name; ``-Z`` suffix selects :func:`zero_variant`."""
    key = name.upper()
    zero = key.endswith("-Z")
    if zero:
        key = key[:-2]
    if key == "FX-CHAIN4":
        m = fx_chain4(0.0 if beta is None else beta)
    elif key == "FX-GIBBS4":
        m = fx_gibbs4(0.0 if beta is None else beta)
    elif key.startswith("FX-PROD"):
        if "(" in key:
            n = int(key[key.index("(") + 1 : key.index(")")])
        m = fx_prod(n)
    else:
        raise KeyError(f"unknown fixture {name!r}; known: {FIXTURES}")
    return zero_variant(m) if zero else m


def small_gibbs_path(n: int = 3, beta: float = 0.0, coupling_sign: int = -1) -> ModelSpec:
    return build_gibbs_ising_model(lattice.path(n), coupling_sign=coupling_sign, beta=beta)


def as_local(model: ModelSpec, j: int) -> LocalMatrix:
    """Product-state projector ``|phi_j><phi_j|`` as a local matrix."""
    phi = model.product_state[j]
    return LocalMatrix([j], np.outer(phi, phi.conj()))
