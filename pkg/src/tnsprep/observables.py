"""Observables with fixed ground-state expectation values.

All constructions assume the sites involved are prepared in ``|0>``. The key
fact is that ``O_lambda |Psi>`` carries ``|0>`` on every site of ``lambda``,
so conjugating ``sigma_z`` strings by ``O_lambda`` gives expectation one and
conjugating operators that kill ``|0>`` on some site gives zero.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .lattice import Region
from .models import ModelSpec
from .operators import (
    PAULI,
    LocalMatrix,
    LocalOperator,
    PauliExpansion,
    embed_matrix,
    identity_operator,
    kron_all,
    pauli_decompose,
)
from .state import build_O, deformation_support, mu_nu_sets, region_mu_nu

KINDS = ("Zplus", "Zminus", "Qlambda", "Qj1", "Qj2", "Qj3", "identity")
CONDITION_TOL = 1e-12
GRAM_MAX_QUBITS = 4


class ProductStateError(ValueError):
    """A site that must be prepared in |0> is not."""


@dataclass(frozen=True)
class ObservableSpec:
    kind: str
    lam: Region
    operator: LocalOperator
    expected: float
    expansion: PauliExpansion
    P: LocalMatrix | None = None
    site: int | None = None

    def describe(self) -> str:
        extra = f" site={self.site}" if self.site is not None else ""
        return f"{self.kind} lambda={list(self.lam)}{extra} support={list(self.operator.support)} expected={self.expected:g}"


def _spec(kind: str, lam, op: LocalMatrix, expected: float, P=None, site=None) -> ObservableSpec:
    herm = op.as_hermitian()
    return ObservableSpec(kind, Region(lam), herm, float(expected), pauli_decompose(herm), P, site)


def _require_zero(model: ModelSpec, sites) -> None:
    bad = [j for j in sites if not model.is_zero_product([j])]
    if bad:
        raise ProductStateError(f"sites {bad} are not prepared in |0>; use a zero-product variant")


def build_O_lambda(model: ModelSpec, lam, inverse: bool = False) -> LocalMatrix:
    """``O_lambda`` over ``mu(lambda)`` and ``nu(lambda)``, or its exact inverse."""
    lam = Region(lam).validate(model.graph)
    if not lam:
        raise ValueError("lambda must be nonempty")
    _require_zero(model, lam)
    mu, nu = region_mu_nu(model, lam)
    return build_O(model, mu, nu, extra=lam, inverse=inverse)


def projection_residual(model: ModelSpec, lam, psi: np.ndarray) -> float:
    """``|| O_lambda psi - (prod |0><0|) O_lambda psi ||``."""
    from .state import apply_local

    O = build_O_lambda(model, lam)
    n = model.N
    v = apply_local(psi, n, O.matrix, O.support)
    proj = np.array([[1.0, 0.0], [0.0, 0.0]])
    w = v
    for j in Region(lam):
        w = apply_local(w, n, proj, [j])
    return float(np.linalg.norm(v - w))


def _z_string(lam: Region, support: Region) -> np.ndarray:
    return embed_matrix(kron_all([PAULI["Z"]] * len(lam)), lam, support)


def build_Z_pm(model: ModelSpec, lam) -> tuple[ObservableSpec, ObservableSpec]:
    """``Z_lambda = O^-1 (prod sigma_z) O`` split into Hermitian parts.

    Uses the inverse of ``O_lambda``, not its adjoint; the two differ when
    ``beta > 0``.
    """
    lam = Region(lam)
    O = build_O_lambda(model, lam)
    Oinv = build_O_lambda(model, lam, inverse=True)
    sup = O.support
    Z = Oinv.on(sup) @ _z_string(lam, sup) @ O.matrix
    zplus = LocalMatrix(sup, (Z + Z.conj().T) / 2)
    zminus = LocalMatrix(sup, (Z - Z.conj().T) / 2j)
    return _spec("Zplus", lam, zplus, 1.0), _spec("Zminus", lam, zminus, 0.0)


def vanishing_sites(P: LocalMatrix, tol: float = CONDITION_TOL) -> tuple[list[int], float]:
    """Sites ``j`` of ``P`` with ``<0|P|0>_j == 0`` and the smallest measured norm."""
    k = P.n_qubits
    t = P.matrix.reshape((2,) * (2 * k))
    sites, best = [], np.inf
    for q, j in enumerate(P.support):
        block = np.take(np.take(t, 0, axis=q + k), 0, axis=q)
        size = float(np.max(np.abs(block)))
        best = min(best, size)
        if size <= tol:
            sites.append(j)
    return sites, best


def build_Q_lambda(model: ModelSpec, lam, P: LocalMatrix) -> ObservableSpec:
    """``Q_lambda = O_lambda^dagger P O_lambda`` for ``P`` supported in ``lambda``."""
    lam = Region(lam)
    if not Region(P.support).issubset(lam):
        raise ValueError(f"P support {list(P.support)} is not inside lambda {list(lam)}")
    if P.hermitian_residual() > 1e-12:
        raise ValueError("P must be Hermitian")
    sites, best = vanishing_sites(P)
    if not sites:
        raise ValueError(f"no site with <0|P|0>_j = 0 (smallest |<0|P|0>_j| = {best:.3e})")
    O = build_O_lambda(model, lam)
    Q = O.dagger().on(O.support) @ P.on(O.support) @ O.matrix
    return _spec("Qlambda", lam, LocalMatrix(O.support, Q), 0.0, P=P)


def build_Q_j(model: ModelSpec, j: int, P_prime: LocalMatrix | None = None, variant: int = 1) -> ObservableSpec:
    """``O_j^dagger A_j P' O_j`` with ``A_j`` one of ``sigma_x``, ``sigma_y``, ``1 - sigma_z``."""
    if variant not in (1, 2, 3):
        raise ValueError("variant must be 1, 2 or 3")
    P_prime = P_prime if P_prime is not None else identity_operator()
    if j in P_prime.support:
        raise ValueError(f"P' must not act on site {j}")
    model.graph.check_vertex(j)
    _require_zero(model, [j])
    mu, nu = mu_nu_sets(model, j)
    sup = deformation_support(model, mu, nu, extra=[j]) | P_prime.support
    O = build_O(model, mu, nu, extra=sup)
    A = {1: PAULI["X"], 2: PAULI["Y"], 3: np.eye(2) - PAULI["Z"]}[variant]
    middle = embed_matrix(A, [j], sup) @ P_prime.on(sup)
    Q = O.matrix.conj().T @ middle @ O.matrix
    lam = Region([j]) | P_prime.support
    return _spec(f"Qj{variant}", lam, LocalMatrix(sup, Q), 0.0, P=P_prime, site=j)


def pauli_product(letters: str) -> tuple[Region, LocalMatrix]:
    """Full-length Pauli string (``I``, ``X``, ``Y``, ``Z``) restricted to its non-identity sites."""
    letters = letters.upper()
    if set(letters) - set("IXYZ"):
        raise ValueError(f"invalid Pauli string {letters!r}")
    lam = Region(n for n, ch in enumerate(letters) if ch != "I")
    mat = kron_all([PAULI[letters[n]] for n in lam]) if lam else np.eye(1)
    return lam, LocalMatrix(lam, mat)


def complete_map(model: ModelSpec, letters: str) -> ObservableSpec:
    """``P -> Q(P)``: identity stays, all-``z`` strings go to ``Z+``, the rest to ``Q_lambda``."""
    if len(letters) != model.N:
        raise ValueError(f"Pauli string must have length {model.N}")
    lam, P = pauli_product(letters)
    if not lam:
        return _spec("identity", lam, identity_operator(), 1.0)
    if all(letters[n].upper() == "Z" for n in lam):
        return build_Z_pm(model, lam)[0]
    return build_Q_lambda(model, lam, P)


@dataclass(frozen=True)
class GramReport:
    sigma_min: float
    condition: float
    nonsingular: bool
    B: np.ndarray


def completeness_gram(model: ModelSpec, threshold: float = 1e-8) -> GramReport:
    """Gram matrix ``B_nm = tr(Q_n^dagger Q_m) / 2^N`` over all ``4^N`` mapped Pauli strings.

    Strings are enumerated in lexicographic ``I < X < Y < Z`` order.
    """
    N = model.N
    if N > GRAM_MAX_QUBITS:
        raise ValueError(f"Gram matrix needs N <= {GRAM_MAX_QUBITS}, got {N}")
    full = list(range(N))
    vecs = []
    for letters in itertools.product("IXYZ", repeat=N):
        spec = complete_map(model, "".join(letters))
        vecs.append(embed_matrix(spec.operator.matrix, spec.operator.support, full).ravel())
    M = np.array(vecs)
    B = (M.conj() @ M.T) / 2**N
    s = np.linalg.svd(B, compute_uv=False)
    smin = float(s[-1])
    cond = float(s[0] / smin) if smin > 0 else np.inf
    return GramReport(smin, cond, smin > threshold, B)


def observable_menu(model: ModelSpec, max_lambda: int = 2) -> list[ObservableSpec]:
    """A deterministic set of checks: ``Z+`` and ``Z-`` on single sites and edges,
    ``Q_lambda`` with ``sigma_x`` strings, and ``Q_j`` of every variant."""
    g = model.graph
    regions = [Region([j]) for j in range(model.N)]
    if max_lambda >= 2:
        regions += [Region(e) for e in g.sorted_edges()]
    out = []
    for lam in regions:
        out.extend(build_Z_pm(model, lam))
        P = LocalMatrix(lam, kron_all([PAULI["X"]] + [PAULI["Z"]] * (len(lam) - 1)))
        out.append(build_Q_lambda(model, lam, P))
    for j in range(model.N):
        for variant in (1, 2, 3):
            out.append(build_Q_j(model, j, None, variant))
    return out
