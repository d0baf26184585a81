"""Dense local operators on qubit subsets and commuting operator families.

Ordering convention used everywhere: inside a support the lowest vertex id is
the most significant qubit of the dense matrix index.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .lattice import Graph, Region, radius

HERMITIAN_TOL = 1e-12
SUPPORT_TOL = 1e-10
FAMILY_TOL = 1e-10

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": SX, "Y": SY, "Z": SZ}
PAULI_LETTERS = "IXYZ"
_PAULI_STACK = np.stack([PAULI[c] for c in PAULI_LETTERS])


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def _as_square(matrix, n_qubits: int) -> np.ndarray:
    m = np.asarray(matrix, dtype=complex)
    dim = 2**n_qubits
    if m.shape != (dim, dim):
        raise ValueError(f"matrix shape {m.shape} does not match {n_qubits} qubits (expected {(dim, dim)})")
    return m


def _permute_to(matrix: np.ndarray, support: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of ``matrix`` from ``support`` order to ``order``."""
    k = len(support)
    if list(support) == list(order):
        return matrix
    pos = [list(support).index(v) for v in order]
    t = matrix.reshape((2,) * (2 * k))
    t = t.transpose(pos + [k + p for p in pos])
    return t.reshape(2**k, 2**k)


def embed_matrix(matrix: np.ndarray, support: Sequence[int], target: Sequence[int]) -> np.ndarray:
    """Tensor ``matrix`` (acting on ``support``) with identities onto ``target``."""
    support, target = list(support), list(target)
    missing = [v for v in support if v not in target]
    if missing:
        raise ValueError(f"support {support} is not a subset of target {target}")
    extra = [v for v in target if v not in support]
    full = np.kron(matrix, np.eye(2 ** len(extra), dtype=complex))
    return _permute_to(full, support + extra, target)


def partial_trace_qubit(matrix: np.ndarray, n_qubits: int, q: int) -> np.ndarray:
    """Trace out qubit position ``q`` (0 = most significant)."""
    t = matrix.reshape((2,) * (2 * n_qubits))
    t = np.trace(t, axis1=q, axis2=n_qubits + q)
    dim = 2 ** (n_qubits - 1)
    return t.reshape(dim, dim)


def _acts_trivially(matrix: np.ndarray, n_qubits: int, q: int, tol: float) -> bool:
    reduced = partial_trace_qubit(matrix, n_qubits, q) / 2.0
    rebuilt = embed_matrix(reduced, [i for i in range(n_qubits) if i != q], list(range(n_qubits)))
    return bool(np.max(np.abs(rebuilt - matrix), initial=0.0) <= tol)


@dataclass(frozen=True, eq=False)
class LocalMatrix:
    """Dense matrix acting on a set of qubits; not necessarily Hermitian."""

    support: Region
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        sup = Region(self.support)
        if len(sup) != len(self.support):
            raise ValueError(f"support {self.support} contains duplicates")
        m = _as_square(self.matrix, len(sup))
        # accept unsorted supports by permuting into canonical order
        m = _permute_to(m, list(self.support), list(sup))
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "matrix", m)

    @property
    def n_qubits(self) -> int:
        return len(self.support)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def dagger(self) -> LocalMatrix:
        return LocalMatrix(self.support, self.matrix.conj().T)

    def on(self, target: Iterable[int]) -> np.ndarray:
        return embed_matrix(self.matrix, self.support, Region(target))

    def __matmul__(self, other: LocalMatrix) -> LocalMatrix:
        joint = self.support | other.support
        return LocalMatrix(joint, self.on(joint) @ other.on(joint))

    def __add__(self, other: LocalMatrix) -> LocalMatrix:
        joint = self.support | other.support
        return LocalMatrix(joint, self.on(joint) + other.on(joint))

    def __sub__(self, other: LocalMatrix) -> LocalMatrix:
        joint = self.support | other.support
        return LocalMatrix(joint, self.on(joint) - other.on(joint))

    def __mul__(self, scalar: complex) -> LocalMatrix:
        return LocalMatrix(self.support, self.matrix * scalar)

    __rmul__ = __mul__

    def hermitian_residual(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0))

    def as_hermitian(self, minimize: bool = True) -> LocalOperator:
        return LocalOperator(self.support, self.matrix, minimize=minimize)


class LocalOperator(LocalMatrix):
    """Hermitian operator with a minimal support.

    Qubits on which the operator acts as the identity (partial-trace test at
    ``SUPPORT_TOL``) are dropped on construction unless ``minimize=False``.
    """

    def __init__(self, support: Iterable[int], matrix, minimize: bool = True):
        support = list(support)
        super().__init__(support, matrix)
        if self.hermitian_residual() > HERMITIAN_TOL * max(1.0, float(np.max(np.abs(self.matrix), initial=0.0))):
            raise ValueError(f"operator on {list(self.support)} is not Hermitian (residual {self.hermitian_residual():.3e})")
        m = 0.5 * (self.matrix + self.matrix.conj().T)
        sup = list(self.support)
        if minimize:
            m, sup = _minimize_support(m, sup)
        object.__setattr__(self, "support", Region(sup))
        object.__setattr__(self, "matrix", m)

    def __repr__(self) -> str:
        return f"LocalOperator(support={list(self.support)})"

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def norm(self) -> float:
        ev = self.eigvalsh()
        return float(np.max(np.abs(ev), initial=0.0))


def _minimize_support(m: np.ndarray, sup: list[int]) -> tuple[np.ndarray, list[int]]:
    q = 0
    while q < len(sup):
        if _acts_trivially(m, len(sup), q, SUPPORT_TOL):
            m = partial_trace_qubit(m, len(sup), q) / 2.0
            del sup[q]
        else:
            q += 1
    return m, sup


def identity_operator() -> LocalOperator:
    return LocalOperator([], np.eye(1))


def embed(op: LocalMatrix, target: Iterable[int]) -> LocalMatrix:
    """Extend ``op`` to the superset ``target`` by tensoring with identities.

    The result keeps the full target as its support (no minimization).
    """
    target = Region(target)
    if not op.support.issubset(target):
        raise ValueError(f"support {list(op.support)} is not a subset of {list(target)}")
    if isinstance(op, LocalOperator):
        return LocalOperator(target, op.on(target), minimize=False)
    return LocalMatrix(target, op.on(target))


def herm_exp(op: LocalMatrix, s: complex) -> LocalMatrix:
    """``exp(s * op)`` for Hermitian ``op`` via its eigendecomposition."""
    evals, vecs = np.linalg.eigh(op.matrix)
    return LocalMatrix(op.support, (vecs * np.exp(s * evals)) @ vecs.conj().T)


# Pauli expansions ------------------------------------------------------------


@dataclass(frozen=True)
class PauliExpansion:
    """Real coefficients ``o(gamma)`` of a Hermitian operator in the Pauli basis.

    Keys are letter strings over ``IXYZ`` aligned with ``support``.
    """

    support: Region
    terms: dict[str, float]

    def to_matrix(self) -> np.ndarray:
        dim = 2 ** len(self.support)
        out = np.zeros((dim, dim), dtype=complex)
        for label, coef in self.terms.items():
            out += coef * kron_all(PAULI[c] for c in label)
        return out

    def nonidentity_sites(self, label: str) -> Region:
        return Region(v for v, c in zip(self.support, label) if c != "I")

    def __len__(self) -> int:
        return len(self.terms)


def pauli_coefficient_tensor(matrix: np.ndarray) -> np.ndarray:
    """Tensor ``c[g1..gk] = tr(M sigma_g) / 2^k`` with letters indexed ``IXYZ``."""
    k = int(round(np.log2(matrix.shape[0])))
    t = matrix.reshape((2,) * (2 * k))
    # contract one qubit at a time: sum_{ij} M[..i..,..j..] P[g][j, i] / 2
    for q in range(k):
        # remaining row axes come first; the matching column axis sits right after them
        t = np.tensordot(t, _PAULI_STACK / 2.0, axes=([0, k - q], [2, 1]))
    return t


def pauli_decompose(op: LocalMatrix, tol: float = 1e-14) -> PauliExpansion:
    if op.n_qubits == 0:
        return PauliExpansion(op.support, {"": float(np.real(op.matrix[0, 0]))})
    coeffs = pauli_coefficient_tensor(op.matrix)
    terms: dict[str, float] = {}
    for idx in zip(*np.nonzero(np.abs(coeffs) > tol)):
        terms["".join(PAULI_LETTERS[i] for i in idx)] = float(coeffs[idx].real)
    return PauliExpansion(op.support, terms)


def pauli_string_operator(support: Iterable[int], letters: str) -> LocalOperator:
    sup = list(support)
    if len(sup) != len(letters):
        raise ValueError("one Pauli letter per support site required")
    order = np.argsort(sup)
    sup = [sup[i] for i in order]
    letters = "".join(letters[i] for i in order)
    return LocalOperator(sup, kron_all(PAULI[c.upper()] for c in letters))


# Named constructors -------------------------------------------------------------


def ising_edge(i: int, j: int, sign: int = 1) -> LocalOperator:
    """``(1 - sign * Z_i Z_j) / 2``; with ``sign=+1`` the projector onto anti-aligned spins."""
    return LocalOperator([i, j], (np.eye(4) - sign * np.kron(SZ, SZ)) / 2)


def projector11(i: int, j: int) -> LocalOperator:
    return LocalOperator([i, j], np.diag([0, 0, 0, 1]).astype(complex))


def plus_projector(j: int) -> LocalOperator:
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    return LocalOperator([j], np.outer(plus, plus.conj()))


def single_site(j: int, matrix) -> LocalOperator:
    return LocalOperator([j], matrix)


# Commuting families ---------------------------------------------------------------


@dataclass(frozen=True)
class CommutingFamily:
    """Terms ``kappa_n`` of a sum of commuting PSD subnormalized local operators."""

    terms: tuple[LocalOperator, ...]
    declared_radius: int

    def __init__(self, terms: Iterable[LocalOperator], declared_radius: int):
        object.__setattr__(self, "terms", tuple(terms))
        object.__setattr__(self, "declared_radius", int(declared_radius))

    @property
    def M(self) -> int:
        return len(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __getitem__(self, n: int) -> LocalOperator:
        return self.terms[n]

    def supports(self) -> list[Region]:
        return [k.support for k in self.terms]


@dataclass
class Violation:
    kind: str
    indices: tuple[int, ...]
    residual: float

    def __str__(self) -> str:
        return f"{self.kind} terms={list(self.indices)} residual={self.residual:.3e}"


@dataclass
class FamilyReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def __str__(self) -> str:
        if self.ok:
            return "family valid"
        return "\n".join(str(v) for v in self.violations)


def commutator_norm(a: LocalMatrix, b: LocalMatrix) -> float:
    joint = a.support | b.support
    ma, mb = a.on(joint), b.on(joint)
    return float(np.linalg.norm(ma @ mb - mb @ ma, 2))


def validate_family(f: CommutingFamily, g: Graph | None = None, tol: float = FAMILY_TOL) -> FamilyReport:
    """Check every family invariant; violations are collected, never raised.

    The radius check needs the ambient graph and is skipped without one.
    """
    report = FamilyReport()
    for n, kappa in enumerate(f.terms):
        ev = kappa.eigvalsh() if kappa.n_qubits else np.real(kappa.matrix.diagonal())
        if ev.min() < -tol:
            report.violations.append(Violation("not-psd", (n,), float(ev.min())))
        if np.abs(ev).max() > 1 + tol:
            report.violations.append(Violation("norm-exceeds-1", (n,), float(np.abs(ev).max())))
        if g is not None and kappa.support:
            r = radius(g, kappa.support)
            if r > f.declared_radius:
                report.violations.append(Violation("radius-exceeds-declared", (n,), float(r)))
    for n, m in itertools.combinations(range(len(f.terms)), 2):
        a, b = f.terms[n], f.terms[m]
        if not set(a.support) & set(b.support):
            continue
        c = commutator_norm(a, b)
        if c > tol:
            report.violations.append(Violation("non-commuting", (n, m), c))
    return report


def family_radius(g: Graph, terms: Iterable[LocalOperator]) -> int:
    return max((radius(g, k.support) for k in terms if k.support), default=0)


def conjugated_family(
    g: Graph,
    unitaries: Sequence[LocalMatrix],
    seeds: Sequence[LocalOperator],
    tol: float = FAMILY_TOL,
) -> CommutingFamily:
    """Conjugate seed operators by the commuting unitaries touching them.

    ``kappa_n = W_n O_n W_n^dagger`` with ``W_n`` the product of all unitaries
    whose support meets the support of seed ``O_n``.
    """
    for a, b in itertools.combinations(range(len(unitaries)), 2):
        c = commutator_norm(unitaries[a], unitaries[b])
        if c > tol:
            raise ValueError(f"unitaries {a} and {b} do not commute (residual {c:.3e})")
    for u in unitaries:
        dev = np.max(np.abs(u.matrix @ u.matrix.conj().T - np.eye(u.dim)), initial=0.0)
        if dev > tol:
            raise ValueError(f"operator on {list(u.support)} is not unitary (residual {dev:.3e})")
    for a, b in itertools.combinations(range(len(seeds)), 2):
        if set(seeds[a].support) & set(seeds[b].support):
            raise ValueError(f"seed supports {list(seeds[a].support)} and {list(seeds[b].support)} overlap")
    for n, o in enumerate(seeds):
        ev = o.eigvalsh()
        if ev.min() < -tol or ev.max() > 1 + tol:
            raise ValueError(f"seed {n} spectrum outside [0, 1]: [{ev.min():.3e}, {ev.max():.3e}]")

    terms = []
    for o in seeds:
        touching = [u for u in unitaries if set(u.support) & set(o.support)]
        w = LocalMatrix(o.support, np.eye(o.dim))
        for u in touching:
            w = w @ u
        terms.append((w @ o @ w.dagger()).as_hermitian())
    return CommutingFamily(terms, family_radius(g, terms))


def toric_type_unitaries(
    g: Graph,
    O_A: np.ndarray,
    O_B: np.ndarray,
    times_A: Sequence[float],
    times_B: Sequence[float],
    tol: float = FAMILY_TOL,
) -> list[LocalMatrix]:
    """Plaquette unitaries ``exp(i t h_P)`` with ``h_P`` a product of ``O_A`` or ``O_B``.

    Plaquettes of the grid ``g`` alternate A/B in a checkerboard pattern
    (A when ``x + y`` is even). ``times_A`` and ``times_B`` list one evolution
    time per A and B plaquette in row-major plaquette order.
    """
    from .lattice import grid_shape

    shape = grid_shape(g)
    if shape is None or min(shape) < 2:
        raise ValueError("toric-type unitaries need a 2D grid built by lattice.grid with both sides >= 2")
    O_A, O_B = np.asarray(O_A, dtype=complex), np.asarray(O_B, dtype=complex)
    for name, o in (("O_A", O_A), ("O_B", O_B)):
        if o.shape != (2, 2) or np.max(np.abs(o - o.conj().T)) > tol:
            raise ValueError(f"{name} must be a Hermitian 2x2 matrix")
        if np.max(np.abs(np.linalg.eigvalsh(o))) > 1 + tol:
            raise ValueError(f"{name} must have operator norm <= 1")
    anti = np.max(np.abs(O_A @ O_B + O_B @ O_A))
    if anti > tol:
        raise ValueError(f"O_A and O_B must anticommute (residual {anti:.3e})")

    lx, ly = shape
    plaq_A, plaq_B = [], []
    for y in range(ly - 1):
        for x in range(lx - 1):
            v = x + lx * y
            sites = [v, v + 1, v + lx, v + lx + 1]
            (plaq_A if (x + y) % 2 == 0 else plaq_B).append(sites)
    if len(times_A) != len(plaq_A) or len(times_B) != len(plaq_B):
        raise ValueError(f"need {len(plaq_A)} A-times and {len(plaq_B)} B-times, got {len(times_A)} and {len(times_B)}")

    unitaries: list[LocalMatrix] = []
    for sites_list, o, times in ((plaq_A, O_A, times_A), (plaq_B, O_B, times_B)):
        for sites, tp in zip(sites_list, times):
            h = LocalOperator(sites, kron_all([o] * 4), minimize=False)
            unitaries.append(herm_exp(h, 1j * tp))
    for a, b in itertools.combinations(range(len(unitaries)), 2):
        c = commutator_norm(unitaries[a], unitaries[b])
        if c > tol:
            raise ValueError(f"plaquette unitaries {a} and {b} do not commute (residual {c:.3e})")
    return unitaries
