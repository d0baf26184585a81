"""Spectral-gap certificates for frustration-free parent Hamiltonians.

A certificate is a point ``(a, c, x)`` satisfying, for every retained pair,

    h_i h_j + h_j h_i + a_ij h_i^2 + a_ji h_j^2 - c_ij h_i - c_ji h_j >= 0

with ``sum_j a_ij = 1`` per row. Summing over pairs gives
``H^2 >= sum_i x_i h_i >= (min_i x_i) H`` where ``x_i = sum_j c_ij``, so the
gap above the zero-energy ground state is at least ``min_i x_i``.

Feasibility is always re-checked with :func:`tnsprep.sdp.verify_feasibility`
before a certificate is issued; the solver's own claim is never trusted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .lattice import Region, ball
from .models import ModelSpec
from .operators import LocalOperator, embed_matrix
from .sdp import SdpProblem, SolverConfig, hermitian_to_real, make_problem, solve, verify_feasibility
from .state import ParentHamiltonian, build_parent_hamiltonian

FEAS_TOL = 1e-9
SHRINK_MARGIN = 1e-6
SHRINK_TARGET = -1e-12
REPORT_SLACK = 1e-8
RANGE_TOL = 1e-10
DEFAULT_BOX = 20.0


class NoCertificate(RuntimeError):
    """The SDP did not yield a positive, verified gap bound at this point."""


# Modes ------------------------------------------------------------------------------


@dataclass(frozen=True)
class Mode:
    kind: str = "overlapping-only"
    k: int = 0
    projectorized: bool = False

    def __post_init__(self):
        if self.kind not in ("all-pairs", "overlapping-only", "blocked"):
            raise ValueError(f"unknown sparsity mode {self.kind!r}")
        if self.kind == "blocked" and self.k < 0:
            raise ValueError("blocking radius must be non-negative")

    @property
    def label(self) -> str:
        base = f"blocked({self.k})" if self.kind == "blocked" else self.kind
        return base + ("+projectorized" if self.projectorized else "")

    @property
    def supports_continuity(self) -> bool:
        return self.kind != "blocked" and not self.projectorized


def parse_mode(text: str, projectorized: bool = False) -> Mode:
    """``all-pairs``, ``overlapping-only`` or ``blocked:k``."""
    if text.startswith("blocked"):
        _, _, k = text.partition(":")
        return Mode("blocked", int(k or 1), projectorized)
    return Mode(text, 0, projectorized)


# Terms entering the SDP -------------------------------------------------------------


@dataclass(frozen=True)
class GapTerm:
    """One (possibly blocked) Hamiltonian term.

    ``support`` is the structural support, independent of beta, which is a
    superset of the numerical support of ``op``; overlap decisions use it so
    that pair retention does not change along a beta path.
    """

    op: LocalOperator
    support: Region
    nu: frozenset[int]
    members: tuple[int, ...]
    # smallest positive eigenvalue of the term before projector replacement
    range_floor: float = 1.0


def _projector_onto_range(op: LocalOperator) -> LocalOperator:
    w, v = np.linalg.eigh(op.matrix)
    keep = w > RANGE_TOL * max(1.0, float(np.max(np.abs(w), initial=0.0)))
    P = v[:, keep] @ v[:, keep].conj().T
    return LocalOperator(op.support, P)


def _sum_terms(ops: Sequence[LocalOperator], support: Region) -> LocalOperator:
    total = sum(embed_matrix(o.matrix, o.support, support) for o in ops)
    return LocalOperator(support, total)


def block_assignment(ph: ParentHamiltonian, k: int) -> list[tuple[int, ...]]:
    """Greedy grouping: centers in increasing id take every unassigned term
    whose structural support lies in their distance-``k`` ball. Terms that fit
    no ball form singleton groups."""
    g = ph.model.graph
    assigned: set[int] = set()
    groups = []
    for center in range(ph.N):
        region = set(ball(g, center, k))
        members = tuple(
            n for n, term in enumerate(ph.terms) if n not in assigned and set(term.o_support) <= region
        )
        if members:
            groups.append(members)
            assigned.update(members)
    groups.extend((n,) for n in range(len(ph.terms)) if n not in assigned)
    return sorted(groups)


def gap_terms(ph: ParentHamiltonian, mode: Mode) -> list[GapTerm]:
    if mode.kind == "blocked":
        groups = block_assignment(ph, mode.k)
    else:
        groups = [(n,) for n in range(len(ph.terms))]
    out = []
    for members in groups:
        sup = Region(v for n in members for v in ph.terms[n].o_support)
        op = _sum_terms([ph.terms[n].h for n in members], sup)
        floor = 1.0
        if mode.projectorized:
            floor = smallest_nonzero_eig(op)
            op = _projector_onto_range(op)
        nu = frozenset(m for n in members for m in ph.terms[n].nu)
        out.append(GapTerm(op, sup, nu, members, floor))
    return out


# Formulation ------------------------------------------------------------------------


@dataclass(frozen=True)
class PairData:
    i: int
    j: int
    support: Region
    cross: np.ndarray
    hi2: np.ndarray
    hj2: np.ndarray
    hi: np.ndarray
    hj: np.ndarray

    def block(self, a_ij, a_ji, c_ij, c_ji) -> np.ndarray:
        return self.cross + a_ij * self.hi2 + a_ji * self.hj2 - c_ij * self.hi - c_ji * self.hj


def _pair_data(ti: GapTerm, tj: GapTerm, i: int, j: int) -> PairData:
    sup = ti.support | tj.support
    Hi = embed_matrix(ti.op.matrix, ti.op.support, sup)
    Hj = embed_matrix(tj.op.matrix, tj.op.support, sup)
    return PairData(i, j, sup, Hi @ Hj + Hj @ Hi, Hi @ Hi, Hj @ Hj, Hi, Hj)


def smallest_nonzero_eig(op: LocalOperator) -> float:
    w = np.linalg.eigvalsh(op.matrix)
    pos = w[w > RANGE_TOL * max(1.0, float(np.max(np.abs(w), initial=0.0)))]
    return float(pos.min()) if pos.size else math.inf


@dataclass(frozen=True)
class Formulation:
    problem: SdpProblem
    terms: tuple[GapTerm, ...]
    pairs: tuple[PairData, ...]
    index: dict
    isolated: dict[int, float]
    mode: Mode

    @property
    def ordered_pairs(self) -> list[tuple[int, int]]:
        return [(p.i, p.j) for p in self.pairs] + [(p.j, p.i) for p in self.pairs]


def _realify(M: np.ndarray, real: bool) -> np.ndarray:
    if real:
        return M.real
    return hermitian_to_real(M)


def _symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def formulate_sdp(ph: ParentHamiltonian, mode: Mode = Mode(), box: float | None = DEFAULT_BOX) -> Formulation:
    """Build the pair-block SDP maximizing ``x``.

    Terms that share no structural support with any retained partner are
    handled by a ``1 x 1`` constraint ``x <= lambda_min^+(h_i)``.
    """
    terms = gap_terms(ph, mode)
    T = len(terms)
    pairs = []
    for i in range(T):
        for j in range(i + 1, T):
            overlap = bool(set(terms[i].support) & set(terms[j].support))
            if mode.kind == "all-pairs" or overlap:
                pairs.append(_pair_data(terms[i], terms[j], i, j))
    partners: dict[int, list[int]] = {i: [] for i in range(T)}
    for p in pairs:
        partners[p.i].append(p.j)
        partners[p.j].append(p.i)
    isolated = {i: smallest_nonzero_eig(terms[i].op) for i in range(T) if not partners[i]}

    index: dict = {}
    labels = []
    for p in pairs:
        for key in (("a", p.i, p.j), ("a", p.j, p.i), ("c", p.i, p.j), ("c", p.j, p.i)):
            index[key] = len(labels)
            labels.append(f"{key[0]}[{key[1]},{key[2]}]")
    index[("x",)] = len(labels)
    labels.append("x")
    V = len(labels)

    real = all(np.max(np.abs(p.cross.imag), initial=0.0) < 1e-14 and np.max(np.abs(p.hi.imag), initial=0.0) < 1e-14
               and np.max(np.abs(p.hj.imag), initial=0.0) < 1e-14 for p in pairs)
    blocks = []
    for p in pairs:
        F0 = _symmetrize(_realify(p.cross, real))
        Fs = np.zeros((V, *F0.shape))
        Fs[index[("a", p.i, p.j)]] = _symmetrize(_realify(p.hi2, real))
        Fs[index[("a", p.j, p.i)]] = _symmetrize(_realify(p.hj2, real))
        Fs[index[("c", p.i, p.j)]] = -_symmetrize(_realify(p.hi, real))
        Fs[index[("c", p.j, p.i)]] = -_symmetrize(_realify(p.hj, real))
        blocks.append((F0, Fs))
    for i, lam in isolated.items():
        Fs = np.zeros((V, 1, 1))
        Fs[index[("x",)]] = -1.0
        blocks.append((np.array([[min(lam, 1e6)]]), Fs))

    rows, rhs = [], []
    for i in range(T):
        if not partners[i]:
            continue
        ra = np.zeros(V)
        rc = np.zeros(V)
        for j in partners[i]:
            ra[index[("a", i, j)]] = 1.0
            rc[index[("c", i, j)]] = 1.0
        rc[index[("x",)]] = -1.0
        rows += [ra, rc]
        rhs += [1.0, 0.0]
    objective = np.zeros(V)
    objective[index[("x",)]] = 1.0
    A = np.array(rows) if rows else np.zeros((0, V))
    problem = make_problem(objective, blocks, A, rhs, box=box, labels=labels)
    return Formulation(problem, tuple(terms), tuple(pairs), index, isolated, mode)


# Certificates -----------------------------------------------------------------------


@dataclass(frozen=True)
class GapCertificate:
    beta: float
    t: float
    delta: float
    a: dict
    c: dict
    sparsity_mode: str
    min_block_eig: float
    equality_residual: float
    shrink_applied: float
    row_sums: dict
    isolated: dict
    solver: dict
    nu: tuple = field(default=(), repr=False)
    members: tuple = field(default=(), repr=False)
    continuity_ok: bool = True
    # projectorized runs certify sum_i P_i; since h_i >= floor_i P_i with equal
    # kernels, min_i floor_i * delta bounds the gap of the original sum
    original_delta: float | None = None

    @property
    def certifies(self) -> str:
        if "projectorized" in self.sparsity_mode:
            return "projectorized Hamiltonian (range projectors); a witness for the original via original_delta"
        return "parent Hamiltonian"

    def to_dict(self) -> dict:
        return {
            "kind": "gap-certificate",
            "code_version": __version__,
            "beta": self.beta,
            "t": self.t,
            "delta": self.delta,
            "sparsity_mode": self.sparsity_mode,
            "shrink_applied": self.shrink_applied,
            "residuals": {"min_block_eig": self.min_block_eig, "equality_residual": self.equality_residual},
            "a": [[i, j, v] for (i, j), v in sorted(self.a.items())],
            "c": [[i, j, v] for (i, j), v in sorted(self.c.items())],
            "row_sums": {str(i): v for i, v in sorted(self.row_sums.items())},
            "isolated": {str(i): v for i, v in sorted(self.isolated.items())},
            "nu": [sorted(n) for n in self.nu],
            "members": [list(m) for m in self.members],
            "continuity_ok": self.continuity_ok,
            "certifies": self.certifies,
            "original_delta": self.original_delta,
            "solver": self.solver,
        }

    @classmethod
    def from_dict(cls, d: dict) -> GapCertificate:
        return cls(
            beta=d["beta"],
            t=d["t"],
            delta=d["delta"],
            a={(i, j): v for i, j, v in d["a"]},
            c={(i, j): v for i, j, v in d["c"]},
            sparsity_mode=d["sparsity_mode"],
            min_block_eig=d["residuals"]["min_block_eig"],
            equality_residual=d["residuals"]["equality_residual"],
            shrink_applied=d["shrink_applied"],
            row_sums={int(k): v for k, v in d["row_sums"].items()},
            isolated={int(k): v for k, v in d["isolated"].items()},
            solver=d["solver"],
            nu=tuple(frozenset(n) for n in d.get("nu", [])),
            members=tuple(tuple(m) for m in d.get("members", [])),
            continuity_ok=d.get("continuity_ok", True),
            original_delta=d.get("original_delta"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _pair_min_eigs(form: Formulation, y: np.ndarray) -> np.ndarray:
    """Min eigenvalue of every pair block through the independent audit path."""
    rep = verify_feasibility(form.problem, y)
    return rep.per_block_min_eig[: len(form.pairs)]


def _shrunk(form: Formulation, y: np.ndarray, s: float) -> np.ndarray:
    out = y.copy()
    for key, n in form.index.items():
        if key[0] == "c":
            out[n] -= s
    return out


def _row_sums(form: Formulation, y: np.ndarray) -> dict[int, float]:
    sums: dict[int, float] = {}
    for key, n in form.index.items():
        if key[0] == "c":
            sums[key[1]] = sums.get(key[1], 0.0) + float(y[n])
    return sums


def _find_shrink(form: Formulation, y: np.ndarray, tol: float = 1e-10) -> float:
    """Smallest ``s`` with every pair block above ``SHRINK_TARGET`` after ``c -> c - s``."""

    def ok(s: float) -> bool:
        return bool(np.all(_pair_min_eigs(form, _shrunk(form, y, s)) >= SHRINK_TARGET))

    if ok(0.0):
        return 0.0
    hi = 1e-12
    while not ok(hi):
        hi *= 2
        if hi > 1.0:
            raise NoCertificate("shrink step could not restore feasibility")
    lo = 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def certify_formulation(
    form: Formulation, beta: float, t: float, config: SolverConfig = SolverConfig()
) -> GapCertificate:
    sol = solve(form.problem, config)
    solver_info = {
        "backend": "cvxopt",
        "status": sol.status,
        "backend_status": sol.solver_status,
        "duality_gap": sol.duality_gap,
        "objective": sol.objective_value,
        "dual_objective": sol.dual_objective,
        "iterations": sol.iterations,
        "gap_tol": config.gap_tol,
        "feas_tol": config.feas_tol,
    }
    if not sol.optimal:
        raise NoCertificate(f"solver returned {sol.status} ({sol.solver_status})")
    y = sol.y
    pair_eigs = _pair_min_eigs(form, y)
    if pair_eigs.size and pair_eigs.min() < -SHRINK_MARGIN:
        raise NoCertificate(f"block violation {pair_eigs.min():.3e} beyond the shrink margin")
    s = _find_shrink(form, y) if pair_eigs.size else 0.0
    y = _shrunk(form, y, s)
    sums = _row_sums(form, y)
    candidates = list(sums.values()) + list(form.isolated.values())
    delta = min(candidates) - REPORT_SLACK
    y[form.index[("x",)]] = min(candidates)
    audit = verify_feasibility(form.problem, y)
    a_resid = 0.0
    for i in {k[1] for k in form.index if k[0] == "a"}:
        row = sum(float(y[n]) for k, n in form.index.items() if k[0] == "a" and k[1] == i)
        a_resid = max(a_resid, abs(row - 1.0))
    min_eig = float(audit.per_block_min_eig.min()) if audit.per_block_min_eig.size else 0.0
    if min_eig < -FEAS_TOL or a_resid > 1e-9:
        raise NoCertificate(f"independent audit failed (min eig {min_eig:.3e}, row residual {a_resid:.3e})")
    if not delta > 0:
        raise NoCertificate(f"no positive gap bound (delta = {delta:.3e})")
    a = {(k[1], k[2]): float(y[n]) for k, n in form.index.items() if k[0] == "a"}
    c = {(k[1], k[2]): float(y[n]) for k, n in form.index.items() if k[0] == "c"}
    return GapCertificate(
        beta=float(beta),
        t=float(t),
        delta=float(delta),
        a=a,
        c=c,
        sparsity_mode=form.mode.label,
        min_block_eig=min_eig,
        equality_residual=a_resid,
        shrink_applied=float(s),
        row_sums=sums,
        isolated=dict(form.isolated),
        solver=solver_info,
        nu=tuple(term.nu for term in form.terms),
        members=tuple(term.members for term in form.terms),
        continuity_ok=form.mode.supports_continuity,
        original_delta=float(delta * min(t.range_floor for t in form.terms)) if form.mode.projectorized else None,
    )


def certify_point(
    model: ModelSpec, mode: Mode = Mode(), config: SolverConfig = SolverConfig(), box: float | None = DEFAULT_BOX
) -> GapCertificate:
    """Solve, audit, shrink if needed and issue a certificate, or raise :class:`NoCertificate`."""
    ph = build_parent_hamiltonian(model)
    return certify_formulation(formulate_sdp(ph, mode, box), model.beta, model.t, config)


def sdp_optimum(
    model: ModelSpec, mode: Mode = Mode(), config: SolverConfig = SolverConfig(), box: float | None = DEFAULT_BOX
) -> float:
    """Raw optimal ``x`` of the SDP, possibly non-positive; no certificate is issued."""
    form = formulate_sdp(build_parent_hamiltonian(model), mode, box)
    sol = solve(form.problem, config)
    if not sol.optimal:
        raise NoCertificate(f"solver returned {sol.status} ({sol.solver_status})")
    return sol.objective_value


def summation_residual(form: Formulation, cert: GapCertificate, ph: ParentHamiltonian) -> float:
    """Max entry of ``2 sum_pairs B_ij - 2 (H^2 - sum_i x_i h_i)`` on the full space.

    Only meaningful for all-pairs formulations without isolated terms.
    """
    full = list(range(ph.N))
    H = ph.dense()
    lhs = np.zeros_like(H)
    for p in form.pairs:
        B = p.block(cert.a[(p.i, p.j)], cert.a[(p.j, p.i)], cert.c[(p.i, p.j)], cert.c[(p.j, p.i)])
        lhs += 2 * embed_matrix(B, p.support, full)
    rhs = H @ H
    for i, term in enumerate(form.terms):
        rhs -= cert.row_sums.get(i, 0.0) * embed_matrix(term.op.matrix, term.op.support, full)
    return float(np.max(np.abs(lhs - 2 * rhs)))


# Pairwise prescan -------------------------------------------------------------------


@dataclass(frozen=True)
class PrescanResult:
    a: dict
    pair_sums: dict
    row_sums: dict
    plausible: bool


def pairwise_prescan(ph: ParentHamiltonian, mode: Mode = Mode(), box: float = DEFAULT_BOX) -> PrescanResult:
    """Per overlapping pair, minimize ``a_ij + a_ji`` keeping the ``c``-free block PSD.

    The verdict (every row sum of ``a`` below one) is a heuristic screen.
    """
    terms = gap_terms(ph, mode)
    a: dict = {}
    pair_sums: dict = {}
    for i in range(len(terms)):
        for j in range(i + 1, len(terms)):
            if not set(terms[i].support) & set(terms[j].support):
                continue
            p = _pair_data(terms[i], terms[j], i, j)
            real = np.max(np.abs(np.stack([p.cross.imag, p.hi2.imag, p.hj2.imag])), initial=0.0) < 1e-14
            F0 = _symmetrize(_realify(p.cross, real))
            Fs = np.stack([_symmetrize(_realify(p.hi2, real)), _symmetrize(_realify(p.hj2, real))])
            sol = solve(make_problem([-1.0, -1.0], [(F0, Fs)], box=box))
            a[(i, j)], a[(j, i)] = float(sol.y[0]), float(sol.y[1])
            pair_sums[(i, j)] = float(sol.y.sum())
    rows: dict[int, float] = {i: 0.0 for i in range(len(terms))}
    for (i, _), v in a.items():
        rows[i] += v
    return PrescanResult(a, pair_sums, rows, all(v < 1.0 for v in rows.values()))


# Continuity -------------------------------------------------------------------------


def cprime(a, c, alpha, beta_t, gamma):
    """Four-case feasible update of ``c_ij`` after a shift ``tau`` in beta.

    ``alpha``, ``beta_t``, ``gamma`` are the lower bounds on the squared
    deformations acting only on ``h_i``, on both, and only on ``h_j``.
    """
    a = np.asarray(a, dtype=float)
    gb = gamma * beta_t
    case_mid = gb * c - (1 - gb) - a * (gb - alpha)
    case_neg = gb * c - (1 - gb) - a * (gb - 1)
    case_big = gb * c - (1 - beta_t) - a * (beta_t - alpha)
    case_huge = gb * c - (1 - beta_t) - a * beta_t * (1 - alpha)
    return np.where(
        a < 0, case_neg, np.where(a <= 1, case_mid, np.where(1 - a * alpha >= 0, case_big, case_huge))
    )


@dataclass(frozen=True)
class ContinuityExtension:
    base: GapCertificate
    pairs: tuple[tuple[int, int], ...]
    a: np.ndarray
    c: np.ndarray
    set_sizes: np.ndarray  # (n_i_minus_j, n_j_minus_i, n_both) per ordered pair
    rows: np.ndarray
    isolated: tuple[tuple[int, float, int], ...]

    def c_of_tau(self, tau) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(tau, dtype=float))[:, None]
        s = self.set_sizes
        alpha = np.exp(-2 * s[:, 0] * tau)
        gamma = np.exp(-2 * s[:, 1] * tau)
        beta_t = np.exp(-2 * s[:, 2] * tau)
        return cprime(self.a[None, :], self.c[None, :], alpha, beta_t, gamma)

    def delta_of_tau(self, tau) -> np.ndarray:
        """Lower bound on the gap at ``base.beta + tau`` (vectorized)."""
        scalar = np.ndim(tau) == 0
        taus = np.atleast_1d(np.asarray(tau, dtype=float))
        cands = []
        if self.pairs:
            cp = self.c_of_tau(taus)
            n_rows = int(self.rows.max()) + 1
            sums = np.zeros((taus.size, n_rows))
            np.add.at(sums.T, self.rows, cp.T)
            present = np.unique(self.rows)
            cands.append(sums[:, present].min(axis=1))
        for _, lam, nu_size in self.isolated:
            cands.append(lam * np.exp(-2 * nu_size * taus))
        out = np.min(np.stack(cands), axis=0) - REPORT_SLACK
        return float(out[0]) if scalar else out

    def point(self, tau: float) -> tuple[dict, dict]:
        """Feasible ``(a, c')`` at ``base.beta + tau``."""
        cp = self.c_of_tau(tau)[0]
        return dict(zip(self.pairs, self.a.tolist())), dict(zip(self.pairs, cp.tolist()))


def continuity_extend(cert: GapCertificate) -> ContinuityExtension:
    if not cert.continuity_ok:
        raise ValueError(f"continuity bounds are not available for mode {cert.sparsity_mode}")
    pairs = tuple(sorted(cert.c))
    nu = cert.nu
    sizes = np.array(
        [(len(nu[i] - nu[j]), len(nu[j] - nu[i]), len(nu[i] & nu[j])) for i, j in pairs], dtype=float
    ).reshape(-1, 3)
    a = np.array([cert.a[p] for p in pairs])
    c = np.array([cert.c[p] for p in pairs])
    rows = np.array([p[0] for p in pairs], dtype=int)
    iso = tuple((i, lam, len(nu[i])) for i, lam in sorted(cert.isolated.items()))
    return ContinuityExtension(cert, pairs, a, c, sizes, rows, iso)


def audit_extension(ext: ContinuityExtension, model: ModelSpec, tau: float) -> float:
    """Min pair-block eigenvalue of the extended point on the true Hamiltonian at ``beta + tau``."""
    ph = build_parent_hamiltonian(model.with_params(beta=ext.base.beta + tau))
    form = formulate_sdp(ph, Mode("all-pairs"), box=None)
    a, c = ext.point(tau)
    worst = math.inf
    for p in form.pairs:
        if (p.i, p.j) not in c:
            continue
        B = p.block(a[(p.i, p.j)], a[(p.j, p.i)], c[(p.i, p.j)], c[(p.j, p.i)])
        worst = min(worst, float(np.linalg.eigvalsh(B)[0]))
    return worst


@dataclass(frozen=True)
class Tau0:
    tau0: float
    grid_points: int
    grid_step: float
    tau_max: float


def find_tau0(
    ext: ContinuityExtension, floor: float = 0.0, grid_points: int = 10_000, tau_cap: float = 100.0, tol: float = 1e-10
) -> Tau0:
    """First crossing of ``delta(tau)`` below ``floor``.

    ``delta(tau)`` need not be monotone, so a uniform scan locates the first
    grid cell with a value below the floor before bisecting inside it.
    """
    d0 = ext.delta_of_tau(0.0)
    if d0 < floor:
        raise ValueError(f"delta(0) = {d0:.6g} is below the floor {floor:.6g}")
    if d0 == floor:
        return Tau0(0.0, grid_points, 0.0, 0.0)
    tau_max = 1.0
    while ext.delta_of_tau(tau_max) >= floor:
        tau_max *= 2
        if tau_max > tau_cap:
            return Tau0(math.inf, grid_points, math.nan, tau_cap)
    grid = np.linspace(0.0, tau_max, grid_points + 1)
    vals = ext.delta_of_tau(grid)
    first = int(np.argmax(vals < floor))
    lo, hi = grid[first - 1], grid[first]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ext.delta_of_tau(mid) >= floor:
            lo = mid
        else:
            hi = mid
    return Tau0(float(lo), grid_points, float(grid[1] - grid[0]), float(tau_max))


# Interval loop ----------------------------------------------------------------------


@dataclass(frozen=True)
class IntervalCertificate:
    t: float
    beta_points: tuple[float, ...]
    certificates: tuple[GapCertificate, ...]
    tau_steps: tuple[float, ...]
    delta_min: float
    beta0: float
    covered: bool
    stall_reason: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": "interval-certificate",
            "code_version": __version__,
            "t": self.t,
            "beta_points": list(self.beta_points),
            "tau_steps": list(self.tau_steps),
            "delta_min": self.delta_min,
            "beta0": self.beta0,
            "covered": self.covered,
            "stall_reason": self.stall_reason,
            "certificates": [c.to_dict() for c in self.certificates],
        }


def certify_interval(
    model: ModelSpec,
    beta_target: float,
    floor: float = 0.0,
    mode: Mode = Mode(),
    config: SolverConfig = SolverConfig(),
    min_step: float = 1e-8,
    max_points: int = 10_000,
    progress: Callable[[float, GapCertificate], None] | None = None,
) -> IntervalCertificate:
    """Cover ``[0, beta_target]`` by alternating SDP solves and continuity steps.

    Each certified point at ``beta_k`` yields ``tau0`` with ``delta(tau) >=
    floor`` on ``[0, tau0]``; the next point is ``beta_k + tau0`` (clipped to
    the target). With ``floor == 0`` the open step relies on the next solve.
    """
    if not mode.supports_continuity:
        raise ValueError(f"interval certification needs a continuity-capable mode, got {mode.label}")
    if beta_target < 0:
        raise ValueError("beta_target must be non-negative")
    betas, certs, steps, mins = [], [], [], []
    beta = 0.0
    covered, reason = False, ""
    while True:
        try:
            cert = certify_point(model.with_params(beta=beta), mode, config)
        except NoCertificate as exc:
            reason = f"no certificate at beta={beta:.6g}: {exc}"
            break
        if cert.delta <= floor:
            reason = f"certificate at beta={beta:.6g} has delta={cert.delta:.6g} <= floor"
            break
        betas.append(beta)
        certs.append(cert)
        if progress:
            progress(beta, cert)
        if beta >= beta_target:
            covered = True
            break
        ext = continuity_extend(cert)
        tau0 = find_tau0(ext, floor).tau0
        if tau0 < min_step:
            reason = f"certificate stalls at beta0={beta:.6g} (tau0={tau0:.3e})"
            break
        step = min(tau0, beta_target - beta)
        steps.append(step)
        grid = np.linspace(0.0, step, 257)
        mins.append(float(np.min(ext.delta_of_tau(grid))))
        beta = beta_target if step >= beta_target - beta else beta + step
        if len(betas) >= max_points:
            reason = "maximum number of points reached"
            break
    if covered:
        beta0 = beta_target
    elif betas and floor > 0 and len(steps) == len(betas):
        # the last step is covered by the continuity bound alone
        beta0 = betas[-1] + steps[-1]
    else:
        beta0 = betas[-1] if betas else 0.0
    pointwise = [c.delta for c in certs]
    delta_min = min(mins + pointwise) if (mins or pointwise) else 0.0
    return IntervalCertificate(
        float(model.t), tuple(betas), tuple(certs), tuple(steps), float(delta_min), float(beta0), covered, reason
    )
