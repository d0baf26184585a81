"""Small dense semidefinite programs in linear-matrix-inequality form.

A problem asks to maximize ``objective @ y`` subject to

* ``F0 + sum_k y_k F_k >= 0`` for every block ``(F0, F_1..F_V)``,
* ``A y = b``,
* optionally ``|y_k| <= box`` for every variable.

:func:`solve` delegates the interior-point iterations to
``cvxopt.solvers.sdp``. :func:`verify_feasibility` re-checks any candidate
with an independent symmetric eigensolver and is what certificates rely on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

SYMMETRY_TOL = 1e-12
BLOCK_DIM_CAP = 256

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible-detected"
STATUS_MAX_ITER = "max-iter"


@dataclass(frozen=True)
class Block:
    """``F0 + sum_k y_k F[k] >= 0``; ``F`` is stored as a ``(V, d, d)`` array."""

    F0: np.ndarray
    F: np.ndarray

    @property
    def dim(self) -> int:
        return self.F0.shape[0]

    def assemble(self, y: np.ndarray) -> np.ndarray:
        return self.F0 + np.tensordot(y, self.F, axes=1)


@dataclass(frozen=True)
class SdpProblem:
    objective: np.ndarray
    blocks: tuple[Block, ...]
    A: np.ndarray
    b: np.ndarray
    box: float | None = None
    labels: tuple[str, ...] = field(default=())
    block_cap: int = BLOCK_DIM_CAP

    def __post_init__(self):
        V = self.var_count
        if self.A.ndim != 2 or self.A.shape[1] != V or self.b.shape != (self.A.shape[0],):
            raise ValueError("equality data has inconsistent shape")
        for n, blk in enumerate(self.blocks):
            d = blk.dim
            if d > self.block_cap:
                raise ValueError(f"block {n} has dimension {d} above the cap {self.block_cap}")
            if blk.F0.shape != (d, d) or blk.F.shape != (V, d, d):
                raise ValueError(f"block {n} has inconsistent shape")
            asym = max(
                float(np.max(np.abs(blk.F0 - blk.F0.T), initial=0.0)),
                float(np.max(np.abs(blk.F - blk.F.transpose(0, 2, 1)), initial=0.0)),
            )
            if asym > SYMMETRY_TOL:
                raise ValueError(f"block {n} is not symmetric (residual {asym:.2e})")
        if self.box is not None and self.box <= 0:
            raise ValueError("box bound must be positive")
        if self.labels and len(self.labels) != V:
            raise ValueError("labels must name every variable")

    @property
    def var_count(self) -> int:
        return int(self.objective.size)


def make_problem(
    objective: Sequence[float],
    blocks: Sequence[tuple[np.ndarray, Sequence[np.ndarray]]],
    A: np.ndarray | None = None,
    b: Sequence[float] | None = None,
    box: float | None = None,
    labels: Sequence[str] = (),
) -> SdpProblem:
    obj = np.asarray(objective, dtype=float)
    V = obj.size
    blks = []
    for F0, Fs in blocks:
        F0 = np.atleast_2d(np.asarray(F0, dtype=float))
        Fs = np.asarray(Fs, dtype=float).reshape(V, *F0.shape)
        blks.append(Block(F0, Fs))
    A = np.zeros((0, V)) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
    b = np.zeros(0) if b is None else np.asarray(b, dtype=float)
    return SdpProblem(obj, tuple(blks), A, b, box, tuple(labels))


@dataclass(frozen=True)
class FeasibilityReport:
    per_block_min_eig: np.ndarray
    equality_residual: float
    box_violation: float

    @property
    def min_eig(self) -> float:
        return float(np.min(self.per_block_min_eig, initial=np.inf))

    def feasible(self, tol: float = 1e-9, eq_tol: float = 1e-9) -> bool:
        return self.min_eig >= -tol and self.equality_residual <= eq_tol and self.box_violation <= tol


def verify_feasibility(p: SdpProblem, y: Sequence[float]) -> FeasibilityReport:
    y = np.asarray(y, dtype=float)
    if y.shape != (p.var_count,):
        raise ValueError(f"expected {p.var_count} variables, got shape {y.shape}")
    eigs = np.array([np.linalg.eigvalsh(blk.assemble(y))[0] for blk in p.blocks])
    eq = float(np.max(np.abs(p.A @ y - p.b), initial=0.0))
    box = 0.0 if p.box is None else max(0.0, float(np.max(np.abs(y), initial=0.0)) - p.box)
    return FeasibilityReport(eigs, eq, box)


@dataclass(frozen=True)
class SolverConfig:
    gap_tol: float = 1e-7
    feas_tol: float = 1e-9
    max_iter: int = 200
    # cvxopt's own stopping tolerances, tighter than the acceptance thresholds
    abstol: float = 1e-9
    reltol: float = 1e-9
    solver_feastol: float = 1e-10


@dataclass(frozen=True)
class SdpSolution:
    y: np.ndarray
    objective_value: float
    dual_objective: float
    duality_gap: float
    per_block_min_eig: np.ndarray
    equality_residual: float
    status: str
    iterations: int
    solver_status: str

    @property
    def optimal(self) -> bool:
        return self.status == STATUS_OPTIMAL


def _independent_rows(A: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Drop linearly dependent equality rows; report whether ``A y = b`` is consistent."""
    if A.shape[0] == 0:
        return A, b, True
    rank = np.linalg.matrix_rank(A)
    aug = np.linalg.matrix_rank(np.column_stack([A, b]))
    if aug > rank:
        return A, b, False
    _, _, piv = scipy.linalg.qr(A.T, pivoting=True, mode="economic")
    keep = np.sort(piv[:rank])
    return A[keep], b[keep], True


def solve(p: SdpProblem, config: SolverConfig = SolverConfig()) -> SdpSolution:
    """Interior-point solve; the returned ``status`` reflects the independent audit."""
    from cvxopt import matrix, solvers

    V = p.var_count
    A, b, consistent = _independent_rows(p.A, p.b)
    if not consistent:
        return _failed(p, STATUS_INFEASIBLE, "rank test")

    c = matrix(-p.objective.astype(float))
    Gs = [matrix(-blk.F.reshape(V, -1).T.copy()) for blk in p.blocks]
    hs = [matrix(blk.F0.copy()) for blk in p.blocks]
    kw = {}
    if p.box is not None:
        kw["Gl"] = matrix(np.vstack([np.eye(V), -np.eye(V)]))
        kw["hl"] = matrix(np.full(2 * V, float(p.box)))
    if A.shape[0]:
        kw["A"] = matrix(A.copy())
        kw["b"] = matrix(b.copy())
    options = {
        "show_progress": False,
        "maxiters": config.max_iter,
        "abstol": config.abstol,
        "reltol": config.reltol,
        "feastol": config.solver_feastol,
    }
    try:
        res = solvers.sdp(c, Gs=Gs, hs=hs, options=options, **kw)
    except (ValueError, ArithmeticError) as exc:
        return _failed(p, STATUS_MAX_ITER, f"breakdown: {exc}")

    if res["x"] is None:
        return _failed(p, STATUS_INFEASIBLE if "infeasible" in res["status"] else STATUS_MAX_ITER, res["status"])
    y = np.array(res["x"]).ravel()
    audit = verify_feasibility(p, y)
    primal = float(p.objective @ y)
    dual = -float(res["dual objective"]) if res["dual objective"] is not None else np.inf
    gap = float(res["gap"]) if res["gap"] is not None else np.inf
    ok = (
        res["status"] in ("optimal", "unknown")
        and gap <= config.gap_tol
        and audit.feasible(config.feas_tol)
    )
    status = STATUS_OPTIMAL if ok else STATUS_MAX_ITER
    return SdpSolution(
        y, primal, dual, gap, audit.per_block_min_eig, audit.equality_residual, status, int(res["iterations"]), res["status"]
    )


def _failed(p: SdpProblem, status: str, detail: str) -> SdpSolution:
    y = np.zeros(p.var_count)
    audit = verify_feasibility(p, y)
    return SdpSolution(y, float(p.objective @ y), np.inf, np.inf, audit.per_block_min_eig, audit.equality_residual, status, 0, detail)


# Serialization ----------------------------------------------------------------------

FORMAT_TAG = "tnsprep-sdp/1"


def problem_to_dict(p: SdpProblem) -> dict:
    return {
        "format": FORMAT_TAG,
        "var_count": p.var_count,
        "labels": list(p.labels),
        "objective": p.objective.tolist(),
        "box": p.box,
        "equalities": {"A": p.A.tolist(), "b": p.b.tolist()},
        "blocks": [{"dim": blk.dim, "F0": blk.F0.tolist(), "F": blk.F.tolist()} for blk in p.blocks],
    }


def problem_from_dict(d: dict) -> SdpProblem:
    if d.get("format") != FORMAT_TAG:
        raise ValueError(f"unsupported problem format {d.get('format')!r}")
    V = int(d["var_count"])
    blocks = tuple(
        Block(np.asarray(bd["F0"], dtype=float).reshape(bd["dim"], bd["dim"]), np.asarray(bd["F"], dtype=float).reshape(V, bd["dim"], bd["dim"]))
        for bd in d["blocks"]
    )
    A = np.asarray(d["equalities"]["A"], dtype=float).reshape(-1, V)
    return SdpProblem(
        np.asarray(d["objective"], dtype=float), blocks, A, np.asarray(d["equalities"]["b"], dtype=float), d.get("box"), tuple(d.get("labels", ()))
    )


def dump_problem(p: SdpProblem, path: str | Path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(p), indent=1))


def load_problem(path: str | Path) -> SdpProblem:
    return problem_from_dict(json.loads(Path(path).read_text()))


def hermitian_to_real(M: np.ndarray) -> np.ndarray:
    """Real symmetric embedding ``[[Re, -Im], [Im, Re]]``; PSD iff ``M`` is PSD."""
    re, im = M.real, M.imag
    return np.block([[re, -im], [im, re]])
