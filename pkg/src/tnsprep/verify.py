"""Measurement-based verification: provers, estimators and accept/reject logic.

Rounds consist of a basis string over ``x, y, z`` and an outcome string over
``+1, -1``. Randomness is laid out row by row: round ``r`` of a stream
consumes a fixed-width block of uniforms at a position determined by
``(seed, stream, r)`` alone, so any chunking of the rounds reproduces the
same transcript.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import chi2_contingency

from .models import ModelSpec
from .observables import ObservableSpec, ProductStateError, observable_menu
from .operators import LocalMatrix, pauli_coefficient_tensor
from .state import STATEVECTOR_MAX_QUBITS, BudgetError, ParentHamiltonian, apply_local, build_parent_hamiltonian, build_state

BASES = "xyz"
_HAD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_SDG = np.diag([1, -1j])
# unitary mapping the +1 eigenvector of sigma_b to |0>
ROTATIONS = (_HAD, _HAD @ _SDG, np.eye(2, dtype=complex))
SIGN = np.array([1, -1], dtype=np.int8)

STREAM_SAMPLE = 0
STREAM_ENERGY = 1
STREAM_CHECKS = 2


class InsufficientData(ValueError):
    pass


# Provers ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Prover:
    """``honest``, ``depolarized`` (probability ``p`` per qubit), ``marginal`` or ``signalling``.

    The signalling prover forces ``s[cheat_site] = +1`` with probability
    ``strength`` whenever ``signal_site`` is measured in ``x``.
    """

    kind: str = "honest"
    p: float = 0.0
    strength: float = 0.5
    cheat_site: int = 0
    signal_site: int = 1

    def __post_init__(self):
        if self.kind not in ("honest", "depolarized", "marginal", "signalling"):
            raise ValueError(f"unknown prover kind {self.kind!r}")
        if not 0 <= self.p <= 1 or not 0 <= self.strength <= 1:
            raise ValueError("probabilities must lie in [0, 1]")

    @property
    def tag(self) -> str:
        if self.kind == "depolarized":
            return f"depolarized:{self.p:g}"
        if self.kind == "signalling":
            return f"signalling:{self.strength:g}"
        return self.kind


def parse_prover(text: str) -> Prover:
    kind, _, arg = text.partition(":")
    if kind == "depolarized":
        return Prover("depolarized", p=float(arg or 0.1))
    if kind == "signalling":
        return Prover("signalling", strength=float(arg or 0.5))
    return Prover(kind)


class _StateCache:
    """Statevector and derived per-basis data shared by every sampling call."""

    def __init__(self, model: ModelSpec):
        if model.N > STATEVECTOR_MAX_QUBITS:
            raise BudgetError(f"sampling needs a statevector; N={model.N} exceeds {STATEVECTOR_MAX_QUBITS}")
        self.N = model.N
        self.psi = build_state(model).amplitudes
        self._tables: dict[tuple[int, ...], list[np.ndarray]] = {}
        self._marg = None

    def rotated_probs(self, bases: Sequence[int], sites: Sequence[int] | None = None) -> np.ndarray:
        sites = range(self.N) if sites is None else sites
        v = self.psi
        for q, b in zip(sites, bases):
            v = apply_local(v, self.N, ROTATIONS[b], [q])
        return np.abs(v) ** 2

    def prefix_tables(self, bases: tuple[int, ...]) -> list[np.ndarray]:
        """``tables[n][idx]`` = probability of the first ``n`` bits equalling ``idx``."""
        if bases not in self._tables:
            p = self.rotated_probs(bases)
            self._tables[bases] = [p.reshape(2**n, -1).sum(axis=1) for n in range(self.N + 1)]
        return self._tables[bases]

    def site_marginals(self) -> np.ndarray:
        """``m[j, b]`` = probability of outcome ``+1`` at site ``j`` in basis ``b``."""
        if self._marg is None:
            m = np.zeros((self.N, 3))
            for j in range(self.N):
                for b in range(3):
                    p = self.rotated_probs([b], [j]).reshape((2,) * self.N)
                    m[j, b] = float(np.take(p, 0, axis=j).sum())
            self._marg = m
        return self._marg


# Randomness layout ------------------------------------------------------------------


def _philox_key(seed: int, stream: int) -> int:
    words = np.random.SeedSequence([int(seed) & (2**64 - 1), int(stream)]).generate_state(2, np.uint64)
    return int(words[0]) | (int(words[1]) << 64)


def uniform_rows(seed: int, stream: int, start: int, count: int, width: int) -> np.ndarray:
    """Uniforms for rounds ``start .. start+count-1``; row ``r`` depends only on ``(seed, stream, r)``."""
    padded = 4 * math.ceil(width / 4)
    bg = np.random.Philox(key=_philox_key(seed, stream))
    # one counter step yields four 64-bit words, i.e. four doubles
    bg.advance(start * padded // 4)
    return np.random.Generator(bg).random((count, padded))[:, :width]


# Samples ----------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasurementRound:
    basis: str
    outcome: str


@dataclass(frozen=True)
class SampleSet:
    bases: np.ndarray  # (count, N) in {0, 1, 2}
    outcomes: np.ndarray  # (count, N) in {+1, -1}
    seed: int
    prover_tag: str
    basis_distribution: str
    stream: int = STREAM_SAMPLE
    start: int = 0

    def __len__(self) -> int:
        return int(self.bases.shape[0])

    @property
    def N(self) -> int:
        return int(self.bases.shape[1])

    def round(self, r: int) -> MeasurementRound:
        return MeasurementRound(
            "".join(BASES[b] for b in self.bases[r]), "".join("+" if s > 0 else "-" for s in self.outcomes[r])
        )

    @property
    def rounds(self) -> list[MeasurementRound]:
        return [self.round(r) for r in range(len(self))]

    def slice(self, lo: int, hi: int) -> SampleSet:
        return SampleSet(self.bases[lo:hi], self.outcomes[lo:hi], self.seed, self.prover_tag, self.basis_distribution, self.stream, self.start + lo)

    def transcript(self, extra: dict | None = None) -> str:
        header = (extra or {}) | {
            "format": "tnsprep-transcript/1",
            "seed": self.seed,
            "stream": self.stream,
            "start": self.start,
            "prover": self.prover_tag,
            "basis_distribution": self.basis_distribution,
            "rounds": len(self),
            "qubits": self.N,
        }
        letters = np.array(list(BASES))[self.bases]
        signs = np.where(self.outcomes > 0, "+", "-")
        lines = ["".join(b) + " " + "".join(s) for b, s in zip(letters, signs)]
        return json.dumps(header, sort_keys=True) + "\n" + "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_transcript(cls, text: str) -> SampleSet:
        head, *body = text.splitlines()
        meta = json.loads(head)
        bases = np.array([[BASES.index(c) for c in line.split()[0]] for line in body], dtype=np.int8).reshape(-1, meta["qubits"])
        outs = np.array([[1 if c == "+" else -1 for c in line.split()[1]] for line in body], dtype=np.int8).reshape(-1, meta["qubits"])
        return cls(bases, outs, meta["seed"], meta["prover"], meta["basis_distribution"], meta["stream"], meta["start"])


def _parse_bases(bases, count: int, N: int) -> np.ndarray | None:
    if isinstance(bases, str) and bases == "uniform-iid":
        return None
    if isinstance(bases, str):
        rows = [bases]
    else:
        rows = list(bases)
    arr = np.array([[BASES.index(c) for c in row.lower()] for row in rows], dtype=np.int8)
    if arr.shape[1] != N:
        raise ValueError(f"basis strings must have length {N}")
    reps = math.ceil(count / arr.shape[0])
    return np.tile(arr, (reps, 1))[:count]


def sample(
    model: ModelSpec,
    prover: Prover,
    bases: str | Sequence[str] = "uniform-iid",
    count: int = 1000,
    seed: int = 0,
    stream: int = STREAM_SAMPLE,
    start: int = 0,
    cache: _StateCache | None = None,
) -> SampleSet:
    """Draw ``count`` rounds from ``prover``.

    ``bases`` is ``"uniform-iid"`` or a fixed list of basis strings, cycled.
    Honest outcomes are drawn qubit by qubit from the conditional
    probabilities of the rotated state (chain rule).
    """
    N = model.N
    cache = cache or _StateCache(model)
    U = uniform_rows(seed, stream, start, count, 3 * N)
    fixed = _parse_bases(bases, count, N)
    B = np.minimum((U[:, :N] * 3).astype(np.int8), 2) if fixed is None else fixed
    u_out, u_aux = U[:, N : 2 * N], U[:, 2 * N :]
    bits = np.zeros((count, N), dtype=np.int8)

    if prover.kind == "marginal":
        marg = cache.site_marginals()
        p_plus = marg[np.arange(N)[None, :], B]
        bits = (u_out >= p_plus).astype(np.int8)
    else:
        keys = B.astype(np.int64) @ (3 ** np.arange(N - 1, -1, -1))
        for key in np.unique(keys):
            rows = np.flatnonzero(keys == key)
            tables = cache.prefix_tables(tuple(int(b) for b in B[rows[0]]))
            idx = np.zeros(rows.size, dtype=np.int64)
            for n in range(N):
                parent = tables[n][idx]
                p0 = np.divide(tables[n + 1][2 * idx], parent, out=np.zeros_like(parent), where=parent > 0)
                bit = (u_out[rows, n] >= p0).astype(np.int64)
                bits[rows, n] = bit
                idx = 2 * idx + bit
    outcomes = SIGN[bits]
    if prover.kind == "depolarized":
        flips = u_aux < prover.p / 2
        outcomes = np.where(flips, -outcomes, outcomes).astype(np.int8)
    elif prover.kind == "signalling":
        force = (B[:, prover.signal_site] == 0) & (u_aux[:, prover.cheat_site] < prover.strength)
        outcomes[force, prover.cheat_site] = 1
    dist = "uniform-iid" if fixed is None else "fixed-list"
    return SampleSet(B, outcomes, int(seed), prover.tag, dist, stream, start)


# Estimators -------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorReport:
    target: str
    estimate: float
    std_error: float
    rounds_used: int
    conditioning: str
    expected: float | None = None
    variance: float | None = None

    @property
    def deviation_in_se(self) -> float:
        if self.expected is None:
            return math.nan
        diff = abs(self.estimate - self.expected)
        if self.std_error == 0:
            return 0.0 if diff <= 1e-12 else math.inf
        return diff / self.std_error

    def consistent(self, k: float = 5.0) -> bool:
        return self.deviation_in_se <= k


def _conditioning_mask(samples: SampleSet, support: Sequence[int], conditioning: str) -> np.ndarray:
    if conditioning == "any":
        return np.ones(len(samples), dtype=bool)
    kind, _, b = conditioning.partition(":")
    if kind != "restrict" or b not in BASES:
        raise ValueError(f"unknown conditioning {conditioning!r}")
    off = [q for q in range(samples.N) if q not in set(support)]
    return np.all(samples.bases[:, off] == BASES.index(b), axis=1) if off else np.ones(len(samples), dtype=bool)


def estimate_observable(samples: SampleSet, spec: ObservableSpec, conditioning: str = "any") -> EstimatorReport:
    """``Qbar = sum_gamma o(gamma) sbar(gamma)``.

    The standard error treats the rounds as independent draws of the per-round
    contribution ``v_r = n * sum_{gamma: r in R(gamma)} o(gamma) prod s / |R(gamma)|``.
    """
    sup = list(spec.expansion.support)
    pool = _conditioning_mask(samples, sup, conditioning)
    n = int(pool.sum())
    const = 0.0
    w = np.zeros(len(samples))
    for label, coef in spec.expansion.terms.items():
        sites = [q for q, ch in zip(sup, label) if ch != "I"]
        if not sites:
            const += coef
            continue
        letters = np.array([BASES.index(ch.lower()) for ch in label if ch != "I"])
        match = pool & np.all(samples.bases[:, sites] == letters[None, :], axis=1)
        size = int(match.sum())
        if size == 0:
            raise InsufficientData(f"no rounds measure {label} on {sites}")
        prod = np.prod(samples.outcomes[match][:, sites], axis=1, dtype=np.int64)
        w[match] += coef * prod / size
    if n == 0:
        if spec.expansion.terms.keys() - {"I" * len(sup)}:
            raise InsufficientData("no rounds left after conditioning")
    vals = n * w[pool]
    est = const + float(w.sum())
    se = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EstimatorReport(spec.describe(), est, se, n, conditioning, spec.expected)


def hhat_table(op: LocalMatrix) -> np.ndarray:
    """Single-round estimator values ``(3^k, 2^k)`` indexed by basis and outcome patterns.

    For bases ``b`` and outcomes ``s`` on the support the value is
    ``sum_J 3^|J| o(b_J) prod_{j in J} s_j``.
    """
    k = op.n_qubits
    T = pauli_coefficient_tensor(op.matrix).real
    V = np.zeros((3, 2, 4))
    V[:, :, 0] = 1.0
    for b in range(3):
        V[b, :, b + 1] = 3.0 * SIGN
    t = T
    for _ in range(k):
        t = np.tensordot(t, V, axes=([0], [2]))
    # axes are now (b1, s1, b2, s2, ...)
    order = list(range(0, 2 * k, 2)) + list(range(1, 2 * k, 2))
    return np.transpose(t, order).reshape(3**k, 2**k) if k else t.reshape(1, 1)


def _pattern_index(samples: SampleSet, sites: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    k = len(sites)
    b = samples.bases[:, sites].astype(np.int64) @ (3 ** np.arange(k - 1, -1, -1))
    bits = (samples.outcomes[:, sites] < 0).astype(np.int64) @ (2 ** np.arange(k - 1, -1, -1))
    return b, bits


@dataclass(frozen=True)
class EnergyReport:
    terms: tuple[EstimatorReport, ...]
    total: float
    total_se: float
    localities: tuple[int, ...]
    method: str

    @property
    def variances(self) -> np.ndarray:
        return np.array([t.variance for t in self.terms])

    @property
    def variance_bounds(self) -> np.ndarray:
        return 2.0 ** (5 * np.array(self.localities))

    @property
    def variance_bound_ok(self) -> bool:
        return bool(np.all(self.variances <= self.variance_bounds))


def _energy_report(per_term: list[tuple[float, float, int]], ph: ParentHamiltonian, method: str) -> EnergyReport:
    reps = []
    for term, (mean, var, L) in zip(ph.terms, per_term):
        se = math.sqrt(var / L) if L > 1 else math.inf
        reps.append(EstimatorReport(f"h_{term.site}", mean, se, L, "disjoint-batch", 0.0, var))
    total = sum(r.estimate for r in reps)
    total_se = math.sqrt(sum(r.std_error**2 for r in reps))
    return EnergyReport(tuple(reps), total, total_se, tuple(len(t.h.support) for t in ph.terms), method)


def _batch_bounds(n: int, M: int, batch_sizes: Sequence[int] | None) -> list[tuple[int, int]]:
    sizes = list(batch_sizes) if batch_sizes is not None else [n // M] * M
    if len(sizes) != M or sum(sizes) > n or min(sizes, default=1) < 2:
        raise InsufficientData(f"cannot split {n} rounds into {M} batches of sizes {sizes}")
    edges = np.concatenate([[0], np.cumsum(sizes)])
    return [(int(edges[m]), int(edges[m + 1])) for m in range(M)]


def estimate_energy_random_basis(
    samples: SampleSet, ph: ParentHamiltonian, batch_sizes: Sequence[int] | None = None
) -> EnergyReport:
    """Per-term single-round estimator averaged over disjoint batches of rounds."""
    if samples.basis_distribution != "uniform-iid":
        raise ValueError("the random-basis energy estimator needs uniform-iid bases")
    stats = []
    for term, (lo, hi) in zip(ph.terms, _batch_bounds(len(samples), len(ph.terms), batch_sizes)):
        sub = samples.slice(lo, hi)
        sites = list(term.h.support)
        if sites:
            b, s = _pattern_index(sub, sites)
            vals = hhat_table(term.h)[b, s]
        else:
            vals = np.full(hi - lo, float(term.h.matrix[0, 0].real))
        stats.append((float(vals.mean()), float(vals.var(ddof=1)), hi - lo))
    return _energy_report(stats, ph, "explicit")


def pattern_probabilities(cache: _StateCache, prover: Prover, sites: Sequence[int]) -> np.ndarray:
    """Exact ``P(b, s)`` over basis and outcome patterns on ``sites`` for uniform-iid bases."""
    k = len(sites)
    N = cache.N
    out = np.zeros((3**k, 2**k))
    marg = cache.site_marginals() if prover.kind == "marginal" else None
    for bi, pattern in enumerate(np.ndindex(*(3,) * k)):
        if prover.kind == "marginal":
            pj = [np.array([marg[q, b], 1 - marg[q, b]]) for q, b in zip(sites, pattern)]
            P = pj[0]
            for x in pj[1:]:
                P = np.multiply.outer(P, x)
            P = np.asarray(P).reshape((2,) * k)
        else:
            full = cache.rotated_probs(pattern, sites).reshape((2,) * N)
            others = tuple(q for q in range(N) if q not in set(sites))
            P = full.sum(axis=others) if others else full
        if prover.kind == "depolarized":
            f = prover.p / 2
            for ax in range(k):
                P = (1 - f) * P + f * np.flip(P, axis=ax)
        elif prover.kind == "signalling" and prover.cheat_site in sites:
            ax = list(sites).index(prover.cheat_site)
            if prover.signal_site in sites:
                weight = 1.0 if pattern[list(sites).index(prover.signal_site)] == 0 else 0.0
            else:
                weight = 1.0 / 3.0
            q = prover.strength * weight
            minus = np.take(P, 1, axis=ax)
            P = P.copy()
            idx_plus = [slice(None)] * k
            idx_minus = [slice(None)] * k
            idx_plus[ax], idx_minus[ax] = 0, 1
            P[tuple(idx_plus)] += q * minus
            P[tuple(idx_minus)] -= q * minus
        out[bi] = np.asarray(P).reshape(-1) / 3**k
    return out


def energy_from_counts(
    model: ModelSpec,
    ph: ParentHamiltonian,
    prover: Prover,
    rounds_per_term: int | Sequence[int],
    seed: int = 0,
    cache: _StateCache | None = None,
) -> tuple[EnergyReport, list[np.ndarray]]:
    """Same estimator as :func:`estimate_energy_random_basis`, drawing the
    per-term pattern counts from their exact multinomial law.

    The estimator depends on a round only through its basis and outcome
    pattern on the term's support, and rounds are independent, so the counts
    are multinomial; this makes plan-sized batches (``1e8`` rounds) cheap.
    """
    cache = cache or _StateCache(model)
    Ls = [int(rounds_per_term)] * len(ph.terms) if np.isscalar(rounds_per_term) else [int(x) for x in rounds_per_term]
    stats, counts_all = [], []
    for n, (term, L) in enumerate(zip(ph.terms, Ls)):
        rng = np.random.Generator(np.random.Philox(key=_philox_key(seed, 1000 + n)))
        sites = list(term.h.support)
        probs = pattern_probabilities(cache, prover, sites).ravel()
        table = hhat_table(term.h).ravel()
        counts = rng.multinomial(L, probs / probs.sum())
        mean = float(counts @ table) / L
        second = float(counts @ table**2) / L
        var = max(second - mean**2, 0.0) * L / (L - 1)
        stats.append((mean, var, L))
        counts_all.append(counts)
    return _energy_report(stats, ph, "pattern-counts"), counts_all


def exact_hhat_moments(model: ModelSpec, ph: ParentHamiltonian, prover: Prover = Prover()) -> list[tuple[float, float]]:
    """Exact mean and variance of the single-round estimator for every term."""
    cache = _StateCache(model)
    out = []
    for term in ph.terms:
        probs = pattern_probabilities(cache, prover, list(term.h.support)).ravel()
        table = hhat_table(term.h).ravel()
        mean = float(probs @ table)
        out.append((mean, float(probs @ table**2) - mean**2))
    return out


# Fidelity bound and sample planning -------------------------------------------------


def fidelity_lower_bound(energy: float, energy_error: float, delta: float) -> tuple[float, float]:
    """``1 - E/delta`` and the conservative ``1 - (E + err)/delta``, both capped at one."""
    if delta <= 0:
        raise ValueError("gap lower bound must be positive")
    return min(1.0, 1 - energy / delta), min(1.0, 1 - (energy + energy_error) / delta)


def confidence_z(alpha: float) -> float:
    """Gaussian-tail multiplier with ``exp(-z^2/2) = alpha``."""
    return math.sqrt(2 * math.log(1 / alpha))


@dataclass(frozen=True)
class SamplePlan:
    epsilon: float
    alpha_conf: float
    locality: int
    delta: float
    n_terms: int
    per_term: int
    total: int
    sigma_assumed: float
    total_sigma_estimate: int
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "alpha": self.alpha_conf,
            "locality": self.locality,
            "delta": self.delta,
            "n_terms": self.n_terms,
            "per_term": {"value": self.per_term, "source": "2^(5|lambda|+1)/(delta^2 eps^2) * ln(1/alpha)/N"},
            "total": {"value": self.total, "source": "N * per_term"},
            "total_sigma_estimate": {"value": self.total_sigma_estimate, "source": "sigma^2 N^2 / delta^2", "sigma": self.sigma_assumed},
            "notes": list(self.notes),
        }


def plan_samples(
    locality: int, delta: float, epsilon: float, alpha: float, n_terms: int, sigma: float | None = None
) -> SamplePlan:
    if locality < 0 or delta <= 0 or epsilon <= 0 or n_terms < 1:
        raise ValueError("locality >= 0, delta > 0, epsilon > 0 and n_terms >= 1 are required")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    per_term = math.ceil(2 ** (5 * locality + 1) / (delta**2 * epsilon**2) * math.log(1 / alpha) / n_terms)
    sigma2 = float(2 ** (5 * locality)) if sigma is None else float(sigma) ** 2
    notes = ("ln(1/alpha^(1/N)) shrinks with N; the confidence level is checked empirically",)
    return SamplePlan(
        epsilon, alpha, locality, delta, n_terms, per_term, per_term * n_terms, math.sqrt(sigma2),
        math.ceil(sigma2 * n_terms**2 / delta**2), notes,
    )


# Consistency ------------------------------------------------------------------------


@dataclass(frozen=True)
class ConsistencyReport:
    i: int
    j: int
    p_values: dict[str, float]
    p_min: float
    tests: int


def consistency_check(samples: SampleSet, i: int, j: int, min_count: int = 20) -> ConsistencyReport:
    """Does the outcome at ``j`` depend on the basis chosen at ``i``?

    For every basis used at ``j``, a chi-square homogeneity test compares the
    outcome counts at ``j`` across the basis values at ``i``.
    """
    if i == j:
        raise ValueError("sites must differ")
    pvals: dict[str, float] = {}
    for bj in range(3):
        rows = []
        for bi in range(3):
            sel = (samples.bases[:, j] == bj) & (samples.bases[:, i] == bi)
            if sel.sum() >= min_count:
                s = samples.outcomes[sel, j]
                rows.append([int((s > 0).sum()), int((s < 0).sum())])
        if len(rows) < 2:
            continue
        table = np.array(rows)
        if np.any(table.sum(axis=0) == 0):
            pvals[BASES[bj]] = 1.0
            continue
        pvals[BASES[bj]] = float(chi2_contingency(table, correction=False).pvalue)
    if not pvals:
        raise InsufficientData(f"need at least two basis values at site {i} with {min_count} rounds each")
    return ConsistencyReport(i, j, pvals, min(pvals.values()), len(pvals))


def consistency_suite(samples: SampleSet, pairs: Iterable[tuple[int, int]], significance: float = 0.01) -> dict:
    """Bonferroni-corrected family of consistency checks."""
    reports = [consistency_check(samples, i, j) for i, j in pairs]
    m = sum(r.tests for r in reports)
    p_adj = min(1.0, min((r.p_min for r in reports), default=1.0) * m)
    return {"reports": reports, "tests": m, "p_adjusted": p_adj, "passed": p_adj >= significance, "significance": significance}


# Orchestration ----------------------------------------------------------------------


@dataclass(frozen=True)
class VerificationReport:
    verdict: str
    reasons: tuple[str, ...]
    plan: SamplePlan
    energy: EnergyReport
    fidelity: float
    fidelity_conservative: float
    z: float
    observables: tuple[EstimatorReport, ...]
    consistency: dict
    seed: int
    prover: str
    transcript: str = field(default="", repr=False)

    @property
    def accepted(self) -> bool:
        return self.verdict == "ACCEPT"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "reasons": list(self.reasons),
            "seed": self.seed,
            "prover": self.prover,
            "plan": self.plan.to_dict(),
            "energy": {
                "method": self.energy.method,
                "total": self.energy.total,
                "std_error": self.energy.total_se,
                "terms": [vars(t) for t in self.energy.terms],
                "variance_bound_ok": self.energy.variance_bound_ok,
            },
            "fidelity_lower_bound": self.fidelity,
            "fidelity_lower_bound_conservative": self.fidelity_conservative,
            "z": self.z,
            "observables": [vars(o) | {"deviation_in_se": o.deviation_in_se} for o in self.observables],
            "consistency": {
                "p_adjusted": self.consistency["p_adjusted"],
                "tests": self.consistency["tests"],
                "significance": self.consistency["significance"],
                "passed": self.consistency["passed"],
                "pairs": [{"i": r.i, "j": r.j, "p_values": r.p_values} for r in self.consistency["reports"]],
            },
        }


EXPLICIT_ENERGY_LIMIT = 200_000


def run_verification(
    model: ModelSpec,
    prover: Prover,
    delta: float,
    epsilon: float = 0.1,
    alpha: float = 0.05,
    seed: int = 0,
    check_rounds: int = 20_000,
    menu: Sequence[ObservableSpec] | None = None,
    rounds_per_term: int | None = None,
    energy_method: str = "auto",
    significance: float = 0.01,
    se_multiplier: float = 5.0,
    ph: ParentHamiltonian | None = None,
) -> VerificationReport:
    """ACCEPT iff the conservative fidelity bound reaches ``1 - epsilon``, every
    observable estimate sits within ``se_multiplier`` standard errors of its
    known value and the consistency family passes."""
    ph = ph or build_parent_hamiltonian(model)
    cache = _StateCache(model)
    locality = max(len(t.h.support) for t in ph.terms)
    plan = plan_samples(locality, delta, epsilon, alpha, len(ph.terms))
    L = rounds_per_term or plan.per_term
    M = len(ph.terms)
    if energy_method == "explicit" or (energy_method == "auto" and L * M <= EXPLICIT_ENERGY_LIMIT):
        energy_samples = sample(model, prover, "uniform-iid", L * M, seed, STREAM_ENERGY, cache=cache)
        energy = estimate_energy_random_basis(energy_samples, ph)
    else:
        energy, _ = energy_from_counts(model, ph, prover, L, seed, cache)
    z = confidence_z(alpha)
    F, F_cons = fidelity_lower_bound(energy.total, z * energy.total_se, delta)

    checks = sample(model, prover, "uniform-iid", check_rounds, seed, STREAM_CHECKS, cache=cache)
    if menu is None:
        try:
            menu = observable_menu(model)
        except ProductStateError:
            menu = []
    obs = tuple(estimate_observable(checks, spec) for spec in menu)
    pairs = [(i, j) for i, j in model.graph.sorted_edges()] + [(j, i) for i, j in model.graph.sorted_edges()]
    cons = consistency_suite(checks, pairs, significance)

    reasons = []
    if F_cons < 1 - epsilon:
        reasons.append(f"fidelity bound {F_cons:.4f} < {1 - epsilon:.4f}")
    for o in obs:
        if not o.consistent(se_multiplier):
            reasons.append(f"observable off by {o.deviation_in_se:.1f} SE: {o.target}")
    if not cons["passed"]:
        reasons.append(f"consistency failed (adjusted p = {cons['p_adjusted']:.3e})")
    verdict = "REJECT" if reasons else "ACCEPT"
    return VerificationReport(verdict, tuple(reasons), plan, energy, F, F_cons, z, obs, cons, int(seed), prover.tag, checks.transcript())
