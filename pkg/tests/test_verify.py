import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tnsprep.models import fixture
from tnsprep.observables import build_Z_pm, observable_menu
from tnsprep.operators import LocalOperator, PAULI, kron_all, pauli_string_operator
from tnsprep.oracle import noisy_energy
from tnsprep.state import build_parent_hamiltonian, build_state
from tnsprep.verify import (
    InsufficientData,
    Prover,
    SampleSet,
    _StateCache,
    confidence_z,
    consistency_check,
    consistency_suite,
    energy_from_counts,
    estimate_energy_random_basis,
    estimate_observable,
    exact_hhat_moments,
    fidelity_lower_bound,
    hhat_table,
    parse_prover,
    pattern_probabilities,
    plan_samples,
    run_verification,
    sample,
    uniform_rows,
)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 50), st.integers(1, 40), st.integers(1, 9))
def test_uniform_rows_chunking(seed, start, count, width):
    whole = uniform_rows(seed, 0, start, count, width)
    cut = count // 2
    parts = np.vstack([uniform_rows(seed, 0, start, cut, width), uniform_rows(seed, 0, start + cut, count - cut, width)])
    assert np.array_equal(whole, parts)


def test_streams_are_independent():
    assert not np.array_equal(uniform_rows(1, 0, 0, 5, 4), uniform_rows(1, 1, 0, 5, 4))


def test_sample_is_deterministic_and_chunkable(chain_z):
    a = sample(chain_z, Prover(), count=300, seed=11)
    b = sample(chain_z, Prover(), count=200, seed=11, start=100)
    assert np.array_equal(a.bases[100:], b.bases) and np.array_equal(a.outcomes[100:], b.outcomes)
    assert a.transcript() == sample(chain_z, Prover(), count=300, seed=11).transcript()


def test_transcript_roundtrip(chain_z):
    s = sample(chain_z, Prover(), count=50, seed=2)
    back = SampleSet.from_transcript(s.transcript())
    assert np.array_equal(back.bases, s.bases) and np.array_equal(back.outcomes, s.outcomes)
    r = s.round(0)
    assert len(r.basis) == 4 and set(r.outcome) <= {"+", "-"}


def test_fixed_basis_statistics_match_born_rule():
    m = fixture("FX-CHAIN4", 0.3)
    s = sample(m, Prover(), bases=["xzzx"], count=40_000, seed=3)
    assert s.basis_distribution == "fixed-list" and np.all(s.bases == [0, 2, 2, 0])
    cache = _StateCache(m)
    p = cache.rotated_probs([0, 2, 2, 0]).reshape(2, 2, 2, 2)
    bits = (s.outcomes < 0).astype(int)
    emp = np.zeros((2, 2, 2, 2))
    np.add.at(emp, tuple(bits.T), 1)
    emp /= len(s)
    assert np.max(np.abs(emp - p)) < 0.015


def test_pattern_probabilities_normalized(chain_z):
    cache = _StateCache(chain_z)
    for prover in (Prover(), Prover("depolarized", p=0.3), Prover("marginal"), Prover("signalling")):
        P = pattern_probabilities(cache, prover, [0, 1, 2])
        assert P.sum() == pytest.approx(1.0)
        assert np.allclose(P.reshape(27, 8).sum(axis=1), 1 / 27)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10_000))
def test_hhat_is_unbiased_for_any_state(k, seed):
    # E[hhat] = <psi|h|psi> when bases are uniform and outcomes follow the Born rule
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(2**k, 2**k)) + 1j * rng.normal(size=(2**k, 2**k))
    op = LocalOperator(range(k), a + a.conj().T, minimize=False)
    psi = rng.normal(size=2**k) + 1j * rng.normal(size=2**k)
    psi /= np.linalg.norm(psi)
    from tnsprep.verify import ROTATIONS

    table = hhat_table(op)
    mean = 0.0
    for bi, pattern in enumerate(np.ndindex(*(3,) * k)):
        U = kron_all([ROTATIONS[b] for b in pattern])
        mean += np.abs(U @ psi) ** 2 @ table[bi] / 3**k
    assert mean == pytest.approx(np.vdot(psi, op.matrix @ psi).real, abs=1e-10)


def test_hhat_single_pauli():
    t = hhat_table(pauli_string_operator([0], "X"))
    assert np.allclose(t, [[3, -3], [0, 0], [0, 0]])


def test_depolarized_energy_matches_density_matrix(chain_z):
    ph = build_parent_hamiltonian(chain_z)
    for p in (0.0, 0.1, 0.2):
        mom = exact_hhat_moments(chain_z, ph, Prover("depolarized", p=p))
        assert sum(m for m, _ in mom) == pytest.approx(noisy_energy(chain_z, p, ph), abs=1e-12)
        assert all(v <= 2.0 ** (5 * len(t.h.support)) for (_, v), t in zip(mom, ph.terms))


def test_explicit_and_count_estimators_agree(chain_z):
    ph = build_parent_hamiltonian(chain_z)
    prover = Prover("depolarized", p=0.2)
    s = sample(chain_z, prover, count=80_000, seed=5)
    e1 = estimate_energy_random_basis(s, ph)
    e2, counts = energy_from_counts(chain_z, ph, prover, 20_000, seed=5)
    truth = noisy_energy(chain_z, 0.2, ph)
    assert abs(e1.total - truth) < 5 * e1.total_se
    assert abs(e2.total - truth) < 5 * e2.total_se
    assert [c.sum() for c in counts] == [20_000] * 4
    assert e1.variance_bound_ok


def test_energy_estimator_needs_uniform_bases(chain_z):
    s = sample(chain_z, Prover(), bases="xxxx", count=100)
    with pytest.raises(ValueError):
        estimate_energy_random_basis(s, build_parent_hamiltonian(chain_z))
    with pytest.raises(InsufficientData):
        estimate_energy_random_basis(sample(chain_z, Prover(), count=6), build_parent_hamiltonian(chain_z))


def test_observable_estimates_within_se(chain_z):
    s = sample(chain_z, Prover(), count=10_000, seed=9)
    for spec in observable_menu(chain_z):
        rep = estimate_observable(s, spec)
        assert rep.consistent(5.0), (spec.describe(), rep.estimate, rep.std_error)


def test_observable_conditioning(chain_z):
    s = sample(chain_z, Prover(), count=20_000, seed=4)
    spec = build_Z_pm(chain_z, [0])[0]
    rep = estimate_observable(s, spec, conditioning="restrict:z")
    assert rep.rounds_used < len(s)
    assert rep.consistent()
    with pytest.raises(ValueError):
        estimate_observable(s, spec, conditioning="nonsense")


def test_marginal_cheat_fails_two_site_zplus(chain_z):
    s = sample(chain_z, Prover("marginal"), count=20_000, seed=1)
    spec = build_Z_pm(chain_z, [0, 1])[0]
    assert not estimate_observable(s, spec).consistent()


def test_consistency_check():
    m = fixture("FX-CHAIN4-Z", 0.1)
    honest = sample(m, Prover(), count=20_000, seed=8)
    assert consistency_suite(honest, [(1, 0), (0, 1)])["passed"]
    cheat = sample(m, Prover("signalling"), count=20_000, seed=8)
    rep = consistency_check(cheat, 1, 0)
    assert rep.p_min < 1e-4
    with pytest.raises(InsufficientData):
        consistency_check(sample(m, Prover(), bases="xxxx", count=100), 1, 0)


def test_plan_samples_formula():
    plan = plan_samples(3, 0.5, 0.1, 0.05, 4)
    assert plan.per_term == math.ceil(2**16 / (0.25 * 0.01) * math.log(20) / 4)
    assert plan.total == 4 * plan.per_term
    assert plan.total_sigma_estimate == math.ceil(2**15 * 16 / 0.25)
    with pytest.raises(ValueError):
        plan_samples(3, 0.0, 0.1, 0.05, 4)


def test_fidelity_bound():
    assert fidelity_lower_bound(0.0, 0.0, 0.5) == (1.0, 1.0)
    F, Fc = fidelity_lower_bound(0.05, 0.01, 0.5)
    assert F == pytest.approx(0.9) and Fc == pytest.approx(0.88)
    assert confidence_z(math.exp(-2)) == pytest.approx(2.0)


def test_parse_prover():
    assert parse_prover("depolarized:0.2") == Prover("depolarized", p=0.2)
    assert parse_prover("signalling:0.3").strength == 0.3
    with pytest.raises(ValueError):
        parse_prover("psychic")


def test_run_verification_report(chain_z):
    rep = run_verification(chain_z, Prover(), delta=0.5, seed=3, check_rounds=5000)
    assert rep.verdict == "ACCEPT", rep.reasons
    d = rep.to_dict()
    assert d["plan"]["per_term"]["source"].startswith("2^(5|lambda|+1)")
    assert d["energy"]["method"] == "pattern-counts"
    rej = run_verification(chain_z, Prover("depolarized", p=0.2), delta=0.5, seed=3, check_rounds=5000)
    assert rej.verdict == "REJECT"
