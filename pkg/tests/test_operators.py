import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tnsprep import lattice
from tnsprep.operators import (
    PAULI,
    CommutingFamily,
    LocalMatrix,
    LocalOperator,
    conjugated_family,
    embed,
    embed_matrix,
    herm_exp,
    ising_edge,
    kron_all,
    pauli_decompose,
    pauli_string_operator,
    projector11,
    toric_type_unitaries,
    validate_family,
)


def random_hermitian(rng, k):
    a = rng.normal(size=(2**k, 2**k)) + 1j * rng.normal(size=(2**k, 2**k))
    return (a + a.conj().T) / 2


def test_embed_ordering():
    # lowest vertex id is the most significant qubit
    m = embed_matrix(PAULI["X"], [1], [0, 1])
    assert np.allclose(m, np.kron(np.eye(2), PAULI["X"]))
    m = embed_matrix(np.kron(PAULI["X"], PAULI["Z"]), [2, 0], [0, 1, 2])
    assert np.allclose(m, kron_all([PAULI["Z"], np.eye(2), PAULI["X"]]))


def test_support_minimization():
    op = LocalOperator([0, 1, 2], kron_all([np.eye(2), PAULI["Z"], np.eye(2)]))
    assert list(op.support) == [1]
    assert np.allclose(op.matrix, PAULI["Z"])
    full = LocalOperator([0, 1], np.eye(4), minimize=False)
    assert list(full.support) == [0, 1]


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        LocalOperator([0], np.array([[0, 1], [0, 0]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10_000))
def test_pauli_roundtrip(k, seed):
    rng = np.random.default_rng(seed)
    op = LocalOperator(range(k), random_hermitian(rng, k), minimize=False)
    exp = pauli_decompose(op)
    assert np.allclose(exp.to_matrix(), op.matrix)
    assert all(isinstance(v, float) for v in exp.terms.values())


def test_pauli_labels_follow_support():
    op = pauli_string_operator([3, 1], "XZ")
    exp = pauli_decompose(op)
    assert list(exp.support) == [1, 3]
    assert exp.terms == {"ZX": 1.0}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(-2, 2))
def test_herm_exp_group_law(seed, s):
    rng = np.random.default_rng(seed)
    op = LocalOperator([0, 1], random_hermitian(rng, 2), minimize=False)
    a = herm_exp(op, 1j * s)
    b = herm_exp(op, -1j * s)
    assert np.allclose(a.matrix @ b.matrix, np.eye(4))
    assert np.allclose(a.matrix @ a.matrix.conj().T, np.eye(4))


def test_local_matrix_products():
    a = LocalMatrix([0], PAULI["X"])
    b = LocalMatrix([1], PAULI["Z"])
    prod = a @ b
    assert list(prod.support) == [0, 1]
    assert np.allclose(prod.matrix, np.kron(PAULI["X"], PAULI["Z"]))
    assert np.allclose(embed(a, [0, 2]).matrix, np.kron(PAULI["X"], np.eye(2)))


def test_family_validation_reports_all_violations():
    g = lattice.path(3)
    good = CommutingFamily([ising_edge(0, 1), ising_edge(1, 2)], 1)
    assert validate_family(good, g).ok
    bad_term = LocalOperator([1, 2], (np.eye(4) + np.kron(PAULI["X"], PAULI["X"])) / 2)
    bad = CommutingFamily([ising_edge(0, 1), bad_term, LocalOperator([0], 2 * np.eye(2) - PAULI["Z"])], 0)
    kinds = validate_family(bad, g).kinds()
    assert {"non-commuting", "norm-exceeds-1", "radius-exceeds-declared"} <= kinds


def test_conjugated_family_commutes():
    g = lattice.path(4)
    cz = [herm_exp(projector11(a, b), 1j * np.pi) for a, b in g.sorted_edges()]
    seeds = [LocalOperator([j], (np.eye(2) + PAULI["X"]) / 2) for j in range(4)]
    fam = conjugated_family(g, cz, seeds)
    assert validate_family(fam, g).ok
    # cluster stabilizer projector (1 + Z X Z)/2 on the middle site
    assert np.allclose(fam[1].matrix, (np.eye(8) + kron_all([PAULI["Z"], PAULI["X"], PAULI["Z"]])) / 2)


def test_conjugated_family_rejects_overlapping_seeds():
    g = lattice.path(2)
    with pytest.raises(ValueError):
        conjugated_family(g, [], [ising_edge(0, 1), LocalOperator([1], np.eye(2) / 2 + PAULI["Z"] / 2)])


def test_toric_unitaries_commute():
    g = lattice.grid(3, 3)
    us = toric_type_unitaries(g, PAULI["X"], PAULI["Z"], [0.3, 0.7], [1.1, 0.2])
    assert len(us) == 4
    with pytest.raises(ValueError):
        toric_type_unitaries(g, PAULI["X"], PAULI["X"], [0.3, 0.7], [1.1, 0.2])
