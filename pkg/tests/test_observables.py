import numpy as np
import pytest

from tnsprep import lattice
from tnsprep.models import KET_PLUS, ModelSpec, _family, fixture, small_gibbs_path, zero_variant
from tnsprep.observables import (
    ProductStateError,
    build_Q_j,
    build_Q_lambda,
    build_Z_pm,
    complete_map,
    completeness_gram,
    observable_menu,
    pauli_product,
    projection_residual,
    vanishing_sites,
)
from tnsprep.operators import PAULI, LocalMatrix, ising_edge, projector11
from tnsprep.state import build_state


@pytest.mark.parametrize("beta", [0.0, 0.2, 0.45])
def test_menu_expectations_exact(beta):
    m = fixture("FX-CHAIN4-Z", beta)
    st = build_state(m)
    for spec in observable_menu(m):
        assert st.expectation(spec.operator).real == pytest.approx(spec.expected, abs=1e-9), spec.describe()
        assert np.allclose(spec.expansion.to_matrix(), spec.operator.matrix)


def test_projection_residual_zero():
    m = fixture("FX-GIBBS4-Z", 0.3)
    psi = build_state(m).amplitudes
    for lam in ([0], [0, 1], [1, 3]):
        assert projection_residual(m, lam, psi) < 1e-12


def test_zplus_uses_inverse_not_adjoint():
    m = fixture("FX-CHAIN4-Z", 0.4)
    zp, zm = build_Z_pm(m, [1])
    st = build_state(m)
    assert st.expectation(zp.operator).real == pytest.approx(1.0)
    assert st.expectation(zm.operator).real == pytest.approx(0.0, abs=1e-12)


def test_requires_zero_product_state():
    with pytest.raises(ProductStateError):
        build_Z_pm(fixture("FX-CHAIN4", 0.1), [0])


def test_q_lambda_needs_vanishing_site():
    m = fixture("FX-CHAIN4-Z", 0.2)
    with pytest.raises(ValueError):
        build_Q_lambda(m, [0], LocalMatrix([0], PAULI["Z"]))
    with pytest.raises(ValueError):
        build_Q_lambda(m, [0], LocalMatrix([1], PAULI["X"]))
    sites, _ = vanishing_sites(LocalMatrix([0, 1], np.kron(PAULI["X"], PAULI["Z"])))
    assert sites == [0]


def test_q_j_strictly_smaller_support_on_longer_chain():
    g = lattice.path(6)
    K1 = _family(g, [ising_edge(a, b) for a, b in g.sorted_edges()])
    K2 = _family(g, [projector11(a, b) for a, b in g.sorted_edges()])
    m = zero_variant(ModelSpec(g, K1, K2, 0.2, np.pi, np.tile(KET_PLUS, (6, 1))))
    q_lam = build_Q_lambda(m, [2, 3], LocalMatrix([2, 3], np.kron(PAULI["X"], PAULI["Z"])))
    q_j = build_Q_j(m, 2, LocalMatrix([3], PAULI["Z"]), variant=1)
    assert list(q_lam.operator.support) == [0, 1, 2, 3, 4, 5]
    assert list(q_j.operator.support) == [0, 1, 2, 3]
    assert abs(build_state(m).expectation(q_j.operator)) < 1e-9


def test_q_j_variants_and_errors():
    m = fixture("FX-CHAIN4-Z", 0.3)
    st = build_state(m)
    for v in (1, 2, 3):
        assert abs(st.expectation(build_Q_j(m, 1, None, v).operator)) < 1e-9
    with pytest.raises(ValueError):
        build_Q_j(m, 1, LocalMatrix([1], PAULI["Z"]))
    with pytest.raises(ValueError):
        build_Q_j(m, 1, None, 4)


def test_complete_map_cases():
    m = zero_variant(small_gibbs_path(3, 0.2))
    assert complete_map(m, "III").kind == "identity"
    assert complete_map(m, "ZIZ").kind == "Zplus"
    assert complete_map(m, "XYZ").kind == "Qlambda"
    lam, P = pauli_product("IXZ")
    assert list(lam) == [1, 2] and np.allclose(P.matrix, np.kron(PAULI["X"], PAULI["Z"]))
    with pytest.raises(ValueError):
        complete_map(m, "XX")


def test_gram_identity_at_beta_zero_and_nonsingular_after():
    rep0 = completeness_gram(zero_variant(small_gibbs_path(3, 0.0)))
    assert np.allclose(rep0.B, np.eye(64), atol=1e-10)
    rep = completeness_gram(zero_variant(small_gibbs_path(3, 0.3)))
    assert rep.nonsingular and rep.sigma_min > 1e-8
    with pytest.raises(ValueError):
        completeness_gram(fixture("FX-PROD(5)"))
