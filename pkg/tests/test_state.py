import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tnsprep.models import fixture, fx_chain4
from tnsprep.operators import PAULI
from tnsprep.state import (
    AdiabaticSchedule,
    BudgetError,
    HamiltonianPath,
    apply_local,
    build_O,
    build_parent_hamiltonian,
    build_state,
    mu_nu_sets,
    product_vector,
    runtime_estimate,
    adiabatic_evolve,
)


def test_apply_local_matches_dense():
    rng = np.random.default_rng(0)
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    out = apply_local(psi, 3, np.kron(PAULI["X"], PAULI["Z"]), [2, 0])
    dense = np.kron(np.kron(PAULI["Z"], np.eye(2)), PAULI["X"])
    assert np.allclose(out, dense @ psi)


def test_mu_nu_sets_chain():
    m = fx_chain4(0.2)
    # K2 edges (0,1),(1,2),(2,3); site 1 touches edges 0 and 1, which overlap K1 edges 0,1,2
    assert mu_nu_sets(m, 1) == ([0, 1], [0, 1, 2])
    assert mu_nu_sets(m, 0) == ([0], [0, 1])
    gibbs = fixture("FX-GIBBS4", 0.2)
    mu, nu = mu_nu_sets(gibbs, 0)
    assert mu == [] and all(0 in gibbs.K1[n].support for n in nu)


def test_inverse_deformation():
    m = fx_chain4(0.4)
    O = build_O(m, [0, 1], [0, 1, 2], extra=[1])
    Oi = build_O(m, [0, 1], [0, 1, 2], extra=[1], inverse=True)
    assert np.allclose(O.matrix @ Oi.matrix, np.eye(O.dim))


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 0.6), st.sampled_from(["FX-CHAIN4", "FX-GIBBS4", "FX-CHAIN4-Z"]))
def test_frustration_free_property(beta, name):
    m = fixture(name, beta)
    ph = build_parent_hamiltonian(m)
    st_ = build_state(m)
    assert ph.annihilation_residuals(st_).max() < 1e-10
    assert np.linalg.norm(ph.apply(st_.amplitudes)) < 1e-9
    for t in ph.terms:
        ev = t.h.eigvalsh()
        assert ev.min() > -1e-10


def test_state_normalization_constant():
    m = fixture("FX-GIBBS4", 0.5)
    s = build_state(m)
    assert np.isclose(np.linalg.norm(s.amplitudes), 1.0)
    assert s.norm_constant > 1.0


def test_budget_cap():
    with pytest.raises(BudgetError):
        build_state(fixture("FX-PROD(15)"))
    with pytest.raises(BudgetError):
        build_parent_hamiltonian(fixture("FX-PROD(11)")).dense()


def test_product_vector_ordering():
    v = product_vector([np.array([0, 1]), np.array([1, 0])])
    assert v[2] == 1  # |10>: site 0 is the most significant bit


def test_hamiltonian_path_matches_parent_hamiltonian():
    m = fixture("FX-CHAIN4", 0.35)
    path = HamiltonianPath(m.with_params(beta=0.0))
    assert np.allclose(path(0.35), build_parent_hamiltonian(m).dense(), atol=1e-12)


def test_adiabatic_short_ramp():
    m = fixture("FX-CHAIN4", 0.2)
    res = adiabatic_evolve(m, AdiabaticSchedule(40.0, 0.2, m.t))
    assert res.fidelity > 0.999
    assert res.norm_drift < 1e-8


def test_adiabatic_zero_target_is_trivial():
    m = fixture("FX-CHAIN4", 0.0)
    res = adiabatic_evolve(m, AdiabaticSchedule(5.0, 0.0, m.t))
    assert res.fidelity == pytest.approx(1.0)
    assert res.steps == 0


def test_schedule_validation():
    with pytest.raises(ValueError):
        AdiabaticSchedule(-1.0, 0.2, math.pi).check()
    with pytest.raises(ValueError):
        AdiabaticSchedule(1.0, 0.2, math.pi, shape=lambda s: math.sin(3 * s)).check()


def test_runtime_estimate():
    assert runtime_estimate(4, 0.5, 0.1) == pytest.approx(16 / 0.125 / 0.1)
    with pytest.raises(ValueError):
        runtime_estimate(4, 0.0, 0.1)
