"""Honest and dishonest provers against the sampling verifier.

The chain is rotated so every site starts in |0>, which makes the full menu
of fixed-expectation observables available to the verifier.
"""

from tnsprep.gap import certify_point
from tnsprep.models import fixture
from tnsprep.state import build_parent_hamiltonian
from tnsprep.verify import Prover, run_verification

model = fixture("FX-CHAIN4-Z", 0.1)
ph = build_parent_hamiltonian(model)
delta = certify_point(model).delta
print(f"certified gap lower bound: {delta:.4f}\n")

for prover in (Prover(), Prover("depolarized", p=0.2), Prover("marginal"), Prover("signalling")):
    rep = run_verification(model, prover, delta, epsilon=0.1, seed=7, ph=ph)
    print(f"{prover.tag:<18} {rep.verdict}  fidelity >= {rep.fidelity_conservative:.4f}")
    for reason in rep.reasons[:3]:
        print(f"    {reason}")
