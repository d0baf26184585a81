"""Adiabatic preparation of the chain state at beta = 0.3.

Shows the final infidelity shrinking as the ramp time grows.
"""

from tnsprep.models import fixture
from tnsprep.state import AdiabaticSchedule, adiabatic_evolve

model = fixture("FX-CHAIN4", 0.3)
for T in (5, 10, 20, 40, 80, 160):
    res = adiabatic_evolve(model, AdiabaticSchedule(T, 0.3, model.t))
    print(f"T = {T:4d}   infidelity {1 - res.fidelity:.3e}   steps {res.steps}")
