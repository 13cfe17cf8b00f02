"""
Outcome probabilities and signalling structure
==============================================

The generalized Born rule pairs a process with one instrument per party.
Probabilities are linear in each instrument element, normalize over the
outcomes whenever the process is valid, and their marginal structure tells
us who can signal to whom.
"""

import numpy as np

from pmx import (
    born_probabilities,
    causal_order_flags,
    cj_of_unitary,
    grandfather_instrument,
    memory_channel,
    quantum_switch,
    shared_state,
    w_ll,
    w_ocb,
)
from pmx.process_space import Instrument
from pmx.operator_core import tensor

P0 = np.diag([1.0, 0.0]).astype(complex)
P1 = np.diag([0.0, 1.0]).astype(complex)


def measure_and_send(party, bit):
    # measure the input in the computational basis, prepare |bit>
    prep = P0 if bit == 0 else P1
    return Instrument(party, (tensor(P0, prep), tensor(P1, prep)), 2, 2)


# a one-way channel signals A -> B and nowhere else
w = memory_channel(np.eye(2) / 2, cj_of_unitary(np.array([[0, 1], [1, 0]])))
print("identity-memory bit-flip channel:", causal_order_flags(w).value)

table = born_probabilities(w, [measure_and_send("A", 1), measure_and_send("B", 0)])
print("p(a, b) with A preparing 1 through a bit flip:")
print(np.round(table, 6))

# shared state: no signalling either way
print("\nshared state:", causal_order_flags(shared_state(np.eye(4) / 4)).value)

# the two-way process signals in both directions at once
print("two-way process:", causal_order_flags(w_ocb()).value)
print("quantum switch:", causal_order_flags(quantum_switch()).value)

# the grandfather paradox: a causal loop with a bit flip has no
# consistent outcome, and the Born rule reports exactly that
loop = w_ll()
table = born_probabilities(loop, [grandfather_instrument()], check=False)
print("\ncausal loop with flip-and-resend instrument:", table)
print("every outcome has probability zero; the process is not valid")
