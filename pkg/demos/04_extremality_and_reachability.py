"""
Extremality of the two-way process
==================================

Is the two-way signalling process a mixture of tamer processes?  No: the
intersection of its support-operator span with the valid subspace is one
dimensional, which makes it an extremal point of the convex set.  Combined
with a counting argument for causally ordered processes and the rigidity
theorem, this shows no reversible continuous transformation can produce it
from an ordered process.
"""

import numpy as np

from pmx import (
    cj_of_unitary,
    dariano_test,
    is_extremal,
    memory_channel,
    non_reachability_report,
    quantum_switch,
    shared_state,
    support_intersection_dim,
    w_ocb,
)

w = w_ocb()
vals = np.sort(np.linalg.eigvalsh(w.matrix))
print("two-way process rank:", int(np.sum(vals > 1e-9)))
print("support/valid intersection dim:", support_intersection_dim(w))
cert = is_extremal(w)
print("extremal:", bool(cert))

# mixing destroys extremality: the intersection grows to the full
# decomposition freedom of the mixture
mixed = shared_state(np.eye(4) / 4)
print("maximally mixed intersection dim:", support_intersection_dim(mixed))
print("maximally mixed extremal:", bool(is_extremal(mixed)))

print("switch extremal:", bool(is_extremal(quantum_switch())))

# the counting argument for a causally ordered rank-8 process: the
# support basis (64 operators) plus the order-enforcing family (204)
# cannot be independent inside a 256-dimensional space
flip = np.array([[0.0, 1.0], [1.0, 0.0]])
witness = memory_channel(
    np.eye(2) / 2, (cj_of_unitary(np.eye(2)) + cj_of_unitary(flip)) / 2
)
rep = dariano_test(witness)
print(
    f"\nordered rank-8 witness: |C|={rep.support_card} |D|={rep.order_card} "
    f"total={rep.total} rank={rep.rank} independent={rep.independent}"
)

chain = non_reachability_report()
print("\nfull chain passes:", chain.passed)
print(chain.verdict)
