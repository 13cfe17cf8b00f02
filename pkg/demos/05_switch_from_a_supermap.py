"""
Producing the quantum switch with a reversible supermap
=======================================================

The rigidity theorem forbids continuous reversible transformations from
changing causal structure, yet a controlled-swap unitary applied to a
causally ordered channel outputs the quantum switch.  The resolution: that
unitary is not a valid supermap on the full process space.  It behaves
well on the committed-control channel we feed it, and fails validity on
other inputs.  Sweeping a rotation on the extra control party interpolates
between the two fixed orders.
"""

import numpy as np

from pmx import (
    apply,
    c_swap_v,
    causal_order_flags,
    cj_of_unitary,
    extended_switch,
    extended_switch_layout,
    instrument_reduction,
    quantum_switch,
    switch_input_channel,
    v_lambda,
    validate,
    validate_supermap,
)
from pmx.operator_core import max_norm

# the controlled swap, wrapped as a supermap on the switch factor layout
sup = c_swap_v()
out = apply(sup, switch_input_channel())
print(
    "c-swap of the |+>-control channel equals the switch:",
    max_norm(out.matrix - quantum_switch().matrix) <= 1e-10,
)

# it is not a valid supermap: the subspace condition fails
rep = validate_supermap(sup)
print(
    "c-swap supermap valid:",
    rep.valid,
    "| subspace residual:",
    f"{rep.subspace.residual:.3f}",
)

# partial twists are no better, and their output on a committed control
# even leaves the valid subspace
quarter = v_lambda(np.pi / 4)
print("quarter twist valid supermap:", validate_supermap(quarter).valid)
out = apply(quarter, switch_input_channel(control=[0, 1]))
print("quarter twist output valid:", validate(out).valid)

# rotating the control party of the four-party switch dial is a clean
# way to see the order flip: A-then-B at 0, B-then-A at pi/2
layout = extended_switch_layout()
w4 = extended_switch()
sw = quantum_switch()
sw_norm = float(np.trace(sw.matrix @ sw.matrix).real)
print("\n lambda   flags         overlap with switch")
for lam in np.linspace(0.0, np.pi / 2, 5):
    rot = np.array(
        [[np.cos(lam), -np.sin(lam)], [np.sin(lam), np.cos(lam)]]
    )
    red = apply(instrument_reduction(layout, "D", cj_of_unitary(rot)), w4)
    overlap = float(np.trace(red.matrix @ sw.matrix).real) / np.sqrt(
        float(np.trace(red.matrix @ red.matrix).real) * sw_norm
    )
    print(
        f"  {lam:5.3f}   {causal_order_flags(red).value:13s} {overlap:.6f}"
    )
