"""
Building process matrices and checking their validity
=====================================================

A process matrix W describes everything outside the local laboratories:
it assigns a joint probability to the outcomes of the parties' instruments
without presuming a global order between them.  Validity is three checks:
positivity, a fixed trace, and membership in the span of allowed terms.
"""

import numpy as np

from pmx import (
    TermClass,
    allowed_mask,
    bipartite_qubit_layout,
    classify_term,
    shared_state,
    validate,
    w_ll,
    w_ocb,
)

layout = bipartite_qubit_layout()
print("layout:", [f.label for f in layout.factors], "dim", layout.dim)

# census of the product-term taxonomy: 88 allowed, 168 forbidden
mask = allowed_mask(layout)
print(f"allowed terms: {int(mask.sum())} / {mask.size}")

# a few representatives, classified by the term rule
for pattern in [(0, 0, 0, 0), (3, 3, 0, 0), (0, 3, 3, 0), (3, 0, 3, 0)]:
    cls = classify_term(pattern, layout)
    tag = "allowed" if cls is TermClass.ALLOWED else "forbidden"
    print(" ", pattern, "->", tag)

# the shared maximally mixed state is the most boring valid process
w = shared_state(np.eye(4) / 4)
print("\nshared state:", "valid" if validate(w).valid else "invalid")

# the two-way signalling process: every condition holds with zero residual
w = w_ocb()
report = validate(w)
print("two-way process:")
for cond in report.conditions:
    print(f"  {cond.name:10s} residual {cond.residual:.2e}  tol {cond.tolerance:.2e}")
print("  verdict:", "valid" if report.valid else "invalid")

vals = np.sort(np.linalg.eigvalsh(w.matrix))
print("  spectrum:", np.round(vals, 6))

# the classical causal loop fails exactly one condition
report = validate(w_ll())
failed = [c.name for c in report.conditions if not c.passed]
print("\ncausal loop process fails:", failed)
