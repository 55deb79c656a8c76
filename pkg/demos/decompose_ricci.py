"""Split the quadratic part of the Ricci tensor in wave coordinates.

Expands R_ab of g = eta + h to second order in exact rational arithmetic,
strips the gauge-condition multiples, and sorts what is left into null forms
and the two quasi-null monomials.
"""

from wkglab.tensor import verify_lemma, verify_linearized
from wkglab.tensor.expr import render

linear = verify_linearized()
print("first order, modulo gauge:", render(linear.reduced).strip())

report = verify_lemma(2)
print(report.to_text())

# The quasi-null part is the only piece that is not a null form. It pairs the
# derivative indices with the free indices, so it does not vanish on plane
# waves travelling along a null direction.
print("quasi-null part:")
print(render(report.partition.quasi_null))
