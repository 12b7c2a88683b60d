"""Searching a family of envelopes for the fastest certified decay.

Scan mu(t) = lam (1+t)^nu over a lattice, keep the points that pass both the
sampled check and the closed-form test, then bisect along nu for the edge of
the feasible region. Sampling alone overshoots: the tail constraint only
bites beyond any finite horizon.
"""

from decaycert import EnvelopeFamily, PowerLawShape, refine_boundary, search_feasible

shape = PowerLawShape(m=1, q=1.5, c=4, p=2)
family = EnvelopeFamily("power_law", {"lam": (1.0, 8.0), "nu": (0.25, 2.0)})

region = search_feasible(shape.problem(), family, 0.16, {"lam": 33, "nu": 29}, shape=shape)
print(region.summary())
print("contains (4, 1):", region.contains({"lam": 4.0, "nu": 1.0}))
print("edge along nu at lam = 4:", refine_boundary(region, "nu", 1e-6, at={"lam": 4.0}))

sampled_only = search_feasible(shape.problem(), family, 0.16, {"lam": 33, "nu": 29})
print("edge from sampling alone:", refine_boundary(sampled_only, "nu", 1e-6, at={"lam": 4.0}))
