"""From a vector system to a scalar inequality.

For u' + A u = h(t, u) + f(t) with symmetric A, the norm g = |u| satisfies
g' <= -gamma g + alpha(t, g) + |f(t)| where gamma is the smallest eigenvalue
of A and alpha bounds |h|. The reduced problem can then be certified like
any scalar one.
"""

import numpy as np

from decaycert import (Envelope, VectorSystem, falsify_alpha_bound, integrate_vector, min_eigenvalue,
                       reduce_to_scalar, verify_certificate)

A = [[2.0, 1.0], [1.0, 2.0]]
print("eigenvalues of A:", np.linalg.eigvalsh(A), " coercivity:", min_eigenvalue(A))

system = VectorSystem.from_strings(A, ["u1*u2", "0.5*(u1^2 - u2^2)"], ["0.1*exp(-t)", "0"], "y^2",
                                   [0.18, 0.24])
scalar = reduce_to_scalar(system)
print("\nreduced problem:")
print(scalar.describe())

# alpha_bound is a claim about h; try to refute it on random spheres
bad = falsify_alpha_bound(system, [0.01, 0.1, 1.0, 10.0], [0.0, 1.0, 10.0], directions=128, seed=1)
print("\ncounterexamples to |h| <= y^2:", len(bad))

env = Envelope.from_string("2")
g0 = float(np.linalg.norm(system.u0))
report = verify_certificate(scalar, env, g0, 100.0)
print("\n" + report.to_text())

traj = integrate_vector(system, 100.0)
print("max |u(t)| on [0, 100]:", float(traj.norm.max()), " bound 1/mu =", 0.5)

# a claim that is too small is caught
wrong = VectorSystem.from_strings(A, ["u1", "u2"], ["0", "0"], "0.5*y", [0.1, 0.1])
print("counterexamples to |u| <= y/2:", len(falsify_alpha_bound(wrong, [1.0], [0.0], seed=1)))
