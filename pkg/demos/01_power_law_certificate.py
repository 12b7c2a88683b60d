"""A scalar equation whose square decays like 1/t.

u' = -c (1+t)^-1 u + (1+t)^-m u|u|^p + (1+t)^-q has a damping term that fades
and a forcing that never vanishes. Setting g = u^2 turns it into a
differential inequality, and the envelope mu(t) = 4 (1+t) certifies
u(t)^2 < 1/(4 (1+t)) provided u(0)^2 < 1/4.
"""

import numpy as np

from decaycert import (EnvelopeFamily, PowerLawShape, check_envelope, integrate_scalar, log_grid,
                       powerlaw_closed_form_check, verify_certificate)
from decaycert.ode import Trajectory

shape = PowerLawShape(m=1, q=1.5, c=4, p=2)
problem = shape.problem()
print("inequality for g = u^2:")
print(problem.describe())

env = EnvelopeFamily("power_law", {"lam": (1, 8), "nu": (0.25, 2)}).envelope({"lam": 4.0, "nu": 1.0})
u0 = 0.4

# 1. sampled check of the envelope condition on [0, 1e4]
report = verify_certificate(problem, env, u0 ** 2, 1e4, 2048)
print("\nsampled check:")
print(report.to_text())

# 2. the sampled check says nothing past 1e4; the closed-form test covers all t
print("closed-form conditions hold:", powerlaw_closed_form_check(1, 1.5, 4, 2, 4.0, 1.0))

# 3. integrate the original equation and compare u^2 with the bound
traj = integrate_scalar(shape.u_rhs(), u0, 0.0, 1e4)
square = Trajectory(traj.t, traj.g ** 2, 2 * traj.g * traj.g_dot, traj.tolerance, traj.status)
check = check_envelope(square, env)
print("\ntrajectory vs bound:", check.to_text().splitlines()[0])
for t in log_grid(0.0, 1e4, 6):
    u = float(traj.sample(np.array([t]))[0])
    print(f"  t={t:10.2f}  u^2={u * u:.3e}  1/(4(1+t))={1 / (4 * (1 + t)):.3e}")

# 4. a weaker forcing decay breaks the tail condition
weak = PowerLawShape(m=1, q=1.2, c=4, p=2)
bad = verify_certificate(weak.problem(), env, u0 ** 2, 1e4, 2048)
print("\nwith q = 1.2:", bad.verdict.value, "min residual", bad.min_residual)
