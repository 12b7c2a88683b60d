"""An envelope that stays bounded: g does not decay but stays below 1.

With mu(t) = c + lam (1+t)^-b the bound 1/mu(t) rises from 1/(c+lam) towards
1/c. The forcing and nonlinearity are scaled so the envelope condition holds
with a fraction theta going to the nonlinearity and 1 - theta to the forcing.
"""

import numpy as np

from decaycert import build_example2, check_gdot_decay, integrate_extremal, log_grid, verify_certificate

problem, env = build_example2(c=1.0, lam=1.0, b=1.0, theta=0.5, p=2.0)
print(problem.describe())
print("envelope:", env.description or env.mu)

g0 = 0.4                         # below 1/(c + lam) = 0.5
report = verify_certificate(problem, env, g0, 1e4)
print("\n" + report.to_text())

traj = integrate_extremal(problem, g0, 1e4)
print("extremal trajectory against the bound:")
for t in log_grid(0.0, 1e4, 6):
    g = float(traj.sample(np.array([t]))[0])
    print(f"  t={t:10.2f}  g={g:.6f}  1/mu={1 / env.mu_at(t):.6f}")

# g' decays like (1+t)^-2, so g has a limit; estimate an upper bound for it
decay = check_gdot_decay(traj, b=1.0, c=1.0)
print("\n" + decay.to_text())
