"""The discrete version: a recurrence bounded by induction.

g_{n+1} <= g_n (1 - h gamma) + h alpha(g_n) + h beta. If the envelope condition
holds at every n and g_0 <= 1/mu_0, each step stays under the next bound. The
recurrence itself is the oracle.
"""

from decaycert import DiscreteEnvelope, DiscreteProblem, run_recurrence, verify_discrete_certificate

problem = DiscreteProblem.from_strings("0.5", "0", "1", "y^2", n_max=100_000)
env = DiscreteEnvelope.from_string("4")

report = verify_discrete_certificate(problem, env, 0.25)
print(report.to_text())

result = run_recurrence(problem, 0.25)
print("g_0..g_5:", [float(x) for x in result.g[:6]])
print("max g_n over", len(result.g), "terms:", float(result.g.max()))

# an envelope that grows too fast cannot be certified
doubling = DiscreteEnvelope.from_string("exp(n*ln(2))")
print("\nmu_n = 2^n:", verify_discrete_certificate(
    DiscreteProblem.from_strings("0.5", "0", "1", "0", n_max=20), doubling, 0.5).verdict.value)
