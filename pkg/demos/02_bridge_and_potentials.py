"""The inner problem: best policy when the characteristic marginal is pinned.

Fixing both marginals turns the objective into an entropic optimal transport
problem between nu and mu with kernel exp(u/lambda).  Its dual variables (the
Schrodinger potentials) price the marginal constraints: a(x) is the rate at
which the constrained value V(nu) rises when mass is mixed toward x.
"""

import numpy as np

import statechar as sc

inst = sc.generated_instance(seed=7, n=3, m=3, alpha=0.5)
nu = sc.Marginal(weights=np.array([0.2, 0.5, 0.3]))

sol = sc.sinkhorn_solve(inst, nu)
print("constrained solve at nu =", nu.weights)
print("  iterations        :", sol.iterations)
print("  marginal residual :", sol.marginal_residual)
print("  V(nu)             :", sol.value)
print("  duality gap       :", sol.duality_gap)

a = sc.standard_a(sol.potentials, nu, inst)
print("  potentials a      :", a)
print("  potentials b      :", sol.potentials.b)
print("  nu-weighted mean a:", float(nu.weights @ a), "(gauge)")

# The residual history certifies convergence sweep by sweep.
print("  residual history  :", ["%.1e" % r for r in sol.residual_history])

# Fixed-point equations hold at the returned potentials...
print("fixed-point violation:", sc.schrodinger_residual(sol.potentials, nu, inst))
# ...and detect tampering.
b = sol.potentials.b.copy()
b[0] += 0.1
tampered = sc.Potentials(a_scaled=sol.potentials.a_scaled, b=b)
print("after nudging b[0] by 0.1:", sc.schrodinger_residual(tampered, nu, inst))

# The dual is an upper bound at any potentials and tight at the true ones.
rng = np.random.default_rng(0)
noisy = sc.Potentials(a_scaled=sol.potentials.a_scaled + rng.normal(0, 0.3, 3),
                      b=sol.potentials.b + rng.normal(0, 0.3, 3))
print("dual at true potentials :", sc.dual_value(sol.potentials, nu, inst))
print("dual at noisy potentials:", sc.dual_value(noisy, nu, inst), "(larger)")

# Envelope check: mixing a little extra mass toward characteristic x moves
# V(nu) at rate a(x).
for x in range(3):
    fd, pred = sc.envelope_derivative(nu, x, inst, eps=1e-4)
    print(f"x={x}: finite difference {fd:+.6f} vs potential {pred:+.6f}")

# At the unconstrained optimum, V coincides with the full solve.
full = sc.full_solve(inst)
print("V(nu*) =", sc.constrained_value(full.nu_star, inst),
      " U* =", full.U_star)
