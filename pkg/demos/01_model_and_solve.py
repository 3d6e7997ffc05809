"""Build a decision problem and solve it end to end.

The decision-maker faces two insurance contracts whose coverage level (the
hedonic characteristic) is uncertain, and two future health states.  She
commits to a joint distribution over characteristic and state, paying for
mutual information and for tilting her choice distribution away from the
market prior.
"""

import numpy as np

import statechar as sc

# A fully symmetric toy: utility 1 for matching coverage to the future state.
inst = sc.make_instance(
    characteristics=["high-coverage", "low-coverage"],
    states=["high-expenses", "low-expenses"],
    utility=[[1.0, 0.0],
             [0.0, 1.0]],
    phi=[0.5, 0.5],    # both contracts equally common
    mu=[0.5, 0.5],     # both health states equally likely
    alpha=0.5,         # equal weight on both information costs
    lam=1.0,
)

sol = sc.full_solve(inst)

print("symmetric 2x2 instance")
print("  optimal marginal   :", sol.nu_star.weights)
print("  conditional choices:")
print(np.array_str(sol.ccp, precision=6))
print("  U* =", sol.U_star, " f* =", sol.f_star)
print("  known closed form  : e/(1+e) =", np.e / (1 + np.e),
      " log((1+e)/2) =", np.log((1 + np.e) / 2))

# The cost splits into a "vertical" part (marginal vs prior) and the mutual
# information between characteristic and state.
kappa = sc.information_cost(sol.coupling, inst)
vertical = inst.alpha * inst.lam * sc.kl_divergence(sol.coupling.marginal_x, inst.phi)
print("  cost =", kappa, "of which vertical =", vertical)

# At the optimum the surprisal is constant wherever the policy puts mass.
y = sc.surprisal_matrix(sol.coupling, inst)
print("  surprisal spread   :", float(y.values.max() - y.values.min()))

# A generic seeded instance: the solver still certifies itself.
gen = sc.generated_instance(seed=7, n=3, m=3, alpha=0.5)
sol3 = sc.full_solve(gen)
print("\nseeded 3x3 instance")
print("  optimal marginal:", sol3.nu_star.weights)
print("  U* =", sol3.U_star)
print("  first-order residual =", sol3.foc_residual)
print("  duality gap          =", sol3.duality_gap)

# The brute-force oracle maximizes over all Bayes-plausible couplings without
# using any of the structure; at desk scale the two must agree.
oracle = sc.brute_force_oracle(gen, seed=1)
print("  oracle value         =", oracle.u_best)
print("  solver - oracle      =", sol3.U_star - oracle.u_best)
