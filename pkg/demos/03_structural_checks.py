"""Every structural property of the model, checked numerically.

Each check returns (near) zero on solver output and a visibly positive value
on a non-optimal probe, so the battery distinguishes true optima from
plausible-looking couplings.
"""

import statechar as sc

inst = sc.generated_instance(seed=7, n=3, m=3, alpha=0.5)
sol = sc.full_solve(inst)
optimum = sol.coupling
probe = sc.product_coupling(inst)   # zero-information policy

print(f"{'check':<28} {'at optimum':>14} {'at product probe':>18}")
print(f"{'gibbs (surprisal std)':<28} {sc.gibbs_check(optimum, inst):>14.2e} "
      f"{sc.gibbs_check(probe, inst):>18.2e}")
print(f"{'jensen gap f - U':<28} {sc.jensen_gap(optimum, inst):>14.2e} "
      f"{sc.jensen_gap(probe, inst):>18.2e}")
print(f"{'weighted-MNL residual':<28} {sc.mnl_residual(optimum, inst):>14.2e} "
      f"{sc.mnl_residual(probe, inst):>18.2e}")

lo, hi = sc.density_bounds(sol.nu_star, inst)
print(f"density nu*/phi in [{lo:.3f}, {hi:.3f}] (interior, never zero)")

# First-step orthogonality: perturbing the policy moves the objective only
# through the re-weighting, so these slopes vanish as eps -> 0.
print("\nfirst-step orthogonality slopes |Delta|/eps:")
for eps, slope in sc.fso_check(optimum, probe, inst, (1e-1, 1e-2, 1e-3, 1e-4)):
    print(f"  eps = {eps:.0e}  slope = {slope:.3e}")

# The directional derivative of U is the surprisal re-weighting; the error of
# the first-order expansion shrinks linearly in eps.
print("\ndirectional-derivative expansion error:")
for eps in (1e-2, 1e-3, 1e-4):
    err = sc.directional_derivative_check(optimum, probe, inst, eps)
    print(f"  eps = {eps:.0e}  error = {err:.3e}")

# One call aggregates everything with recorded thresholds.
report = sc.run_diagnostics(sol, inst)
print("\naggregated report:")
for name, passed in report.pass_flags.items():
    print(f"  {name:<24} {'pass' if passed else 'FAIL'}")

# The same battery flags a non-optimal coupling.
import dataclasses
fake = dataclasses.replace(sol, coupling=probe,
                           nu_star=sc.Marginal(weights=inst.phi))
bad = sc.run_diagnostics(fake, inst)
print("on the probe instead:", bad.pass_flags)
