# Choosing the cutoff before looking at the answer.
#
# If the exact solution satisfies ||e^{gamma (tau - t) A} u(t)|| <= rho, the
# total error of truncation is at most rho e^{-gamma s beta} + e^{s beta} delta
# with s = tau - t. Setting the two terms equal gives a closed-form beta, and
# the same balance can be solved numerically for any smoothness profile h.

# %%
import numpy as np

from fvp_reglab import (
    SourceCondition,
    choose_beta_exponential,
    choose_beta_general,
    total_bound,
)

sc = SourceCondition.exponential(gamma=1.5, rho=2.0)
delta, t, tau = 1e-5, 0.0, 0.1

beta_closed = choose_beta_exponential(sc.gamma, t, tau, delta)
beta_general = choose_beta_general(sc, t, tau, delta)
print(f"closed form beta = {beta_closed:.6f}")
print(f"balanced beta    = {beta_general:.6f}")

# %%
# The two differ because the closed form ignores rho. Both sit close to the
# minimizer of the bound, found here by brute force.

betas = np.linspace(1, 200, 4000)
bounds = np.array([total_bound(sc, b, t, tau, delta) for b in betas])
print(f"grid minimizer   = {betas[bounds.argmin()]:.3f}  bound {bounds.min():.4e}")
for name, b in (("closed", beta_closed), ("balanced", beta_general)):
    print(f"bound at {name:8s} = {total_bound(sc, b, t, tau, delta):.4e}")

# %%
# A polynomial profile h(lambda) = lambda^p has no closed form; the
# numerical rule still applies.

poly = SourceCondition.power(p=2.0, rho=5.0)
for d in (1e-2, 1e-4, 1e-6, 1e-8):
    b = choose_beta_general(poly, t, tau, d)
    print(f"delta = {d:.0e}  beta = {b:8.3f}  bound = {total_bound(poly, b, t, tau, d):.3e}")
