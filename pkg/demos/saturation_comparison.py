# Truncation against Lavrentiev as the solution gets smoother.
#
# Lavrentiev regularization solves (e^{-(tau - t)A} + alpha) u = psi. Its
# error rate in delta stops improving once the smoothness index gamma passes
# one, while truncation keeps gaining. A small study on a 64-mode heat problem
# shows the fitted log-log slopes.

# %%
from fvp_reglab import compare_methods, make_dirichlet_laplacian, make_smooth_problem

lap = make_dirichlet_laplacian(64)

for gamma in (0.5, 1.0, 2.0, 4.0):
    problem, sc = make_smooth_problem(lap, tau=0.005, gamma=gamma)
    cmp = compare_methods(problem, sc, seeds=range(5))
    target = gamma / (gamma + 1)
    print(f"gamma = {gamma:3.1f}  target {target:.3f}  "
          f"truncation {cmp.truncation.slope:.3f}  lavrentiev {cmp.lavrentiev.slope:.3f}")

# %%
# A comparison also carries a one-line reading of the slopes.

problem, sc = make_smooth_problem(lap, tau=0.005, gamma=2.0)
cmp = compare_methods(problem, sc, seeds=range(3))
print(cmp.verdict())
print(len(cmp.rows), "rows, one per method, delta and seed")
