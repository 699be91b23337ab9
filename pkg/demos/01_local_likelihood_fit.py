"""Local linear likelihood fit of a Poisson intensity.

We draw one sample from the first Poisson design, fit it at a moderate
bandwidth with Newton-Raphson, and look at the leverages ``H_i`` that the
prediction-error criteria are built from.
"""

import numpy as np

from bregsmooth import LocalFitConfig, SimDesign, ase, fit_curve, generate

data = generate(SimDesign("uni_poisson_1", n=400, seed=1))
fit = fit_curve(data, "poisson", LocalFitConfig(bandwidth=0.08))

print(f"n = {data.n}, all fits converged: {bool(fit.converged.all())}")
print(f"max Newton iterations: {int(fit.iterations.max())}")
print(f"ASE on the canonical scale: {ase(fit.theta_hat, data):.4f}")

# leverages are small in the interior and larger at the ends, where the
# kernel window is cut off by the support
H = fit.H
print(f"sum of leverages (effective degrees of freedom): {H.sum():.2f}")
print(f"mean leverage, inner half: {H[(data.x > .25) & (data.x < .75)].mean():.4f}")
print(f"mean leverage, outer 5%:   {H[(data.x < .05) | (data.x > .95)].mean():.4f}")

# a coarse text plot of the truth against the fit
for x0 in np.linspace(0.05, 0.95, 10):
    j = int(np.argmin(np.abs(data.x - x0)))
    print(f"x={data.x[j]:.2f}  theta={data.theta_true[j]:+.3f}  fit={fit.theta_hat[j]:+.3f}")
