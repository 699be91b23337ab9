"""Asymptotically optimal bandwidths.

``h_AMISE`` minimises the integrated squared error of the canonical
parameter; ``h_AMPEC`` minimises the asymptotic prediction error under a
Bregman divergence.  Their ratio depends on how the curvature of the
truth lines up with the variance function.
"""

import numpy as np

from bregsmooth import ModelSpec, h_ampec, h_amise, ordering_check, table1

print("family     ex  h_AMPEC  h_AMISE  (published)")
for row in table1():
    print(f"{row['family']:9s} {row['example']:3d}  {row['h_ampec']:.4f}   {row['h_amise']:.4f}"
          f"   ({row['paper_h_ampec']:.3f}, {row['paper_h_amise']:.3f})")

# Gaussian: the two criteria agree
gauss = ModelSpec("gaussian", lambda x: np.sin(3 * x), lambda x: -9 * np.sin(3 * x))
print(f"gaussian ratio: {ordering_check(gauss).ratio:.6f}")

# Poisson with constant curvature and a growing variance
spec = ModelSpec("poisson", lambda x: 1 + 2 * x**2, lambda x: 4 + 0 * x)
rep = ordering_check(spec)
print(f"poisson theta = 1 + 2x^2: relation {rep.relation}, ratio {rep.ratio:.4f}, bounds {rep.bounds}")
print(f"  h_AMPEC = {h_ampec(spec):.4f}, h_AMISE = {h_amise(spec):.4f}")

# the rate n^(-1/5)
for n in (100, 400, 1600, 6400):
    print(f"n = {n:5d}: h_AMPEC = {h_ampec(spec.with_n(n)):.4f}")
