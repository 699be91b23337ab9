"""Choosing the bandwidth for binary data.

For Bernoulli responses the hybrid criterion mixes the Newton-Raphson and
lower-bound corrections.  We compare the bandwidths chosen by each
criterion on one sample of the second logistic design, and the
asymptotically optimal bandwidths for reference.
"""

from bregsmooth import SimDesign, generate, h_ampec, h_amise, model_spec, select_bandwidth

design = SimDesign("uni_bernoulli_2", n=400, seed=4)
data = generate(design)
grid = design.spec.grid_spec()

for crit in ("cv_exact", "acv", "acv_lb", "hybrid", "ecv", "hybrid_ecv"):
    sel = select_bandwidth(data, "bernoulli", "deviance", crit, grid)
    print(f"{crit:11s} h = {sel.selected_h:.4f}")

spec = model_spec("uni_bernoulli_2", n=400)
print(f"h_AMPEC(deviance) = {h_ampec(spec):.4f}   h_AMISE = {h_amise(spec):.4f}")
