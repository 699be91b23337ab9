"""A small replication study.

Each replication draws a fresh sample, selects the bandwidth by the
empirical criterion, and records the relative error against the two
asymptotic targets.  Twenty replications keep this quick; the command
``bregsmooth simulate --design uni_poisson_2 --reps 100`` runs the full
version and writes CSV/JSON artifacts.
"""

from bregsmooth import SimDesign, replicate

s = replicate(SimDesign("uni_poisson_2", n=400, seed=0), reps=20)
print(f"h_AMPEC = {s.h_ampec:.4f}, h_AMISE = {s.h_amise:.4f}, failed reps: {s.n_failed}")
for target in ("ampec", "amise"):
    b = s.boxplot[target]
    print(f"relative error vs {target}: q1 {b['q1']:+.3f}  median {b['median']:+.3f}  q3 {b['q3']:+.3f}")
print("typical replications (25/50/75th ASE):", s.typical_indices)
