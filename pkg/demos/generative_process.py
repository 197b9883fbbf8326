"""
Sampling graphs from the hull model
===================================

Draw a latent state, inspect its geometry and look at the graph it produces.
"""

import numpy as np

from graphhull import Hyperparams, degrees, geometry_report, sample

# Three hulls in three dimensions. epsilon bounds how far each local hull
# may lean away from its anchor archetype.
hp = Hyperparams(K=3, D=3, epsilon=0.45, tau_g=1.0, tau_s=5.0)
draw = sample(hp, n_nodes=150, seed=0)
state = draw.state

print("community proportions:", np.round(draw.pi, 3))
print("hull sizes:", np.bincount(state.assignments, minlength=hp.K))
print("global scale s = %.3f" % state.s)

# The singular values of A stay inside the box.
print("singular values of A:", np.round(np.linalg.svd(state.A, compute_uv=False), 3))

# Every anchor-dominant row keeps at least 1 - epsilon on its anchor, so the
# barycentric margin between any two hulls is at least 1 - 2 epsilon.
deg, deg_max = degrees(draw.graph)
report = geometry_report(state, deg_max=deg_max)
print("min disjointness margin %.3f (guaranteed >= %.2f)"
      % (report.min_margin, 1 - 2 * hp.epsilon))
for k, hull in enumerate(report.per_hull):
    print("hull %d: rank %d, log-volume %.3f" % (k, hull["effective_rank"],
                                                hull["effective_log_volume"]))

# Compare edge density inside hulls with density between hulls.
c = state.assignments
same = c[draw.graph.edges[:, 0]] == c[draw.graph.edges[:, 1]]
sizes = np.bincount(c, minlength=hp.K)
within_pairs = int(np.sum(sizes * (sizes - 1) // 2))
between_pairs = draw.graph.n_pairs - within_pairs
print("edges: %d, mean degree %.1f" % (draw.graph.n_edges, deg.mean()))
print("density within hulls %.3f, between hulls %.3f"
      % (same.sum() / within_pairs, (~same).sum() / between_pairs))
