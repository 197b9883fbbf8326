"""
Hull volume and the diversity prior
===================================

Larger epsilon lets local hulls spread further from their anchors. The
determinantal prior keeps fitted hulls from collapsing onto lower-dimensional
faces.
"""

import numpy as np

from graphhull import FitConfig, Hyperparams, effective_log_volume, fit, sample, sample_state
from graphhull.diagnostics import singular_spectrum

# Mean effective log-volume of sampled local hulls as epsilon grows.
for eps in (0.05, 0.15, 0.25, 0.35, 0.45):
    hp = Hyperparams(K=4, D=4, epsilon=eps)
    vols = [effective_log_volume(Bk)[0]
            for seed in range(20) for Bk in sample_state(hp, 1, seed)[0].B]
    print("epsilon %.2f: mean log-volume %.3f" % (eps, np.mean(vols)))

# Fit the same graph with an upweighted diversity prior and without it, then
# compare the smallest singular values of the fitted local hulls.
K = 6
draw = sample(Hyperparams(K=K, D=K, tau_g=1.0, tau_s=5.0), 200, seed=0)
cfg = FitConfig(epochs=300, seed=0)
for label, hp in (("kappa=5", Hyperparams(K=K, D=K, kappa=5.0)),
                  ("no prior", Hyperparams(K=K, D=K, use_dpp=False))):
    state = fit(draw.graph, hp, cfg).final_state
    smallest = [singular_spectrum(Bk).min() for Bk in state.B]
    print("%-8s smallest local singular values %s" % (label, np.round(smallest, 3)))
