"""
Link prediction and community recovery
======================================

Hold out half of the edges of a synthetic graph, fit the model on the rest
and score the held-out pairs directly from the fitted log-odds.
"""

from graphhull import (FitConfig, Hyperparams, evaluate_links, fit, nmi, ari,
                       sample, split_links)

# A planted graph with well-separated hulls.
gen = Hyperparams(K=3, D=3, epsilon=0.2, sigma_min=1.0, tau_g=0.5, alpha_pi=10.0)
draw = sample(gen, n_nodes=200, seed=1, scale=3.0)

# Removed edges keep the residual graph connected; negatives are non-edges of
# the original graph.
split = split_links(draw.graph, holdout_fraction=0.5, seed=1)
print("residual edges %d, test pairs %d + %d"
      % (split.residual.n_edges, len(split.test_positives), len(split.test_negatives)))

report = fit(split.residual, Hyperparams(K=3, D=3), FitConfig(epochs=300, seed=1))
print("epochs run %d, final objective %.1f" % (report.epochs_run, report.objective_trace[-1]))

metrics = evaluate_links(report.final_state, split.test_positives, split.test_negatives)
print("AUC-ROC %.3f  AUC-PR %.3f" % (metrics.auc_roc, metrics.auc_pr))

# Hard hull assignments against the planted communities.
c = report.final_state.assignments
print("NMI %.3f  ARI %.3f" % (nmi(c, draw.state.assignments), ari(c, draw.state.assignments)))
