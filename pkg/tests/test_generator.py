import numpy as np
import pytest
from scipy import stats

from graphhull.diagnostics import disjointness_certificate
from graphhull.generator import (sample, sample_barycentric_hulls, sample_graph,
                                 sample_state)
from graphhull.params import Hyperparams, non_anchor_index


def test_sample_is_deterministic():
    hp = Hyperparams(K=3, D=4)
    a, b = sample(hp, 50, seed=7), sample(hp, 50, seed=7)
    assert a.graph == b.graph
    assert np.array_equal(a.state.Z, b.state.Z)
    assert sample(hp, 50, seed=8).graph != a.graph


def test_state_invariants_over_many_seeds():
    hp = Hyperparams(K=3, D=3, epsilon=0.45)
    for seed in range(1000):
        st, pi = sample_state(hp, 20, seed)
        assert np.isclose(pi.sum(), 1.0)
        assert np.allclose(st.W_tilde.sum(2), 1.0)
        assert np.all(st.W_tilde >= 0)
        for k in range(3):
            assert np.all(st.W_tilde[k][:, k] >= 1 - hp.epsilon - 1e-12)
            assert np.array_equal(st.W_tilde[k][-1], np.eye(3)[k])
        sv = np.linalg.svd(st.A, compute_uv=False)
        assert sv.max() <= hp.sigma_max + 1e-12 and sv.min() >= hp.sigma_min - 1e-12
        assert np.all(np.linalg.norm(st.Z, axis=1) <= hp.sigma_max + 1e-12)
        assert np.nanmin(disjointness_certificate(st.W_tilde)) >= 1 - 2 * hp.epsilon - 1e-12
        assert st.s > 0


def test_shrinkage_and_weight_moments():
    hp = Hyperparams(K=3, D=3, epsilon=0.4, beta_a=2.0, beta_b=5.0, alpha_q=3.0)
    rng = np.random.default_rng(0)
    W = np.stack([sample_barycentric_hulls(hp, rng) for _ in range(4000)])
    idx = non_anchor_index(3)
    anchor = W[:, np.arange(3), :2, np.arange(3)]  # K x draws x rows
    t = (1 - anchor) / hp.epsilon
    assert t.mean() == pytest.approx(2 / 7, abs=0.01)
    assert t.var() == pytest.approx(2 * 5 / (49 * 8), rel=0.05)
    # the non-anchor weights, renormalised, follow a symmetric Dirichlet
    q = np.stack([W[:, k, :2][:, :, idx[k]] for k in range(3)])
    q = q / q.sum(-1, keepdims=True)
    assert q[..., 0].mean() == pytest.approx(0.5, abs=0.01)
    assert q[..., 0].var() == pytest.approx(0.25 / 7, rel=0.05)


def test_bias_and_scale_moments():
    hp = Hyperparams(K=2, D=2, tau_g=1.5, tau_s=2.0)
    draws = [sample_state(hp, 200, seed) for seed in range(300)]
    g = np.concatenate([st.g for st, _ in draws])
    assert g.mean() == pytest.approx(0.0, abs=0.02)
    assert g.std() == pytest.approx(1.5, rel=0.02)
    s = np.array([st.s for st, _ in draws])
    assert stats.kstest(s, stats.halfnorm(scale=2.0).cdf).pvalue > 1e-3


def test_membership_proportions_follow_pi():
    hp = Hyperparams(K=3, D=3)
    st, pi = sample_state(hp, 20_000, seed=4)
    freq = np.bincount(st.assignments, minlength=3) / 20_000
    assert np.all(np.abs(freq - pi) < 4 * np.sqrt(pi * (1 - pi) / 20_000))


def test_edge_frequencies_match_logistic():
    hp = Hyperparams(K=2, D=2, tau_g=1.0)
    st, _ = sample_state(hp, 6, seed=2, scale=1.5)
    i, j = np.triu_indices(6, 1)
    eta = st.s * np.sum(st.Z[i] * st.Z[j], 1) + st.g[i] + st.g[j]
    p = 1 / (1 + np.exp(-eta))
    reps = 4000
    counts = np.zeros(len(i))
    for seed in range(reps):
        counts += sample_graph(st, seed).has_edges(i, j)
    se = np.sqrt(p * (1 - p) / reps)
    assert np.all(np.abs(counts / reps - p) <= 4 * se + 1e-12)


def test_scale_pin():
    st, _ = sample_state(Hyperparams(K=2, D=2), 5, seed=0, scale=3.0)
    assert st.s == 3.0
