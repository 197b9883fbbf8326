"""Forward sampling of the generative process: archetypes, anchor-dominant
local hulls, memberships, biases, scale and Bernoulli edges."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .graph import Graph
from .params import (Hyperparams, ModelState, assemble_hulls,
                     node_embeddings, one_hot, orthonormal_qr)


@dataclass
class GenerativeDraw:
    state: ModelState
    pi: np.ndarray
    graph: Graph | None
    seed: int


def sample_archetypes(hp: Hyperparams, rng: np.random.Generator) -> np.ndarray:
    U, _ = orthonormal_qr(rng.standard_normal((hp.K, hp.K)), "U")
    V, _ = orthonormal_qr(rng.standard_normal((hp.D, hp.K)), "V")
    sigma = rng.uniform(hp.sigma_min, hp.sigma_max, size=hp.K)
    return (U * sigma) @ V.T


def sample_barycentric_hulls(hp: Hyperparams, rng: np.random.Generator) -> np.ndarray:
    """Anchor-dominant rows with ``t ~ Beta(a, b)`` and non-anchor weights
    ``~ Dir(alpha_q)``; equivalent to the truncated-Dirichlet construction."""
    K = hp.K
    t = rng.beta(hp.beta_a, hp.beta_b, size=(K, K - 1))
    q = rng.dirichlet(np.full(max(K - 1, 1), hp.alpha_q), size=(K, K - 1))
    return assemble_hulls(hp.epsilon * t, q[..., :K - 1])


def sample_state(hp: Hyperparams, n_nodes: int, seed: int = 0,
                 scale: float | None = None) -> tuple[ModelState, np.ndarray]:
    """Draw a full latent state and the community proportions.

    ``scale`` pins the global scale instead of drawing it from the
    half-normal prior.
    """
    rng = np.random.default_rng(seed)
    K = hp.K
    A = sample_archetypes(hp, rng)
    W = sample_barycentric_hulls(hp, rng)
    B = np.einsum("krj,jd->krd", W, A)
    pi = rng.dirichlet(np.full(K, hp.alpha_pi))
    c = rng.choice(K, size=n_nodes, p=pi)
    Omega = rng.dirichlet(np.full(K, hp.alpha_omega), size=n_nodes)
    g = rng.normal(0.0, hp.tau_g, size=n_nodes)
    s = abs(rng.normal(0.0, hp.tau_s))
    if scale is not None:
        s = float(scale)
    M = one_hot(c, K)
    Z = node_embeddings(M, Omega, B)
    state = ModelState(A=A, W_tilde=W, B=B, M_soft=M, assignments=c, Omega=Omega,
                       Z=Z, g=g, s=float(s), m_logits=None, hyperparams=hp)
    return state, pi


def sample_graph(state: ModelState, seed: int = 0) -> Graph:
    """Independent Bernoulli draw for every unordered pair."""
    n = state.n_nodes
    rng = np.random.default_rng(seed)
    i, j = np.triu_indices(n, k=1)
    eta = state.s * np.sum(state.Z[i] * state.Z[j], axis=1) + state.g[i] + state.g[j]
    hit = rng.random(len(i)) < expit(eta)
    return Graph(n, np.stack([i[hit], j[hit]], axis=1))


def sample(hp: Hyperparams, n_nodes: int, seed: int = 0,
           scale: float | None = None) -> GenerativeDraw:
    seeds = np.random.SeedSequence(seed).generate_state(2)
    state, pi = sample_state(hp, n_nodes, int(seeds[0]), scale=scale)
    graph = sample_graph(state, int(seeds[1]))
    return GenerativeDraw(state=state, pi=pi, graph=graph, seed=seed)
