"""MAP objective: Bernoulli-logistic edge likelihood, priors and DPP terms."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import log_softmax

from .graph import Graph, sample_non_edges
from .params import Hyperparams, ModelParams, ModelState, build_state


def softplus(x):
    """Overflow-safe ``log(1 + exp(x))``."""
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def edge_logit(z_i, z_j, g_i, g_j, s) -> np.ndarray:
    """Log-odds ``s <z_i, z_j> + g_i + g_j`` (broadcasts over leading axes)."""
    return s * np.sum(np.asarray(z_i) * np.asarray(z_j), axis=-1) + (g_i + g_j)


@dataclass(frozen=True)
class SubsampleConfig:
    """Non-edge sampling for the likelihood.

    ``n_negative_samples=None`` enumerates every non-edge (exact term).
    """

    n_negative_samples: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_negative_samples is not None and self.n_negative_samples < 1:
            raise ValueError("n_negative_samples must be >= 1")


@dataclass(frozen=True)
class PairBatch:
    """Weighted pairs entering the likelihood sum."""

    i: np.ndarray
    j: np.ndarray
    y: np.ndarray
    weight: np.ndarray

    def __len__(self):
        return len(self.i)


def all_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def exact_pairs(g: Graph) -> PairBatch:
    i, j = all_pairs(g.n_nodes)
    y = g.has_edges(i, j).astype(float)
    return PairBatch(i, j, y, np.ones(len(i)))


def subsampled_pairs(g: Graph, cfg: SubsampleConfig) -> PairBatch:
    """Observed edges (weight 1) plus ``m`` i.i.d. uniform non-edges.

    Each sampled non-edge carries weight ``(|D| - |E|) / m`` so that the
    weighted sum is an unbiased estimate of the full non-edge sum.
    """
    if cfg.n_negative_samples is None:
        return exact_pairs(g)
    ei, ej = g.edges[:, 0], g.edges[:, 1]
    n_non = g.n_pairs - g.n_edges
    if n_non == 0:
        warnings.warn("graph is complete: no non-edges, likelihood has edge term only",
                      RuntimeWarning, stacklevel=2)
        return PairBatch(ei, ej, np.ones(len(ei)), np.ones(len(ei)))
    m = cfg.n_negative_samples
    rng = np.random.default_rng(cfg.seed)
    neg = sample_non_edges(g, m, rng, replace=True)
    return PairBatch(
        np.concatenate([ei, neg[:, 0]]),
        np.concatenate([ej, neg[:, 1]]),
        np.concatenate([np.ones(len(ei)), np.zeros(m)]),
        np.concatenate([np.ones(len(ei)), np.full(m, n_non / m)]),
    )


def pair_loglik(Z, g, s, pairs: PairBatch) -> float:
    if len(pairs) == 0:
        return 0.0
    eta = edge_logit(Z[pairs.i], Z[pairs.j], g[pairs.i], g[pairs.j], s)
    return float(np.sum(pairs.weight * (pairs.y * eta - softplus(eta))))


def loglik_exact(g: Graph, state: ModelState) -> float:
    """Full ``O(N^2)`` Bernoulli log-likelihood over all unordered pairs."""
    return pair_loglik(state.Z, state.g, state.s, exact_pairs(g))


def loglik_subsampled(g: Graph, state: ModelState, cfg: SubsampleConfig) -> float:
    """Edge term exactly plus a scaled uniform sample of the non-edge term."""
    if g.n_edges < 1:
        raise ValueError("subsampled likelihood needs at least one edge")
    return pair_loglik(state.Z, state.g, state.s, subsampled_pairs(g, cfg))


def dpp_log_prior(vertices, kappa: float = 1.0) -> float:
    """L-ensemble log-prior ``logdet(L) - logdet(I + L)``.

    ``L = kappa * Psi Psi^T`` where ``Psi`` holds the row-normalised
    vertices. Returns ``-inf`` when ``L`` is singular (Cholesky fails),
    without adding jitter.
    """
    Phi = np.asarray(vertices, dtype=float)
    norms = np.linalg.norm(Phi, axis=1)
    if np.any(norms == 0):
        raise ValueError("dpp_log_prior: zero row cannot be normalised")
    Psi = Phi / norms[:, None]
    L = kappa * (Psi @ Psi.T)
    K = L.shape[0]
    _, logdet_ipl = _chol_logdet(np.eye(K) + L)
    ok, logdet_l = _chol_logdet(L)
    if not ok:
        return -np.inf
    return logdet_l - logdet_ipl


def _chol_logdet(S) -> tuple[bool, float]:
    try:
        C = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return False, -np.inf
    d = np.diag(C)
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        return False, -np.inf
    return True, 2.0 * float(np.sum(np.log(d)))


@dataclass
class ObjectiveBreakdown:
    edge_loglik: float = 0.0
    dirichlet_omega: float = 0.0
    dirichlet_q: float = 0.0
    beta_t: float = 0.0
    dpp_local: float = 0.0
    dpp_global: float = 0.0
    gauss_g: float = 0.0
    halfnormal_s: float = 0.0
    total: float = 0.0

    TERMS = ("edge_loglik", "dirichlet_omega", "dirichlet_q", "beta_t",
             "dpp_local", "dpp_global", "gauss_g", "halfnormal_s")

    def recompute_total(self) -> "ObjectiveBreakdown":
        self.total = float(sum(getattr(self, t) for t in self.TERMS))
        return self

    def to_dict(self) -> dict:
        return asdict(self)


def prior_terms(state: ModelState, params: ModelParams, hp: Hyperparams) -> ObjectiveBreakdown:
    """Every non-likelihood, non-DPP term of the MAP objective (constants dropped)."""
    out = ObjectiveBreakdown()
    log_omega = log_softmax(params.omega_raw, axis=1)
    out.dirichlet_omega = float((hp.alpha_omega - 1.0) * log_omega.sum())
    if hp.K > 1:
        log_q = log_softmax(params.q_raw, axis=-1)
        out.dirichlet_q = float((hp.alpha_q - 1.0) * log_q.sum())
        log_t = -softplus(-params.t_raw)
        log_1mt = -softplus(params.t_raw)
        out.beta_t = float(((hp.beta_a - 1.0) * log_t + (hp.beta_b - 1.0) * log_1mt).sum())
    out.gauss_g = float(-np.sum(state.g ** 2) / (2.0 * hp.tau_g ** 2))
    with np.errstate(over="ignore"):
        out.halfnormal_s = float(-np.float64(state.s) ** 2 / (2.0 * hp.tau_s ** 2))
    return out


def dpp_terms(state: ModelState, hp: Hyperparams) -> tuple[float, float]:
    if not hp.use_dpp:
        return 0.0, 0.0
    local = float(sum(dpp_log_prior(Bk, hp.kappa) for Bk in state.B))
    return local, dpp_log_prior(state.A, hp.kappa)


def map_objective(
    g: Graph,
    params: ModelParams,
    hp: Hyperparams,
    cfg: SubsampleConfig | None = None,
    temperature: float = 1.0,
    noise=None,
) -> ObjectiveBreakdown:
    """Log joint density (to be maximised) split into its additive terms.

    Memberships use the Gumbel-softmax relaxation of ``m_logits`` at the
    given temperature and noise; ``cfg=None`` uses the exact likelihood.
    """
    cfg = cfg or SubsampleConfig()
    state = build_state(params, hp, temperature=temperature, noise=noise)
    out = prior_terms(state, params, hp)
    if g.n_pairs:
        if cfg.n_negative_samples is None:
            pairs = exact_pairs(g)
        else:
            pairs = subsampled_pairs(g, cfg)
        out.edge_loglik = pair_loglik(state.Z, state.g, state.s, pairs)
    out.dpp_local, out.dpp_global = dpp_terms(state, hp)
    return out.recompute_total()

