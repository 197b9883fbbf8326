"""MAP inference: spectral initialisation, exact gradients and Adam ascent.

Gradients are hand-derived reverse-mode adjoints of the forward maps in
:mod:`graphhull.params` and :mod:`graphhull.objective`; they are checked
against central finite differences in the test suite.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.cluster.vq import kmeans2
from scipy.linalg import cho_factor, cho_solve, eigh, solve_triangular
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.special import expit, softmax

from .graph import Graph, degrees
from .objective import (ObjectiveBreakdown, PairBatch, SubsampleConfig,
                        dpp_terms, exact_pairs, pair_loglik, prior_terms,
                        subsampled_pairs)
from .params import (BLOCKS, Hyperparams, ModelParams, ModelState,
                     barycentric_hulls, build_state, gumbel_softmax,
                     non_anchor_index, orthonormal_qr)

logger = logging.getLogger(__name__)


class NonFiniteGradientError(FloatingPointError):
    pass


# ---------------------------------------------------------------------------
# adjoints of the individual maps

def qr_vjp(Q: np.ndarray, R: np.ndarray, gQ: np.ndarray) -> np.ndarray:
    """Pull back ``gQ`` through the positive-diagonal thin QR ``X = QR``."""
    X = Q.T @ gQ
    inner = gQ - Q @ X + Q @ np.tril(X - X.T, -1)
    # inner @ R^{-T}
    return solve_triangular(R, inner.T, lower=False).T


def softmax_vjp(p: np.ndarray, gp: np.ndarray) -> np.ndarray:
    return p * (gp - np.sum(gp * p, axis=-1, keepdims=True))


def dpp_grad(Phi: np.ndarray, kappa: float, name: str) -> np.ndarray:
    """Gradient of ``logdet(kappa G) - logdet(I + kappa G)`` with ``G`` the
    Gram matrix of the row-normalised ``Phi``."""
    norms = np.linalg.norm(Phi, axis=1)
    Psi = Phi / norms[:, None]
    G = Psi @ Psi.T
    K = G.shape[0]
    try:
        Gi = cho_solve(cho_factor(G), np.eye(K))
    except np.linalg.LinAlgError as exc:
        raise NonFiniteGradientError(f"singular DPP kernel in block {name}") from exc
    dG = Gi - kappa * cho_solve(cho_factor(np.eye(K) + kappa * G), np.eye(K))
    dG = 0.5 * (dG + dG.T)
    dPsi = 2.0 * dG @ Psi
    return (dPsi - Psi * np.sum(dPsi * Psi, axis=1, keepdims=True)) / norms[:, None]


def pair_loglik_grads(Z, g, s, pairs: PairBatch):
    """Gradients of the weighted pair log-likelihood w.r.t. ``Z``, ``g``, ``s``."""
    n = Z.shape[0]
    if len(pairs) == 0:
        return np.zeros_like(Z), np.zeros(n), 0.0
    zz = np.sum(Z[pairs.i] * Z[pairs.j], axis=1)
    eta = s * zz + g[pairs.i] + g[pairs.j]
    deta = pairs.weight * (pairs.y - expit(eta))
    S = sp.coo_matrix(
        (np.concatenate([deta, deta]) * s,
         (np.concatenate([pairs.i, pairs.j]), np.concatenate([pairs.j, pairs.i]))),
        shape=(n, n),
    ).tocsr()
    dZ = S @ Z
    dg = np.bincount(pairs.i, deta, minlength=n) + np.bincount(pairs.j, deta, minlength=n)
    ds = float(np.sum(deta * zz))
    return dZ, dg, ds


# ---------------------------------------------------------------------------
# value and gradient of the MAP objective

def _pairs_for(g: Graph, cfg: SubsampleConfig | None) -> PairBatch:
    if cfg is None or cfg.n_negative_samples is None:
        return exact_pairs(g)
    return subsampled_pairs(g, cfg)


def value_and_gradient(
    g: Graph,
    params: ModelParams,
    hp: Hyperparams,
    cfg: SubsampleConfig | None = None,
    temperature: float = 1.0,
    noise=None,
) -> tuple[ObjectiveBreakdown, ModelParams]:
    """MAP objective breakdown and its gradient w.r.t. every raw block.

    The subsample is fixed by ``cfg.seed`` and the Gumbel noise by ``noise``,
    so the pair matches :func:`graphhull.objective.map_objective` called
    with the same arguments.
    """
    K, eps = hp.K, hp.epsilon
    QU, RU = orthonormal_qr(params.U_raw, "U_raw")
    QV, RV = orthonormal_qr(params.V_raw, "V_raw")
    lsig = expit(params.sigma_raw)
    sigma = hp.sigma_min + (hp.sigma_max - hp.sigma_min) * lsig
    A = (QU * sigma) @ QV.T
    W = barycentric_hulls(params.t_raw, params.q_raw, eps)
    B = np.einsum("krj,jd->krd", W, A)
    Omega = softmax(params.omega_raw, axis=1)
    M = gumbel_softmax(params.m_logits, temperature, noise)
    P = np.einsum("nr,krd->nkd", Omega, B)
    Z = np.einsum("nk,nkd->nd", M, P)
    s = float(np.exp(params.s_raw[0]))
    state = ModelState(A=A, W_tilde=W, B=B, M_soft=M, assignments=np.argmax(M, 1),
                       Omega=Omega, Z=Z, g=params.g, s=s)

    out = prior_terms(state, params, hp)
    pairs = _pairs_for(g, cfg) if g.n_pairs else None
    if pairs is not None:
        out.edge_loglik = pair_loglik(Z, params.g, s, pairs)
        dZ, dg, ds = pair_loglik_grads(Z, params.g, s, pairs)
    else:
        dZ, dg, ds = np.zeros_like(Z), np.zeros(len(params.g)), 0.0
    out.dpp_local, out.dpp_global = dpp_terms(state, hp)
    out.recompute_total()

    # node level
    dM = np.einsum("nd,nkd->nk", dZ, P)
    dP = M[:, :, None] * dZ[:, None, :]
    dOmega = np.einsum("nkd,krd->nr", dP, B)
    dB = np.einsum("nr,nkd->krd", Omega, dP)
    dA = np.zeros_like(A)
    if hp.use_dpp:
        for k in range(K):
            dB[k] += dpp_grad(B[k], hp.kappa, f"B[{k}]")
        dA += dpp_grad(A, hp.kappa, "A")

    # local hulls
    dW = np.einsum("krd,jd->krj", dB, A)
    dA += np.einsum("krj,krd->jd", W, dB)
    d_t_raw = np.zeros_like(params.t_raw)
    d_q_raw = np.zeros_like(params.q_raw)
    if K > 1:
        idx = non_anchor_index(K)
        t = expit(params.t_raw)
        q = softmax(params.q_raw, axis=-1)
        rows = dW[:, :K - 1, :]
        d_anchor = rows[np.arange(K), :, np.arange(K)]  # K x (K-1)
        d_non = np.take_along_axis(rows, idx[:, None, :].repeat(K - 1, axis=1), axis=2)
        d_shrink = np.sum(d_non * q, axis=-1) - d_anchor
        d_t_raw = eps * d_shrink * t * (1 - t)
        d_t_raw += (hp.beta_a - 1.0) * (1 - t) - (hp.beta_b - 1.0) * t
        dq = (eps * t)[..., None] * d_non
        d_q_raw = softmax_vjp(q, dq) + (hp.alpha_q - 1.0) * (1.0 - (K - 1) * q)

    # global archetypes
    dU = (dA @ QV) * sigma
    dV = (dA.T @ QU) * sigma
    dsigma = np.einsum("kd,kj,dj->j", dA, QU, QV)
    d_sigma_raw = dsigma * (hp.sigma_max - hp.sigma_min) * lsig * (1 - lsig)

    grads = dict(
        U_raw=qr_vjp(QU, RU, dU),
        V_raw=qr_vjp(QV, RV, dV),
        sigma_raw=d_sigma_raw,
        t_raw=d_t_raw,
        q_raw=d_q_raw,
        omega_raw=softmax_vjp(Omega, dOmega)
        + (hp.alpha_omega - 1.0) * (1.0 - K * Omega),
        m_logits=softmax_vjp(M, dM) / temperature,
        g=dg - params.g / hp.tau_g ** 2,
        s_raw=np.array([(ds - s / hp.tau_s ** 2) * s]),
    )
    for name in BLOCKS:
        if not np.all(np.isfinite(grads[name])):
            raise NonFiniteGradientError(f"non-finite gradient in block {name}")
    return out, ModelParams(**grads)


def gradient(g, params, hp, cfg=None, temperature=1.0, noise=None) -> ModelParams:
    return value_and_gradient(g, params, hp, cfg, temperature, noise)[1]


def omega_nll_gradient(g: Graph, Omega: np.ndarray, B: np.ndarray,
                       assignments: np.ndarray, bias: np.ndarray, s: float) -> np.ndarray:
    """Gradient of the exact negative log-likelihood w.r.t. the barycentric
    weights themselves (hard memberships)."""
    Bc = B[assignments]  # N x K x D
    Z = np.einsum("nr,nrd->nd", Omega, Bc)
    dZ, _, _ = pair_loglik_grads(Z, bias, s, exact_pairs(g))
    return -np.einsum("nd,nrd->nr", dZ, Bc)


def lipschitz_bound(s: float, kappa_star: float, deg_max: float) -> float:
    """Curvature bound ``(s k^2 d + s^2 k^4 d / 2) / 4`` on the ω-gradient of
    the negative log-likelihood, for archetypes boxed by ``kappa_star``."""
    return 0.25 * (s * kappa_star ** 2 * deg_max + 0.5 * s ** 2 * kappa_star ** 4 * deg_max)


# ---------------------------------------------------------------------------
# initialisation

def _leading_eigenvectors(S: sp.spmatrix, d: int) -> np.ndarray:
    n = S.shape[0]
    if n <= max(2 * d + 1, 200):
        vals, vecs = eigh(S.toarray())
        order = np.argsort(vals)[::-1][:d]
        return vecs[:, order]
    maxiter = 20 * n
    try:
        vals, vecs = eigsh(S, k=d, which="LA", v0=np.ones(n), maxiter=maxiter, tol=1e-10)
    except ArpackNoConvergence as exc:
        raise RuntimeError(
            f"eigensolver did not converge within {maxiter} iterations"
        ) from exc
    order = np.argsort(vals)[::-1]
    return vecs[:, order]


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    pivot = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def spectral_clusters(g: Graph, K: int, D: int, seed: int = 0, n_init: int = 10) -> np.ndarray:
    """k-means on row-normalised leading eigenvectors of ``D^-1/2 Y D^-1/2``."""
    n = g.n_nodes
    if K == 1:
        return np.zeros(n, dtype=np.int64)
    deg, _ = degrees(g)
    inv = np.zeros(n)
    inv[deg > 0] = 1.0 / np.sqrt(deg[deg > 0])
    S = sp.diags(inv) @ g.adjacency @ sp.diags(inv)
    d = min(D, n)
    vecs = _fix_signs(_leading_eigenvectors(sp.csr_matrix(S), d))
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    X = vecs / np.where(norms > 0, norms, 1.0)
    rng = np.random.default_rng(seed)
    best, best_inertia = None, np.inf
    for _ in range(n_init):
        centers, labels = kmeans2(X, K, minit="++", seed=rng)
        inertia = np.sum((X - centers[labels]) ** 2)
        if inertia < best_inertia - 1e-12:
            best, best_inertia = labels, inertia
    return best.astype(np.int64)


def spectral_init(g: Graph, hp: Hyperparams, seed: int = 0, logit_gap: float = 2.0) -> ModelParams:
    """Deterministic starting point from the normalised-adjacency spectrum.

    Membership logits get ``+logit_gap`` on the spectral k-means cluster;
    barycentric weights start uniform, shrinkages at their midpoint and the
    degree biases at centred ``log(deg + 1)``. Non-anchor prototype weights
    start concentrated on distinct coordinates so the initial local hulls are
    not degenerate.
    """
    K, D, n = hp.K, hp.D, g.n_nodes
    params = ModelParams.zeros(n, hp)
    labels = spectral_clusters(g, K, D, seed)
    params.m_logits[np.arange(n), labels] = logit_gap
    if K > 1:
        params.q_raw[:] = 2.0 * np.eye(K - 1)[None]
    deg, _ = degrees(g)
    logd = np.log(deg + 1.0)
    params.g = logd - logd.mean()
    return params


# ---------------------------------------------------------------------------
# optimisation

@dataclass
class FitConfig:
    learning_rate: float = 0.02
    epochs: int = 500
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    gs_decay: str = "exponential"
    neg_samples: int | None = None
    exhaustive: bool = False
    seed: int = 0
    tol: float = 1e-6
    window: int = 20

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.gs_decay not in ("exponential", "linear", "constant"):
            raise ValueError(f"unknown gs_decay {self.gs_decay!r}")


def temperature_schedule(epoch: int, epochs: int, start: float, end: float,
                         law: str = "exponential") -> float:
    if law == "constant" or epochs <= 1:
        return start
    frac = epoch / (epochs - 1)
    if law == "linear":
        return start + (end - start) * frac
    return start * (end / start) ** frac


class Adam:
    """Adam on a dict of arrays; ``ascend=True`` maximises."""

    def __init__(self, lr=0.02, beta1=0.9, beta2=0.999, eps=1e-8, ascend=True):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.sign = 1.0 if ascend else -1.0
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for name, g in grads.items():
            m = self.m.get(name, np.zeros_like(g))
            v = self.v.get(name, np.zeros_like(g))
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1 - b1 ** self.t)
            v_hat = v / (1 - b2 ** self.t)
            params[name] += self.sign * self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class FitReport:
    objective_trace: list
    final_state: ModelState
    final_params: ModelParams
    diagnostics: object
    seed: int
    epochs_run: int = 0
    converged: bool = False
    status: str = "ok"
    breakdown: ObjectiveBreakdown | None = None
    extras: dict = field(default_factory=dict)


def _epoch_seed(seed: int, epoch: int) -> int:
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])


def fit(g: Graph, hp: Hyperparams, cfg: FitConfig | None = None,
        init: ModelParams | None = None, callback=None) -> FitReport:
    """Maximise the MAP objective with Adam from the spectral initialisation.

    Each epoch draws fresh Gumbel noise for the relaxed memberships and a
    fresh non-edge subsample (``neg_samples`` defaults to ``|E|``). The
    returned state uses hard memberships.
    """
    from .diagnostics import geometry_report

    cfg = cfg or FitConfig()
    params = (init or spectral_init(g, hp, cfg.seed)).copy()
    blocks = params.blocks()
    n, K = g.n_nodes, hp.K
    m = cfg.neg_samples if cfg.neg_samples is not None else max(g.n_edges, 1)
    noise_rng = np.random.default_rng([cfg.seed, 0x6753])
    opt = Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)

    trace: list[float] = []
    status, converged = "ok", False
    last_good = params.copy()
    for epoch in range(cfg.epochs):
        temp = temperature_schedule(epoch, cfg.epochs, hp.gs_temp_start,
                                    hp.gs_temp_end, cfg.gs_decay)
        noise = noise_rng.gumbel(size=(n, K))
        sub = None if cfg.exhaustive else SubsampleConfig(m, _epoch_seed(cfg.seed, epoch))
        try:
            bd, grad = value_and_gradient(g, params, hp, sub, temp, noise)
        except (NonFiniteGradientError, ValueError) as exc:
            status = f"aborted at epoch {epoch}: {exc}"
            break
        if not np.isfinite(bd.total):
            status = f"aborted at epoch {epoch}: non-finite objective"
            break
        trace.append(bd.total)
        last_good = ModelParams(**{k: v.copy() for k, v in blocks.items()})
        opt.step(blocks, grad.blocks())
        if callback is not None:
            callback(epoch, bd)
        w = cfg.window
        if len(trace) > w and abs(trace[-1] - trace[-1 - w]) <= cfg.tol * abs(trace[-1 - w]):
            converged = True
            break

    if status != "ok":
        warnings.warn(status, RuntimeWarning, stacklevel=2)
        final = last_good
    else:
        final = ModelParams(**blocks)
    state = build_state(final, hp, hard=True)
    _, deg_max = degrees(g)
    return FitReport(
        objective_trace=trace,
        final_state=state,
        final_params=final,
        diagnostics=geometry_report(state, deg_max=deg_max),
        seed=cfg.seed,
        epochs_run=len(trace),
        converged=converged,
        status=status,
    )
