"""Unconstrained parameter blocks and the maps to constrained model quantities.

Global archetypes use a boxed SVD chart ``A = U diag(sigma) V^T``; each local
hull ``B_k = W_k A`` places at least ``1 - epsilon`` barycentric mass on its
anchor archetype ``k``; node embeddings are convex combinations of local-hull
vertices.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.special import expit, log_softmax, softmax


@dataclass(frozen=True)
class Hyperparams:
    """Model hyperparameters.

    ``K`` hulls (and global archetypes) in a ``D``-dimensional latent space,
    with ``K <= D``. Defaults follow the usual experimental setting
    (``epsilon=0.45``, singular values boxed to ``[0.3, 1.5]``).
    """

    K: int
    D: int
    epsilon: float = 0.45
    sigma_min: float = 0.3
    sigma_max: float = 1.5
    alpha_omega: float = 1.0
    alpha_q: float = 1.0
    beta_a: float = 1.0
    beta_b: float = 1.0
    tau_g: float = 10.0
    tau_s: float = 10.0
    kappa: float = 1.0
    use_dpp: bool = True
    gs_temp_start: float = 1.0
    gs_temp_end: float = 0.1
    alpha_pi: float = 1.0

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.K > self.D:
            raise ValueError(
                f"K={self.K} > D={self.D}: the K global archetypes must be "
                "linearly independent rows in D dimensions, so K <= D"
            )
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if not 0.0 < self.sigma_min < self.sigma_max:
            raise ValueError("need 0 < sigma_min < sigma_max")
        for name in ("alpha_omega", "alpha_q", "beta_a", "beta_b", "tau_g",
                     "tau_s", "kappa", "gs_temp_start", "gs_temp_end", "alpha_pi"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def identifiable(self) -> bool:
        """True when anchor dominance forces pairwise-disjoint local hulls."""
        return self.epsilon < 0.5

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


BLOCKS = ("U_raw", "V_raw", "sigma_raw", "t_raw", "q_raw",
          "omega_raw", "m_logits", "g", "s_raw")


@dataclass
class ModelParams:
    """Real-valued carriers for every constrained quantity of the model."""

    U_raw: np.ndarray  # K x K
    V_raw: np.ndarray  # D x K
    sigma_raw: np.ndarray  # K
    t_raw: np.ndarray  # K x (K-1)
    q_raw: np.ndarray  # K x (K-1) x (K-1)
    omega_raw: np.ndarray  # N x K
    m_logits: np.ndarray  # N x K
    g: np.ndarray  # N
    s_raw: np.ndarray  # shape (1,)

    def __post_init__(self):
        for name in BLOCKS:
            arr = np.array(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entries in parameter block {name}")
            setattr(self, name, arr)

    def blocks(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in BLOCKS}

    def copy(self) -> "ModelParams":
        return ModelParams(**{k: v.copy() for k, v in self.blocks().items()})

    def flatten(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.blocks().values()])

    def unflatten(self, vec: np.ndarray) -> "ModelParams":
        out, pos = {}, 0
        for name, arr in self.blocks().items():
            out[name] = np.asarray(vec[pos:pos + arr.size]).reshape(arr.shape)
            pos += arr.size
        return ModelParams(**out)

    @classmethod
    def zeros(cls, n_nodes: int, hp: Hyperparams) -> "ModelParams":
        K, D = hp.K, hp.D
        return cls(
            U_raw=np.eye(K),
            V_raw=np.eye(D, K),
            sigma_raw=np.zeros(K),
            t_raw=np.zeros((K, K - 1)),
            q_raw=np.zeros((K, K - 1, K - 1)),
            omega_raw=np.zeros((n_nodes, K)),
            m_logits=np.zeros((n_nodes, K)),
            g=np.zeros(n_nodes),
            s_raw=np.zeros(1),
        )


@dataclass
class ModelState:
    """Constrained model quantities derived from :class:`ModelParams`."""

    A: np.ndarray
    W_tilde: np.ndarray
    B: np.ndarray
    M_soft: np.ndarray
    assignments: np.ndarray
    Omega: np.ndarray
    Z: np.ndarray
    g: np.ndarray
    s: float
    m_logits: np.ndarray | None = None
    hyperparams: Hyperparams | None = None
    extras: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.Omega.shape[0]

    @property
    def K(self) -> int:
        return self.A.shape[0]

    @property
    def D(self) -> int:
        return self.A.shape[1]


def orthonormal_qr(raw: np.ndarray, name: str = "block") -> tuple[np.ndarray, np.ndarray]:
    """Thin Householder QR with the sign convention ``diag(R) >= 0``."""
    raw = np.asarray(raw, dtype=np.float64)
    Q, R = np.linalg.qr(raw, mode="reduced")
    d = np.diag(R)
    scale = max(np.abs(raw).max(), 1e-300)
    if np.any(np.abs(d) <= 1e-12 * scale * max(raw.shape)):
        raise ValueError(f"parameter block {name} is rank deficient; cannot orthonormalize")
    signs = np.where(d < 0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


def boxed_sigma(sigma_raw, sigma_min: float, sigma_max: float) -> np.ndarray:
    return sigma_min + (sigma_max - sigma_min) * expit(np.asarray(sigma_raw, dtype=float))


def build_archetypes(U_raw, V_raw, sigma_raw, hp: Hyperparams) -> np.ndarray:
    """Global archetype matrix ``A = U diag(sigma) V^T`` (``K x D``).

    ``U`` and ``V`` are the orthonormal QR factors of the raw blocks and the
    singular values are squashed into ``(sigma_min, sigma_max)``, so the
    spectral norm of ``A`` never exceeds ``sigma_max``.
    """
    U, _ = orthonormal_qr(U_raw, "U_raw")
    V, _ = orthonormal_qr(V_raw, "V_raw")
    sigma = boxed_sigma(sigma_raw, hp.sigma_min, hp.sigma_max)
    return (U * sigma) @ V.T


def non_anchor_index(K: int) -> np.ndarray:
    """``idx[k]`` lists the K-1 coordinates other than ``k``."""
    return np.array([[j for j in range(K) if j != k] for k in range(K)], dtype=np.int64).reshape(K, K - 1)


def assemble_hulls(shrink: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Stack rows ``(1 - shrink) e_k + shrink * q`` plus a final ``e_k`` row.

    ``shrink`` is ``K x (K-1)`` and ``q`` is ``K x (K-1) x (K-1)`` with
    weights over the non-anchor coordinates of each hull.
    """
    K = shrink.shape[0]
    W = np.zeros((K, K, K))
    if K > 1:
        idx = non_anchor_index(K)
        for k in range(K):
            W[k, :K - 1, k] = 1.0 - shrink[k]
            W[k, :K - 1, idx[k]] = (shrink[k][:, None] * q[k]).T
    W[np.arange(K), K - 1, np.arange(K)] = 1.0
    return W


def barycentric_hulls(t_raw, q_raw, epsilon: float) -> np.ndarray:
    """Stacked ``K x K x K`` anchor-dominant barycentric matrices.

    Row ``r < K-1`` of hull ``k`` is ``(1 - s) e_k + s q`` with
    ``s = epsilon * logistic(t_raw[k, r])`` and ``q`` a softmax of
    ``q_raw[k, r]`` spread over the non-anchor coordinates. The last row
    is ``e_k``.
    """
    t_raw = np.asarray(t_raw, dtype=float)
    q_raw = np.asarray(q_raw, dtype=float)
    q = softmax(q_raw, axis=-1) if q_raw.size else q_raw
    return assemble_hulls(epsilon * expit(t_raw), q)


def build_local_hulls(A, t_raw, q_raw, hp: Hyperparams) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(W_tilde, B)`` with ``B[k] = W_tilde[k] @ A``."""
    W = barycentric_hulls(t_raw, q_raw, hp.epsilon)
    B = np.einsum("krj,jd->krd", W, A)
    return W, B


def gumbel_softmax(logits, temperature: float, noise=None) -> np.ndarray:
    """Relaxed one-hot sample ``softmax((logits + noise) / temperature)``.

    Works on a single row or on an ``N x K`` matrix of rows. ``noise`` holds
    standard Gumbel draws supplied by the caller; ``None`` means zero noise.
    """
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    logits = np.asarray(logits, dtype=float)
    x = logits if noise is None else logits + np.asarray(noise, dtype=float)
    return softmax(x / temperature, axis=-1)


def sample_gumbel(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.gumbel(size=shape)


def node_embeddings(M_soft, Omega, B) -> np.ndarray:
    """``z_i = sum_k M[i, k] * omega_i^T B_k``; exact hull selection for one-hot ``M``."""
    return np.einsum("nk,nr,krd->nd", M_soft, Omega, B)


def harden(M_soft) -> np.ndarray:
    """Row-wise argmax; ties go to the smallest index."""
    return np.argmax(np.asarray(M_soft), axis=-1)


def one_hot(assignments, K: int) -> np.ndarray:
    out = np.zeros((len(assignments), K))
    out[np.arange(len(assignments)), assignments] = 1.0
    return out


def scale_from_raw(s_raw) -> float:
    return float(np.exp(np.asarray(s_raw, dtype=float).reshape(-1)[0]))


def build_state(
    params: ModelParams,
    hp: Hyperparams,
    temperature: float = 1.0,
    noise=None,
    hard: bool = False,
) -> ModelState:
    """Assemble every constrained quantity from the raw blocks.

    With ``hard=True`` the assignments are the argmax of the logits and the
    embedding uses one-hot memberships, otherwise the Gumbel-softmax
    relaxation at ``temperature`` (with optional ``noise``) is used.
    """
    A = build_archetypes(params.U_raw, params.V_raw, params.sigma_raw, hp)
    W, B = build_local_hulls(A, params.t_raw, params.q_raw, hp)
    Omega = softmax(params.omega_raw, axis=1)
    if hard:
        c = harden(params.m_logits)
        M = one_hot(c, hp.K)
    else:
        M = gumbel_softmax(params.m_logits, temperature, noise)
        c = harden(M)
    Z = node_embeddings(M, Omega, B)
    return ModelState(
        A=A, W_tilde=W, B=B, M_soft=M, assignments=c, Omega=Omega, Z=Z,
        g=params.g.copy(), s=scale_from_raw(params.s_raw),
        m_logits=params.m_logits.copy(), hyperparams=hp,
    )


def log_simplex(raw, axis=-1) -> np.ndarray:
    return log_softmax(np.asarray(raw, dtype=float), axis=axis)
