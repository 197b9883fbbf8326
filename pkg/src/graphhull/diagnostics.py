"""Hull geometry checks: disjointness certificates, an LP intersection oracle,
effective log-volumes and singular spectra."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .params import ModelState

SIMPLEX_TOL = 1e-8


def _check_rows_on_simplex(W: np.ndarray) -> None:
    W = np.asarray(W, dtype=float)
    if np.any(W < -SIMPLEX_TOL) or np.any(np.abs(W.sum(axis=-1) - 1.0) > SIMPLEX_TOL):
        raise ValueError("barycentric rows must lie on the probability simplex")


def directed_margins(W_tilde) -> np.ndarray:
    """``m[k, l] = min_r W_k[r, k] - max_r W_l[r, k]``.

    A positive entry means coordinate ``k`` separates hull ``k`` from hull
    ``l`` in barycentric coordinates.
    """
    W = np.asarray(W_tilde, dtype=float)
    K = W.shape[0]
    low = W[np.arange(K), :, np.arange(K)].min(axis=1)  # min_r W_k[r, k]
    high = W.max(axis=1)  # high[l, k] = max_r W_l[r, k]
    return low[:, None] - high.T


def disjointness_certificate(W_tilde, epsilon: float | None = None) -> np.ndarray:
    """Symmetric matrix of pairwise separation margins (NaN diagonal).

    The margin between hulls ``k`` and ``l`` is the larger of the two
    directed margins along coordinates ``k`` and ``l``. A positive value
    certifies ``conv(B_k) ∩ conv(B_l) = ∅`` whenever the global archetypes
    are affinely independent. For anchor-dominant hulls with
    ``epsilon < 1/2`` every margin is at least ``1 - 2 * epsilon``.

    If ``epsilon`` is given the anchor-dominance constraint itself is
    verified as well.
    """
    W = np.asarray(W_tilde, dtype=float)
    _check_rows_on_simplex(W)
    K = W.shape[0]
    if epsilon is not None:
        anchor = W[np.arange(K), :, np.arange(K)]
        if np.any(anchor < 1.0 - epsilon - SIMPLEX_TOL):
            raise ValueError("rows violate anchor dominance for the given epsilon")
    d = directed_margins(W)
    out = np.maximum(d, d.T)
    np.fill_diagonal(out, np.nan)
    return out


def hull_intersection_oracle(W_k, W_l, tol: float = 1e-9) -> bool:
    """Decide whether ``conv(rows of W_k)`` and ``conv(rows of W_l)`` meet.

    Solves ``min ||lam^T W_k - mu^T W_l||_1`` over ``lam, mu`` on the simplex
    as a linear program; the hulls intersect iff the optimum is (numerically)
    zero.
    """
    Wk = np.asarray(W_k, dtype=float)
    Wl = np.asarray(W_l, dtype=float)
    _check_rows_on_simplex(Wk)
    _check_rows_on_simplex(Wl)
    rk, c = Wk.shape
    rl = Wl.shape[0]
    # variables: lam (rk), mu (rl), pos (c), neg (c)
    nv = rk + rl + 2 * c
    cost = np.zeros(nv)
    cost[rk + rl:] = 1.0
    A_eq = np.zeros((c + 2, nv))
    A_eq[:c, :rk] = Wk.T
    A_eq[:c, rk:rk + rl] = -Wl.T
    A_eq[:c, rk + rl:rk + rl + c] = -np.eye(c)
    A_eq[:c, rk + rl + c:] = np.eye(c)
    A_eq[c, :rk] = 1.0
    A_eq[c + 1, rk:rk + rl] = 1.0
    b_eq = np.zeros(c + 2)
    b_eq[c:] = 1.0
    res = linprog(cost, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"intersection LP failed: {res.message}")
    return bool(res.fun <= tol)


def effective_log_volume(B_k, tol: float = 1e-6) -> tuple[float, int]:
    """Sum of log singular values above ``tol`` of the centred vertex matrix,
    and the number of such values (the effective rank)."""
    B = np.asarray(B_k, dtype=float)
    centred = B - B.mean(axis=0)
    sv = np.linalg.svd(centred, compute_uv=False)
    kept = sv[sv > tol]
    return float(np.sum(np.log(kept))), int(len(kept))


def singular_spectrum(B_k) -> np.ndarray:
    return np.linalg.svd(np.asarray(B_k, dtype=float), compute_uv=False)


@dataclass
class GeometryReport:
    pairwise_margin: np.ndarray
    min_margin: float
    per_hull: list = field(default_factory=list)
    lipschitz_bound: float | None = None

    def to_dict(self) -> dict:
        margin = [[None if np.isnan(x) else float(x) for x in row]
                  for row in self.pairwise_margin]
        return {
            "pairwise_margin": margin,
            "min_margin": self.min_margin if np.isfinite(self.min_margin) else None,
            "per_hull": [
                {
                    "singular_values": [float(x) for x in h["singular_values"]],
                    "effective_log_volume": h["effective_log_volume"],
                    "effective_rank": h["effective_rank"],
                }
                for h in self.per_hull
            ],
            "lipschitz_bound": self.lipschitz_bound,
        }


def geometry_report(state: ModelState, deg_max: int | None = None,
                    tol: float = 1e-6) -> GeometryReport:
    from .inference import lipschitz_bound

    margins = disjointness_certificate(state.W_tilde)
    off = margins[~np.isnan(margins)]
    per_hull = []
    for Bk in state.B:
        logvol, rank = effective_log_volume(Bk, tol)
        per_hull.append({
            "singular_values": singular_spectrum(Bk),
            "effective_log_volume": logvol,
            "effective_rank": rank,
        })
    bound = None
    if deg_max is not None and state.hyperparams is not None:
        bound = lipschitz_bound(state.s, state.hyperparams.sigma_max, deg_max)
    return GeometryReport(
        pairwise_margin=margins,
        min_margin=float(off.min()) if off.size else float("inf"),
        per_hull=per_hull,
        lipschitz_bound=bound,
    )


def near_zero_fraction(state: ModelState, threshold: float = 1e-3) -> float:
    """Fraction of local-hull singular values below ``threshold``."""
    sv = np.concatenate([singular_spectrum(Bk) for Bk in state.B])
    return float(np.mean(sv < threshold))
