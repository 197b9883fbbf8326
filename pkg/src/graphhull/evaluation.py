"""Link-prediction and community-detection metrics, plus plot-ready layouts."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import rankdata

from .graph import Graph
from .objective import edge_logit
from .params import ModelState


@dataclass
class MetricsReport:
    auc_roc: float
    auc_pr: float
    n_test_pairs: int
    nmi: float | None = None
    ari: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def link_scores(state: ModelState, pairs) -> np.ndarray:
    """Edge probabilities ``logistic(eta_ij)`` straight from the model."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    n = state.n_nodes
    bad = (pairs < 0) | (pairs >= n)
    if bad.any():
        row = int(np.flatnonzero(bad.any(axis=1))[0])
        i, j = pairs[row].tolist()
        raise IndexError(f"pair ({i}, {j}) has a node outside [0, {n})")
    i, j = pairs[:, 0], pairs[:, 1]
    eta = edge_logit(state.Z[i], state.Z[j], state.g[i], state.g[j], state.s)
    return expit(eta)


def _check_binary(scores, labels):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    if labels.all() or not labels.any():
        raise ValueError("both positive and negative labels are required")
    return scores, labels


def auc_roc(scores, labels) -> float:
    """Mann-Whitney rank statistic; tied scores count one half."""
    scores, labels = _check_binary(scores, labels)
    ranks = rankdata(scores)
    n_pos = labels.sum()
    n_neg = len(labels) - n_pos
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def auc_pr(scores, labels) -> float:
    """Step-wise area under the precision-recall curve (average precision).

    Tied scores form a single threshold; precision is taken at each achieved
    recall level with no interpolation.
    """
    scores, labels = _check_binary(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    last_of_tie = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tp = np.cumsum(y)[last_of_tie]
    fp = (last_of_tie + 1) - tp
    precision = tp / (tp + fp)
    recall = tp / y.sum()
    d_recall = np.diff(np.r_[0.0, recall])
    return float(np.sum(d_recall * precision))


def _contingency(pred, truth) -> np.ndarray:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError("label vectors must have equal length")
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1)) if len(p) else np.zeros((0, 0))
    np.add.at(table, (p, t), 1.0)
    return table


def _entropy(counts) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth) -> float:
    """Normalised mutual information with arithmetic-mean normalisation."""
    table = _contingency(pred, truth)
    n = table.sum()
    if n == 0:
        raise ValueError("empty label vectors")
    h_p, h_t = _entropy(table.sum(1)), _entropy(table.sum(0))
    if h_p == 0 and h_t == 0:
        return 1.0
    nz = table > 0
    outer = np.outer(table.sum(1), table.sum(0))
    mi = float(np.sum(table[nz] / n * np.log(n * table[nz] / outer[nz])))
    denom = 0.5 * (h_p + h_t)
    return float(np.clip(mi / denom, 0.0, 1.0))


def ari(pred, truth) -> float:
    """Adjusted Rand index (Hubert-Arabie)."""
    table = _contingency(pred, truth)
    n = table.sum()

    def comb2(x):
        return x * (x - 1) / 2.0

    index = comb2(table).sum()
    a = comb2(table.sum(1)).sum()
    b = comb2(table.sum(0)).sum()
    expected = a * b / comb2(n) if n > 1 else 0.0
    max_index = 0.5 * (a + b)
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))


def evaluate_links(state: ModelState, positives, negatives) -> MetricsReport:
    pos = np.asarray(positives, dtype=np.int64).reshape(-1, 2)
    neg = np.asarray(negatives, dtype=np.int64).reshape(-1, 2)
    scores = link_scores(state, np.concatenate([pos, neg]))
    labels = np.r_[np.ones(len(pos), bool), np.zeros(len(neg), bool)]
    return MetricsReport(auc_roc=auc_roc(scores, labels), auc_pr=auc_pr(scores, labels),
                         n_test_pairs=len(labels))


def reorder_adjacency(g: Graph, state: ModelState) -> np.ndarray:
    """Node order: by hull, then by dominant prototype, then by node id."""
    n = g.n_nodes
    proto = np.argmax(state.Omega, axis=1)
    return np.lexsort((np.arange(n), proto, np.asarray(state.assignments)))


def pca_project(points, dims: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Project onto the leading principal directions.

    Each direction is signed so its largest-magnitude loading is positive.
    Returns the projected points and the explained variances (eigenvalues of
    the sample covariance).
    """
    X = np.asarray(points, dtype=float)
    if X.shape[0] < 2:
        raise ValueError("PCA needs at least two points")
    Xc = X - X.mean(axis=0)
    _, sv, vt = np.linalg.svd(Xc, full_matrices=False)
    comps = vt[:dims]
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(len(comps)), pivot])
    signs[signs == 0] = 1.0
    comps = comps * signs[:, None]
    var = sv[:dims] ** 2 / (X.shape[0] - 1)
    proj = Xc @ comps.T
    if proj.shape[1] < dims:
        pad = dims - proj.shape[1]
        proj = np.hstack([proj, np.zeros((len(proj), pad))])
        var = np.r_[var, np.zeros(pad)]
    return proj, var


def circular_membership_layout(Omega_block) -> tuple[np.ndarray, np.ndarray]:
    """Place prototype ``r`` at angle ``2 pi r / K`` and each node at the
    barycentre of its weights. Returns ``(node_xy, prototype_xy)``."""
    Omega = np.asarray(Omega_block, dtype=float)
    K = Omega.shape[1]
    angles = 2 * np.pi * np.arange(K) / K
    anchors = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return Omega @ anchors, anchors


def hull_layouts(state: ModelState) -> list[dict]:
    """Per-hull circular layouts of the member nodes."""
    out = []
    for k in range(state.K):
        members = np.flatnonzero(np.asarray(state.assignments) == k)
        xy, anchors = circular_membership_layout(state.Omega[members].reshape(-1, state.K))
        out.append({"hull": k, "nodes": members, "xy": xy, "prototypes": anchors})
    return out
