import itertools

import numpy as np
import pytest

from graphhull.diagnostics import (GeometryReport, disjointness_certificate,
                                   effective_log_volume, geometry_report,
                                   hull_intersection_oracle, near_zero_fraction,
                                   singular_spectrum)
from graphhull.generator import sample_barycentric_hulls, sample_state
from graphhull.inference import lipschitz_bound
from graphhull.params import Hyperparams, assemble_hulls


def test_certificate_bound_and_shape():
    hp = Hyperparams(K=4, D=4, epsilon=0.45)
    W = sample_barycentric_hulls(hp, np.random.default_rng(0))
    cert = disjointness_certificate(W, epsilon=0.45)
    assert np.all(np.isnan(np.diag(cert)))
    off = cert[~np.eye(4, dtype=bool)]
    assert np.all(off >= 0.1 - 1e-12)
    assert np.array_equal(np.nan_to_num(cert), np.nan_to_num(cert.T))


def test_certificate_fails_outside_identifiable_regime():
    K, eps = 3, 0.6
    q = np.full((K, K - 1, K - 1), 0.5)
    # t = 1 on every row; hull 0 leans fully towards anchor 1 and vice versa
    q[0] = [1.0, 0.0]
    q[1] = [1.0, 0.0]
    W = assemble_hulls(np.full((K, K - 1), eps), q)
    cert = disjointness_certificate(W)
    assert cert[0, 1] <= 0


def test_certificate_rejects_off_simplex_rows():
    W = np.stack([np.eye(2), np.eye(2)])
    W[0, 0, 0] = 0.9
    with pytest.raises(ValueError, match="simplex"):
        disjointness_certificate(W)
    good = assemble_hulls(np.full((2, 1), 0.6), np.ones((2, 1, 1)))
    with pytest.raises(ValueError, match="anchor"):
        disjointness_certificate(good, epsilon=0.45)


def test_oracle_identical_hulls_intersect():
    W = sample_barycentric_hulls(Hyperparams(K=3, D=3), np.random.default_rng(1))
    assert hull_intersection_oracle(W[0], W[0])


def test_oracle_anchor_dominant_hulls_are_disjoint():
    hp = Hyperparams(K=3, D=3, epsilon=0.45)
    rng = np.random.default_rng(2)
    for _ in range(50):
        W = sample_barycentric_hulls(hp, rng)
        for k, l in itertools.combinations(range(3), 2):
            assert not hull_intersection_oracle(W[k], W[l])


def test_oracle_finds_shared_centroid_with_grid_witness():
    Wk = np.array([[0.8, 0.1, 0.1], [0.1, 0.8, 0.1], [0.1, 0.1, 0.8]])
    Wl = np.array([[0.6, 0.4, 0.0], [0.0, 0.6, 0.4], [0.4, 0.0, 0.6]])
    assert hull_intersection_oracle(Wk, Wl)
    # witness: both triangles contain the barycentre (1/3, 1/3, 1/3)
    grid = [np.array([a, b, 1 - a - b]) / 1.0
            for a in np.linspace(0, 1, 31) for b in np.linspace(0, 1, 31) if a + b <= 1 + 1e-12]
    pts_k = np.array([lam @ Wk for lam in grid])
    pts_l = np.array([mu @ Wl for mu in grid])
    dist = np.min(np.linalg.norm(pts_k[:, None] - pts_l[None], axis=2))
    assert dist < 1e-12


def test_soundness_over_epsilons():
    rng = np.random.default_rng(3)
    for eps in (0.1, 0.3, 0.45, 0.49):
        hp = Hyperparams(K=3, D=3, epsilon=eps)
        for _ in range(250):
            W = sample_barycentric_hulls(hp, rng)
            cert = disjointness_certificate(W)
            for k, l in itertools.combinations(range(3), 2):
                if cert[k, l] > 0:
                    assert not hull_intersection_oracle(W[k], W[l])


def test_effective_log_volume_examples():
    assert effective_log_volume(np.ones((3, 2))) == (0.0, 0)
    logvol, rank = effective_log_volume(np.eye(2))
    assert rank == 1 and logvol == pytest.approx(0.0, abs=1e-15)


def test_effective_log_volume_gram_oracle():
    rng = np.random.default_rng(4)
    B = rng.standard_normal((4, 6))
    C = B - B.mean(0)
    lam = np.linalg.eigvalsh(C @ C.T)
    lam = lam[lam > 1e-12]
    logvol, rank = effective_log_volume(B)
    assert rank == 3  # centring removes one dimension
    assert logvol == pytest.approx(0.5 * np.sum(np.log(lam)), abs=1e-9)


def test_singular_spectrum_examples():
    Q, _ = np.linalg.qr(np.random.default_rng(5).standard_normal((5, 3)))
    assert np.allclose(singular_spectrum(Q.T), 1.0)
    u = np.array([0.6, 0.8, 0.0])
    assert np.allclose(singular_spectrum(np.tile(u, (3, 1))), [np.sqrt(3), 0, 0], atol=1e-12)
    B = np.random.default_rng(6).standard_normal((3, 4))
    gram = np.sqrt(np.clip(np.sort(np.linalg.eigvalsh(B @ B.T))[::-1], 0, None))
    assert np.allclose(singular_spectrum(B), gram, atol=1e-10)


def test_geometry_report_fields():
    hp = Hyperparams(K=3, D=4)
    st, _ = sample_state(hp, 10, seed=0)
    rep = geometry_report(st, deg_max=5)
    assert isinstance(rep, GeometryReport)
    assert rep.min_margin >= 0.1
    assert rep.lipschitz_bound == lipschitz_bound(st.s, hp.sigma_max, 5)
    assert all(h["effective_rank"] <= min(3, 4) for h in rep.per_hull)
    d = rep.to_dict()
    assert d["pairwise_margin"][0][0] is None and len(d["per_hull"]) == 3


def test_degenerate_hull_reports_rank_drop():
    hp = Hyperparams(K=3, D=3)
    st, _ = sample_state(hp, 5, seed=1)
    st.B = st.B.copy()
    st.B[0] = np.tile(st.B[0][0], (3, 1))  # duplicate prototypes
    rep = geometry_report(st)
    assert rep.per_hull[0]["effective_rank"] == 0
    assert rep.per_hull[1]["effective_rank"] == 2
    assert near_zero_fraction(st) == pytest.approx(2 / 9)


def test_volume_grows_with_epsilon():
    means = []
    for eps in (0.05, 0.15, 0.25, 0.35, 0.45):
        hp = Hyperparams(K=3, D=3, epsilon=eps)
        vols = [effective_log_volume(Bk)[0]
                for seed in range(20) for Bk in sample_state(hp, 1, seed)[0].B]
        means.append(np.mean(vols))
    assert np.all(np.diff(means) >= 0)
