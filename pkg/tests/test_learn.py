import numpy as np
import pytest

from qrphase.learn import (GmmModel, InitMode, TsneConfig, bic_scan, bic_score,
                           calibrate_sigmas, conditional_probabilities,
                           detect_transitions, gmm_fit, joint_probabilities,
                           kl_divergence, kl_gradient, low_dim_affinities,
                           pairwise_sq_dists, pca, select_k, silhouette,
                           smooth_width1_islands, standardize, tsne)


def blobs(rng, centers, n_per, spread=0.5, dim=2):
    parts = [rng.normal(c, spread, (n_per, dim)) for c in centers]
    X = np.vstack(parts)
    labels = np.repeat(np.arange(len(centers)), n_per)
    return X, labels


# ------------------------------------------------------------- standardize

def test_standardize_constant_column_zeroed():
    X = np.array([[1.0, 0.0], [1.0, 2.0], [1.0, 4.0]])
    out = standardize(X)
    assert np.allclose(out[:, 0], 0.0)
    assert abs(out[:, 1].mean()) < 1e-12
    assert abs(out[:, 1].std() - 1.0) < 1e-12


def test_standardize_two_points():
    out = standardize(np.array([[0.0], [2.0]]))
    assert np.allclose(out[:, 0], [-1.0, 1.0])


def test_standardize_moments():
    rng = np.random.default_rng(0)
    X = rng.normal(3.0, 2.5, (40, 6))
    out = standardize(X)
    assert np.abs(out.mean(axis=0)).max() < 1e-12
    assert np.abs(out.std(axis=0) - 1.0).max() < 1e-12


def test_standardize_needs_rows():
    with pytest.raises(ValueError):
        standardize(np.ones((1, 3)))


# ------------------------------------------------------------- pca

def test_pca_collinear_points():
    t = np.linspace(0, 1, 10)
    X = np.column_stack([1 + 2 * t, 3 - t])
    proj, comps, ev = pca(X, 2)
    assert ev[0] > 0 and ev[1] < 1e-24
    assert np.allclose(comps @ comps.T, np.eye(2), atol=1e-10)


def test_pca_reconstruction_at_full_rank():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(12, 3))
    proj, comps, ev = pca(X, 3)
    Xc = X - X.mean(axis=0)
    assert np.abs(proj @ comps - Xc).max() < 1e-10
    assert np.all(np.diff(ev) <= 1e-12)


def test_pca_k_too_large():
    with pytest.raises(ValueError):
        pca(np.zeros((4, 2)), 4)


# ------------------------------------------------------------- sigmas / P / Q

def test_calibrate_sigmas_hits_perplexity():
    pts = np.array([[0.0], [1.0], [2.0], [3.0]])
    D = pairwise_sq_dists(pts)
    sigmas = calibrate_sigmas(D, perplexity=2.0)
    P = conditional_probabilities(D, sigmas)
    for i in range(4):
        p = P[i][P[i] > 0]
        H = -(p * np.log2(p)).sum()
        assert abs(2.0 ** H - 2.0) <= 1e-5 + 1e-9


def test_calibrate_sigmas_scaling_property():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(12, 4))
    D = pairwise_sq_dists(X)
    s1 = calibrate_sigmas(D, 4.0)
    c = 3.7
    s2 = calibrate_sigmas(c * c * D, 4.0)
    assert np.abs(s2 / s1 - c).max() < 1e-6


def test_calibrate_sigmas_duplicates_terminate():
    pts = np.array([[0.0], [0.0], [0.0], [5.0], [5.0], [9.0]])
    D = pairwise_sq_dists(pts)
    sigmas = calibrate_sigmas(D, perplexity=1.5)
    assert np.all(np.isfinite(sigmas))


def test_calibrate_sigmas_all_equal_unreachable_raises():
    D = np.ones((4, 4)) - np.eye(4)  # all neighbors equidistant: 2^H fixed at 3
    with pytest.raises(ValueError):
        calibrate_sigmas(D, perplexity=1.2)


def test_conditional_rows_normalized():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(15, 5))
    D = pairwise_sq_dists(X)
    P = conditional_probabilities(D, calibrate_sigmas(D, 4.0))
    assert np.abs(P.sum(axis=1) - 1.0).max() < 1e-12
    assert np.all(np.diag(P) == 0.0)


def test_joint_probabilities_contract():
    rng = np.random.default_rng(4)
    P = joint_probabilities(rng.normal(size=(30, 6)), perplexity=8.0)
    assert np.abs(P - P.T).max() < 1e-15
    assert abs(P.sum() - 1.0) < 1e-10
    assert np.all(P >= 0.0) and np.all(np.diag(P) == 0.0)


def test_low_dim_affinities_contract():
    rng = np.random.default_rng(5)
    Q, qnum = low_dim_affinities(rng.normal(size=(20, 2)))
    assert abs(Q.sum() - 1.0) < 1e-10
    assert np.all(np.diag(Q) == 0.0) and np.all(np.diag(qnum) == 0.0)


def test_kl_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    for _ in range(5):
        X = rng.normal(size=(8, 5))
        P = joint_probabilities(X, 2.0)
        Y = rng.normal(size=(8, 2))
        grad = kl_gradient(P, Y)
        step = 1e-6
        num = np.zeros_like(Y)
        for i in range(8):
            for j in range(2):
                Yp, Ym = Y.copy(), Y.copy()
                Yp[i, j] += step
                Ym[i, j] -= step
                num[i, j] = (kl_divergence(P, Yp) - kl_divergence(P, Ym)) / (2 * step)
        rel = np.abs(grad - num).max() / np.abs(num).max()
        assert rel < 1e-4


# ------------------------------------------------------------- tsne

def test_tsne_separates_far_blobs():
    rng = np.random.default_rng(7)
    X, labels = blobs(rng, [np.zeros(10), np.full(10, 50.0)], 50, spread=1.0, dim=10)
    emb = tsne(X, TsneConfig(perplexity=30.0, seed=0))
    assert silhouette(emb.points, labels) > 0.8


def test_tsne_descends_from_initialization():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(40, 5))
    cfg = TsneConfig(perplexity=8.0, seed=0)
    emb = tsne(X, cfg)
    P = joint_probabilities(X, cfg.perplexity)
    proj, _, _ = pca(X, 2)
    Y0 = proj * (1e-4 / proj[:, 0].std())
    assert emb.final_kl < kl_divergence(P, Y0)
    assert emb.final_kl >= 0.0


def test_tsne_deterministic_with_pca_init():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(25, 4))
    a = tsne(X, TsneConfig(perplexity=6.0, seed=0))
    b = tsne(X, TsneConfig(perplexity=6.0, seed=0))
    assert np.array_equal(a.points, b.points)
    assert a.final_kl == b.final_kl


def test_tsne_random_init_seeded():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(20, 4))
    a = tsne(X, TsneConfig(perplexity=5.0, seed=3, init=InitMode.RANDOM))
    b = tsne(X, TsneConfig(perplexity=5.0, seed=3, init=InitMode.RANDOM))
    assert np.array_equal(a.points, b.points)


def test_tsne_input_validation():
    rng = np.random.default_rng(11)
    with pytest.raises(ValueError):
        tsne(rng.normal(size=(3, 2)), TsneConfig())          # too few rows
    with pytest.raises(ValueError):
        tsne(rng.normal(size=(10, 2)), TsneConfig(perplexity=3.0))  # perp >= (n-1)/3


# ------------------------------------------------------------- gmm

def test_gmm_k1_closed_form():
    rng = np.random.default_rng(12)
    X = rng.normal(size=(30, 2))
    model = gmm_fit(X, 1, seed=0)
    assert np.allclose(model.means[0], X.mean(axis=0), atol=1e-10)
    cov = np.cov(X.T, bias=True) + 1e-6 * np.eye(2)
    assert np.allclose(model.covariances[0], cov, atol=1e-10)
    assert np.allclose(model.weights, [1.0])


def test_gmm_two_blobs_confident():
    rng = np.random.default_rng(13)
    X, labels = blobs(rng, [(0, 0), (30, 30)], 40)
    model = gmm_fit(X, 2, seed=0)
    own = model.responsibilities[np.arange(80), :].max(axis=1)
    assert np.all(own > 0.99)
    hard = np.argmax(model.responsibilities, axis=1)
    assert len(set(zip(labels.tolist(), hard.tolist()))) == 2  # consistent mapping


def test_gmm_loglik_monotone():
    rng = np.random.default_rng(14)
    X, _ = blobs(rng, [(0, 0), (6, 6), (-6, 5)], 40)
    for k in (1, 2, 3, 4):
        model = gmm_fit(X, k, seed=1)
        drops = np.diff(model.ll_trace)
        assert drops.size == 0 or drops.min() > -1e-10


def test_gmm_invariants():
    rng = np.random.default_rng(15)
    X, _ = blobs(rng, [(0, 0), (8, 2)], 30)
    model = gmm_fit(X, 3, seed=2)
    assert abs(model.weights.sum() - 1.0) < 1e-12
    assert np.abs(model.responsibilities.sum(axis=1) - 1.0).max() < 1e-12
    for cov in model.covariances:
        assert np.linalg.eigvalsh(cov)[0] >= 1e-6 - 1e-12


def test_gmm_input_validation():
    rng = np.random.default_rng(16)
    with pytest.raises(ValueError):
        gmm_fit(rng.normal(size=(5, 2)), 3, seed=0)  # n < 2k
    with pytest.raises(ValueError):
        gmm_fit(rng.normal(size=(5, 2)), 0, seed=0)


def test_gmm_pathological_duplicates_survive():
    X = np.repeat(np.array([[0.0, 0.0], [10.0, 10.0]]), 5, axis=0)
    model = gmm_fit(X, 2, seed=0)
    assert np.isfinite(model.log_likelihood)
    assert model.n_reinits >= 0


# ------------------------------------------------------------- bic / select_k

def test_bic_formula():
    model = GmmModel(k=3, weights=np.full(3, 1 / 3), means=np.zeros((3, 2)),
                     covariances=np.array([np.eye(2)] * 3), log_likelihood=-123.4,
                     responsibilities=np.full((50, 3), 1 / 3))
    expected = -2 * (-123.4) + (3 - 1 + 2 * 3 + 3 * 3) * np.log(50)
    assert abs(bic_score(model, 50) - expected) < 1e-12


def test_select_k_single_blob():
    rng = np.random.default_rng(17)
    X = rng.normal(size=(60, 2))
    assert select_k(X, 5, seed=0) == 1


def test_select_k_three_far_blobs():
    rng = np.random.default_rng(18)
    X, _ = blobs(rng, [(0, 0), (50, 0), (0, 50)], 30, spread=1.0)
    assert select_k(X, 6, seed=0) == 3


# ------------------------------------------------------------- transitions

def _model_from_responsibilities(resp):
    resp = np.asarray(resp, dtype=float)
    k = resp.shape[1]
    return GmmModel(k=k, weights=np.full(k, 1 / k), means=np.zeros((k, 2)),
                    covariances=np.array([np.eye(2)] * k), log_likelihood=0.0,
                    responsibilities=resp)


def test_detect_transitions_single_switch():
    resp = np.array([[1, 0], [1, 0], [1, 0], [0, 1], [0, 1]], dtype=float)
    tset = detect_transitions(_model_from_responsibilities(resp), [0, 1, 2, 3, 4])
    assert tset.transitions == [(2.5, 0, 1)]


def test_detect_transitions_constant_labels():
    resp = np.tile([1.0, 0.0], (5, 1))
    tset = detect_transitions(_model_from_responsibilities(resp), [0, 1, 2, 3, 4])
    assert tset.transitions == []


def test_detect_transitions_width1_island_smoothed():
    resp = np.array([[1, 0], [1, 0], [0, 1], [1, 0], [1, 0]], dtype=float)
    tset = detect_transitions(_model_from_responsibilities(resp), [0, 1, 2, 3, 4])
    assert tset.transitions == []
    assert np.array_equal(tset.labels, np.zeros(5, dtype=int))


def test_detect_transitions_relabeling_invariance():
    rng = np.random.default_rng(19)
    resp = rng.dirichlet(np.ones(3), size=30)
    grid = np.arange(30.0)
    t1 = detect_transitions(_model_from_responsibilities(resp), grid)
    perm = [2, 0, 1]
    t2 = detect_transitions(_model_from_responsibilities(resp[:, perm]), grid)
    assert [t[0] for t in t1.transitions] == [t[0] for t in t2.transitions]


def test_detect_transitions_grid_validation():
    resp = np.tile([1.0, 0.0], (3, 1))
    with pytest.raises(ValueError):
        detect_transitions(_model_from_responsibilities(resp), [0, 0, 1])
    with pytest.raises(ValueError):
        detect_transitions(_model_from_responsibilities(resp), [0, 1])


def test_smooth_width1_ends_untouched():
    labels = np.array([1, 0, 0, 0, 1])
    assert np.array_equal(smooth_width1_islands(labels), labels)


# ------------------------------------------------------------- silhouette

def test_silhouette_far_blobs():
    rng = np.random.default_rng(20)
    X, labels = blobs(rng, [(0, 0), (40, 0)], 30)
    assert silhouette(X, labels) > 0.8


def test_silhouette_random_labels_near_zero():
    rng = np.random.default_rng(21)
    X = rng.normal(size=(60, 2))
    for seed in range(50):
        labels = np.random.default_rng(seed).integers(0, 2, size=60)
        if len(np.unique(labels)) < 2:
            continue
        assert abs(silhouette(X, labels)) < 0.2


def test_silhouette_identical_points_zero_convention():
    X = np.zeros((6, 2))
    labels = np.array([0, 1, 0, 1, 0, 1])
    assert silhouette(X, labels) == 0.0


def test_silhouette_single_cluster_errors():
    with pytest.raises(ValueError):
        silhouette(np.zeros((4, 2)), np.zeros(4, dtype=int))
