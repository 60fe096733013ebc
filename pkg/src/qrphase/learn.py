"""Unsupervised analysis: standardization, PCA, exact t-SNE, Gaussian
mixtures fitted with EM, BIC model selection, silhouette scoring and
transition detection on an ordered parameter grid.

The t-SNE here is the exact O(N^2) algorithm: per-point bandwidths from
a perplexity binary search, symmetrized joint probabilities, Student-t
low-dimensional affinities, KL gradient descent with momentum and early
exaggeration. Grids are small (tens to ~1500 points), so no tree
approximation is used and every piece is unit-testable against brute
force.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

P_FLOOR = 1e-12
_MOMENTUM_SWITCH = 250
_INIT_SCALE = 1e-4


class InitMode(str, Enum):
    PCA = "PCA"
    RANDOM = "RANDOM"


@dataclass
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    seed: int = 0
    init: InitMode = InitMode.PCA

    def __post_init__(self):
        self.init = InitMode(self.init)
        if self.perplexity <= 0 or self.learning_rate <= 0:
            raise ValueError("perplexity and learning_rate must be positive")


@dataclass
class Embedding2D:
    points: np.ndarray
    final_kl: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if not np.all(np.isfinite(self.points)) or not np.isfinite(self.final_kl):
            raise ValueError("embedding contains non-finite values")
        if self.final_kl < -1e-12:
            raise ValueError("KL divergence cannot be negative")


@dataclass
class GmmModel:
    k: int
    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    log_likelihood: float
    responsibilities: np.ndarray
    n_reinits: int = 0
    ll_trace: list = field(default_factory=list, repr=False)


@dataclass
class TransitionSet:
    transitions: list          # [(grid value at midpoint, from_label, to_label)]
    labels: np.ndarray         # per-point argmax labels after island smoothing


def _as_matrix(F) -> np.ndarray:
    values = getattr(F, "values", F)
    X = np.asarray(values, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-D feature matrix")
    return X


def standardize(F):
    """Zero-mean, unit-variance columns; constant columns become all zeros."""
    X = _as_matrix(F)
    if X.shape[0] < 2:
        raise ValueError("standardize needs at least 2 rows")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    out = np.where(std < 1e-12, 0.0, (X - mean) / np.where(std < 1e-12, 1.0, std))
    if hasattr(F, "values") and hasattr(F, "grid"):
        from .measurement import FeatureMatrix
        return FeatureMatrix(out, list(F.grid), F.L, F.include_zzz)
    return out


def pca(F, k: int):
    """(projections, components, explained_variance) of the centered data."""
    X = _as_matrix(F)
    n, m = X.shape
    if k > min(n - 1, m):
        raise ValueError(f"k={k} exceeds min(rows-1, cols)={min(n - 1, m)}")
    Xc = X - X.mean(axis=0)
    _, svals, vt = np.linalg.svd(Xc, full_matrices=False)
    components = vt[:k]
    for row in components:  # deterministic sign: largest entry positive
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    projections = Xc @ components.T
    explained = (svals[:k] ** 2) / max(n - 1, 1)
    return projections, components, explained


# --------------------------------------------------------------------------
# t-SNE
# --------------------------------------------------------------------------

def pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    sq = np.sum(X ** 2, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.clip(D, 0.0, None, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def _row_entropy_bits(d: np.ndarray, beta: float):
    """Shannon entropy (bits) and probabilities of exp(-beta*d)/Z."""
    logits = -beta * (d - d.min())
    p = np.exp(logits)
    z = p.sum()
    p /= z
    avg_d = float(p @ (d - d.min()))
    h_nats = np.log(z) + beta * avg_d
    return h_nats / np.log(2.0), p


def calibrate_sigmas(D: np.ndarray, perplexity: float, tol: float = 1e-5,
                     max_steps: int = 64) -> np.ndarray:
    """Per-point bandwidths: bisect log10(sigma) in [-10, 10] until the
    conditional distribution's effective neighbor count 2^H hits the
    perplexity within tol.

    Rows whose off-diagonal distances are all equal have sigma-independent
    entropy; if such a row cannot reach the target it is reported as an
    error. Rows with duplicate points return the best achievable sigma.
    """
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    sigmas = np.empty(n)
    for i in range(n):
        d = np.delete(D[i], i)
        lo, hi = -10.0, 10.0
        best_sigma, best_miss = 1.0, np.inf
        for _ in range(max_steps):  # full budget: resolves sigma itself, not just 2^H
            mid = 0.5 * (lo + hi)
            sigma = 10.0 ** mid
            h_bits, _ = _row_entropy_bits(d, 1.0 / (2.0 * sigma * sigma))
            miss = 2.0 ** h_bits - perplexity
            if abs(miss) < best_miss:
                best_miss, best_sigma = abs(miss), sigma
            if miss > 0:  # entropy too high -> shrink sigma
                hi = mid
            else:
                lo = mid
        sigmas[i] = best_sigma
        if best_miss > 1e-3 and np.ptp(d) < 1e-12 * max(1.0, float(d.max())):
            raise ValueError(
                f"row {i}: all neighbor distances equal, perplexity {perplexity} "
                f"unreachable (2^H is fixed at {len(d)})")
    return sigmas


def conditional_probabilities(D: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """p_{j|i} rows from squared distances and per-point bandwidths."""
    n = D.shape[0]
    P = np.zeros((n, n))
    for i in range(n):
        d = np.delete(D[i], i)
        _, p = _row_entropy_bits(d, 1.0 / (2.0 * sigmas[i] ** 2))
        P[i, np.arange(n) != i] = p
    return P


def joint_probabilities(X: np.ndarray, perplexity: float) -> np.ndarray:
    """Symmetrized, floored and renormalized joint probabilities.

    The floor (P_FLOOR on off-diagonal entries) is applied before a final
    renormalization so the matrix still sums to 1 exactly; the diagonal
    stays 0.
    """
    D = pairwise_sq_dists(np.asarray(X, dtype=np.float64))
    sigmas = calibrate_sigmas(D, perplexity)
    Pc = conditional_probabilities(D, sigmas)
    n = D.shape[0]
    P = (Pc + Pc.T) / (2.0 * n)
    off = ~np.eye(n, dtype=bool)
    P[off] = np.maximum(P[off], P_FLOOR)
    P /= P.sum()
    return P


def low_dim_affinities(Y: np.ndarray):
    """(Q, qnum): Student-t joint probabilities and unnormalized kernel."""
    qnum = 1.0 / (1.0 + pairwise_sq_dists(Y))
    np.fill_diagonal(qnum, 0.0)
    Q = qnum / qnum.sum()
    return Q, qnum


def kl_divergence(P: np.ndarray, Y: np.ndarray) -> float:
    Q, _ = low_dim_affinities(Y)
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / np.maximum(Q[mask], P_FLOOR))))


def kl_gradient(P: np.ndarray, Y: np.ndarray) -> np.ndarray:
    Q, qnum = low_dim_affinities(Y)
    W = (P - Q) * qnum
    # 4 * sum_j W_ij (y_i - y_j) = 4 * (diag(row sums) - W) @ Y
    return 4.0 * ((np.diag(W.sum(axis=1)) - W) @ Y)


def tsne(F, cfg: TsneConfig | None = None) -> Embedding2D:
    """Exact 2-D t-SNE embedding of the feature rows."""
    cfg = cfg or TsneConfig()
    X = _as_matrix(F)
    n = X.shape[0]
    if n < 4:
        raise ValueError("t-SNE needs at least 4 points")
    if cfg.perplexity >= (n - 1) / 3.0:
        raise ValueError(
            f"perplexity {cfg.perplexity} must be < (n-1)/3 = {(n - 1) / 3:.2f}")

    P = joint_probabilities(X, cfg.perplexity)

    if cfg.init is InitMode.PCA:
        proj, _, _ = pca(X, min(2, min(n - 1, X.shape[1])))
        if proj.shape[1] < 2:
            proj = np.column_stack([proj, np.zeros(n)])
        spread = proj[:, 0].std()
        Y = proj * (_INIT_SCALE / spread) if spread > 0 else _random_init(n, cfg.seed)
    else:
        Y = _random_init(n, cfg.seed)

    update = np.zeros_like(Y)
    gains = np.ones_like(Y)
    for it in range(cfg.iterations):
        Pe = P * cfg.early_exaggeration if it < cfg.exaggeration_iters else P
        grad = kl_gradient(Pe, Y)
        if not np.all(np.isfinite(grad)):
            raise FloatingPointError(
                f"non-finite t-SNE gradient at iteration {it}; "
                f"max |Y| = {np.abs(Y).max():.3e}")
        momentum = 0.5 if it < _MOMENTUM_SWITCH else 0.8
        # van der Maaten adaptive per-parameter gains; learning rate 200
        # is calibrated against this update rule
        same_sign = (grad > 0) == (update > 0)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.clip(gains, 0.01, None, out=gains)
        update = momentum * update - cfg.learning_rate * gains * grad
        Y = Y + update
        Y = Y - Y.mean(axis=0)

    return Embedding2D(points=Y, final_kl=kl_divergence(P, Y))


def _random_init(n: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(seed))
    return _INIT_SCALE * rng.standard_normal((n, 2))


# --------------------------------------------------------------------------
# Gaussian mixture via EM
# --------------------------------------------------------------------------

def _log_gaussians(X: np.ndarray, means: np.ndarray, covs: np.ndarray) -> np.ndarray:
    n, d = X.shape
    k = means.shape[0]
    out = np.empty((n, k))
    for j in range(k):
        chol = np.linalg.cholesky(covs[j])
        diff = (X - means[j]).T
        y = np.linalg.solve(chol, diff)
        out[:, j] = (-0.5 * d * np.log(2 * np.pi)
                     - np.log(np.diag(chol)).sum()
                     - 0.5 * np.sum(y * y, axis=0))
    return out


def _logsumexp_rows(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(a - m).sum(axis=1, keepdims=True)))[:, 0]


def _kmeanspp_means(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    for _ in range(1, k):
        d2 = np.min(pairwise_sq_dists(X)[:, chosen], axis=1)
        total = d2.sum()
        if total <= 0:
            chosen.append(int(rng.integers(n)))
            continue
        chosen.append(int(rng.choice(n, p=d2 / total)))
    return X[chosen].copy()


def gmm_fit(E, k: int, seed: int = 0, n_restarts: int = 5, reg: float = 1e-6,
            tol: float = 1e-8, max_iter: int = 500) -> GmmModel:
    """Full-covariance GMM fitted with EM; best of n_restarts by likelihood.

    k-means++-style seeding, 1e-6 added to covariance diagonals at every
    M-step, convergence when the log-likelihood gain drops below tol.
    Components whose weight collapses below 1e-8 are re-seeded (counted
    in n_reinits).
    """
    X = _as_matrix(getattr(E, "points", E))
    n, d = X.shape
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < 2 * k:
        raise ValueError(f"need at least 2k={2 * k} points, got {n}")

    rng = np.random.Generator(np.random.Philox(seed))
    global_cov = np.cov(X.T) + reg * np.eye(d)
    best = None
    for _ in range(n_restarts):
        model = _em_once(X, k, rng, global_cov, reg, tol, max_iter)
        if best is None or model.log_likelihood > best.log_likelihood:
            best = model
    return best


def _em_once(X, k, rng, global_cov, reg, tol, max_iter) -> GmmModel:
    n, d = X.shape
    means = _kmeanspp_means(X, k, rng)
    covs = np.repeat(global_cov[None, :, :], k, axis=0)
    weights = np.full(k, 1.0 / k)
    ll_prev = -np.inf
    ll_trace: list[float] = []
    n_reinits = 0
    resp = None
    ll = ll_prev

    for _ in range(max_iter):
        logp = _log_gaussians(X, means, covs) + np.log(weights)[None, :]
        lse = _logsumexp_rows(logp)
        ll = float(lse.sum())
        resp = np.exp(logp - lse[:, None])
        ll_trace.append(ll)
        if ll - ll_prev < tol and np.isfinite(ll_prev):
            break
        ll_prev = ll

        nk = resp.sum(axis=0)
        if np.any(nk / n < 1e-8):
            for j in np.nonzero(nk / n < 1e-8)[0]:
                means[j] = X[int(rng.integers(n))]
                covs[j] = global_cov.copy()
                n_reinits += 1
                nk[j] = max(nk[j], 1e-8 * n)
            warnings.warn(f"re-seeded {n_reinits} degenerate GMM component(s)")
        weights = nk / nk.sum()
        means = (resp.T @ X) / nk[:, None]
        for j in range(k):
            diff = X - means[j]
            cov = (resp[:, j][:, None] * diff).T @ diff / nk[j]
            covs[j] = 0.5 * (cov + cov.T) + reg * np.eye(d)

    return GmmModel(k=k, weights=weights, means=means, covariances=covs,
                    log_likelihood=ll, responsibilities=resp,
                    n_reinits=n_reinits, ll_trace=ll_trace)


def bic_score(model: GmmModel, n_points: int, d: int = 2) -> float:
    """-2 logL + params ln(n); params = (k-1) + k*d + k*d(d+1)/2."""
    params = (model.k - 1) + model.k * d + model.k * d * (d + 1) // 2
    return -2.0 * model.log_likelihood + params * np.log(n_points)


def bic_scan(E, k_max: int, seed: int = 0) -> list:
    """[(k, bic, log_likelihood)] for k = 1..k_max."""
    X = _as_matrix(getattr(E, "points", E))
    out = []
    for k in range(1, k_max + 1):
        if X.shape[0] < 2 * k:
            break
        model = gmm_fit(X, k, seed=seed)
        out.append((k, float(bic_score(model, X.shape[0], X.shape[1])),
                    model.log_likelihood))
    return out


def select_k(E, k_max: int, seed: int = 0) -> int:
    """argmin-BIC component count (first k on ties)."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    scores = bic_scan(E, k_max, seed)
    best_k, _, _ = min(scores, key=lambda t: t[1])
    return best_k


# --------------------------------------------------------------------------
# transitions and cluster quality
# --------------------------------------------------------------------------

def smooth_width1_islands(labels: np.ndarray) -> np.ndarray:
    """Majority-of-3 vote removes single-point label islands (interior only)."""
    lab = np.asarray(labels).copy()
    ref = lab.copy()
    for i in range(1, len(ref) - 1):
        if ref[i] != ref[i - 1] and ref[i] != ref[i + 1] and ref[i - 1] == ref[i + 1]:
            lab[i] = ref[i - 1]
    return lab


def detect_transitions(model: GmmModel, grid) -> TransitionSet:
    """Cluster-label switches along a strictly increasing parameter grid."""
    grid = np.asarray(grid, dtype=np.float64)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if len(grid) != model.responsibilities.shape[0]:
        raise ValueError("one grid value per fitted point required")
    labels = smooth_width1_islands(np.argmax(model.responsibilities, axis=1))
    transitions = []
    for i in range(len(grid) - 1):
        if labels[i] != labels[i + 1]:
            transitions.append((float((grid[i] + grid[i + 1]) / 2.0),
                                int(labels[i]), int(labels[i + 1])))
    return TransitionSet(transitions=transitions, labels=labels)


def silhouette(points, labels) -> float:
    """Mean silhouette coefficient with the 0/0 -> 0 convention."""
    X = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    D = np.sqrt(pairwise_sq_dists(X))
    scores = np.zeros(X.shape[0])
    for i in range(X.shape[0]):
        own = labels == labels[i]
        n_own = own.sum()
        if n_own <= 1:
            scores[i] = 0.0
            continue
        a = D[i, own].sum() / (n_own - 1)
        b = min(D[i, labels == c].mean() for c in uniq if c != labels[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return float(scores.mean())
