"""Built-in oracle suite: brute-force cross-checks runnable from the CLI.

Each check rebuilds its expectation from an independent construction
(dense Kronecker products, matrix exponentials, finite differences) and
compares the production path against it.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from .groundstate import ground_state_global, lanczos_lowest, sector_basis
from .invariant import reduced_density_matrix
from .learn import (gmm_fit, joint_probabilities, kl_divergence, kl_gradient,
                    low_dim_affinities)
from .measurement import feature_vector
from .operators import ModelParams, build_hamiltonian, dense_matrix, apply_hamiltonian_vec
from .reservoir import (FloquetParams, PulseConvention, apply_x_pulse, apply_z_layer,
                        apply_zz_layer, evolve, sample_disorder)
from .states import SpinState, z_sign_table

_PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _kron_term(L, factors, coeff=1.0):
    ops = ["I"] * L
    for site, ax in factors:
        ops[site - 1] = ax
    m = _PAULI[ops[0]]
    for ax in ops[1:]:
        m = np.kron(m, _PAULI[ax])
    return coeff * m


def _kron_sum(L, axis):
    return sum(_kron_term(L, [(i, axis)]) for i in range(1, L + 1))


def _random_state(L, rng):
    v = rng.standard_normal(2 ** L) + 1j * rng.standard_normal(2 ** L)
    return v / np.linalg.norm(v)


def check_hamiltonian_dense(tol=1e-12):
    """dense_matrix and the matrix-free matvec vs independent kron sums."""
    rng = np.random.Generator(np.random.Philox(11))
    worst = 0.0
    for (L, J, Jp, delta, eps) in [(2, 1.0, 0.0, 0.0, 0.0), (4, 1.0, 2.0, 0.5, 1e-4),
                                   (6, 1.0, 0.7, 1.3, 0.01)]:
        p = ModelParams(L=L, J=J, Jp=Jp, delta=delta, eps_pin=eps)
        H = build_hamiltonian(p)
        ref = np.zeros((2 ** L, 2 ** L), dtype=complex)
        for i in range(1, L):
            c = J if i % 2 == 1 else Jp
            for ax in ("X", "Y"):
                ref += _kron_term(L, [(i, ax), (i + 1, ax)], c)
            ref += _kron_term(L, [(i, "Z"), (i + 1, "Z")], c * delta)
        if eps:
            ref += _kron_term(L, [(1, "Z")], eps)
        worst = max(worst, np.abs(dense_matrix(H) - ref).max())
        for _ in range(5):
            v = _random_state(L, rng)
            worst = max(worst, np.abs(apply_hamiltonian_vec(H, v) - ref @ v).max())
    return worst < tol, f"max deviation {worst:.2e}"


def check_lanczos_vs_dense(tol=1e-8):
    """Sector Lanczos ground energies vs dense diagonalization at L <= 8."""
    worst = 0.0
    for (L, J, Jp, delta) in [(8, 1.0, 1.0, 1.0), (6, 1.0, 0.4, 2.0), (4, 1.0, 2.0, 0.5)]:
        p = ModelParams(L=L, J=J, Jp=Jp, delta=delta, eps_pin=1e-4)
        H = build_hamiltonian(p)
        e_dense = float(np.linalg.eigvalsh(dense_matrix(H))[0])
        e_lanczos = ground_state_global(H, tol=1e-10, seed=3).energy
        worst = max(worst, abs(e_dense - e_lanczos))
    return worst < tol, f"max energy deviation {worst:.2e}"


def check_gates_vs_dense(tol=1e-12):
    """Gate kernels and a full cycle vs dense 2^L x 2^L unitaries, L <= 6."""
    rng = np.random.Generator(np.random.Philox(5))
    worst = 0.0
    for L in (2, 4, 6):
        pars = sample_disorder(L, 0.7 * np.pi, 3, seed=L)
        v = _random_state(L, rng)
        s = SpinState(v.copy(), L)

        for theta_g, conv in ((np.pi / 3, PulseConvention.LITERAL),
                              (np.pi / 3, PulseConvention.HALF_ANGLE)):
            th = theta_g / 2 if conv is PulseConvention.HALF_ANGLE else theta_g
            U = expm(-1j * th * _kron_sum(L, "X"))
            got = apply_x_pulse(s, theta_g, conv).amplitudes
            worst = max(worst, np.abs(got - U @ v).max())

        Hzz = sum(_kron_term(L, [(i, "Z"), (i + 1, "Z")], pars.phis[i - 1])
                  for i in range(1, L))
        worst = max(worst, np.abs(apply_zz_layer(s, pars.phis).amplitudes
                                  - expm(-1j * Hzz) @ v).max())
        Hz = sum(_kron_term(L, [(i, "Z")], pars.hs[i - 1]) for i in range(1, L + 1))
        worst = max(worst, np.abs(apply_z_layer(s, pars.hs).amplitudes
                                  - expm(-1j * Hz) @ v).max())

        U_cycle = (expm(-1j * (pars.g / 2) * _kron_sum(L, "X"))
                   @ expm(-1j * Hzz / 4) @ expm(-1j * Hz))
        evolved = evolve(SpinState(v.copy(), L), pars).amplitudes
        ref = np.linalg.matrix_power(U_cycle, pars.depth) @ v
        worst = max(worst, np.abs(evolved - ref).max())
    return worst < tol, f"max amplitude deviation {worst:.2e}"


def check_partial_trace(tol=1e-10):
    """Reduced density matrices: Hermitian, PSD, unit trace."""
    rng = np.random.Generator(np.random.Philox(8))
    worst_h, worst_t, worst_e = 0.0, 0.0, 0.0
    for L in (4, 6, 8):
        s = SpinState(_random_state(L, rng), L)
        for (a, b) in [(1, 2), (2, L - 1), (1, L)]:
            rho = reduced_density_matrix(s, range(a, b + 1))
            worst_h = max(worst_h, np.abs(rho - rho.conj().T).max())
            worst_t = max(worst_t, abs(np.trace(rho).real - 1.0))
            worst_e = max(worst_e, max(0.0, -float(np.linalg.eigvalsh(rho)[0])))
    ok = worst_h < tol and worst_t < tol and worst_e < tol
    return ok, (f"hermiticity {worst_h:.2e}, trace {worst_t:.2e}, "
                f"min eigenvalue defect {worst_e:.2e}")


def check_tsne_normalization(tol=1e-10):
    """P symmetric and sums to 1; Q sums to 1; diagonals zero."""
    rng = np.random.Generator(np.random.Philox(21))
    X = rng.standard_normal((40, 7))
    P = joint_probabilities(X, perplexity=10.0)
    Q, _ = low_dim_affinities(rng.standard_normal((40, 2)))
    sym = np.abs(P - P.T).max()
    worst = max(abs(P.sum() - 1.0), abs(Q.sum() - 1.0), sym,
                float(np.abs(np.diag(P)).max()), float(np.abs(np.diag(Q)).max()))
    return worst < tol, f"max normalization defect {worst:.2e}"


def check_tsne_gradient(rtol=1e-4, step=1e-6):
    """Analytic KL gradient vs central finite differences, 5 random configs."""
    rng = np.random.Generator(np.random.Philox(31))
    worst = 0.0
    for _ in range(5):
        X = rng.standard_normal((8, 5))
        P = joint_probabilities(X, perplexity=2.0)
        Y = rng.standard_normal((8, 2))
        grad = kl_gradient(P, Y)
        num = np.zeros_like(Y)
        for i in range(Y.shape[0]):
            for j in range(2):
                Yp, Ym = Y.copy(), Y.copy()
                Yp[i, j] += step
                Ym[i, j] -= step
                num[i, j] = (kl_divergence(P, Yp) - kl_divergence(P, Ym)) / (2 * step)
        worst = max(worst, np.abs(grad - num).max() / max(np.abs(num).max(), 1e-12))
    return worst < rtol, f"max relative gradient error {worst:.2e}"


def check_em_monotone(slack=1e-10):
    """EM log-likelihood trace non-decreasing (within slack) on blob data."""
    rng = np.random.Generator(np.random.Philox(41))
    blobs = np.vstack([rng.normal((0, 0), 0.5, (40, 2)),
                       rng.normal((6, 6), 0.5, (40, 2)),
                       rng.normal((-6, 5), 0.5, (40, 2))])
    worst = 0.0
    for k in (1, 2, 3):
        model = gmm_fit(blobs, k, seed=7)
        drops = np.diff(model.ll_trace)
        if drops.size:
            worst = max(worst, max(0.0, -float(drops.min())))
    return worst < slack, f"largest log-likelihood drop {worst:.2e}"


CHECKS = [
    ("hamiltonian vs dense kron oracle (1e-12)", check_hamiltonian_dense),
    ("lanczos vs dense diagonalization (1e-8)", check_lanczos_vs_dense),
    ("gate kernels vs dense unitaries (1e-12)", check_gates_vs_dense),
    ("partial trace hermitian/PSD/trace-1 (1e-10)", check_partial_trace),
    ("t-SNE P/Q normalization (1e-10)", check_tsne_normalization),
    ("t-SNE gradient vs finite differences (rel 1e-4)", check_tsne_gradient),
    ("EM log-likelihood monotonicity (1e-10)", check_em_monotone),
]


def run_selftest(verbose: bool = True) -> bool:
    all_ok = True
    for name, fn in CHECKS:
        ok, detail = fn()
        all_ok &= ok
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return all_ok
