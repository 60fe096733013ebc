"""Ground states via Lanczos restricted to total-magnetization sectors.

The chain conserves sum_i Z_i, so the Hilbert space splits into sectors
labeled by sz = L - 2*(number of down spins). Each sector is solved with
a seeded, fully reorthogonalized Lanczos iteration; the global ground
state is the minimum over sectors with deterministic tie-breaking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .operators import SparseHamiltonian, apply_hamiltonian_vec
from .states import SpinState, fix_global_phase

_BREAKDOWN = 1e-13


class LanczosError(RuntimeError):
    """Raised when a sector solve fails to reach the requested residual."""

    def __init__(self, message: str, best_residual: float, iterations: int):
        super().__init__(message)
        self.best_residual = best_residual
        self.iterations = iterations


@dataclass(frozen=True)
class SectorBasis:
    """Computational basis states with fixed total magnetization sz."""

    L: int
    sz: int
    indices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=np.int64))

    @property
    def dim(self) -> int:
        return int(self.indices.size)


@dataclass
class GroundStateResult:
    energy: float
    state: SpinState
    sector: int
    residual: float
    iterations: int


def sector_basis(L: int, sz: int) -> SectorBasis:
    """All basis states whose down-spin count matches sz = L - 2*popcount."""
    if abs(sz) > L or (L + sz) % 2 != 0:
        raise ValueError(f"sz={sz} is not a magnetization of an L={L} chain")
    n_down = (L - sz) // 2
    idx = np.arange(1 << L, dtype=np.uint64)
    indices = np.nonzero(np.bitwise_count(idx) == n_down)[0]
    assert indices.size == math.comb(L, n_down)
    return SectorBasis(L=L, sz=sz, indices=indices)


def _sector_matvec(H: SparseHamiltonian, basis: SectorBasis, v: np.ndarray) -> np.ndarray:
    full = np.zeros(1 << H.L, dtype=np.complex128)
    full[basis.indices] = v
    return apply_hamiltonian_vec(H, full)[basis.indices]


def lanczos_lowest(H: SparseHamiltonian, basis: SectorBasis, tol: float = 1e-10,
                   max_iter: int = 300, seed: int = 0) -> GroundStateResult:
    """Lowest eigenpair of H restricted to the sector.

    Seeded random start vector, full reorthogonalization against every
    stored Krylov vector. Raises LanczosError (with the best residual)
    instead of returning an unconverged pair.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    if basis.dim == 0:
        raise ValueError("empty sector basis")
    if H.L != basis.L:
        raise ValueError(f"Hamiltonian L={H.L} vs basis L={basis.L}")

    dim = basis.dim
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.standard_normal(dim).astype(np.complex128)
    v /= np.linalg.norm(v)

    vecs = [v]
    alphas: list[float] = []
    betas: list[float] = []
    scale = max(1.0, sum(abs(t.coefficient) for t in H.terms))
    w = None

    for it in range(1, max_iter + 1):
        w = _sector_matvec(H, basis, vecs[-1])
        alpha = float(np.vdot(vecs[-1], w).real)
        alphas.append(alpha)
        w = w - alpha * vecs[-1]
        if len(vecs) > 1:
            w = w - betas[-1] * vecs[-2]
        for u in vecs:  # full reorthogonalization, one pass
            w = w - np.vdot(u, w) * u

        theta, u = _lowest_ritz(alphas, betas)
        beta = float(np.linalg.norm(w))
        exhausted = beta < _BREAKDOWN * scale or it == dim
        res_est = beta * abs(u[-1])

        if res_est < tol or exhausted or it == max_iter:
            x = np.zeros(dim, dtype=np.complex128)
            for c, vec in zip(u, vecs):
                x += c * vec
            x /= np.linalg.norm(x)
            residual = float(np.linalg.norm(_sector_matvec(H, basis, x) - theta * x))
            if residual < tol:
                return _package(H, basis, theta, x, residual, it)
            if exhausted or it == max_iter:
                raise LanczosError(
                    f"sector sz={basis.sz} not converged after {it} iterations: "
                    f"residual {residual:.3e} > tol {tol:.3e}",
                    best_residual=residual, iterations=it)

        betas.append(beta)
        vecs.append(w / beta)

    raise LanczosError("unreachable", best_residual=float("inf"), iterations=max_iter)


def _lowest_ritz(alphas, betas):
    if len(alphas) == 1:
        return alphas[0], np.array([1.0])
    vals, vecs = eigh_tridiagonal(np.asarray(alphas), np.asarray(betas),
                                  select="i", select_range=(0, 0))
    return float(vals[0]), vecs[:, 0]


def _package(H, basis, energy, x, residual, iterations) -> GroundStateResult:
    full = np.zeros(1 << H.L, dtype=np.complex128)
    full[basis.indices] = x
    full = fix_global_phase(full)
    state = SpinState(full, H.L).require_normalized()
    return GroundStateResult(energy=float(energy), state=state, sector=basis.sz,
                             residual=residual, iterations=iterations)


def ground_state_global(H: SparseHamiltonian, tol: float = 1e-10, seed: int = 0,
                        max_iter: int = 300) -> GroundStateResult:
    """Minimum-energy result over all sz sectors.

    Ties within 1e-9 are broken toward smaller |sz|, then positive sz,
    so degenerate manifolds always yield the same representative.
    """
    L = H.L
    results = []
    for sz in range(-L, L + 1, 2):
        results.append(lanczos_lowest(H, sector_basis(L, sz), tol=tol,
                                      max_iter=max_iter, seed=seed))
    e_min = min(r.energy for r in results)
    candidates = [r for r in results if r.energy <= e_min + 1e-9]
    candidates.sort(key=lambda r: (abs(r.sector), 0 if r.sector > 0 else 1))
    return candidates[0]


def save_result(path, result: GroundStateResult, params_dict: dict | None = None) -> None:
    """Binary amplitude dump used by the sweep cache."""
    np.savez(path,
             amplitudes=result.state.amplitudes,
             energy=result.energy,
             sector=result.sector,
             residual=result.residual,
             iterations=result.iterations,
             L=result.state.L,
             **({f"param_{k}": v for k, v in params_dict.items()} if params_dict else {}))


def load_result(path) -> GroundStateResult:
    with np.load(path) as data:
        state = SpinState(data["amplitudes"], int(data["L"]))
        return GroundStateResult(energy=float(data["energy"]), state=state,
                                 sector=int(data["sector"]),
                                 residual=float(data["residual"]),
                                 iterations=int(data["iterations"]))
