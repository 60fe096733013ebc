"""Z-basis observables, feature vectors, finite-shot estimation, dynamics records.

Feature layout: (<Z_1>..<Z_L>, <Z_1 Z_2>..<Z_{L-1} Z_L>), optionally followed
by the three-site block <Z_i Z_{i+1} Z_{i+2}> for i = 1..L-2. Everything is
computed from Z-basis probabilities only, so the finite-shot estimator reuses
one table of sampled bitstrings for all blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .reservoir import FloquetParams, evolve_steps
from .states import SpinState, z_sign_table


@dataclass
class FeatureVector:
    values: np.ndarray
    L: int
    include_zzz: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = 3 * self.L - 3 if self.include_zzz else 2 * self.L - 1
        if self.values.shape != (expected,):
            raise ValueError(f"feature vector length {self.values.shape} != {expected}")


@dataclass
class FeatureMatrix:
    """One feature row per (delta, jp) grid point, in grid order."""

    values: np.ndarray            # (n_points, n_features)
    grid: list                    # [(delta, jp), ...]
    L: int
    include_zzz: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != len(self.grid):
            raise ValueError("rows must match grid points")

    @property
    def rows(self) -> list:
        return [FeatureVector(v, self.L, self.include_zzz) for v in self.values]


@dataclass
class DynamicsRecord:
    """(2L-1) x (depth+1) matrix; column t = features after t cycles."""

    matrix: np.ndarray
    L: int
    params: FloquetParams


@dataclass
class ShotTable:
    """Counts of sampled Z-basis bitstrings (basis index -> count)."""

    states: np.ndarray
    counts: np.ndarray
    shots: int
    L: int
    seed: int


def _probs(s: SpinState) -> np.ndarray:
    return np.abs(s.amplitudes) ** 2


def expect_z(s: SpinState, i: int) -> float:
    """Exact <Z_i>, 1-based site index."""
    if not 1 <= i <= s.L:
        raise IndexError(f"site {i} out of range 1..{s.L}")
    z = 1 - 2 * ((np.arange(s.dim) >> (s.L - i)) & 1)
    return float(_probs(s) @ z)


def expect_zz(s: SpinState, i: int) -> float:
    """Exact <Z_i Z_{i+1}>."""
    if not 1 <= i <= s.L - 1:
        raise IndexError(f"bond {i} out of range 1..{s.L - 1}")
    idx = np.arange(s.dim)
    zi = 1 - 2 * ((idx >> (s.L - i)) & 1)
    zj = 1 - 2 * ((idx >> (s.L - i - 1)) & 1)
    return float(_probs(s) @ (zi * zj))


def _features_from_probs(p: np.ndarray, L: int, include_zzz: bool) -> np.ndarray:
    z = z_sign_table(L)
    blocks = [p @ z.T, p @ (z[:-1] * z[1:]).T]
    if include_zzz:
        blocks.append(p @ (z[:-2] * z[1:-1] * z[2:]).T)
    return np.concatenate(blocks)


def feature_vector(s: SpinState, include_zzz: bool = False) -> FeatureVector:
    """Exact feature vector of the state (no sampling)."""
    return FeatureVector(_features_from_probs(_probs(s), s.L, include_zzz),
                         s.L, include_zzz)


def sample_shots(s: SpinState, shots: int, seed: int) -> ShotTable:
    """Draw computational-basis shots from |amp|^2 with Philox(seed)."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = _probs(s)
    p = p / p.sum()
    rng = np.random.Generator(np.random.Philox(seed))
    outcomes = rng.choice(s.dim, size=shots, p=p)
    states, counts = np.unique(outcomes, return_counts=True)
    return ShotTable(states=states.astype(np.int64), counts=counts.astype(np.int64),
                     shots=shots, L=s.L, seed=seed)


def features_from_shots(table: ShotTable, include_zzz: bool = False) -> FeatureVector:
    """Rebuild all feature blocks from one shot table (single measurement setting)."""
    p = np.zeros(1 << table.L)
    p[table.states] = table.counts / table.shots
    return FeatureVector(_features_from_probs(p, table.L, include_zzz),
                         table.L, include_zzz)


def record_dynamics(s0: SpinState, p: FloquetParams) -> DynamicsRecord:
    """Feature columns for t = 0..depth under repeated cycles."""
    s0.require_normalized()
    cols = [feature_vector(s0).values]
    for st in evolve_steps(s0, p):
        cols.append(feature_vector(st).values)
    return DynamicsRecord(matrix=np.column_stack(cols), L=s0.L, params=p)
