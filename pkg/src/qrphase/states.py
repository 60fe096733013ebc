"""Statevector container shared by all modules.

Basis convention, fixed package-wide: basis index b runs over 0..2^L-1,
site 1 is the most significant bit of b, and Z|0> = +|0>. The eigenvalue
of Z_i on basis state b is therefore ``1 - 2*((b >> (L - i)) & 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORM_TOL = 1e-10


@dataclass
class SpinState:
    """Complex amplitude vector over the 2^L computational basis states.

    States representing physical wavefunctions are unit norm; outputs of
    linear operators (e.g. H|s>) reuse the container unnormalized, so the
    constructor checks dimensions only. Use require_normalized() where a
    contract demands unit norm.
    """

    amplitudes: np.ndarray
    L: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.ndim != 1 or self.amplitudes.shape[0] != 2 ** self.L:
            raise ValueError(
                f"amplitude vector has length {self.amplitudes.shape}, expected 2^{self.L}"
            )

    @property
    def dim(self) -> int:
        return 2 ** self.L

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def require_normalized(self, tol: float = NORM_TOL) -> "SpinState":
        n = self.norm()
        if abs(n - 1.0) > tol:
            raise ValueError(f"state norm {n} deviates from 1 by more than {tol}")
        return self

    def copy(self) -> "SpinState":
        return SpinState(self.amplitudes.copy(), self.L)

    @classmethod
    def basis_state(cls, L: int, index: int) -> "SpinState":
        if not 0 <= index < 2 ** L:
            raise ValueError(f"basis index {index} out of range for L={L}")
        amps = np.zeros(2 ** L, dtype=np.complex128)
        amps[index] = 1.0
        return cls(amps, L)

    @classmethod
    def polarized(cls, L: int) -> "SpinState":
        """|00...0>: every site in the Z = +1 state."""
        return cls.basis_state(L, 0)


def fix_global_phase(amps: np.ndarray) -> np.ndarray:
    """Rotate so the largest-magnitude amplitude is real and positive."""
    k = int(np.argmax(np.abs(amps)))
    a = amps[k]
    if a == 0:
        return amps
    return amps * (abs(a) / a)


def z_sign_table(L: int) -> np.ndarray:
    """(L, 2^L) array of Z_i eigenvalues (+-1) per site and basis state."""
    idx = np.arange(2 ** L)
    sites = np.arange(1, L + 1)
    return 1 - 2 * ((idx[None, :] >> (L - sites[:, None])) & 1)
