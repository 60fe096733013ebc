"""Pauli-string operators and the open-boundary bond-alternating XXZ chain.

H = J   * sum_{i odd}  (X_i X_{i+1} + Y_i Y_{i+1} + delta Z_i Z_{i+1})
  + J'  * sum_{i even} (X_i X_{i+1} + Y_i Y_{i+1} + delta Z_i Z_{i+1})
  + eps_pin * Z_1

over bonds i = 1..L-1. Zero-coefficient terms are dropped, so the term
count is 3(L-1) (+1 for the pin) only when all couplings are nonzero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .states import SpinState

_AXES = ("X", "Y", "Z")

_PAULI_DENSE = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the chain; J is the intra-cell (odd-bond) coupling."""

    L: int
    J: float = 1.0
    Jp: float = 0.0
    delta: float = 0.0
    eps_pin: float = 1e-4

    def __post_init__(self):
        if self.L < 2 or self.L % 2 != 0:
            raise ValueError(f"L must be even and >= 2, got {self.L}")
        if self.L > 24:
            raise ValueError(f"L={self.L} exceeds the statevector bound 24")
        if self.J <= 0:
            raise ValueError("J must be > 0")
        if self.Jp < 0:
            raise ValueError("Jp must be >= 0")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")

    def to_dict(self) -> dict:
        return {"L": self.L, "J": self.J, "Jp": self.Jp,
                "delta": self.delta, "eps_pin": self.eps_pin}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        return cls(L=int(d["L"]), J=float(d.get("J", 1.0)), Jp=float(d.get("Jp", 0.0)),
                   delta=float(d.get("delta", 0.0)), eps_pin=float(d.get("eps_pin", 1e-4)))


@dataclass(frozen=True)
class PauliTerm:
    """coefficient * product of single-site Pauli factors on distinct sites."""

    coefficient: float
    factors: tuple  # ((site, axis), ...) sorted by site, sites 1-based

    def __post_init__(self):
        if not self.factors:
            raise ValueError("term needs at least one factor")
        sites = [s for s, _ in self.factors]
        if sorted(set(sites)) != sites:
            raise ValueError(f"factor sites must be sorted and distinct, got {sites}")
        if any(s < 1 for s in sites):
            raise ValueError("site indices are 1-based")
        if any(ax not in _AXES for _, ax in self.factors):
            raise ValueError("axis must be one of X, Y, Z")


@dataclass
class SparseHamiltonian:
    """Sum of PauliTerms on L sites; Hermitian by construction.

    Immutable after construction. _kernels lazily caches, per term, the
    bit-flip mask and the diagonal phase vector of the term's action.
    """

    terms: tuple
    L: int
    _kernels: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.terms = tuple(self.terms)
        for t in self.terms:
            if any(s > self.L for s, _ in t.factors):
                raise ValueError(f"term {t} addresses a site beyond L={self.L}")

    def kernels(self) -> list:
        if self._kernels is None:
            self._kernels = [_term_kernel(t, self.L) for t in self.terms]
        return self._kernels


def _term_kernel(term: PauliTerm, L: int):
    """(flip_index_array_or_None, phase_vector) realizing amp' = phase * amp[perm]."""
    dim = 1 << L
    idx = np.arange(dim)
    mask = 0
    phase = np.full(dim, term.coefficient, dtype=np.complex128)
    for site, axis in term.factors:
        shift = L - site
        if axis in ("X", "Y"):
            mask |= 1 << shift
        if axis in ("Y", "Z"):
            z = 1 - 2 * ((idx >> shift) & 1)
            phase = phase * z
            if axis == "Y":
                phase = phase * 1j
    flip = (idx ^ mask) if mask else None
    return flip, phase


def build_hamiltonian(p: ModelParams) -> SparseHamiltonian:
    """Assemble the bond-alternating XXZ chain for the given couplings."""
    terms = []
    for i in range(1, p.L):  # bond (i, i+1)
        c = p.J if i % 2 == 1 else p.Jp
        if c != 0.0:
            terms.append(PauliTerm(c, ((i, "X"), (i + 1, "X"))))
            terms.append(PauliTerm(c, ((i, "Y"), (i + 1, "Y"))))
        if c * p.delta != 0.0:
            terms.append(PauliTerm(c * p.delta, ((i, "Z"), (i + 1, "Z"))))
    if p.eps_pin != 0.0:
        terms.append(PauliTerm(p.eps_pin, ((1, "Z"),)))
    return SparseHamiltonian(tuple(terms), p.L)


def apply_hamiltonian_vec(H: SparseHamiltonian, amps: np.ndarray) -> np.ndarray:
    """H @ amps, term by term, never materializing the 2^L x 2^L matrix."""
    if amps.shape != (1 << H.L,):
        raise ValueError(f"vector length {amps.shape} does not match 2^{H.L}")
    out = np.zeros_like(amps, dtype=np.complex128)
    for flip, phase in H.kernels():
        t = phase * amps
        if flip is None:
            out += t
        else:
            out += t[flip]
    return out


def apply_hamiltonian(H: SparseHamiltonian, s: SpinState) -> SpinState:
    """H|s>. The result is generally unnormalized."""
    if s.L != H.L:
        raise ValueError(f"state has L={s.L}, Hamiltonian has L={H.L}")
    return SpinState(apply_hamiltonian_vec(H, s.amplitudes), H.L)


def dense_matrix(H: SparseHamiltonian) -> np.ndarray:
    """2^L x 2^L Hermitian matrix of H; test/oracle use only, refuses L > 8."""
    if H.L > 8:
        raise ValueError(f"dense_matrix limited to L <= 8, got L={H.L}")
    dim = 1 << H.L
    M = np.zeros((dim, dim), dtype=np.complex128)
    for t in H.terms:
        ops = ["I"] * H.L
        for site, axis in t.factors:
            ops[site - 1] = axis
        m = _PAULI_DENSE[ops[0]]
        for ax in ops[1:]:
            m = np.kron(m, _PAULI_DENSE[ax])
        M += t.coefficient * m
    return M
