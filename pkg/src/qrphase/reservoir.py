"""Disordered Floquet circuit used as the quantum reservoir.

One cycle applies, right to left,

    U_F = [X pulse on every site] o [ZZ phase layer] o [Z phase layer],

with per-bond angles phi_i in [-1.5pi, -0.5pi] and per-site fields
h_i in [-pi, pi], drawn once per disorder realization from a
counter-based generator (Philox), so a seed pins the circuit on every
platform.

Angle conventions. The gate kernels below are literal: they apply
exactly exp(-i*angle*generator) for the angles passed in. `evolve`
maps the stored disorder parameters to kernel angles according to
FloquetParams.pulse_convention:

  HALF_ANGLE (default): X angle g/2 (a perfect spin flip at g=pi),
      ZZ angle phi/4 (controlled-phase gate reading: every bond's
      entangling strength stays bounded away from zero, which the
      claimed MBL/DTC/thermal regimes require), Z angle h as printed
      (the h range already spans a full rotation period).
  LITERAL: X angle g, ZZ angle phi, Z angle h.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .states import SpinState, z_sign_table

MBL_EDGE = 0.2 * np.pi
DTC_EDGE = 0.84 * np.pi


class PulseConvention(str, Enum):
    HALF_ANGLE = "HALF_ANGLE"
    LITERAL = "LITERAL"


class RegimeLabel(str, Enum):
    MBL = "MBL"
    THERMAL = "THERMAL"
    DTC = "DTC"


def classify_regime(g: float) -> RegimeLabel:
    if g < MBL_EDGE:
        return RegimeLabel.MBL
    if g > DTC_EDGE:
        return RegimeLabel.DTC
    return RegimeLabel.THERMAL


@dataclass
class FloquetParams:
    """One disorder realization of the circuit, shared by a whole sweep."""

    g: float
    phis: np.ndarray
    hs: np.ndarray
    depth: int
    seed: int
    pulse_convention: PulseConvention = PulseConvention.HALF_ANGLE

    def __post_init__(self):
        self.phis = np.asarray(self.phis, dtype=np.float64)
        self.hs = np.asarray(self.hs, dtype=np.float64)
        self.pulse_convention = PulseConvention(self.pulse_convention)
        # g = pi included: the exact-flip point is a required working case
        if not 0.0 < self.g <= np.pi:
            raise ValueError(f"g={self.g} outside (0, pi]")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        L = self.hs.size
        if self.phis.size != L - 1:
            raise ValueError(f"need L-1 phis for L={L}, got {self.phis.size}")
        if np.any(self.phis < -1.5 * np.pi) or np.any(self.phis > -0.5 * np.pi):
            raise ValueError("phis outside [-1.5pi, -0.5pi]")
        if np.any(np.abs(self.hs) > np.pi):
            raise ValueError("hs outside [-pi, pi]")

    @property
    def L(self) -> int:
        return int(self.hs.size)

    @property
    def regime(self) -> RegimeLabel:
        return classify_regime(self.g)

    def to_dict(self) -> dict:
        return {"g": self.g, "phis": self.phis.tolist(), "hs": self.hs.tolist(),
                "depth": self.depth, "seed": self.seed,
                "pulse_convention": self.pulse_convention.value}

    @classmethod
    def from_dict(cls, d: dict) -> "FloquetParams":
        return cls(g=float(d["g"]), phis=d["phis"], hs=d["hs"], depth=int(d["depth"]),
                   seed=int(d["seed"]),
                   pulse_convention=PulseConvention(d.get("pulse_convention", "HALF_ANGLE")))

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")

    @classmethod
    def from_json(cls, path) -> "FloquetParams":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def sample_disorder(L: int, g: float, depth: int, seed: int,
                    convention: PulseConvention = PulseConvention.HALF_ANGLE) -> FloquetParams:
    """Draw phis and hs uniformly from their intervals with Philox(seed)."""
    if not 0.0 < g <= np.pi:
        raise ValueError(f"g={g} outside (0, pi]")
    rng = np.random.Generator(np.random.Philox(seed))
    phis = rng.uniform(-1.5 * np.pi, -0.5 * np.pi, L - 1)
    hs = rng.uniform(-np.pi, np.pi, L)
    return FloquetParams(g=g, phis=phis, hs=hs, depth=depth, seed=seed,
                         pulse_convention=convention)


# --------------------------------------------------------------------------
# gate kernels (literal angles)
# --------------------------------------------------------------------------

def _x_pulse_inplace(amps: np.ndarray, L: int, theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    a = amps
    for i in range(L):
        a = a.reshape(2 ** i, 2, -1)
        a0 = a[:, 0, :].copy()
        a1 = a[:, 1, :].copy()
        a[:, 0, :] = c * a0 - 1j * s * a1
        a[:, 1, :] = -1j * s * a0 + c * a1
    return a.reshape(-1)


def _z_phase_vector(L: int, hs: np.ndarray) -> np.ndarray:
    z = z_sign_table(L)
    return np.exp(-1j * (np.asarray(hs)[:, None] * z).sum(axis=0))


def _zz_phase_vector(L: int, phis: np.ndarray) -> np.ndarray:
    z = z_sign_table(L)
    return np.exp(-1j * (np.asarray(phis)[:, None] * (z[:-1] * z[1:])).sum(axis=0))


def apply_x_pulse(s: SpinState, g: float,
                  convention: PulseConvention = PulseConvention.HALF_ANGLE) -> SpinState:
    """exp(-i*theta*X_i) on every site; theta = g/2 (HALF_ANGLE) or g (LITERAL)."""
    theta = g / 2.0 if PulseConvention(convention) is PulseConvention.HALF_ANGLE else g
    return SpinState(_x_pulse_inplace(s.amplitudes.copy(), s.L, theta), s.L)


def apply_zz_layer(s: SpinState, phis: np.ndarray) -> SpinState:
    """Diagonal phase exp(-i sum_i phi_i z_i z_{i+1}), angles as given."""
    phis = np.asarray(phis, dtype=np.float64)
    if phis.size != s.L - 1:
        raise ValueError(f"need {s.L - 1} angles, got {phis.size}")
    return SpinState(s.amplitudes * _zz_phase_vector(s.L, phis), s.L)


def apply_z_layer(s: SpinState, hs: np.ndarray) -> SpinState:
    """Diagonal phase exp(-i sum_i h_i z_i), angles as given."""
    hs = np.asarray(hs, dtype=np.float64)
    if hs.size != s.L:
        raise ValueError(f"need {s.L} angles, got {hs.size}")
    return SpinState(s.amplitudes * _z_phase_vector(s.L, hs), s.L)


# --------------------------------------------------------------------------
# cycle assembly
# --------------------------------------------------------------------------

def effective_angles(p: FloquetParams) -> tuple[float, np.ndarray, np.ndarray]:
    """(x_theta, zz_angles, z_angles) fed to the kernels, per convention."""
    if p.pulse_convention is PulseConvention.HALF_ANGLE:
        return p.g / 2.0, p.phis / 4.0, p.hs
    return p.g, p.phis, p.hs


class _CompiledCycle:
    """Precomputed diagonal phase vectors + pulse angle for one realization."""

    def __init__(self, p: FloquetParams, L: int):
        if p.L != L:
            raise ValueError(f"params are for L={p.L}, state has L={L}")
        theta, zz, z = effective_angles(p)
        self.L = L
        self.theta = theta
        self.diag = _z_phase_vector(L, z) * _zz_phase_vector(L, zz)

    def run(self, amps: np.ndarray) -> np.ndarray:
        amps *= self.diag
        return _x_pulse_inplace(amps, self.L, self.theta)


def evolve(s: SpinState, p: FloquetParams) -> SpinState:
    """Apply U_F for p.depth cycles. depth=0 returns the input unchanged."""
    s.require_normalized()
    if p.depth == 0:
        return s.copy()
    cycle = _CompiledCycle(p, s.L)
    amps = s.amplitudes.copy()
    for _ in range(p.depth):
        amps = cycle.run(amps)
    return SpinState(amps, s.L).require_normalized()


def evolve_steps(s: SpinState, p: FloquetParams):
    """Yield the state after each cycle, 1..depth (same numerics as evolve)."""
    s.require_normalized()
    cycle = _CompiledCycle(p, s.L)
    amps = s.amplitudes.copy()
    for _ in range(p.depth):
        amps = cycle.run(amps)
        yield SpinState(amps.copy(), s.L)
