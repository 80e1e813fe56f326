"""Rotating-frame Hamiltonian, Markovian channels and the dense Liouvillian.

Vectorization is column-major throughout the package: ``vec(|i><j|) = e_j (x) e_i``,
so ``vec(A @ rho @ B) == kron(B.T, A) @ vec(rho)``.
"""
from __future__ import annotations

import dataclasses
import functools
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .hilbert import (
    HilbertDims, QdLevel, adjoint, annihilation_operator, transition_operator,
)

__all__ = [
    "ModelParams", "DEFAULT_PARAMS", "CollapseChannel", "Liouvillian",
    "build_hamiltonian", "build_channels", "build_liouvillian", "build_model",
    "vec", "unvec", "RADIATIVE_TRANSITIONS", "DEPHASING_PAIRS",
]

G, X, Y, B = QdLevel.G, QdLevel.X, QdLevel.Y, QdLevel.B

# (lower, upper) pairs, i.e. sigma_{lower,upper} lowers upper -> lower
RADIATIVE_TRANSITIONS = ((X, B), (Y, B), (G, X), (G, Y))
DEPHASING_PAIRS = ((B, X), (B, Y), (X, G), (Y, G))


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the rotating-frame model, all in ueV (hbar = 1).

    Defaults are the values fitted to the measured spectra, with the cavity
    placed on the exciton line (``delta_c = 0``).
    """
    g_X: float = 51.0
    g_B: float = 43.0
    kappa: float = 24.0
    chi: float = 400.0
    delta: float = 10.0
    delta_c: float = 0.0
    gamma: float = 0.13
    pump: float = 0.05
    gamma_phase: float = 5.0
    n_max: int = 2

    def __post_init__(self):
        for name in ("g_X", "g_B", "kappa", "delta", "gamma", "pump", "gamma_phase"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)!r}")
        if not self.chi > 0:
            raise ValueError(f"chi must be > 0, got {self.chi!r}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def dims(self) -> HilbertDims:
        return HilbertDims(int(self.n_max))

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def scaled(self, s: float) -> "ModelParams":
        """Multiply every energy and rate by ``s`` (n_max untouched)."""
        return self.replace(**{f.name: getattr(self, f.name) * s
                               for f in dataclasses.fields(self) if f.name != "n_max"})

    @property
    def two_photon_resonance(self) -> float:
        """Cavity detuning at which 2*omega_c matches the biexciton energy."""
        return -self.chi / 2


DEFAULT_PARAMS = ModelParams()


@dataclass(frozen=True)
class CollapseChannel:
    label: str
    rate: float
    op: np.ndarray = field(repr=False)
    kind: Literal["decay", "pump", "dephase"]

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"channel {self.label}: negative rate {self.rate}")
        if self.kind not in ("decay", "pump", "dephase"):
            raise ValueError(f"unknown channel kind {self.kind!r}")

    def jump_operator(self) -> np.ndarray:
        """Operator c with the channel written as c rho c^+ - {c^+ c, rho}/2."""
        if self.kind == "pump":
            return np.sqrt(self.rate) * adjoint(self.op)
        return np.sqrt(self.rate) * self.op


@dataclass(frozen=True)
class Liouvillian:
    dims: HilbertDims
    matrix: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @functools.cached_property
    def norm_value(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def norm(self) -> float:
        """Spectral norm, cached."""
        return self.norm_value

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho))


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(v.shape[0])))
    if d * d != v.shape[0]:
        raise ValueError(f"vector of length {v.shape[0]} is not a vectorized square matrix")
    return v.reshape(d, d, order="F")


def build_hamiltonian(p: ModelParams) -> np.ndarray:
    dims = p.dims
    a = annihilation_operator(dims)
    ad = adjoint(a)
    sGX = transition_operator(G, X, dims)
    sXB = transition_operator(X, B, dims)
    H = (-p.chi * transition_operator(B, B, dims)
         + p.delta * transition_operator(Y, Y, dims)
         + p.delta_c * (ad @ a))
    cx = sGX @ ad
    cb = sXB @ ad
    H = H + p.g_X * (cx + adjoint(cx)) + p.g_B * (cb + adjoint(cb))
    return H


def build_channels(p: ModelParams) -> list[CollapseChannel]:
    """The 13 Markovian channels: cavity loss, 4 decays, 4 pumps, 4 dephasings.

    ``op`` holds the lowering operator for decay and pump channels; pump
    channels act with its adjoint. Dephasing channels hold the population
    difference ``s_xx - s_yy``.
    """
    dims = p.dims
    chans = [CollapseChannel("cavity", p.kappa, annihilation_operator(dims), "decay")]
    for lo, up in RADIATIVE_TRANSITIONS:
        chans.append(CollapseChannel(f"decay_{up.name}{lo.name}", p.gamma,
                                     transition_operator(lo, up, dims), "decay"))
    for lo, up in RADIATIVE_TRANSITIONS:
        chans.append(CollapseChannel(f"pump_{lo.name}{up.name}", p.pump,
                                     transition_operator(lo, up, dims), "pump"))
    for x, y in DEPHASING_PAIRS:
        q = transition_operator(x, x, dims) - transition_operator(y, y, dims)
        chans.append(CollapseChannel(f"dephase_{x.name}{y.name}", p.gamma_phase, q, "dephase"))
    return chans


def build_liouvillian(H: np.ndarray, channels, dims: HilbertDims | None = None) -> Liouvillian:
    H = np.asarray(H, dtype=complex)
    d = H.shape[0]
    if H.shape != (d, d):
        raise ValueError(f"Hamiltonian must be square, got {H.shape}")
    if dims is None:
        if d % 4:
            raise ValueError(f"dimension {d} is not a multiple of 4")
        dims = HilbertDims(d // 4 - 1)
    if dims.dim != d:
        raise ValueError(f"Hamiltonian dimension {d} does not match {dims}")
    eye = np.eye(d)
    L = -1j * (np.kron(eye, H) - np.kron(H.T, eye))
    for ch in channels:
        if ch.op.shape != (d, d):
            raise ValueError(f"channel {ch.label} has shape {ch.op.shape}, expected {(d, d)}")
        if ch.rate == 0:
            continue
        c = ch.jump_operator()
        cdc = adjoint(c) @ c
        L += (np.kron(c.conj(), c)
              - 0.5 * np.kron(eye, cdc) - 0.5 * np.kron(cdc.T, eye))
    return Liouvillian(dims, L)


def build_model(p: ModelParams) -> Liouvillian:
    return build_liouvillian(build_hamiltonian(p), build_channels(p), p.dims)
