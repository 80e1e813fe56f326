"""Operator algebra on the dot-levels x cavity-Fock composite space.

Basis layout is level-major inside photon blocks: ``index = 4*n + level``.
All operators are dense complex ``numpy`` arrays; energies in ueV with hbar=1.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "QdLevel", "HilbertDims", "as_level", "basis_index", "basis_state", "transition_operator",
    "annihilation_operator", "number_operator", "identity", "adjoint",
]

N_LEVELS = 4


class QdLevel(enum.IntEnum):
    """Dot levels in basis order."""
    G = 0
    X = 1
    Y = 2
    B = 3


@dataclass(frozen=True)
class HilbertDims:
    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def n_photon(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return N_LEVELS * (self.n_max + 1)


def as_level(level) -> QdLevel:
    """Accept a QdLevel, its ordinal, or its name ('G', 'X', 'Y', 'B')."""
    if isinstance(level, str):
        try:
            return QdLevel[level]
        except KeyError:
            raise ValueError(f"unknown dot level {level!r}") from None
    return QdLevel(level)


def _as_dims(dims) -> HilbertDims:
    return dims if isinstance(dims, HilbertDims) else HilbertDims(int(dims))


def basis_index(level, n: int, dims) -> int:
    dims = _as_dims(dims)
    if not 0 <= n <= dims.n_max:
        raise IndexError(f"photon number {n} outside 0..{dims.n_max}")
    return N_LEVELS * n + int(as_level(level))


def basis_state(level, n: int, dims) -> np.ndarray:
    """Column vector |level, n>."""
    dims = _as_dims(dims)
    psi = np.zeros(dims.dim, dtype=complex)
    psi[basis_index(level, n, dims)] = 1.0
    return psi


def identity(dims) -> np.ndarray:
    return np.eye(_as_dims(dims).dim, dtype=complex)


def transition_operator(i, j, dims) -> np.ndarray:
    """sigma_ij = |i><j| on the dot, identity on the cavity."""
    dims = _as_dims(dims)
    dot = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    dot[as_level(i), as_level(j)] = 1.0
    return np.kron(np.eye(dims.n_photon), dot)


def annihilation_operator(dims) -> np.ndarray:
    """Cavity lowering operator, a|i,n> = sqrt(n)|i,n-1>."""
    dims = _as_dims(dims)
    a = np.diag(np.sqrt(np.arange(1, dims.n_photon)), k=1).astype(complex)
    return np.kron(a, np.eye(N_LEVELS))


def number_operator(dims) -> np.ndarray:
    a = annihilation_operator(dims)
    return a.conj().T @ a


def adjoint(op: np.ndarray) -> np.ndarray:
    return op.conj().T
