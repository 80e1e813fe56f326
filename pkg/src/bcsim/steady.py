"""Stationary state of the Liouvillian, a propagation oracle, and expectation values."""
from __future__ import annotations

import numpy as np
import scipy.linalg as la

from .model import Liouvillian, ModelParams, unvec, vec

__all__ = [
    "SteadyStateError", "DegenerateSteadyStateError", "PropagationError",
    "solve_steady_state", "time_propagate", "expectation", "default_horizon",
    "check_density_matrix", "kernel_dimension",
]

NEG_EIG_TOL = 1e-10


class SteadyStateError(RuntimeError):
    """Stationary solve failed numerically."""


class DegenerateSteadyStateError(SteadyStateError):
    """The Liouvillian kernel is not one-dimensional."""


class PropagationError(RuntimeError):
    pass


def kernel_dimension(L: Liouvillian, rtol: float = 1e-10) -> int:
    s = la.svdvals(L.matrix)
    return int(np.sum(s <= rtol * s[0]))


def _repair(rho: np.ndarray) -> np.ndarray:
    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho).real
    w, v = la.eigh(rho)
    if w[0] < -NEG_EIG_TOL:
        raise SteadyStateError(f"steady state has eigenvalue {w[0]:.3e} < -{NEG_EIG_TOL:g}")
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        rho = (v * w) @ v.conj().T
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real
    return rho


def solve_steady_state(L: Liouvillian, *, check_kernel: bool = True,
                       residual_tol: float = 1e-10) -> np.ndarray:
    """Solve ``L vec(rho) = 0`` with ``Tr rho = 1``.

    The first row of ``L`` (the equation for rho_00) is replaced by the trace
    functional and the resulting square system is solved directly. The result
    is Hermitized and tiny negative eigenvalues (above -1e-10) are clipped.

    Raises
    ------
    DegenerateSteadyStateError
        If the kernel of ``L`` is not one-dimensional.
    SteadyStateError
        If the linear solve fails or leaves a residual above ``residual_tol * ||L||``.
    """
    if check_kernel:
        k = kernel_dimension(L)
        if k != 1:
            raise DegenerateSteadyStateError(f"Liouvillian kernel has dimension {k}, expected 1")
    d = L.dims.dim
    M = L.matrix.copy()
    M[0, :] = vec(np.eye(d))
    rhs = np.zeros(M.shape[0], dtype=complex)
    rhs[0] = 1.0
    try:
        x = la.solve(M, rhs)
    except la.LinAlgError as exc:
        raise SteadyStateError(f"singular steady-state system: {exc}") from exc
    rho = _repair(unvec(x))
    nrm = L.norm()
    res = np.linalg.norm(L.matrix @ vec(rho))
    if res > residual_tol * nrm:
        raise SteadyStateError(f"steady-state residual {res:.3e} exceeds {residual_tol:g}*||L|| = {residual_tol * nrm:.3e}")
    return rho


def default_horizon(p: ModelParams) -> float:
    """50 / smallest nonzero rate, in units of hbar/ueV."""
    rates = [r for r in (p.kappa, p.gamma, p.pump, p.gamma_phase) if r > 0]
    if not rates:
        raise ValueError("no nonzero rate; propagation horizon undefined")
    return 50.0 / min(rates)


def time_propagate(L: Liouvillian, rho0: np.ndarray, t: float) -> np.ndarray:
    """``unvec(expm(L t) vec(rho0))`` via scipy's scaling-and-squaring expm."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t == 0:
        return np.array(rho0, dtype=complex, copy=True)
    prop = la.expm(L.matrix * t)
    if not np.all(np.isfinite(prop)):
        raise PropagationError(f"propagator overflowed at t={t}")
    rho = unvec(prop @ vec(rho0))
    drift = abs(np.trace(rho) - np.trace(rho0))
    if drift > 1e-10:
        raise PropagationError(f"trace drifted by {drift:.3e} during propagation")
    return rho


def expectation(rho: np.ndarray, A: np.ndarray) -> complex:
    if rho.shape != A.shape:
        raise ValueError(f"shape mismatch: rho {rho.shape} vs operator {A.shape}")
    return complex(np.trace(A @ rho))


def check_density_matrix(rho: np.ndarray, tol: float = 1e-12) -> None:
    """Raise ``ValueError`` unless rho is Hermitian, unit-trace and PSD."""
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > tol:
        raise ValueError(f"not Hermitian: max deviation {herm:.3e}")
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        raise ValueError(f"trace {tr} != 1")
    wmin = la.eigvalsh(rho)[0]
    if wmin < -NEG_EIG_TOL:
        raise ValueError(f"negative eigenvalue {wmin:.3e}")
