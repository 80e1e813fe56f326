"""Steady-state emission spectra, instrument convolution and detuning sweeps.

Each channel spectrum is the one-sided transform of the stationary correlator
``<A^+(tau) A(0)>`` obtained from the quantum regression theorem::

    S(w) = -(rate/pi) Re Tr[A^+ (L - i w)^-1 (A rho_ss)]

with ``w`` the emission frequency offset from the bare exciton line. With this
normalization the integral of ``S`` over all ``w`` equals ``rate * <A^+ A>``.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy.ndimage import convolve1d

from .hilbert import adjoint, annihilation_operator, number_operator, transition_operator
from .model import Liouvillian, ModelParams, build_model, vec
from .steady import SteadyStateError, expectation, solve_steady_state

__all__ = [
    "FrequencyGrid", "ChannelSpectrum", "SpectrumSet", "SweepResult",
    "CHANNEL_LABELS", "CAVITY_POLARIZED", "ResolutionError", "SpectrumError",
    "Resolvent", "emission_spectrum", "emission_spectra", "radiative_channels", "total_spectrum",
    "convolve_instrument", "detuning_sweep", "gaussian_fwhm_to_sigma",
]

log = logging.getLogger(__name__)

CHANNEL_LABELS = ("cavity", "XG", "YG", "BX", "BY")
# channels passing a polarizer aligned with the cavity mode
CAVITY_POLARIZED = ("cavity", "XG", "BX")

_LEVEL_PAIRS = {"XG": ("G", "X"), "YG": ("G", "Y"), "BX": ("X", "B"), "BY": ("Y", "B")}


class SpectrumError(RuntimeError):
    pass


class ResolutionError(ValueError):
    """Frequency grid too coarse for the requested operation."""


def gaussian_fwhm_to_sigma(fwhm: float) -> float:
    return fwhm / (2.0 * np.sqrt(2.0 * np.log(2.0)))


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid of emission-frequency offsets from the exciton line (ueV)."""
    offsets: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.offsets, dtype=float)
        if w.ndim != 1 or w.size < 2:
            raise ValueError("frequency grid needs at least two points")
        dw = np.diff(w)
        if np.any(dw <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        if np.max(np.abs(dw - dw[0])) > 1e-12 * max(1.0, abs(dw[0])) * w.size:
            raise ValueError("frequency grid must be uniform")
        object.__setattr__(self, "offsets", w)

    @classmethod
    def span(cls, start: float, stop: float, step: float) -> "FrequencyGrid":
        """Inclusive grid ``start, start+step, ..., stop``."""
        if not step > 0 or not stop > start:
            raise ValueError(f"bad grid spec {start}:{stop}:{step}")
        n = int(round((stop - start) / step)) + 1
        return cls(start + step * np.arange(n))

    @property
    def spacing(self) -> float:
        return float(self.offsets[1] - self.offsets[0])

    def __len__(self):
        return self.offsets.size


DEFAULT_GRID = FrequencyGrid.span(-600.0, 300.0, 1.0)


@dataclass(frozen=True)
class ChannelSpectrum:
    label: str
    grid: FrequencyGrid
    intensity: np.ndarray = field(repr=False)
    tail: float = 0.0

    def integral(self, include_tails: bool = False) -> float:
        """Trapezoid integral over the grid, optionally plus the off-grid weight."""
        val = float(np.trapezoid(self.intensity, self.grid.offsets))
        return val + self.tail if include_tails else val


@dataclass
class SpectrumSet:
    """All channel spectra of one parameter point plus steady-state moments."""
    params: ModelParams
    grid: FrequencyGrid
    channels: dict[str, ChannelSpectrum]
    rho_ss: np.ndarray = field(repr=False)
    channel_rates: dict[str, float] = field(default_factory=dict)

    @property
    def total(self) -> np.ndarray:
        return sum(c.intensity for c in self.channels.values())

    def moment(self, op) -> float:
        return expectation(self.rho_ss, op).real

    @property
    def n_cavity(self) -> float:
        return self.moment(number_operator(self.params.dims))

    @property
    def p_BB(self) -> float:
        return self.moment(transition_operator("B", "B", self.params.dims))

    @property
    def p_XX(self) -> float:
        return self.moment(transition_operator("X", "X", self.params.dims))


def radiative_channels(p: ModelParams, labels=CHANNEL_LABELS) -> dict[str, tuple[np.ndarray, float]]:
    """Map channel label -> (lowering operator, leakage rate)."""
    dims = p.dims
    out = {}
    for lab in labels:
        if lab == "cavity":
            out[lab] = (annihilation_operator(dims), p.kappa)
        elif lab in _LEVEL_PAIRS:
            lo, up = _LEVEL_PAIRS[lab]
            out[lab] = (transition_operator(lo, up, dims), p.gamma)
        else:
            raise KeyError(f"unknown channel {lab!r}; valid: {CHANNEL_LABELS}")
    return out


class Resolvent:
    """Evaluates ``Tr[B_i (L - i w)^-1 b_i]`` for many frequencies.

    The stationary eigenvalue is shifted away from zero first, which is exact
    on the traceless subspace all right-hand sides live in. With
    ``method="eig"`` the (deflated) Liouvillian is diagonalized once and every
    frequency is a vectorized sum; ``"schur"`` keeps a complex Schur form and
    does one triangular solve per frequency. ``"auto"`` uses the eigenbasis
    unless its condition number exceeds ``max_cond``.
    """

    def __init__(self, L: Liouvillian, rho_ss: np.ndarray, method: str = "auto",
                 max_cond: float = 1e8):
        if method not in ("auto", "eig", "schur"):
            raise ValueError(f"unknown resolvent method {method!r}")
        d = L.dims.dim
        shift = max(L.norm(), 1.0)
        M = L.matrix - shift * np.outer(vec(rho_ss), vec(np.eye(d)).conj())
        self.method = method
        if method in ("auto", "eig"):
            lam, V = la.eig(M)
            Vinv = la.inv(V)
            cond = np.linalg.norm(V, 1) * np.linalg.norm(Vinv, 1)
            if method == "eig" or cond <= max_cond:
                self.method = "eig"
                self.lam, self.V, self.Vinv = lam, V, Vinv
                return
            log.info("eigenbasis condition %.3g > %.3g; using Schur form", cond, max_cond)
            self.method = "schur"
        self.T, self.Z = la.schur(M, output="complex")

    def traces(self, left: np.ndarray, rhs: np.ndarray, omegas) -> np.ndarray:
        """``left`` is (m, n), ``rhs`` is (n, m); returns an (m, len(omegas)) array."""
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        if self.method == "eig":
            w = (left @ self.V) * (self.Vinv @ rhs).T
            den = self.lam[:, None] - 1j * omegas[None, :]
            if np.min(np.abs(den)) == 0:
                raise SpectrumError("resolvent singular on the frequency grid")
            return w @ (1.0 / den)
        T, Z = self.T, self.Z
        n = T.shape[0]
        lz, rz = left @ Z, Z.conj().T @ rhs
        diag = np.diag(T)
        out = np.empty((left.shape[0], omegas.size), dtype=complex)
        for k, w in enumerate(omegas):
            shifted = w
            for attempt in range(3):
                if np.min(np.abs(diag - 1j * shifted)) > 1e-14 * n:
                    break
                shifted = w + 1e-9 * max(1.0, abs(w)) * 10 ** attempt
                log.debug("resolvent near-singular at w=%g; retrying at %g", w, shifted)
            else:
                raise SpectrumError(f"(L - i w) singular at w={w}")
            y = la.solve_triangular(T - 1j * shifted * np.eye(n), rz, check_finite=False)
            out[:, k] = np.einsum("ij,ji->i", lz, y)
        return out


_TAIL_NODES, _TAIL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def emission_spectra(L: Liouvillian, rho_ss: np.ndarray, ops: dict, grid: FrequencyGrid,
                     *, method: str = "auto", resolvent: Resolvent | None = None) -> dict[str, ChannelSpectrum]:
    """Spectra of several channels sharing one Liouvillian.

    ``ops`` maps label -> (operator, rate). Each returned spectrum also carries
    the weight lying outside the grid (``tail``), integrated by Gauss-Legendre
    quadrature after mapping each half-line onto (0, 1].
    """
    res = resolvent or Resolvent(L, rho_ss, method)
    labels = list(ops)
    ident = vec(np.eye(L.dims.dim))
    rhs, left = [], []
    for lab in labels:
        A, _ = ops[lab]
        b = vec(A @ rho_ss)
        b = b - (ident.conj() @ b) * vec(rho_ss)  # drop the coherent part <A>
        rhs.append(b)
        left.append(vec(adjoint(A).T))
    rhs = np.array(rhs).T
    left = np.array(left)
    scale = -(np.array([ops[lab][1] for lab in labels]) / np.pi)[:, None]
    out = scale * np.real(res.traces(left, rhs, grid.offsets))

    w0, w1 = grid.offsets[0], grid.offsets[-1]
    c = 0.5 * (w0 + w1)
    u = 0.5 * (_TAIL_NODES + 1.0)
    tails = np.zeros(len(labels))
    for edge in (w0, w1):
        span = edge - c
        vals = scale * np.real(res.traces(left, rhs, c + span / u))
        tails += (vals * (abs(span) / u**2)) @ (0.5 * _TAIL_WEIGHTS)
    return {lab: ChannelSpectrum(lab, grid, out[i], float(tails[i])) for i, lab in enumerate(labels)}


def emission_spectrum(L: Liouvillian, rho_ss: np.ndarray, A: np.ndarray, rate: float,
                      grid: FrequencyGrid = DEFAULT_GRID, label: str = "channel",
                      method: str = "auto") -> ChannelSpectrum:
    return emission_spectra(L, rho_ss, {label: (A, rate)}, grid, method=method)[label]


def total_spectrum(p: ModelParams, grid: FrequencyGrid = DEFAULT_GRID,
                   channels=CHANNEL_LABELS, method: str = "auto") -> SpectrumSet:
    """Build the model, solve the steady state and return every channel spectrum."""
    L = build_model(p)
    rho = solve_steady_state(L)
    ops = radiative_channels(p, channels)
    spectra = emission_spectra(L, rho, ops, grid, method=method)
    rates = {lab: rate * expectation(rho, adjoint(A) @ A).real for lab, (A, rate) in ops.items()}
    return SpectrumSet(p, grid, spectra, rho, rates)


def _gaussian_kernel(fwhm: float, h: float) -> np.ndarray:
    sigma = gaussian_fwhm_to_sigma(fwhm)
    half = int(np.ceil(6 * sigma / h))
    x = h * np.arange(-half, half + 1)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def convolve_instrument(s: ChannelSpectrum, fwhm: float) -> ChannelSpectrum:
    """Convolve with a unit-area Gaussian instrument response of the given FWHM."""
    if fwhm < 0:
        raise ValueError(f"fwhm must be >= 0, got {fwhm}")
    if fwhm == 0:
        return s
    h = s.grid.spacing
    if h > fwhm / 5:
        raise ResolutionError(f"grid spacing {h} ueV exceeds fwhm/5 = {fwhm / 5} ueV")
    # reflecting edges keep the grid sum exact
    out = convolve1d(s.intensity, _gaussian_kernel(fwhm, h), mode="reflect")
    return ChannelSpectrum(s.label, s.grid, out, s.tail)


@dataclass
class SweepResult:
    """Channel spectra on a (detuning, frequency) grid at one photon truncation.

    Intensities are stored unnormalized; ``norm_factor`` is what the chosen
    normalization divides by (an array per detuning for per-spectrum mode).
    """
    template: ModelParams
    n_max: int
    detunings: np.ndarray
    grid: FrequencyGrid
    channels: dict[str, np.ndarray] = field(repr=False)
    channel_rates: dict[str, np.ndarray] = field(repr=False)
    n_cavity: np.ndarray = field(repr=False)
    p_BB: np.ndarray = field(repr=False)
    p_XX: np.ndarray = field(repr=False)
    channel_tails: dict[str, np.ndarray] = field(default_factory=dict, repr=False)
    instrument_fwhm: float = 0.0
    normalization: str = "none"
    norm_factor: float | np.ndarray = 1.0

    @property
    def total(self) -> np.ndarray:
        return sum(self.channels.values())

    @property
    def params(self) -> list[ModelParams]:
        return [self.template.replace(delta_c=float(d), n_max=self.n_max) for d in self.detunings]

    def _factor(self):
        f = np.asarray(self.norm_factor, dtype=float)
        return f[:, None] if f.ndim == 1 else f

    def normalized(self, label: str | None = None) -> np.ndarray:
        data = self.total if label is None else self.channels[label]
        return data / self._factor()

    def spectrum(self, i: int, label: str | None = None) -> ChannelSpectrum:
        data = self.total if label is None else self.channels[label]
        return ChannelSpectrum(label or "total", self.grid, data[i])

    def index_of(self, delta_c: float) -> int:
        i = int(np.argmin(np.abs(self.detunings - delta_c)))
        if abs(self.detunings[i] - delta_c) > 1e-9 * max(1.0, abs(delta_c)):
            raise KeyError(f"detuning {delta_c} not on the sweep grid")
        return i

    def integrated(self, label: str | None = None, include_tails: bool = False) -> np.ndarray:
        """Per-detuning frequency integral of one channel (or the total)."""
        data = self.total if label is None else self.channels[label]
        val = np.trapezoid(data, self.grid.offsets, axis=1)
        if include_tails:
            labels = list(self.channels) if label is None else [label]
            val = val + sum(self.channel_tails[lab] for lab in labels)
        return val


def _sweep_point(p: ModelParams, grid: FrequencyGrid, channels, fwhm: float):
    try:
        res = total_spectrum(p, grid, channels)
    except (SteadyStateError, SpectrumError) as exc:
        raise type(exc)(f"{exc} [at {p}]") from exc
    chans = {lab: convolve_instrument(s, fwhm).intensity for lab, s in res.channels.items()}
    tails = {lab: s.tail for lab, s in res.channels.items()}
    return chans, res.channel_rates, res.n_cavity, res.p_BB, res.p_XX, tails


def detuning_sweep(template: ModelParams, detunings, grid: FrequencyGrid = DEFAULT_GRID,
                   n_max_list=(2,), *, instrument_fwhm: float = 0.0,
                   normalization: str = "global-max", reference_n_max: int | None = None,
                   channels=CHANNEL_LABELS, workers: int | None = None) -> dict[int, SweepResult]:
    """Spectra over a cavity-detuning grid for each photon truncation.

    Under ``global-max`` normalization every sweep is divided by the global
    maximum of the reference sweep (``n_max = 2`` when present, otherwise the
    largest truncation requested), so truncations stay directly comparable.
    ``per-spectrum`` divides each detuning by its own maximum.
    """
    detunings = np.asarray(detunings, dtype=float)
    if detunings.ndim != 1 or detunings.size == 0:
        raise ValueError("detunings must be a non-empty 1-D sequence")
    if normalization not in ("global-max", "per-spectrum", "none"):
        raise ValueError(f"unknown normalization {normalization!r}")
    n_max_list = [int(n) for n in n_max_list]
    if instrument_fwhm > 0 and grid.spacing > instrument_fwhm / 5:
        raise ResolutionError(f"grid spacing {grid.spacing} ueV exceeds fwhm/5")
    results = {}
    for n_max in n_max_list:
        points = [template.replace(delta_c=float(d), n_max=n_max) for d in detunings]
        task = lambda p: _sweep_point(p, grid, channels, instrument_fwhm)  # noqa: E731
        if workers and workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                rows = list(ex.map(task, points))
        else:
            rows = [task(p) for p in points]
        chans = {lab: np.array([r[0][lab] for r in rows]) for lab in channels}
        rates = {lab: np.array([r[1][lab] for r in rows]) for lab in channels}
        tails = {lab: np.array([r[5][lab] for r in rows]) for lab in channels}
        results[n_max] = SweepResult(
            template, n_max, detunings, grid, chans, rates,
            n_cavity=np.array([r[2] for r in rows]), p_BB=np.array([r[3] for r in rows]),
            p_XX=np.array([r[4] for r in rows]), channel_tails=tails,
            instrument_fwhm=instrument_fwhm,
            normalization=normalization)
    if normalization == "global-max":
        ref = reference_n_max if reference_n_max is not None else (2 if 2 in results else max(results))
        factor = float(results[ref].total.max())
        for r in results.values():
            r.norm_factor = factor
    elif normalization == "per-spectrum":
        for r in results.values():
            r.norm_factor = r.total.max(axis=1)
    return results
