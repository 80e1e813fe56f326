"""Multi-peak Voigt fitting, normally with the Gaussian (instrument) width held fixed."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks
from scipy.special import voigt_profile

from .spectra import ChannelSpectrum, gaussian_fwhm_to_sigma

__all__ = ["VoigtPeak", "FitResult", "voigt", "multi_voigt", "seed_peaks", "fit_peaks",
           "voigt_fwhm", "linear_areas"]

log = logging.getLogger(__name__)


def voigt(x, center, lorentz_fwhm, gauss_fwhm, area=1.0):
    """Area-normalized Voigt line (Lorentzian of FWHM ``lorentz_fwhm`` convolved
    with a Gaussian of FWHM ``gauss_fwhm``), scaled by ``area``."""
    x = np.asarray(x, dtype=float)
    sigma = gaussian_fwhm_to_sigma(gauss_fwhm)
    return area * voigt_profile(x - center, sigma, 0.5 * lorentz_fwhm)


def voigt_fwhm(lorentz_fwhm: float, gauss_fwhm: float) -> float:
    """Olivero-Longbothum approximation of the Voigt FWHM (~0.02% accurate)."""
    fl, fg = lorentz_fwhm, gauss_fwhm
    return 0.5346 * fl + np.sqrt(0.2166 * fl**2 + fg**2)


@dataclass(frozen=True)
class VoigtPeak:
    center: float
    lorentz_fwhm: float
    gauss_fwhm: float
    area: float

    @property
    def amplitude(self) -> float:
        """Peak height at the center."""
        return float(voigt(self.center, self.center, self.lorentz_fwhm, self.gauss_fwhm, self.area))

    def __call__(self, x):
        return voigt(x, self.center, self.lorentz_fwhm, self.gauss_fwhm, self.area)

    def area_on(self, x: np.ndarray) -> float:
        return float(np.trapezoid(self(x), x))


@dataclass
class FitResult:
    peaks: list[VoigtPeak]
    cost: float
    converged: bool
    nfev: int
    message: str = ""
    dropped: list[VoigtPeak] = field(default_factory=list)

    def model(self, x):
        return multi_voigt(x, self.peaks)


def multi_voigt(x, peaks) -> np.ndarray:
    out = np.zeros_like(np.asarray(x, dtype=float))
    for pk in peaks:
        out = out + pk(x)
    return out


def seed_peaks(spectrum: ChannelSpectrum, gauss_fwhm: float = 23.0, min_height: float = 0.05,
               min_prominence: float = 0.02) -> list[VoigtPeak]:
    """Initial peaks at local maxima above ``min_height`` of the maximum with
    prominence at least ``min_prominence`` of the maximum."""
    x, y = spectrum.grid.offsets, spectrum.intensity
    ymax = float(np.max(y))
    if ymax <= 0:
        return []
    idx, props = find_peaks(y, height=min_height * ymax, prominence=min_prominence * ymax,
                            width=0)
    h = spectrum.grid.spacing
    seeds = []
    for i, w in zip(idx, props["widths"]):
        fwhm_obs = max(w * h, gauss_fwhm)
        lor = max(fwhm_obs - gauss_fwhm, 2 * h)
        seeds.append(VoigtPeak(float(x[i]), lor, gauss_fwhm, 1.0))
    # areas from a linear solve with the seed shapes fixed
    return linear_areas(x, y, seeds)


def linear_areas(x, y, peaks):
    if not peaks:
        return []
    A = np.column_stack([pk(x) / pk.area for pk in peaks])
    areas, *_ = np.linalg.lstsq(A, y, rcond=None)
    return [replace(pk, area=float(max(a, 0.0))) for pk, a in zip(peaks, areas)]


def fit_peaks(spectrum: ChannelSpectrum, initial_peaks, gauss_fwhm: float = 23.0, *,
              ftol: float = 1e-10, max_iter: int = 500, min_area_frac: float = 1e-6,
              min_lorentz: float | None = None, center_tol: float | None = None,
              fit_gauss: bool = False) -> FitResult:
    """Least-squares fit of a sum of Voigt lines.

    Centers, Lorentzian widths and areas are free; every Gaussian width is held
    at ``gauss_fwhm`` unless ``fit_gauss`` is set, in which case each peak's
    Gaussian width is fitted too (starting from ``gauss_fwhm``). Peaks whose area collapses to zero are dropped (with a
    log notice) and the fit is repeated without them. Returned peaks are
    sorted by center.
    """
    x, y = spectrum.grid.offsets, np.asarray(spectrum.intensity, dtype=float)
    peaks = [replace(pk, gauss_fwhm=gauss_fwhm) for pk in initial_peaks]
    if not peaks:
        raise ValueError("fit_peaks needs at least one initial peak")
    h = spectrum.grid.spacing
    min_lorentz = 0.05 * h if min_lorentz is None else min_lorentz
    yscale = float(np.max(np.abs(y))) or 1.0
    yn = y / yscale
    npar = 4 if fit_gauss else 3
    dropped = []
    while True:
        p0, lo, hi = [], [], []
        for pk in peaks:
            p0 += [pk.center, max(pk.lorentz_fwhm, 1.01 * min_lorentz), max(pk.area / yscale, 1e-12)]
            if center_tol is None:
                clo, chi = x[0], x[-1]
            else:
                clo, chi = max(x[0], pk.center - center_tol), min(x[-1], pk.center + center_tol)
            lo += [clo, min_lorentz, 0.0]
            hi += [chi, 20 * (x[-1] - x[0]), np.inf]
            if fit_gauss:
                p0.append(pk.gauss_fwhm)
                lo.append(0.05 * h)
                hi.append(20 * (x[-1] - x[0]))
        p0 = np.clip(p0, lo, hi)

        def unpack(p):
            rows = p.reshape(-1, npar)
            g = rows[:, 3] if fit_gauss else np.full(len(rows), gauss_fwhm)
            return zip(rows[:, 0], rows[:, 1], g, rows[:, 2])

        def resid(p):
            m = np.zeros_like(x)
            for c, lw, gw, a in unpack(p):
                m += voigt(x, c, lw, gw, a)
            return m - yn

        sol = least_squares(resid, p0, bounds=(lo, hi), method="trf", x_scale="jac",
                            ftol=ftol, xtol=1e-14, gtol=1e-14, max_nfev=max_iter * (len(p0) + 1))
        fitted = [VoigtPeak(float(c), float(lw), float(gw), float(a) * yscale)
                  for c, lw, gw, a in unpack(sol.x)]
        total_area = sum(pk.area for pk in fitted) or 1.0
        keep = [pk for pk in fitted if pk.area > min_area_frac * total_area]
        if len(keep) == len(fitted) or not keep:
            break
        gone = [pk for pk in fitted if pk not in keep]
        for pk in gone:
            log.info("dropping peak at %.2f ueV: area pinned at zero", pk.center)
        dropped += gone
        peaks = keep
    converged = sol.status > 0
    if not converged:
        log.warning("Voigt fit did not converge: %s", sol.message)
    return FitResult(sorted(fitted if not keep else keep, key=lambda pk: pk.center),
                     float(sol.cost) * yscale**2, converged, int(sol.nfev), sol.message, dropped)
