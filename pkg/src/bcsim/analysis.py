"""Data reduction of simulated sweeps: line tracking, intensity fractions,
Rabi splittings, the effective two-photon coupling and photon diagnostics."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize_scalar

from .fitting import FitResult, VoigtPeak, fit_peaks, linear_areas, seed_peaks
from .hilbert import basis_index
from .model import ModelParams, build_hamiltonian
from .spectra import SweepResult

__all__ = [
    "BARE_STATES", "LINES", "DressedLines", "dressed_lines", "PeakTrack", "FractionTable",
    "track_peaks", "fraction_table", "tpe_contribution", "rabi_splitting",
    "anticrossing_gap", "photon_diagnostics", "PhotonDiagnostics", "TrackingError",
    "GapError",
]

log = logging.getLogger(__name__)

# bare states that label dressed eigenstates, as (level, photons)
BARE_STATES = {"G0": ("G", 0), "X0": ("X", 0), "Y0": ("Y", 0), "G1": ("G", 1),
               "B0": ("B", 0), "X1": ("X", 1), "Y1": ("Y", 1), "G2": ("G", 2)}

# emission lines as (upper dressed state, lower dressed state)
LINES = {
    "X": ("X0", "G0"),    # exciton
    "Y": ("Y0", "G0"),
    "C": ("G1", "G0"),    # bare cavity
    "B": ("B0", "X0"),    # biexciton -> exciton
    "BY": ("B0", "Y0"),
    "BP": ("B0", "G1"),   # biexciton -> cavity-exciton polariton
    "CX": ("X1", "X0"),   # cavity photon with the exciton present
    "C2": ("G2", "G1"),   # second cavity photon
}

FRACTION_LABELS = ("X", "C", "B", "BP")


class TrackingError(RuntimeError):
    pass


class GapError(RuntimeError):
    pass


@dataclass
class DressedLines:
    """Emission-line frequencies between bare-character-labeled dressed states."""
    detunings: np.ndarray
    lines: dict[str, np.ndarray]

    def __getitem__(self, label):
        return self.lines[label]


def dressed_lines(template: ModelParams, detunings) -> DressedLines:
    """Emission-line frequencies between dressed eigenstates of the Hamiltonian.

    At every detuning each dressed state is named after the bare state it
    overlaps most (a one-to-one assignment), so labels follow bare character:
    through an avoided crossing a label hops to the other branch.
    """
    detunings = np.asarray(detunings, dtype=float)
    dims = template.dims
    bare_idx = {k: basis_index(lv, n, dims) for k, (lv, n) in BARE_STATES.items() if n <= dims.n_max}
    names = list(bare_idx)
    rows_idx = list(bare_idx.values())
    energies = {k: np.empty(detunings.size) for k in names}
    for i, d in enumerate(detunings):
        w, v = np.linalg.eigh(build_hamiltonian(template.replace(delta_c=float(d))))
        rows, cols = linear_sum_assignment(-np.abs(v[rows_idx, :]) ** 2)
        for r, c in zip(rows, cols):
            energies[names[r]][i] = w[c]
    lines = {lab: energies[hi] - energies[lo] for lab, (hi, lo) in LINES.items()
             if hi in energies and lo in energies}
    return DressedLines(detunings, lines)


@dataclass
class PeakTrack:
    label: str
    detunings: np.ndarray
    peaks: list  # VoigtPeak or None per detuning
    order: np.ndarray = field(default=None, repr=False)  # continuation order (indices)

    @property
    def centers(self) -> np.ndarray:
        return np.array([np.nan if pk is None else pk.center for pk in self.peaks])

    @property
    def areas(self) -> np.ndarray:
        return np.array([np.nan if pk is None else pk.area for pk in self.peaks])

    def present(self) -> np.ndarray:
        return np.array([pk is not None for pk in self.peaks])


@dataclass
class TrackSet:
    """Tracks of one sweep plus the per-detuning fits they were assigned from."""
    tracks: dict[str, PeakTrack]
    fits: list[FitResult]
    predicted: DressedLines
    sweep: SweepResult

    def __getitem__(self, label) -> PeakTrack:
        return self.tracks[label]

    def __iter__(self):
        return iter(self.tracks.values())


def track_peaks(sweep: SweepResult, seeds: dict | None = None, *, labels=FRACTION_LABELS,
                anchor: float | None = None, gauss_fwhm: float | None = None,
                gate: float | None = None, window: tuple[float, float] | None = None,
                max_line_fwhm: float = 100.0) -> TrackSet:
    """Fit every spectrum of a sweep and follow labeled lines across detuning.

    Each line's position is predicted from the dressed-state energies plus the
    offset between fit and prediction at the previous detuning; fitted peaks
    are assigned to lines by minimal total displacement (optimal bipartite
    assignment), accepting only displacements below ``gate`` (default three
    detuning steps). A line with no peak in reach is absent at that detuning
    and re-acquired later when a peak returns to its prediction. Fitted peaks
    with a Lorentzian FWHM above ``max_line_fwhm`` only absorb background and
    are never assigned.

    ``seeds`` optionally maps label -> center at the anchor detuning; it sets
    the initial offset from the prediction.
    """
    det = np.asarray(sweep.detunings, dtype=float)
    sel = np.ones(det.size, bool) if window is None else (det >= min(window) - 1e-9) & (det <= max(window) + 1e-9)
    idx = np.flatnonzero(sel)
    if idx.size == 0:
        raise TrackingError(f"no sweep detunings inside window {window}")
    sub = det[idx]
    if anchor is None:
        anchor = float(sub[0])
    a_pos = int(np.argmin(np.abs(sub - anchor)))
    step = float(np.min(np.diff(np.unique(det)))) if det.size > 1 else 5.0
    gate = 3 * step if gate is None else gate
    gfw = (sweep.instrument_fwhm or 23.0) if gauss_fwhm is None else gauss_fwhm
    template = sweep.template.replace(n_max=sweep.n_max)
    pred = dressed_lines(template, sub)
    for lab in labels:
        if lab not in pred.lines:
            raise KeyError(f"unknown line {lab!r}; available: {sorted(pred.lines)}")

    offsets = {lab: 0.0 for lab in labels}
    if seeds:
        for lab, c in seeds.items():
            offsets[lab] = float(c) - float(pred[lab][a_pos])

    n = sub.size
    assigned = {lab: [None] * n for lab in labels}
    fits: list[FitResult | None] = [None] * n
    order = list(range(a_pos, n)) + list(range(a_pos - 1, -1, -1))
    start_offsets = dict(offsets)
    for k in order:
        if k == a_pos - 1:
            offsets = dict(start_offsets)
            for lab in labels:
                if assigned[lab][a_pos] is not None:
                    offsets[lab] = assigned[lab][a_pos].center - pred[lab][a_pos]
        spec = sweep.spectrum(int(idx[k]))
        expected = {lab: pred[lab][k] + offsets[lab] for lab in labels}
        fit = _fit_with_predictions(spec, expected, gfw, center_tol=gate, max_line_fwhm=max_line_fwhm)
        fits[k] = fit
        cands = [pk for pk in fit.peaks if pk.lorentz_fwhm <= max_line_fwhm]
        if cands:
            cost = np.array([[abs(pk.center - expected[lab]) for pk in cands] for lab in labels])
            big = 1e6 + cost.max()
            # leaving a line unassigned costs one gate, so two poor matches
            # never beat one good match plus a missing line
            full = np.hstack([np.where(cost < gate, cost, big), np.full((len(labels), len(labels)), gate)])
            rows, cols = linear_sum_assignment(full)
            for r, c in zip(rows, cols):
                if c < len(cands) and cost[r, c] < gate:
                    lab = labels[r]
                    assigned[lab][k] = cands[c]
                    offsets[lab] = cands[c].center - pred[lab][k]
    tracks = {lab: PeakTrack(lab, sub.copy(), assigned[lab], np.array(order)) for lab in labels}
    return TrackSet(tracks, fits, pred, sweep)


def _fit_with_predictions(spec, expected: dict, gauss_fwhm: float, center_tol: float,
                          max_line_fwhm: float = np.inf) -> FitResult:
    """Fit with seeds from local maxima plus any predicted line that has no
    maximum within one instrument width (lines closer than that are fitted as one)."""
    seeds = seed_peaks(spec, gauss_fwhm)
    h = spec.grid.spacing
    x = spec.grid.offsets
    for c in sorted(expected.values()):
        if not x[0] <= c <= x[-1]:
            continue
        if all(abs(pk.center - c) > gauss_fwhm for pk in seeds):
            seeds.append(VoigtPeak(float(c), max(5.0, 2 * h), gauss_fwhm, 1.0))
    if not seeds:
        return FitResult([], 0.0, True, 0, "empty spectrum")
    seeds = linear_areas(x, spec.intensity, sorted(seeds, key=lambda pk: pk.center))
    while True:
        fit = fit_peaks(spec, seeds, gauss_fwhm, center_tol=center_tol)
        pks = fit.peaks
        # broad background components never merge with a line
        lines = [i for i, pk in enumerate(pks) if pk.lorentz_fwhm <= max_line_fwhm]
        gaps = np.diff([pks[i].center for i in lines])
        if gaps.size == 0 or gaps.min() >= gauss_fwhm:
            return fit
        # closer than the instrument width: not resolvable, refit as one line
        m = int(np.argmin(gaps))
        ia, ib = lines[m], lines[m + 1]
        a, b = pks[ia], pks[ib]
        area = a.area + b.area
        c = (a.center * a.area + b.center * b.area) / area if area > 0 else 0.5 * (a.center + b.center)
        merged = VoigtPeak(c, max(a.lorentz_fwhm, b.lorentz_fwhm), gauss_fwhm, area)
        seeds = sorted([pk for i, pk in enumerate(pks) if i not in (ia, ib)] + [merged],
                       key=lambda pk: pk.center)


@dataclass
class FractionTable:
    """Integrated-intensity fraction of each tracked line per detuning.

    Missing lines are NaN (not zero). The denominator is the integral of the
    whole spectrum at that detuning.
    """
    detunings: np.ndarray
    fractions: dict[str, np.ndarray]
    total: np.ndarray

    def __getitem__(self, label) -> np.ndarray:
        return self.fractions[label]

    def at(self, label: str, delta_c: float) -> float:
        i = int(np.argmin(np.abs(self.detunings - delta_c)))
        return float(self.fractions[label][i])


def fraction_table(tracks: TrackSet, sweep: SweepResult | None = None,
                   window: tuple[float, float] | None = None) -> FractionTable:
    sweep = tracks.sweep if sweep is None else sweep
    x = sweep.grid.offsets
    any_track = next(iter(tracks))
    det = any_track.detunings
    sel = np.ones(det.size, bool) if window is None else (det >= min(window) - 1e-9) & (det <= max(window) + 1e-9)
    total = np.array([np.trapezoid(sweep.total[sweep.index_of(d)], x) for d in det[sel]])
    fr = {}
    for tr in tracks:
        vals = np.array([np.nan if pk is None else pk.area_on(x) for pk in np.array(tr.peaks, dtype=object)[sel]],
                        dtype=float)
        fr[tr.label] = vals / total
    return FractionTable(det[sel], fr, total)


def _as_table(obj, window):
    if isinstance(obj, FractionTable):
        return obj
    if isinstance(obj, SweepResult):
        return fraction_table(track_peaks(obj, window=window), obj)
    raise TypeError(f"expected FractionTable or SweepResult, got {type(obj).__name__}")


def tpe_contribution(with_two_photon, single_photon, window=(-300.0, -100.0)):
    """C-line fraction with two-photon states minus that without, per detuning.

    Arguments are two ``FractionTable`` objects or two ``SweepResult`` objects
    (tracked and tabulated here over ``window``).
    """
    if isinstance(with_two_photon, SweepResult) and isinstance(single_photon, SweepResult):
        if not np.isclose(np.mean(with_two_photon.norm_factor), np.mean(single_photon.norm_factor)):
            raise ValueError("sweeps use different normalization factors")
    t2, t1 = _as_table(with_two_photon, window), _as_table(single_photon, window)
    if t2.detunings.shape != t1.detunings.shape or np.any(np.abs(t2.detunings - t1.detunings) > 1e-9):
        raise ValueError("fraction tables are on different detuning grids")
    return t2.detunings, t2["C"] - t1["C"]


def rabi_splitting(tracks: TrackSet, pair=("X", "C"), resonance: float = 0.0,
                   half_width: float = 50.0) -> float:
    """Minimum center separation of two tracks over detunings near ``resonance``."""
    a, b = tracks[pair[0]], tracks[pair[1]]
    det = a.detunings
    near = np.abs(det - resonance) <= half_width + 1e-9
    sep = np.abs(a.centers - b.centers)
    both = near & np.isfinite(sep)
    if not np.any(both):
        closest = np.nanmin(sep) if np.any(np.isfinite(sep)) else np.nan
        raise TrackingError(f"tracks {pair} never both resolved within {half_width} ueV of "
                            f"{resonance}; closest separation anywhere {closest}")
    return float(np.min(sep[both]))


def _two_photon_pair(p: ModelParams):
    dims = p.dims
    w, v = np.linalg.eigh(build_hamiltonian(p))
    ib, ig = basis_index("B", 0, dims), basis_index("G", 2, dims)
    weight = np.abs(v[ib]) ** 2 + np.abs(v[ig]) ** 2
    top = np.argsort(weight)[::-1][:3]
    if weight[top[0]] + weight[top[1]] < 1.0:
        ov = np.abs(v[[ib, ig]][:, top]) ** 2
        raise GapError(f"|B,0> and |G,2> not captured by two dressed states; overlaps:\n{ov}")
    return abs(w[top[0]] - w[top[1]])


def anticrossing_gap(p: ModelParams, search: float | None = None) -> float:
    """Minimum splitting between the dressed states that carry |B,0> and |G,2>,
    minimized over cavity detunings within ``search`` of the two-photon resonance."""
    if p.n_max < 2:
        raise ValueError("two-photon states need n_max >= 2")
    search = p.chi / 4 if search is None else search
    c = p.two_photon_resonance
    f = lambda d: _two_photon_pair(p.replace(delta_c=float(d)))  # noqa: E731
    grid = np.linspace(c - search, c + search, 81)
    vals = np.array([f(d) for d in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    return float(min(res.fun, vals[i]))


@dataclass
class PhotonDiagnostics:
    detunings: np.ndarray
    n_cavity: np.ndarray
    p_BB: np.ndarray
    p_XX: np.ndarray


def photon_diagnostics(sweep: SweepResult) -> PhotonDiagnostics:
    return PhotonDiagnostics(sweep.detunings.copy(), sweep.n_cavity.copy(),
                             sweep.p_BB.copy(), sweep.p_XX.copy())
