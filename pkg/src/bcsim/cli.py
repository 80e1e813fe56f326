"""Command-line driver: spectra, detuning sweeps, peak fits and diagnostics to CSV.

Exit codes: 0 success, 2 configuration or output-directory error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, spectra, steady
from .config import ConfigError, GridSpec, RunSpec, check_key, convert_value, parse_config
from .hilbert import number_operator, transition_operator
from .model import build_model
from .spectra import CHANNEL_LABELS, FrequencyGrid, SweepResult

SWEEP_HEADER = ("delta_c_ueV", "omega_offset_ueV", "total") + CHANNEL_LABELS
SPECTRUM_HEADER = ("omega_offset_ueV", "total") + CHANNEL_LABELS
DIAG_HEADER = ("delta_c_ueV", "n_cavity", "p_BB", "p_XX")
FIT_LABELS = analysis.FRACTION_LABELS
UEV_PER_EV = 1e6

NUMERICAL_ERRORS = (steady.SteadyStateError, spectra.SpectrumError, analysis.TrackingError,
                    analysis.GapError, np.linalg.LinAlgError, FloatingPointError)


def fmt(x) -> str:
    """Fixed 17-significant-digit text; integers and labels pass through."""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x == 0.0:
        x = 0.0  # no negative zero
    return f"{x:.17g}"


class CsvWriter:
    """Collects rows and writes them in one go, so files appear whole and in order."""

    def __init__(self, header):
        self.header = list(header)
        self.rows: list[str] = []

    def add(self, *values):
        if len(values) != len(self.header):
            raise ValueError(f"row has {len(values)} fields, header has {len(self.header)}")
        self.rows.append(",".join(fmt(v) for v in values))

    def write(self, path: Path) -> int:
        path.write_text(",".join(self.header) + "\n" + "".join(r + "\n" for r in self.rows))
        return len(self.rows)


class Outputs:
    def __init__(self, spec: RunSpec):
        self.dir = Path(spec.out)
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
            probe = self.dir / ".write_probe"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise ConfigError(f"output directory {self.dir} is not writable: {exc}") from None
        self.counts: dict[str, int] = {}
        self.spec = spec

    def csv(self, name: str, writer: CsvWriter):
        self.counts[name] = writer.write(self.dir / name)

    def finish(self):
        text = self.spec.dumps()
        (self.dir / "resolved_config").write_text(text)
        self.counts["resolved_config"] = text.count("\n")
        lines = [f"{name} {self.counts[name]}" for name in sorted(self.counts)]
        (self.dir / "manifest").write_text("\n".join(lines) + "\n")


def _name(stem: str, n_max: int, spec: RunSpec, ext=".csv") -> str:
    return f"{stem}{ext}" if len(spec.n_max) == 1 else f"{stem}_n{n_max}{ext}"


def _axis_header(spec: RunSpec, header):
    return tuple(header) + (("omega_eV",) if spec.absolute_axis else ())


def _absolute(spec: RunSpec, offsets):
    return spec.omega_ref_eV + np.asarray(offsets) / UEV_PER_EV


def run_sweep_data(spec: RunSpec, detunings=None) -> dict[int, SweepResult]:
    det = spec.detuning.points() if detunings is None else np.asarray(detunings, dtype=float)
    grid = FrequencyGrid(spec.freq.points())
    return spectra.detuning_sweep(spec.template, det, grid, n_max_list=spec.n_max,
                                  instrument_fwhm=spec.fwhm, normalization=spec.normalize,
                                  workers=spec.workers)


def _write_sweep(out: Outputs, spec: RunSpec, res: SweepResult):
    w = CsvWriter(_axis_header(spec, SWEEP_HEADER))
    x = res.grid.offsets
    absx = _absolute(spec, x)
    total = res.normalized(None)
    chans = [res.normalized(lab) for lab in CHANNEL_LABELS]
    for i, d in enumerate(res.detunings):
        for j in range(x.size):
            row = [d, x[j], total[i, j]] + [c[i, j] for c in chans]
            if spec.absolute_axis:
                row.append(absx[j])
            w.add(*row)
    out.csv(f"sweep_n{res.n_max}.csv", w)


def run_spectrum(spec: RunSpec) -> Outputs:
    """Channel spectra at the template's cavity detuning, one file per truncation."""
    out = Outputs(spec)
    results = run_sweep_data(spec, [spec.template.delta_c])
    for n_max, res in results.items():
        w = CsvWriter(_axis_header(spec, SPECTRUM_HEADER))
        x = res.grid.offsets
        absx = _absolute(spec, x)
        total = res.normalized(None)[0]
        chans = [res.normalized(lab)[0] for lab in CHANNEL_LABELS]
        for j in range(x.size):
            row = [x[j], total[j]] + [c[j] for c in chans]
            if spec.absolute_axis:
                row.append(absx[j])
            w.add(*row)
        out.csv(f"spectrum_n{n_max}.csv", w)
    out.finish()
    return out


def run_sweep(spec: RunSpec) -> Outputs:
    out = Outputs(spec)
    for res in run_sweep_data(spec).values():
        _write_sweep(out, spec, res)
    out.finish()
    return out


def diagnostics_table(spec: RunSpec, n_max: int):
    n_op = number_operator(spec.template.replace(n_max=n_max).dims)
    rows = []
    for d in spec.detuning.points():
        p = spec.template.replace(delta_c=float(d), n_max=n_max)
        try:
            rho = steady.solve_steady_state(build_model(p))
        except steady.SteadyStateError as exc:
            raise type(exc)(f"{exc} [at {p}]") from exc
        rows.append((d, steady.expectation(rho, n_op).real,
                     steady.expectation(rho, transition_operator("B", "B", p.dims)).real,
                     steady.expectation(rho, transition_operator("X", "X", p.dims)).real))
    return rows


def run_diagnostics(spec: RunSpec) -> Outputs:
    out = Outputs(spec)
    for n_max in spec.n_max:
        w = CsvWriter(DIAG_HEADER)
        for row in diagnostics_table(spec, n_max):
            w.add(*row)
        out.csv(_name("diagnostics", n_max, spec), w)
    out.finish()
    return out


def read_sweep_csv(path, spec: RunSpec, n_max: int) -> SweepResult:
    """Rebuild a SweepResult from a sweep CSV (intensities as written, unnormalized)."""
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip().split(",")
    if tuple(header[:len(SWEEP_HEADER)]) != SWEEP_HEADER:
        raise ConfigError(f"{path}: unexpected header {header}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    det = np.unique(data[:, 0])
    nd = det.size
    if data.shape[0] % nd:
        raise ConfigError(f"{path}: rows do not form a detuning x frequency grid")
    nf = data.shape[0] // nd
    x = data[:nf, 1]
    cols = {lab: data[:, 3 + k].reshape(nd, nf) for k, lab in enumerate(CHANNEL_LABELS)}
    nan = np.full(nd, np.nan)
    return SweepResult(spec.template, n_max, det, FrequencyGrid(x), cols,
                       {lab: nan.copy() for lab in CHANNEL_LABELS}, nan.copy(), nan.copy(), nan.copy(),
                       instrument_fwhm=spec.fwhm, normalization="none")


def run_fit(spec: RunSpec, sweep_files: dict[int, Path] | None = None) -> Outputs:
    """Voigt fits, line tracks and intensity fractions over the fit window.

    Reads ``sweep_n{N}.csv`` from the output directory (or ``sweep_files``),
    running and writing the sweep first when the file is missing.
    """
    out = Outputs(spec)
    sweep_files = dict(sweep_files or {})
    missing = [n for n in spec.n_max if n not in sweep_files and not (out.dir / f"sweep_n{n}.csv").is_file()]
    if missing:
        lo, hi = spec.fit_window
        det = spec.detuning.points()
        det = det[(det >= lo - 1e-9) & (det <= hi + 1e-9)]
        for res in run_sweep_data(spec, det).values():
            if res.n_max in missing:
                _write_sweep(out, spec, res)
    for n_max in spec.n_max:
        path = sweep_files.get(n_max, out.dir / f"sweep_n{n_max}.csv")
        sweep = read_sweep_csv(path, spec, n_max)
        tracks = analysis.track_peaks(sweep, labels=FIT_LABELS, window=spec.fit_window)
        table = analysis.fraction_table(tracks, window=spec.fit_window)
        order = np.argsort(table.detunings)

        wp = CsvWriter(("delta_c_ueV", "peak", "center_ueV", "lorentz_fwhm_ueV", "gauss_fwhm_ueV", "area"))
        wt = CsvWriter(("delta_c_ueV", "line", "center_ueV", "lorentz_fwhm_ueV", "area", "fraction"))
        wf = CsvWriter(("delta_c_ueV",) + FIT_LABELS)
        for i in order:
            d = table.detunings[i]
            for m, pk in enumerate(tracks.fits[i].peaks):
                wp.add(d, m, pk.center, pk.lorentz_fwhm, pk.gauss_fwhm, pk.area)
            for lab in FIT_LABELS:
                pk = tracks[lab].peaks[i]
                if pk is not None:
                    wt.add(d, lab, pk.center, pk.lorentz_fwhm, pk.area, table[lab][i])
            wf.add(d, *[table[lab][i] for lab in FIT_LABELS])
        out.csv(_name("peaks", n_max, spec), wp)
        out.csv(_name("tracks", n_max, spec), wt)
        out.csv(_name("fractions", n_max, spec), wf)
    out.finish()
    return out

COMMANDS = {"spectrum": run_spectrum, "sweep": run_sweep, "fit": run_fit, "diagnostics": run_diagnostics}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bcsim", description="Quantum-dot cavity emission spectra.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="key = value config file")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--n-max", help="photon truncation(s), comma separated")
    ap.add_argument("--fwhm", help="instrument FWHM in ueV (0 disables)")
    ap.add_argument("--normalize", help="global-max, per-spectrum or none")
    ap.add_argument("--detuning", help="cavity detuning grid start:stop:step (ueV)")
    ap.add_argument("--freq", help="emission frequency grid start:stop:step (ueV)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override any config key")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def flags_from_args(args) -> dict:
    flags: dict[str, object] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = (s.strip() for s in item.split("=", 1))
        check_key(key, "--set")
        flags[key] = convert_value(key, raw, "--set")
    if args.out is not None:
        flags["out"] = args.out
    if args.n_max is not None:
        flags["n_max"] = convert_value("n_max", args.n_max, "--n-max")
    if args.fwhm is not None:
        flags["fwhm"] = convert_value("fwhm", args.fwhm, "--fwhm")
    if args.normalize is not None:
        flags["normalize"] = args.normalize
    for name, prefix in (("detuning", "detuning"), ("freq", "freq")):
        text = getattr(args, name)
        if text is not None:
            g = GridSpec.parse(text)
            flags.update({f"{prefix}_start": g.start, f"{prefix}_stop": g.stop, f"{prefix}_step": g.step})
    return flags


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        spec = parse_config(args.config, flags_from_args(args))
        COMMANDS[args.command](spec)
    except (ConfigError, spectra.ResolutionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
