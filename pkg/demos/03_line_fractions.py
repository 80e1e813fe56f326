"""Share of the emission carried by each line around the two-photon resonance.

Every spectrum in the window is fitted with Voigt lines (Gaussian width fixed
by the detector), the lines are followed across detuning, and each line's
area is divided by the total. Doing this with and without the |G,2> state
isolates the extra cavity emission fed by two-photon decay.
"""
import numpy as np

from bcsim.analysis import fraction_table, tpe_contribution, track_peaks
from bcsim.model import DEFAULT_PARAMS
from bcsim.spectra import FrequencyGrid, detuning_sweep

window = (-300.0, -100.0)
detunings = np.arange(window[0], window[1] + 1, 10.0)
grid = FrequencyGrid.span(-600.0, 300.0, 1.0)
sweeps = detuning_sweep(DEFAULT_PARAMS, detunings, grid, n_max_list=(1, 2),
                        instrument_fwhm=23.0, normalization="global-max")

tables = {n: fraction_table(track_peaks(sweeps[n], window=window)) for n in sweeps}
t = tables[2]
print(" delta_c      X       C       B      BP")
for i, d in enumerate(t.detunings):
    print(f"{d:8.0f}" + "".join(f"{t[lab][i]:8.3f}" for lab in ("X", "C", "B", "BP")))

det, extra = tpe_contribution(tables[2], tables[1])
i = int(np.nanargmax(extra))
print(f"\nlargest two-photon gain in the C fraction: {extra[i]:.3f} at delta_c = {det[i]:.0f} ueV")
