"""How many cavity photons are needed?

Compares sweeps truncated at 1, 2 and 4 photons. Going from 2 to 4 barely
changes anything, while 1 photon loses the two-photon channel through
|G,2>, which shows up as missing cavity emission near delta_c = -chi/2.
"""
import numpy as np

from bcsim.model import DEFAULT_PARAMS
from bcsim.spectra import FrequencyGrid, detuning_sweep

detunings = np.arange(-300.0, -100.0 + 1, 10.0)
grid = FrequencyGrid.span(-600.0, 300.0, 1.0)
sweeps = detuning_sweep(DEFAULT_PARAMS, detunings, grid, n_max_list=(1, 2, 4),
                        instrument_fwhm=23.0, normalization="global-max")

ref = sweeps[2].normalized()
for n in (1, 4):
    diff = np.max(np.abs(sweeps[n].normalized() - ref)) / ref.max()
    print(f"max |S(n_max={n}) - S(n_max=2)| = {diff:.2e} of the global peak")

print("\nintegrated cavity-channel emission")
print(" delta_c    n=1      n=2      n=4")
cav = {n: sweeps[n].integrated("cavity") for n in sweeps}
for i, d in enumerate(detunings):
    print(f"{d:8.0f} {cav[1][i]:8.4f} {cav[2][i]:8.4f} {cav[4][i]:8.4f}")
print("\n<a+a> range at n_max=2:", sweeps[2].n_cavity.min(), sweeps[2].n_cavity.max())
