"""Splittings: vacuum Rabi, biexciton-cavity, and the effective two-photon gap.

The first two come from peak positions in simulated spectra. The third is a
property of the Hamiltonian alone: |B,0> and |G,2> are only coupled through
virtual exciton states, so their anticrossing shrinks roughly like
4 g_X g_B / chi as the binding energy grows.
"""
import numpy as np

from bcsim.analysis import anticrossing_gap, rabi_splitting, track_peaks
from bcsim.model import DEFAULT_PARAMS
from bcsim.spectra import FrequencyGrid, detuning_sweep

p = DEFAULT_PARAMS
grid = FrequencyGrid.span(-600.0, 300.0, 1.0)
detunings = np.arange(-500.0, 100.0 + 1, 5.0)
sweep = detuning_sweep(p, detunings, grid, instrument_fwhm=23.0)[2]
tracks = track_peaks(sweep, labels=("X", "Y", "C", "B", "BY", "CX"))

print(f"X-C splitting near resonance: {rabi_splitting(tracks, ('X', 'C'), 0.0, 50.0):.1f} ueV")
print(f"B-C splitting at -400 ueV:    {rabi_splitting(tracks, ('B', 'CX'), -400.0, 0.0):.1f} ueV")

print("\n  chi    gap    4 g_X g_B / chi")
for chi in (400.0, 800.0, 1600.0):
    q = p.replace(chi=chi)
    print(f"{chi:5.0f} {anticrossing_gap(q):7.2f} {4 * p.g_X * p.g_B / chi:9.2f}")
