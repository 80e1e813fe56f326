"""Emission versus cavity detuning.

Sweeps the cavity across the dot lines, convolves with the 23 ueV detector
response and draws the normalized total emission as a colour map. The X-C
anticrossing sits at zero detuning and the B line anticrosses with the
exciton-dressed cavity line near -chi.

    python demos/01_detuning_colorplot.py [out.png]
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from bcsim.model import DEFAULT_PARAMS
from bcsim.spectra import FrequencyGrid, detuning_sweep

out = sys.argv[1] if len(sys.argv) > 1 else "colorplot.png"

detunings = np.arange(-500.0, 250.0 + 1, 10.0)
grid = FrequencyGrid.span(-600.0, 300.0, 1.0)
sweep = detuning_sweep(DEFAULT_PARAMS, detunings, grid, n_max_list=(2,),
                       instrument_fwhm=23.0, normalization="global-max")[2]

img = sweep.normalized()
fig, ax = plt.subplots(figsize=(6, 5))
mesh = ax.pcolormesh(grid.offsets, detunings, np.log10(np.clip(img, 1e-4, None)),
                     shading="auto", cmap="inferno")
fig.colorbar(mesh, ax=ax, label="log10 normalized intensity")
ax.set_xlabel(r"$\omega - \omega_X$ (ueV)")
ax.set_ylabel(r"$\delta_c$ (ueV)")
fig.tight_layout()
fig.savefig(out, dpi=150)

# brightest line at a few detunings, as a quick text check
for d in (-400.0, -200.0, 0.0, 200.0):
    i = sweep.index_of(d)
    print(f"delta_c = {d:6.0f}  brightest at {grid.offsets[np.argmax(img[i])]:7.1f} ueV")
print("wrote", out)
