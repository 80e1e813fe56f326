import numpy as np
import pytest

from bcsim.model import DEFAULT_PARAMS
from bcsim.spectra import DEFAULT_GRID, detuning_sweep

DEFAULT_DETUNINGS = np.arange(-500.0, 250.0 + 2.5, 5.0)

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def default_sweeps():
    """Default-grid sweeps at n_max = 1, 2, 4 with the 23 ueV instrument,
    sharing the n_max = 2 global-max normalization."""
    return detuning_sweep(DEFAULT_PARAMS, DEFAULT_DETUNINGS, DEFAULT_GRID, n_max_list=(1, 2, 4),
                          instrument_fwhm=23.0, normalization="global-max")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
