
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bcsim.fitting import (VoigtPeak, fit_peaks, linear_areas, multi_voigt, seed_peaks, voigt,
                           voigt_fwhm)
from bcsim.spectra import ChannelSpectrum, FrequencyGrid

X = FrequencyGrid.span(-600, 300, 1)


def spec(y, grid=X):
    return ChannelSpectrum("synthetic", grid, np.asarray(y, float))


def test_voigt_unit_area_and_limits():
    x = np.arange(-5000, 5000, 0.05)
    assert np.trapezoid(voigt(x, 3.0, 20, 23, 2.5), x) == pytest.approx(2.5, rel=2e-3)
    # pure Gaussian limit
    g = voigt(x, 0, 0, 23)
    assert np.interp(11.5, x, g) / g.max() == pytest.approx(0.5, rel=1e-3)


@pytest.mark.parametrize("fl,fg", [(24, 23), (5, 23), (60, 23), (10, 0.01)])
def test_voigt_fwhm_matches_profile(fl, fg):
    x = np.arange(-400, 400, 0.01)
    y = voigt(x, 0, fl, fg)
    above = x[y >= y.max() / 2]
    assert above[-1] - above[0] == pytest.approx(voigt_fwhm(fl, fg), rel=2e-3)


def test_peak_helpers():
    pk = VoigtPeak(-100.0, 20.0, 23.0, 3.0)
    assert pk.amplitude == pytest.approx(float(pk(np.array([-100.0]))[0]))
    assert pk.area_on(X.offsets) == pytest.approx(3.0, rel=0.05)
    np.testing.assert_allclose(multi_voigt(X.offsets, [pk, pk]), 2 * pk(X.offsets))


@settings(max_examples=15, deadline=None)
@given(st.floats(-400, 100), st.floats(5, 60), st.floats(10, 40), st.floats(0.1, 100))
def test_single_voigt_recovery_all_parameters(c, fl, fg, a):
    y = voigt(X.offsets, c, fl, fg, a)
    seed = VoigtPeak(c + 3, fl * 1.3, 23.0, a * 0.7)
    fit = fit_peaks(spec(y), [seed], gauss_fwhm=23.0, fit_gauss=True)
    (pk,) = fit.peaks
    assert fit.converged
    assert pk.center == pytest.approx(c, rel=1e-3, abs=1e-3)
    assert pk.lorentz_fwhm == pytest.approx(fl, rel=1e-3)
    assert pk.gauss_fwhm == pytest.approx(fg, rel=1e-3)
    assert pk.area == pytest.approx(a, rel=1e-3)


def test_single_voigt_recovery_fixed_instrument():
    y = voigt(X.offsets, -203.7, 26.0, 23.0, 4.2)
    (pk,) = fit_peaks(spec(y), [VoigtPeak(-200, 15, 23, 1)], 23.0).peaks
    assert (pk.center, pk.lorentz_fwhm, pk.area) == pytest.approx((-203.7, 26.0, 4.2), rel=1e-3)
    assert pk.gauss_fwhm == 23.0


def _grid_search(x, y, gfw, c_range, l_range, rounds=6, n=13):
    """Oracle: coarse-to-fine exhaustive search over (c1, l1) x (c2, l2) with
    the two areas from the linear least-squares normal equations at every node."""
    boxes = [list(c_range[0]) + list(l_range[0]), list(c_range[1]) + list(l_range[1])]
    yy = y @ y
    for _ in range(rounds):
        nodes, cols = [], []
        for clo, chi, llo, lhi in boxes:
            cc, ll = np.meshgrid(np.linspace(clo, chi, n), np.linspace(llo, lhi, n), indexing="ij")
            nodes.append(np.column_stack([cc.ravel(), ll.ravel()]))
            cols.append(np.array([voigt(x, c, lw, gfw) for c, lw in nodes[-1]]))
        P, Q = cols
        a11 = np.einsum("ij,ij->i", P, P)[:, None]
        a22 = np.einsum("ij,ij->i", Q, Q)[None, :]
        a12 = P @ Q.T
        b1, b2 = (P @ y)[:, None], (Q @ y)[None, :]
        det = a11 * a22 - a12 ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            w1 = (a22 * b1 - a12 * b2) / det
            w2 = (a11 * b2 - a12 * b1) / det
        resid = np.where(det > 1e-9 * a11 * a22, yy - w1 * b1 - w2 * b2, np.inf)
        i, j = np.unravel_index(np.argmin(resid), resid.shape)
        best = (resid[i, j], (*nodes[0][i], *nodes[1][j]), np.array([w1[i, j], w2[i, j]]))
        new = []
        for (clo, chi, llo, lhi), (c, lw) in zip(boxes, (nodes[0][i], nodes[1][j])):
            dc, dl = (chi - clo) / (n - 1), (lhi - llo) / (n - 1)
            new.append([c - dc, c + dc, max(lw - dl, 0.1), lw + dl])
        boxes = new
    return best


def test_two_overlapping_peaks_match_grid_search():
    rng = np.random.default_rng(11)
    grid = FrequencyGrid.span(-320, -80, 1)
    x = grid.offsets
    truth = [VoigtPeak(-212.0, 25.0, 23.0, 1.0), VoigtPeak(-186.0, 18.0, 23.0, 0.45)]
    clean = multi_voigt(x, truth)
    y = clean + 0.01 * clean.max() * rng.normal(size=x.size)
    oracle = _grid_search(x, y, 23.0, [(-225, -200), (-200, -175)], [(10, 40), (5, 35)])
    fit = fit_peaks(spec(y, grid), [VoigtPeak(-215, 20, 23, 1), VoigtPeak(-180, 20, 23, 1)], 23.0)
    got = sorted(pk.area for pk in fit.peaks)
    ref = sorted(oracle[2])
    np.testing.assert_allclose(got, ref, rtol=0.02)


def test_fit_idempotent():
    y = multi_voigt(X.offsets, [VoigtPeak(-420, 20, 23, 0.3), VoigtPeak(-200, 30, 23, 2.0),
                                VoigtPeak(10, 25, 23, 3.0)])
    s = spec(y)
    first = fit_peaks(s, seed_peaks(s), 23.0)
    second = fit_peaks(s, first.peaks, 23.0)
    for a, b in zip(first.peaks, second.peaks):
        assert b.center == pytest.approx(a.center, abs=1e-6)
        assert b.area == pytest.approx(a.area, rel=1e-6)


def test_seed_peaks_finds_resolved_lines():
    y = multi_voigt(X.offsets, [VoigtPeak(-420, 20, 23, 0.5), VoigtPeak(-200, 30, 23, 2.0),
                                VoigtPeak(10, 25, 23, 3.0)])
    seeds = seed_peaks(spec(y))
    assert [round(pk.center) for pk in seeds] == [-420, -200, 10]
    assert seed_peaks(spec(np.zeros(X.offsets.size))) == []


def test_zero_area_peak_dropped():
    y = voigt(X.offsets, -100, 20, 23, 1.0)
    fit = fit_peaks(spec(y), [VoigtPeak(-100, 20, 23, 1), VoigtPeak(200, 20, 23, 0.1)], 23.0)
    assert len(fit.peaks) == 1
    assert len(fit.dropped) == 1


def test_center_tolerance_bounds():
    y = voigt(X.offsets, -100, 20, 23, 1.0)
    fit = fit_peaks(spec(y), [VoigtPeak(-130, 20, 23, 1)], 23.0, center_tol=10)
    assert fit.peaks[0].center >= -140 and fit.peaks[0].center <= -120


def test_linear_areas_nonnegative():
    y = voigt(X.offsets, 0, 20, 23, 2.0)
    pks = linear_areas(X.offsets, y, [VoigtPeak(0, 20, 23, 1), VoigtPeak(-300, 20, 23, 1)])
    assert pks[0].area == pytest.approx(2.0, rel=1e-6)
    assert pks[1].area >= 0


def test_fit_requires_peaks():
    with pytest.raises(ValueError):
        fit_peaks(spec(np.ones(X.offsets.size)), [])
