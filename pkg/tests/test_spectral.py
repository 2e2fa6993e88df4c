import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filtpen import spectral
from filtpen.spectral import FrequencyGrid, SampledSpectrum, GridError
from oracles import raised_cosine_unit

RS = 63.1e9


@pytest.fixture(scope="module")
def grid():
    return FrequencyGrid.for_symbol_rate(RS)


def test_grid_is_symmetric_with_zero_node(grid):
    f = grid.freqs
    assert f[0] == -f[-1]
    assert grid.n_points % 2 == 1
    assert f[grid.n_points // 2] == pytest.approx(0.0, abs=1e-6)
    assert RS / grid.df == pytest.approx(spectral.POINTS_PER_PERIOD, rel=1e-12)


@pytest.mark.parametrize("args", [(1.0, 1.0, 5), (0.0, 1.0, 1)])
def test_grid_rejects_bad_bounds(args):
    with pytest.raises(GridError):
        FrequencyGrid(*args)


def test_psd_must_be_nonnegative(grid):
    with pytest.raises(ValueError):
        SampledSpectrum(grid, -np.ones(grid.n_points), "psd")
    with pytest.raises(GridError):
        SampledSpectrum(grid, np.ones(3), "psd")


def test_erf_filter_peak_and_edge():
    b, otf = 75e9, 1e9
    assert spectral.erf_filter_magnitude(0.0, otf, b) == pytest.approx(1.0, abs=1e-12)
    # at the nominal edge one erf term vanishes and the other saturates
    edge = spectral.erf_filter_magnitude(b / 2, otf, b)
    assert edge == pytest.approx(0.5, abs=1e-12)
    assert 20 * np.log10(edge) == pytest.approx(-6.0206, abs=1e-4)


def test_erf_filter_tends_to_rectangle():
    f = np.array([-40e9, -30e9, 0.0, 30e9, 36e9, 40e9])
    mag = spectral.erf_filter_magnitude(f, 1e6, 75e9)
    np.testing.assert_allclose(mag, [0, 1, 1, 1, 1, 0], atol=1e-12)


@pytest.mark.parametrize("bad", [(0.0, 50e9), (10e9, -1.0)])
def test_erf_filter_rejects_nonpositive(bad):
    with pytest.raises(ValueError):
        spectral.erf_filter_magnitude(0.0, *bad)


def test_srrc_brickwall_limit(grid):
    phi2 = np.abs(spectral.srrc_spectrum(0.0, RS, grid).values) ** 2
    f = grid.freqs
    inside = np.abs(f) < RS / 2 - grid.df / 2
    outside = np.abs(f) > RS / 2 + grid.df / 2
    np.testing.assert_allclose(phi2[inside], 1 / RS, rtol=1e-12)
    assert np.all(phi2[outside] == 0)


def test_srrc_center_and_unit_energy(grid):
    s = spectral.srrc_spectrum(0.15, RS, grid)
    assert abs(s(0.0)) ** 2 == pytest.approx(1 / RS, rel=1e-12)
    e = spectral.SampledSpectrum(grid, spectral.magnitude_squared(s), "magnitude_squared")
    assert spectral.integrate_band(e, -RS, RS) == pytest.approx(1.0, abs=1e-6)


def test_srrc_rejects_rolloff():
    with pytest.raises(ValueError):
        spectral.raised_cosine(0.0, 1.5, RS)


def test_raised_cosine_matches_direct_formula():
    f = np.linspace(-RS, RS, 1001)
    for beta in (0.15, 0.5, 1.0):
        np.testing.assert_allclose(spectral.raised_cosine(f, beta, RS) * RS, raised_cosine_unit(f / RS, beta), atol=1e-12)


def test_cascade(grid):
    with pytest.raises(GridError):
        spectral.cascade_magnitude_sq([])
    ones = spectral.cascade_magnitude_sq([], grid)
    assert np.all(ones.values == 1.0)
    h = spectral.erf_filter_response(10e9, 62.5e9, grid)
    one = spectral.cascade_magnitude_sq([h])
    np.testing.assert_array_equal(one.values, np.abs(h.values) ** 2)
    two = spectral.cascade_magnitude_sq([h, h])
    np.testing.assert_allclose(two.values, one.values**2)
    # the -6 dB edge of one filter becomes -12 dB for two
    edge = 62.5e9 / 2
    assert 10 * np.log10(spectral.erf_filter_magnitude(edge, 10e9, 62.5e9) ** 4) == pytest.approx(-12.04, abs=0.01)


def test_cascade_grid_mismatch(grid):
    other = FrequencyGrid(-1e11, 1e11, 101)
    with pytest.raises(GridError):
        spectral.cascade_magnitude_sq([spectral.srrc_spectrum(0.1, RS, grid), spectral.srrc_spectrum(0.1, RS, other)])


@pytest.mark.parametrize("beta", [0.0, 0.15, 0.5, 1.0])
def test_nyquist_fold_is_flat(grid, beta):
    q = SampledSpectrum(grid, spectral.raised_cosine(grid.freqs, beta, RS) * RS, "magnitude_squared")
    folded = spectral.fold_spectrum(q, RS)
    # q has unit peak here, so the fold rs * sum q(f + n rs) equals rs
    np.testing.assert_allclose(folded.values / RS, 1.0, atol=1e-6)


def test_fold_without_aliasing(grid):
    vals = np.where(np.abs(grid.freqs) < 0.3 * RS, 1 + np.cos(grid.freqs / RS), 0.0)
    q = SampledSpectrum(grid, vals, "magnitude_squared")
    folded = spectral.fold_spectrum(q, RS)
    np.testing.assert_allclose(folded.values, RS * q(folded.freqs), atol=1e-9 * RS)


def test_fold_beta_one_at_period_edge(grid):
    # two aliases each contribute one half at f = -rs/2
    q = SampledSpectrum(grid, spectral.raised_cosine(grid.freqs, 1.0, RS), "magnitude_squared")
    folded = spectral.fold_spectrum(q, RS)
    assert folded.freqs[0] == pytest.approx(-RS / 2)
    assert folded.values[0] == pytest.approx(1.0, abs=1e-12)


def test_fold_needs_support():
    g = FrequencyGrid(-RS, RS, 2049)
    q = SampledSpectrum(g, np.ones(g.n_points), "magnitude_squared")
    with pytest.raises(GridError):
        spectral.fold_spectrum(q, RS, n_aliases=4)
    folded = spectral.fold_spectrum(q, RS, n_aliases=4, zero_extend=True)
    assert np.all(folded.values >= 0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=9, max_size=9))
def test_fold_preserves_nonnegativity(coeffs):
    g = FrequencyGrid.for_symbol_rate(1.0, 4, 64)
    f = g.freqs
    vals = sum(c * np.exp(-((f - (i - 4)) ** 2)) for i, c in enumerate(coeffs))
    folded = spectral.fold_spectrum(SampledSpectrum(g, vals, "psd"), 1.0)
    assert np.all(folded.values >= 0)
    assert np.isrealobj(folded.values)


def test_integrate_constant_and_ramp():
    g = FrequencyGrid(0.0, 1.0, 11)
    const = SampledSpectrum(g, np.full(11, 3.0), "psd")
    assert spectral.integrate_band(const, 0.15, 0.85) == pytest.approx(3.0 * 0.7, abs=1e-15)
    ramp = SampledSpectrum(g, g.freqs.copy(), "psd")
    assert spectral.integrate_band(ramp, 0.0, 1.0) == pytest.approx(0.5, abs=1e-15)
    assert spectral.integrate_band(ramp, 0.05, 0.55) == pytest.approx((0.55**2 - 0.05**2) / 2, abs=1e-15)
    with pytest.raises(GridError):
        spectral.integrate_band(ramp, -0.1, 0.5)


def test_integrate_rc_against_closed_form(grid):
    # the raised cosine integrates to one for any rolloff
    s = SampledSpectrum(grid, spectral.raised_cosine(grid.freqs, 0.15, RS), "psd")
    assert spectral.integrate_band(s, -RS, RS) == pytest.approx(1.0, abs=1e-6)


def test_integrate_folded_period(grid):
    q = SampledSpectrum(grid, spectral.raised_cosine(grid.freqs, 0.15, RS) * RS, "magnitude_squared")
    folded = spectral.fold_spectrum(q, RS)
    assert spectral.integrate_band(folded, -RS / 2, RS / 2) / RS**2 == pytest.approx(1.0, abs=1e-6)
