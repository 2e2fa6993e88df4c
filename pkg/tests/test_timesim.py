import logging

import numpy as np
import pytest

from filtpen import equalizers as eq
from filtpen import linkmodel as lm
from filtpen import timesim as ts
from filtpen.linkmodel import LinkSpec
from filtpen.timesim import SimConfig
from filtpen.trxmodel import DP16QAM, combine_snr, lin_to_db, snr_trx
from conftest import F0, RS, receiver_noise_link
from oracles import zf_inverse_taps


def test_constellation_is_gray_and_unit_energy():
    pts, bits = ts.qam_constellation(DP16QAM)
    assert pts.size == 16
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0)
    # nearest neighbours differ in exactly one bit
    d = np.abs(pts[:, None] - pts[None, :])
    dmin = d[d > 0].min()
    for i, j in zip(*np.nonzero(np.isclose(d, dmin))):
        assert np.sum(bits[i] != bits[j]) == 1


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(taps=0)
    with pytest.raises(ValueError):
        SimConfig(mu=1.0)
    with pytest.raises(ValueError):
        SimConfig(sps=0)


def test_estimate_snr_examples():
    rng = np.random.default_rng(1)
    pts, _ = ts.qam_constellation()
    x = pts[rng.integers(0, 16, 100_000)]
    assert ts.estimate_snr(x, x)[0] == ts.SNR_CAP_DB
    noise = (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size)) * np.sqrt(0.01 / 2)
    snr, d = ts.estimate_snr(x + noise, x)
    assert snr == pytest.approx(20.0, abs=0.1) and d == 0
    _, d = ts.estimate_snr(np.roll(x, 7), x)
    assert d == 7
    with pytest.raises(ts.AlignmentError):
        ts.estimate_snr(rng.standard_normal(x.size) + 0j, x)


def _symbols(n, seed=0):
    pts, _ = ts.qam_constellation()
    return pts[np.random.default_rng(seed).integers(0, 16, n)]


def test_lms_identity_converges_to_delta():
    x = _symbols(20_000)
    out = ts.lms_equalize(x, x, SimConfig(n_symbols=20_000, sps=1, taps=9))
    w = np.abs(out.taps)
    assert out.converged and not out.diverged
    assert w.max() / np.linalg.norm(w) > 0.99


def test_lms_two_tap_channel_vs_zero_forcing():
    rng = np.random.default_rng(3)
    n = 40_000
    x = _symbols(n, 3)
    y = x + 0.5 * np.roll(x, 1)
    y = y + 1e-3 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    taps = 16
    out = ts.lms_equalize(y, x, SimConfig(n_symbols=n, sps=1, taps=taps, mu=5e-3))
    # tap j multiplies y[k - taps//2 + j], so the causal inverse series
    # c_m (weight of y[k - m]) sits reversed at and before the centre tap
    zf_time = np.zeros(taps)
    zf_time[: taps // 2 + 1] = zf_inverse_taps(1.0, 0.5, taps // 2 + 1)[::-1]
    np.testing.assert_allclose(out.taps.real, zf_time, atol=0.02)
    z = out.symbols[n // 2 :]
    ref = x[n // 2 :]
    isi = np.mean(np.abs(z - ref) ** 2) / np.mean(np.abs(ref) ** 2)
    assert 10 * np.log10(isi) < -30


def test_lms_large_step_diverges(metro8, caplog):
    link = metro8.with_filter_bandwidth(62.5e9)
    y, _, x = ts.synthesize(link, SimConfig(n_symbols=20_000))
    with caplog.at_level(logging.WARNING):
        out = ts.lms_equalize(y, x, SimConfig(n_symbols=20_000, mu=0.5))
    assert out.diverged and not out.converged
    assert "diverged" in caplog.text


def test_lms_needs_enough_training():
    x = _symbols(2000)
    with pytest.raises(ValueError):
        ts.lms_equalize(x, x, SimConfig(n_symbols=2000, sps=1, taps=128, train_fraction=0.5))


def test_noiseless_identity_link():
    # wide rolloff keeps truncation ISI of a 64-tap receiver below -60 dB
    link = LinkSpec(RS, 1.0, F0, 1e-3, [], [], [])
    res = ts.run_simulation(link, SimConfig(taps=64))
    assert res.ber == 0.0
    assert res.snr_db >= 60.0 - 1e-9
    assert res.converged


def test_receiver_awgn_calibration():
    res = ts.run_simulation(receiver_noise_link(snr_db=15.0), SimConfig())
    assert res.snr_db == pytest.approx(15.0, abs=0.1)
    assert 0 < res.ber < 1


def test_same_seed_is_bit_identical(metro8):
    link = metro8.with_filter_bandwidth(75e9)
    cfg = SimConfig(n_symbols=20_000, seed=11)
    a = ts.synthesize(link, cfg)[0]
    b = ts.synthesize(link, cfg)[0]
    np.testing.assert_array_equal(a, b)
    ra, rb = ts.run_simulation(link, cfg), ts.run_simulation(link, cfg)
    assert ra.snr_db == rb.snr_db and np.array_equal(ra.taps, rb.taps)
    other = ts.synthesize(link, SimConfig(n_symbols=20_000, seed=12))[0]
    assert not np.array_equal(a, other)


def test_all_pass_matches_bound(metro8):
    link = metro8.all_pass()
    res = ts.run_simulation(link, SimConfig(taps=32))
    expected = lin_to_db(combine_snr([lm.snr_ase(link), snr_trx(link.p_rx, link.trx)]))
    assert res.snr_db == pytest.approx(expected, abs=0.15)


def test_sim_monotone_in_bandwidth_and_taps(metro8):
    snr = {}
    for b in (62.5e9, 75e9):
        for taps in (16, 32):
            cfg = SimConfig(taps=taps, seed=5)
            snr[b, taps] = ts.run_simulation(metro8.with_filter_bandwidth(b), cfg).snr_db
    assert snr[62.5e9, 16] <= snr[75e9, 16] + 0.1
    assert snr[62.5e9, 32] <= snr[75e9, 32] + 0.1
    assert snr[62.5e9, 32] >= snr[62.5e9, 16] - 0.1


def test_tracks_fle_at_64_taps(metro8):
    link = metro8.with_filter_bandwidth(75e9)
    ph = lm.pulse_phases(lm.white_equiv_channel(link), 2)
    fle = eq.fle_mmse(eq.FleProblem.from_phases(ph, 32, eq.bound_snr(link))).snr_db
    res = ts.run_simulation(link, SimConfig(taps=64, seed=1))
    assert res.snr_db == pytest.approx(fle, abs=0.3)
