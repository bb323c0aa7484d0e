import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lpwanmodem import demod
from lpwanmodem.coding import SpreadingSequence, default_spreading_sequence, spread
from lpwanmodem.phy import DEFAULT_PARAMS, IqBuffer
from lpwanmodem.theory import residual_cfo_corr
from lpwanmodem.waveform import cpfsk_modulate, cpfsk_samples

P = DEFAULT_PARAMS


def test_single_chip_filter_is_msk_chip():
    mf = demod.build_matched_filters([1], P)
    assert np.allclose(mf.mf1.samples, cpfsk_modulate([1], P).samples)
    assert np.allclose(mf.mf0.samples, np.conj(mf.mf1.samples))
    assert mf.length == P.k


def test_all_ones_is_orthogonal():
    mf = demod.build_matched_filters([1, 1, 1, 1], P.with_(sf_p=4))
    assert mf.rho_dm == pytest.approx(0.0, abs=1e-12)


def test_alternating_sequence_rho():
    d = [1, -1, 1, -1]
    # direct sum and phase-sum form agree on 1/2 at K = 2
    assert demod.rho_dm(d, P) == pytest.approx(0.5, abs=1e-12)
    assert demod.rho_dm_phase_sum(d, P) == pytest.approx(0.5, abs=1e-12)
    assert demod.rho_dm([1, -1], P) > 0
    assert not demod.check_orthogonal(d)
    assert demod.check_orthogonal([1, 1, 1, 1])


def test_rho_forms_agree_random():
    rng = np.random.default_rng(11)
    for _ in range(200):
        sf = int(rng.integers(1, 17))
        k = int(rng.choice([1, 2, 4]))
        d = rng.choice([-1, 1], sf)
        p = P.with_(k=k)
        assert demod.rho_dm(d, p) == pytest.approx(demod.rho_dm_phase_sum(d, p), abs=1e-9)


def test_phase_sum_needs_msk():
    with pytest.raises(ValueError):
        demod.rho_dm_phase_sum([1, 1], P.with_(h_m=0.7))


def test_orthogonality_exhaustive_sf4():
    for d in itertools.product([-1, 1], repeat=4):
        assert demod.check_orthogonal(d) == (demod.rho_dm(d, P) < 1e-12)


@pytest.mark.parametrize("sf", [4, 8, 16])
def test_noiseless_symbols(sf):
    d = default_spreading_sequence(sf)
    p = P.with_(sf_p=sf)
    mf = demod.build_matched_filters(d, p)
    lam1, z1, z0 = demod.demod_symbol(mf.mf1, mf)
    assert lam1 == pytest.approx(p.k * sf) and z0 == pytest.approx(0, abs=1e-9)
    lam0, _, _ = demod.demod_symbol(mf.mf0, mf)
    assert lam0 == pytest.approx(-lam1)


@settings(max_examples=50)
@given(st.floats(0, 2 * np.pi), st.integers(0, 2 ** 31))
def test_phase_invariance(theta, seed):
    mf = demod.build_matched_filters(default_spreading_sequence(8), P)
    rng = np.random.default_rng(seed)
    r = rng.normal(size=mf.length) + 1j * rng.normal(size=mf.length)
    a = demod.demod_symbol(r, mf)
    b = demod.demod_symbol(np.exp(1j * theta) * r, mf)
    assert np.allclose(a, b, rtol=1e-10, atol=1e-12)


def test_symbol_length_checked():
    mf = demod.build_matched_filters(default_spreading_sequence(8), P)
    with pytest.raises(ValueError):
        demod.demod_symbol(np.zeros(mf.length + 1), mf)


def test_payload_signs_recover_bits():
    d = default_spreading_sequence(8)
    mf = demod.build_matched_filters(d, P)
    bits = np.random.default_rng(3).integers(0, 2, 300)
    x = cpfsk_modulate(spread(bits, d), P).samples
    x = np.concatenate([np.zeros(7), x, np.zeros(5)])
    soft = demod.demod_payload(IqBuffer(x), 7, bits.size, mf)
    assert np.array_equal(soft > 0, bits.astype(bool))
    with pytest.raises(IndexError):
        demod.demod_payload(x, 20, bits.size, mf)


def test_batched_block_matches_symbols():
    mf = demod.build_matched_filters(default_spreading_sequence(8), P)
    rng = np.random.default_rng(4)
    x = rng.normal(size=(3, 10 * mf.length)) + 1j * rng.normal(size=(3, 10 * mf.length))
    blk = demod.demod_block(x, mf)
    for i in range(3):
        for q in range(10):
            lam, _, _ = demod.demod_symbol(x[i, q * mf.length:(q + 1) * mf.length], mf)
            assert blk[i, q] == pytest.approx(lam)


@pytest.mark.parametrize("sf", [4, 8, 16])
def test_residual_cfo_tolerance(sf):
    d = default_spreading_sequence(sf)
    p = P.with_(sf_p=sf)
    mf = demod.build_matched_filters(d, p)
    L = mf.length
    bits = np.random.default_rng(sf).integers(0, 2, 200)
    x = cpfsk_modulate(spread(bits, d), p).samples
    for eps in np.linspace(0, 1 / (2 * L), 11):
        ramp = np.exp(2j * np.pi * eps * np.arange(L))
        _, z1, _ = demod.demod_symbol(mf.mf1.samples * ramp, mf)
        assert z1 / L == pytest.approx(residual_cfo_corr(eps, p.k, sf), abs=1e-6)
    # below a quarter of the symbol rate every decision survives with >= 0.9 of the peak
    eps = 0.99 / (4 * L)
    rot = x * np.exp(2j * np.pi * eps * np.arange(x.size))
    soft = demod.demod_payload(rot, 0, bits.size, mf)
    assert np.array_equal(soft > 0, bits.astype(bool))
    for q, b in enumerate(bits):
        _, z1, z0 = demod.demod_symbol(rot[q * L:(q + 1) * L], mf)
        assert (z1 if b else z0) / L >= 0.9


def test_symbol_waveform_phase_starts_at_zero():
    s = demod.symbol_waveform(SpreadingSequence(np.array([1, -1, -1, 1])), 0.5, 2)
    assert s[0] == 1
    assert np.allclose(s, cpfsk_samples(np.array([1, -1, -1, 1]), 0.5, 2))
