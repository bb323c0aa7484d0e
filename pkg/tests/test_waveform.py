import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lpwanmodem import theory
from lpwanmodem.phy import DEFAULT_PARAMS, PhyParams
from lpwanmodem.waveform import (
    assemble_frame, cpfsk_modulate, cpfsk_phase, gen_down_chirp, gen_preamble, gen_up_chirp,
)


def _corr(a, b, m):
    """(1/len) * sum_n a[n+m] conj(b[n]) over the overlap."""
    L = a.size
    if m >= 0:
        return np.sum(a[m:] * np.conj(b[: L - m])) / L
    return np.sum(a[: L + m] * np.conj(b[-m:])) / L


def test_down_chirp_definition(params):
    s = gen_down_chirp(params).samples
    n = np.arange(params.nk)
    ref = np.exp(-2j * np.pi * (n ** 2 / (2 * params.n * params.k ** 2) - n / (2 * params.k)))
    assert s[0] == 1 + 0j
    assert np.allclose(s, ref, atol=1e-12)
    assert np.max(np.abs(np.abs(s) - 1)) < 1e-12


def test_up_chirp_is_conjugate(params):
    assert np.array_equal(gen_up_chirp(params).samples, np.conj(gen_down_chirp(params).samples))
    assert gen_up_chirp(params)[0] == 1 + 0j


def test_autocorrelation_matches_closed_form(params):
    s = gen_down_chirp(params).samples
    assert abs(_corr(s, s, 0)) == pytest.approx(1.0, abs=1e-12)
    lags = np.arange(-(params.nk - 1), params.nk)
    brute = np.array([abs(_corr(s, s, m)) for m in lags])
    assert np.max(np.abs(brute - theory.autocorr_closed(lags, params.n, params.k))) < 1e-9


def test_down_up_crosscorrelation_small(params):
    d = gen_down_chirp(params).samples
    u = gen_up_chirp(params).samples
    lags = np.arange(-(params.nk - 1), params.nk)
    brute = np.array([abs(_corr(d, u, m)) for m in lags])
    assert brute.max() < 0.12


def test_preamble_layout(params):
    pre = gen_preamble(params)
    assert len(pre) == 512
    assert pre[params.nk] == 1 + 0j
    peak = abs(np.sum(pre.samples * np.conj(pre.samples)))
    assert peak == pytest.approx(2 * params.nk)


@pytest.mark.parametrize("r", [2, 4, 8])
def test_fine_rate_decimates_to_sync_rate(params, r):
    fine = gen_down_chirp(params, r).samples
    assert np.array_equal(fine[::r], gen_down_chirp(params, 1).samples)
    assert np.array_equal(gen_preamble(params, r).samples[::r], gen_preamble(params).samples)


def test_msk_single_chip(params):
    s = cpfsk_modulate([1], params).samples
    assert np.allclose(s, np.exp(1j * np.pi * np.arange(2) / 4), atol=1e-12)


def test_msk_phase_returns_after_plus_minus(params):
    ph = cpfsk_phase(np.array([1, -1]), 0.5, params.k)
    # phase at the end of chip 2 (start of a virtual third chip)
    end = ph[-1] + (-1) * 0.25 / params.k
    assert end == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(chips=st.lists(st.sampled_from([-1, 1]), min_size=1, max_size=64),
       k=st.sampled_from([1, 2, 4]), rm=st.sampled_from([1, 4]))
def test_cpfsk_envelope_and_phase_continuity(chips, k, rm):
    p = PhyParams(k=k, h_m=0.5, r=4)
    s = cpfsk_modulate(chips, p, rm).samples
    kp = k * rm
    assert s.size == len(chips) * kp
    assert np.max(np.abs(np.abs(s) - 1)) < 1e-12
    step = np.angle(s[1:] * np.conj(s[:-1]))
    assert np.allclose(np.abs(step), np.pi * 0.5 / kp, atol=1e-9)
    # sign of each increment follows the chip being sent
    expected = np.repeat(chips, kp)[:-1] * np.pi * 0.5 / kp
    assert np.allclose(step, expected, atol=1e-9)


def test_cpfsk_rejects_bad_chips(params):
    with pytest.raises(ValueError):
        cpfsk_modulate([], params)
    with pytest.raises(ValueError):
        cpfsk_modulate([1, 0], params)


def test_assemble_frame(params, rng):
    hdr = rng.choice([-1, 1], 40)
    pay = rng.choice([-1, 1], 100)
    fr = assemble_frame(params, hdr, pay, 2)
    assert len(fr.combined) == (2 * params.n + 140) * params.k * 2
    assert np.max(np.abs(np.abs(fr.combined.samples) - 1)) < 1e-12
    body = fr.combined.samples[2 * params.nk * 2:]
    assert body[0] == 1 + 0j  # payload phase restarts at zero
    assert np.array_equal(body, cpfsk_modulate(np.concatenate([hdr, pay]), params, 2).samples)
    empty = assemble_frame(params, [], [], 1)
    assert np.array_equal(empty.combined.samples, gen_preamble(params).samples)
