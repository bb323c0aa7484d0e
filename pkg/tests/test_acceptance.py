"""Acceptance criteria, each run at its stated tolerance and trial count.

Every test prints one ``PASS``/``FAIL`` line (also repeated in the pytest
terminal summary) and then asserts the same verdict.
"""

import itertools
from functools import lru_cache

import numpy as np
import pytest

from lpwanmodem import coding, demod, theory
from lpwanmodem.coding import default_spreading_sequence, spread
from lpwanmodem.phy import DEFAULT_PARAMS as P
from lpwanmodem.sim import (
    SweepConfig, run_ber_sweep, run_detect_sweep, run_false_alarm, run_per_sweep,
    run_sync_mse_sweep, threshold_snr,
)
from lpwanmodem.sync import DetectorConfig
from lpwanmodem.waveform import cpfsk_samples, down_chirp_samples

pytestmark = pytest.mark.slow


def verdict(log, tag, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {tag:>4}  {detail}"
    print(line)
    log.append(line)
    assert ok, line


def binom_sigma(p, n):
    return np.sqrt(p * (1 - p) / n)


# ---------------------------------------------------------------- 1. CFAR inverse pair


def test_c01_cfar_inverse_pair(verdicts):
    worst = 0.0
    for pfa, W in itertools.product((1e-2, 1e-3, 1e-5), (128, 256, 512)):
        back = theory.pfa_closed(theory.gamma_for_pfa(pfa, W), W)
        worst = max(worst, abs(back - pfa))
    verdict(verdicts, "C1", worst <= 1e-12, f"CFAR round trip max |error| = {worst:.2e} (tol 1e-12)")


# ---------------------------------------------------------------- 2. measured false-alarm rate


def test_c02_false_alarm_rate(verdicts):
    n = 100_000
    det = DetectorConfig.for_pfa(1e-2, P)
    down, both = run_false_alarm(P, det, n, seed=11)
    rate = both / n
    band = 3 * binom_sigma(1e-2, n)
    verdict(verdicts, "C2", abs(rate - 1e-2) <= band,
            f"P_FA = {rate:.5f} over {n} windows at gamma = {det.gamma:.4f}; target 0.01 +/- {band:.5f} "
            f"(single-chirp rate {down / n:.4f} vs 0.1)")


# ---------------------------------------------------------------- 3. preamble detection


def test_c03_detection_probability(verdicts):
    n = 10_000
    awgn = run_detect_sweep(SweepConfig("detect", (-5.0,), n, sto_case="case2", seed=5), noise_trials=0)
    rayl = run_detect_sweep(SweepConfig("detect", (5.0,), n, channel="rayleigh", sto_case="case2", seed=6),
                            noise_trials=0)
    pa, pr = awgn.rows[0]["p_d"], rayl.rows[0]["p_d"]
    verdict(verdicts, "C3", pa >= 0.99 and pr >= 0.95,
            f"P_D = {pa:.4f} (AWGN, -5 dB, need >= 0.99), {pr:.4f} (Rayleigh, 5 dB, need >= 0.95), {n} trials each")


# ---------------------------------------------------------------- 4. miss rate vs theory


def test_c04_miss_rate_vs_theory(verdicts):
    n = 10_000
    worst = []
    ok = True
    for gamma in (3.0, 4.0, 5.0):
        cfg = SweepConfig("detect", (-8.0, -6.0, -5.0), n, sto_case="case1",
                          detector=DetectorConfig(gamma=gamma), seed=7)
        for row in run_detect_sweep(cfg, noise_trials=0).rows:
            pm_th = 1 - row["pd_theory"]
            z = (row["p_m"] - pm_th) / binom_sigma(pm_th, n)
            ok &= abs(z) <= 3
            worst.append(f"g{gamma:g}/{row['snr_db']:g}dB:{row['p_m']:.4f}vs{pm_th:.4f}(z={z:+.1f})")
    verdict(verdicts, "C4", ok, "P_M sim vs closed form, 3 sigma: " + " ".join(worst))


# ---------------------------------------------------------------- 5. CFO MSE vs CRLB


def test_c05_cfo_mse_vs_crlb(verdicts):
    n = 10_000
    res = run_sync_mse_sweep(SweepConfig("sync_mse", (0.0, 5.0, 10.0, 15.0, 20.0), n, seed=8))
    ok = True
    parts = []
    for row in res.rows:
        ratio_db = row["mse_cfo_over_crlb_db"]
        # sample MSE has relative standard deviation about sqrt(2/n)
        floor = row["crlb_cfo"] * (1 - 3 * np.sqrt(2 / n))
        ok &= row["mse_cfo"] >= floor
        if row["snr_db"] >= 5:
            ok &= ratio_db <= 3.0
        parts.append(f"{row['snr_db']:g}dB:{ratio_db:+.2f}dB")
    verdict(verdicts, "C5", ok, "CFO MSE / CRLB (<= 3 dB for SNR >= 5, never below bound): " + " ".join(parts))


# ---------------------------------------------------------------- 6, 7 and the CFO variant: PER


FRAMES = 2000
GRIDS = {
    4: (-1.5, -1.0, -0.5, 0.0, 0.5, 1.0),
    8: (-4.5, -4.0, -3.5, -3.0, -2.5, -2.0),
    16: (-7.5, -7.0, -6.5, -6.0, -5.5, -5.0, -4.5, -4.0),
}


@lru_cache(maxsize=None)
def per_threshold(sf_p, ideal, cfo_fixed=None):
    g = GRIDS[sf_p]
    cfg = SweepConfig("per", g, FRAMES, ideal_sync=ideal, cfo_fixed=cfo_fixed,
                      params=P.with_(sf_p=sf_p), seed=100 + sf_p)
    res = run_per_sweep(cfg)
    return threshold_snr(g, res.column("per"), 0.01), res


def _fmt_db(x):
    return "none" if x is None else f"{x:+.2f} dB"


def test_c06_per_ideal_sync(verdicts):
    ok, parts = True, []
    for sf_p, target in ((4, 0.0), (8, -3.0), (16, -6.0)):
        thr, _ = per_threshold(sf_p, True)
        ok &= thr is not None and abs(thr - target) <= 0.5
        parts.append(f"SF_p={sf_p}: {_fmt_db(thr)} (target {target:+.0f} +/- 0.5)")
    verdict(verdicts, "C6", ok, f"SNR at PER 0.01, ideal sync, {FRAMES} frames: " + "; ".join(parts))


def test_c07_per_real_sync(verdicts):
    ok, parts = True, []
    for sf_p, tol in ((4, 0.3), (8, 0.3), (16, 1.3)):
        ideal, _ = per_threshold(sf_p, True)
        real, res = per_threshold(sf_p, False)
        shift = None if ideal is None or real is None else real - ideal
        ok &= shift is not None and abs(shift) <= tol
        parts.append(f"SF_p={sf_p}: {_fmt_db(shift)} (<= {tol}) sync fails {int(res.column('sync_fail').sum())}")
    verdict(verdicts, "C7", ok, "real-sync shift at PER 0.01: " + "; ".join(parts))


def test_c06b_per_with_cfo(verdicts):
    ref, _ = per_threshold(8, False, 0.0)
    cfo, _ = per_threshold(8, False, 0.13)
    shift = None if ref is None or cfo is None else cfo - ref
    verdict(verdicts, "C6b", shift is not None and shift <= 1.0,
            f"SF_p=8 real sync, CFO 0.13 B vs CFO-free: shift {_fmt_db(shift)} (<= 1 dB); "
            f"thresholds {_fmt_db(cfo)} / {_fmt_db(ref)}")


# ---------------------------------------------------------------- 8. orthogonality condition


def test_c08_orthogonality_exhaustive(verdicts):
    bad = 0
    total = 0
    for sf in (2, 4, 6, 8, 10, 12):
        for d in itertools.product((-1, 1), repeat=sf):
            flag = demod.check_orthogonal(d)
            bad += flag != (demod.rho_dm(d, P) < 1e-10)
            total += 1
    verdict(verdicts, "C8", bad == 0, f"orthogonality flag <=> rho_dm < 1e-10 on {total} sequences, "
            f"{bad} mismatches")


# ---------------------------------------------------------------- 9. spreading gain


def test_c09_spreading_gain(verdicts):
    grid = tuple(np.arange(-6.0, 5.01, 0.5))
    thr = {}
    for sf_p in (4, 8, 16):
        res = run_ber_sweep(SweepConfig("ber", grid, 200, params=P.with_(sf_p=sf_p), seed=40 + sf_p),
                            bits_per_trial=1000)
        thr[sf_p] = threshold_snr(grid, res.column("ber"), 1e-2)
    shifts = [thr[4] - thr[8], thr[8] - thr[16]] if None not in thr.values() else []
    ok = len(shifts) == 2 and all(abs(s - 3.0) <= 0.3 for s in shifts)
    verdict(verdicts, "C9", ok, "BER 1e-2 shift per SF_p doubling (3.0 +/- 0.3): "
            + ", ".join(f"{s:.2f} dB" for s in shifts)
            + " | thresholds " + ", ".join(f"SF_p={k}: {_fmt_db(v)}" for k, v in thr.items()))


# ---------------------------------------------------------------- 10. closed forms vs brute force


def _xcorr_brute(a, b):
    """``|sum_n a*[n] b[n+m]| / len`` for m = -(L-1)..L-1."""
    return np.abs(np.correlate(b, a, "full")) / a.size


def test_c10_closed_form_oracles(verdicts):
    err = {"autocorr": 0.0, "xcorr_du": 0.0, "xcorr_cfo": 0.0, "rho_max": 0.0, "rho_dm": 0.0, "resid": 0.0}
    for N, K in itertools.product((16, 64, 128, 256), (1, 2, 4)):
        d = down_chirp_samples(N, K)
        lags = np.arange(-(N * K - 1), N * K)
        err["autocorr"] = max(err["autocorr"],
                              np.max(np.abs(theory.autocorr_closed(lags, N, K) - _xcorr_brute(d, d))))
        err["xcorr_du"] = max(err["xcorr_du"],
                              np.max(np.abs(theory.xcorr_du_closed(lags, N, K) - _xcorr_brute(np.conj(d), d))))
        n = np.arange(d.size)
        for cfo_b in (-0.2, -0.071, 0.0, 0.013, 0.1, 0.19):
            rx = d * np.exp(2j * np.pi * cfo_b / K * n)
            brute = _xcorr_brute(d, rx)
            err["xcorr_cfo"] = max(err["xcorr_cfo"],
                                   np.max(np.abs(theory.xcorr_cfo_closed(lags, cfo_b / K, N, K) - brute)))
            err["rho_max"] = max(err["rho_max"], abs(theory.rho_max(K, cfo_b, N) - brute.max()))
    rng = np.random.default_rng(10)
    for _ in range(200):
        sf = int(rng.integers(2, 17))
        p = P.with_(k=int(rng.choice([1, 2, 4])))
        dd = rng.choice([-1, 1], sf)
        err["rho_dm"] = max(err["rho_dm"], abs(demod.rho_dm(dd, p) - demod.rho_dm_phase_sum(dd, p)))
    for sf_p in (4, 8, 16):
        p = P.with_(sf_p=sf_p)
        mf = demod.build_matched_filters(default_spreading_sequence(sf_p), p)
        L = mf.length
        for eps in np.linspace(0, 1 / (2 * L), 21):
            _, z1, _ = demod.demod_symbol(mf.mf1.samples * np.exp(2j * np.pi * eps * np.arange(L)), mf)
            err["resid"] = max(err["resid"], abs(z1 / L - theory.residual_cfo_corr(eps, p.k, sf_p)))
    x = np.linspace(-0.2, 0.2, 400_001)
    minima = {K: float(theory.rho_ratio(K, x, 128).min()) for K in (1, 2, 4)}
    oracle_ok = all(v <= 1e-6 for v in err.values())
    minima_ok = all(abs(minima[K] - t) <= 0.01 for K, t in ((1, 0.65), (2, 0.9), (4, 0.975)))
    verdict(verdicts, "C10", oracle_ok and minima_ok,
            "max |closed - brute| " + " ".join(f"{k}={v:.1e}" for k, v in err.items())
            + " (tol 1e-6); ratio minima " + " ".join(f"K={k}:{v:.4f}" for k, v in minima.items())
            + " (targets 0.65/0.9/0.975 +/- 0.01)")


# ---------------------------------------------------------------- 11. Viterbi vs ML, full chain


def test_c11_viterbi_ml_and_chain(verdicts):
    msgs = np.array(list(itertools.product((0, 1), repeat=12)), dtype=np.uint8)
    book = 2.0 * coding.conv_encode(msgs) - 1  # (4096, 36)
    rng = np.random.default_rng(11)
    mismatches = 0
    for _ in range(100):
        soft = book + rng.normal(0, 1.0, book.shape)
        dec = coding.viterbi_decode_soft(soft)
        best = np.max(soft @ book.T, axis=1)
        got = np.sum((2.0 * coding.conv_encode(dec) - 1) * soft, axis=1)
        mismatches += int(np.count_nonzero(np.abs(got - best) > 1e-9))
    payloads = rng.integers(0, 2, (1000, 8 * P.payload_len), dtype=np.uint8)
    d = default_spreading_sequence(P.sf_p)
    mf = demod.build_matched_filters(d, P)
    coded = coding.encode_payload(payloads)
    chips = np.stack([spread(c, d) for c in coded]).astype(np.int64)
    soft = demod.demod_block(cpfsk_samples(chips, P.h_m, P.k), mf)
    out, crc = coding.decode_payload_soft(soft, 8 * P.payload_len)
    chain_ok = bool(crc.all()) and np.array_equal(out, payloads)
    verdict(verdicts, "C11", mismatches == 0 and chain_ok,
            f"Viterbi metric below ML optimum in {mismatches} of {100 * 4096} decodes; "
            f"noiseless chain CRC pass {int(crc.sum())}/1000, bits exact {chain_ok}")


# ---------------------------------------------------------------- 12. sensitivity


def test_c12_sensitivity(verdicts):
    s = float(theory.sensitivity(76800, -3, 6))
    verdict(verdicts, "C12", abs(s + 122.1) <= 0.05, f"sensitivity(76800 Hz, -3 dB, 6 dB) = {s:.3f} dBm "
            "(target -122.1 +/- 0.05)")
