"""Preamble detection, coarse synchronization and fine synchronization.

All indices are sync-rate samples unless noted. Correlations are normalized
by the reference length so a clean, aligned chirp gives magnitude 1.

Peak positions: with the chirp and channel conventions of this package a
positive CFO delays the down-chirp peak and advances the up-chirp peak:
``tau_d = mu + round(N*K**2*cfo)`` and ``tau_u = mu + N*K - round(N*K**2*cfo)``.
The coarse CFO estimate is signed accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .phy import IqBuffer, PhyParams, round_half_away, validate_params
from .theory import gamma_for_pfa
from .waveform import down_chirp_samples, preamble_samples

compute_gamma = gamma_for_pfa

# ---------------------------------------------------------------- correlation primitives


def _as_array(r) -> np.ndarray:
    return r.samples if isinstance(r, IqBuffer) else np.asarray(r, dtype=np.complex128)


def xcorr_direct(seg: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """``|sum_n seg[n+k] ref*[n]| / len(ref)`` for every full overlap ``k``."""
    win = sliding_window_view(seg, ref.size)
    return np.abs(win @ np.conj(ref)) / ref.size


def xcorr_fft(seg: np.ndarray, ref: np.ndarray) -> np.ndarray:
    n_out = seg.size - ref.size + 1
    nfft = 1 << int(np.ceil(np.log2(seg.size + ref.size)))
    c = np.fft.ifft(np.fft.fft(seg, nfft) * np.conj(np.fft.fft(ref, nfft)))
    return np.abs(c[:n_out]) / ref.size


_BACKENDS = {"direct": xcorr_direct, "fft": xcorr_fft}


def sliding_xcorr(r, ref, start: int, width: int, backend: str = "direct") -> np.ndarray:
    """Normalized correlation magnitudes for lags ``start .. start+width-1``."""
    x = _as_array(r)
    rf = _as_array(ref)
    if width < 1 or start < 0 or start + width - 1 + rf.size > x.size:
        raise IndexError(f"window [{start}, {start + width}) with a {rf.size}-sample reference "
                         f"exceeds a {x.size}-sample buffer")
    return _BACKENDS[backend](x[start: start + width - 1 + rf.size], rf)


def detect_peak(mags, start: int = 0, width: int | None = None) -> tuple[int, float]:
    """Argmax over ``mags[start:start+width]``; ties go to the smallest index."""
    m = np.asarray(mags)
    width = m.size - start if width is None else width
    i = int(np.argmax(m[start: start + width]))
    return start + i, float(m[start + i])


def cfar_test(mags, peak_idx: int, peak_mag: float, gamma: float) -> bool:
    """Peak vs ``gamma`` times the mean of the window without the peak and its neighbours.

    ``peak_idx`` is relative to ``mags``.
    """
    m = np.asarray(mags, dtype=float)
    keep = np.ones(m.size, dtype=bool)
    keep[max(peak_idx - 1, 0): peak_idx + 2] = False
    if not keep.any():
        return False
    return bool(peak_mag > gamma * m[keep].mean())


# ---------------------------------------------------------------- detector types


@dataclass(frozen=True)
class DetectorConfig:
    """Detector settings. ``w_d``/``w_u`` of None mean ``N*K``.

    ``up_window`` selects the up-chirp search range: ``"centered"`` scans
    ``W_u`` lags centred on ``tau_d + N*K``; ``"wide"`` scans the wider
    ``[tau_c - W_u, tau_c + W_u]``. ``skip_thresholds`` drops both the CFAR
    and peak-ratio tests and uses the first window only (estimation runs).
    """

    gamma: float = 4.0
    eta: float = 1.5
    w_d: int | None = None
    w_u: int | None = None
    target_pfa: float | None = None
    up_window: str = "centered"
    backend: str = "direct"
    max_windows: int | None = None
    skip_thresholds: bool = False

    def __post_init__(self):
        if self.target_pfa is not None:
            if not 0 < self.target_pfa < 1:
                raise ValueError("target_pfa must lie in (0, 1)")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if not self.eta >= 1:
            raise ValueError("eta must be >= 1")
        if self.up_window not in ("centered", "wide"):
            raise ValueError("up_window must be 'centered' or 'wide'")
        if self.backend not in _BACKENDS:
            raise ValueError(f"backend must be one of {sorted(_BACKENDS)}")
        for w in (self.w_d, self.w_u):
            if w is not None and w < 4:
                raise ValueError("window widths must be >= 4")

    @classmethod
    def for_pfa(cls, target_pfa: float, p: PhyParams, **kw) -> "DetectorConfig":
        w = kw.get("w_d") or p.nk
        return cls(gamma=float(gamma_for_pfa(target_pfa, w)), target_pfa=target_pfa, **kw)

    def widths(self, p: PhyParams) -> tuple[int, int]:
        return (self.w_d or p.nk, self.w_u or p.nk)


@dataclass(frozen=True)
class SyncReport:
    """Detector and synchronizer outputs; estimate fields are None when not detected."""

    detected: bool
    tau_d: int | None = None
    tau_u: int | None = None
    peak_d: float | None = None
    peak_u: float | None = None
    mu: int | None = None
    cfo_int: float | None = None
    eps_r: int | None = None
    cfo_frac: float | None = None
    r: int | None = None
    n_windows: int = 0
    n_down_pass: int = 0

    @property
    def cfo(self) -> float | None:
        if self.cfo_int is None:
            return None
        return self.cfo_int + (self.cfo_frac or 0.0)

    @property
    def tau(self) -> float | None:
        """Timing estimate in sync-rate samples (fractional after fine sync)."""
        if self.mu is None:
            return None
        if self.eps_r is None:
            return float(self.mu)
        return self.mu + self.eps_r / self.r

    @property
    def tau_fine(self) -> int | None:
        """Timing estimate in fine-rate samples."""
        if self.mu is None or self.eps_r is None:
            return None
        return self.mu * self.r + self.eps_r

    def as_row(self) -> dict:
        return {
            "detected": int(self.detected), "tau_d": self.tau_d, "tau_u": self.tau_u,
            "peak_d": self.peak_d, "peak_u": self.peak_u, "mu": self.mu,
            "cfo_int": self.cfo_int, "eps_r": self.eps_r, "cfo_frac": self.cfo_frac,
            "cfo": self.cfo, "tau": self.tau,
        }


_REF_CACHE: dict = {}


def _refs(n: int, k: int):
    key = (n, k)
    if key not in _REF_CACHE:
        d = down_chirp_samples(n, k)
        d.flags.writeable = False
        u = np.conj(d)
        u.flags.writeable = False
        pre = preamble_samples(n, k)
        pre.flags.writeable = False
        _REF_CACHE[key] = (d, u, pre)
    return _REF_CACHE[key]


# ---------------------------------------------------------------- preamble detection


def _up_search(x, ref_u, tau_d, nk, w_u, mode, backend):
    tau_c = tau_d + nk
    if mode == "centered":
        lo, hi = tau_c - w_u // 2, tau_c + w_u - w_u // 2 - 1
    else:
        lo, hi = tau_c - w_u, tau_c + w_u
    lo = max(lo, 0)
    hi = min(hi, x.size - nk)
    if hi < lo:
        return None
    mags = sliding_xcorr(x, ref_u, lo, hi - lo + 1, backend)
    return lo, mags


def coarse_estimates(tau_d: int, tau_u: int, p: PhyParams) -> tuple[int, float]:
    """Start of preamble and quantized CFO (sync-rate units) from the two peak lags."""
    nk = p.nk
    return round_half_away((tau_d + tau_u - nk) / 2), (tau_d - tau_u + nk) / (2 * p.n * p.k * p.k)


def detect_preamble(r, p: PhyParams, cfg: DetectorConfig = DetectorConfig()) -> SyncReport:
    """Double-peak preamble detection with coarse SOP and CFO estimation.

    Down-chirp windows of ``W_d`` lags advance by ``W_d`` until the CFAR test
    passes, then the up-chirp is searched around ``tau_d + N*K``. If the
    up-chirp peak exceeds ``eta`` times the down-chirp peak, the down-chirp
    search is extended past the current window and the larger peak kept.
    The buffer running out before a detection yields ``detected=False``.
    """
    validate_params(p)
    x = _as_array(r)
    nk = p.nk
    ref_d, ref_u, _ = _refs(p.n, p.k)
    w_d, w_u = cfg.widths(p)
    p1 = 0
    n_win = n_pass = 0
    while p1 + w_d - 1 + nk <= x.size:
        if cfg.max_windows is not None and n_win >= cfg.max_windows:
            break
        n_win += 1
        mags_d = sliding_xcorr(x, ref_d, p1, w_d, cfg.backend)
        i_d, peak_d = detect_peak(mags_d)
        if not cfg.skip_thresholds and not cfar_test(mags_d, i_d, peak_d, cfg.gamma):
            p1 += w_d
            continue
        n_pass += 1
        tau_d = p1 + i_d
        up = _up_search(x, ref_u, tau_d, nk, w_u, cfg.up_window, cfg.backend)
        if up is None:
            break
        lo_u, mags_u = up
        i_u, peak_u = detect_peak(mags_u)
        if not cfg.skip_thresholds and not cfar_test(mags_u, i_u, peak_u, cfg.gamma):
            p1 += w_d
            continue
        tau_u = lo_u + i_u
        if not cfg.skip_thresholds and peak_u > cfg.eta * peak_d:
            lo_r = p1 + w_d
            hi_r = min(tau_u - nk + w_u // 2, x.size - nk)
            if hi_r >= lo_r:
                mags_r = sliding_xcorr(x, ref_d, lo_r, hi_r - lo_r + 1, cfg.backend)
                i_r, peak_r = detect_peak(mags_r)
                if peak_r > peak_d:
                    tau_d, peak_d = lo_r + i_r, peak_r
        mu, cfo_int = coarse_estimates(tau_d, tau_u, p)
        return SyncReport(True, tau_d=tau_d, tau_u=tau_u, peak_d=peak_d, peak_u=peak_u,
                          mu=mu, cfo_int=cfo_int, n_windows=n_win, n_down_pass=n_pass)
    return SyncReport(False, n_windows=n_win, n_down_pass=n_pass)


# ---------------------------------------------------------------- fine synchronization


def compensate_cfo(r, cfo: float) -> IqBuffer:
    """Remove a sync-rate-normalized CFO; phase is referenced to the first sample.

    For a fine-rate buffer the per-sample step is ``cfo / rate_mult``.
    """
    buf = r if isinstance(r, IqBuffer) else IqBuffer(r)
    n = np.arange(len(buf))
    return IqBuffer(buf.samples * np.exp(-2j * np.pi * np.mod(cfo / buf.rate_mult * n, 1.0)), buf.rate_mult)


def fine_sync(r_fine, coarse: SyncReport, p: PhyParams) -> SyncReport:
    """Fractional timing by preamble matched filtering, then fractional CFO.

    Candidate starts ``mu*R + delta`` for ``delta`` in ``[-RK/2, RK/2]`` are
    decimated by ``R`` into ``2NK``-sample windows, de-rotated by the coarse
    CFO and correlated with the local preamble. At the best ``delta`` the
    window is de-rotated by the preamble itself and the fractional CFO is
    read off the lag-``NK`` autocorrelation angle. Samples outside the buffer
    count as zero.
    """
    if not coarse.detected:
        raise ValueError("fine_sync needs a detected coarse report")
    validate_params(p)
    x = _as_array(r_fine)
    R, nk = p.r, p.nk
    _, _, pre = _refs(p.n, p.k)
    half = (R * p.k) // 2
    deltas = np.arange(-half, half + 1)
    idx = coarse.mu * R + deltas[:, None] + R * np.arange(2 * nk)
    valid = (idx >= 0) & (idx < x.size)
    win = np.where(valid, x[np.clip(idx, 0, x.size - 1)], 0.0)
    derot = np.exp(-2j * np.pi * np.mod(coarse.cfo_int * np.arange(2 * nk), 1.0))
    filt = win * (derot * np.conj(pre))
    lam = np.abs(filt.sum(axis=1))
    best = int(np.argmax(lam))
    rt = filt[best]
    cfo_frac = float(np.angle(np.sum(np.conj(rt[:nk]) * rt[nk:])) / (2 * np.pi * nk))
    return replace(coarse, eps_r=int(deltas[best]), cfo_frac=cfo_frac, r=R)


def synchronize(r_fine, p: PhyParams, cfg: DetectorConfig = DetectorConfig()) -> SyncReport:
    """Detect on the sync-rate decimation of ``r_fine``, then fine-sync."""
    x = _as_array(r_fine)
    coarse = detect_preamble(x[:: p.r], p, cfg)
    if not coarse.detected:
        return coarse
    return fine_sync(x, coarse, p)


def noise_window_test(r, p: PhyParams, cfg: DetectorConfig) -> tuple[bool, bool]:
    """One detection attempt on a noise-only buffer.

    Returns ``(down_fired, preamble_fired)`` for the first down-chirp window,
    using exactly the live detector's thresholds and up-chirp window.
    """
    rep = detect_preamble(r, p, replace(cfg, max_windows=1))
    return rep.n_down_pass > 0, rep.detected
