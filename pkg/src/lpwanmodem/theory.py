"""Closed-form results used as oracles for the simulator.

Units: lags ``m`` are samples at the sync rate ``K*B``. Functions taking a
CFO named ``cfo`` use the sync-rate normalization ``cfo = Delta_f / (K*B)``;
those taking ``cfo_b`` (and :class:`CfoDistribution`) use the chip-rate
normalization ``Delta_f / B``, which is the natural axis when ``K`` varies.
``N*K**2`` below always means ``N * K**2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import stats

# ---------------------------------------------------------------- chirp correlations


def _dirichlet(theta: np.ndarray, length: np.ndarray) -> np.ndarray:
    """``|sum_{n<length} exp(j*theta*n)|`` with the theta -> 0 limit handled."""
    theta = np.asarray(theta, dtype=float)
    length = np.asarray(length, dtype=float)
    s = np.sin(theta / 2)
    small = np.abs(s) < 1e-12
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.abs(np.sin(theta * length / 2) / np.where(small, 1.0, s))
    return np.where(small, length, val)


def autocorr_closed(m, N: int, K: int):
    """Down-chirp autocorrelation magnitude at integer lag ``m``."""
    nk = N * K
    m = np.asarray(m, dtype=float)
    out = _dirichlet(-2 * np.pi * m / (N * K * K), nk - np.abs(m)) / nk
    out = np.where(np.abs(m) >= nk, 0.0, out)
    return out[()] if out.ndim == 0 else out


def xcorr_du_closed(m, N: int, K: int):
    """Down/up-chirp cross-correlation magnitude, evaluated as the finite sum."""
    nk = N * K
    ms = np.atleast_1d(np.asarray(m, dtype=np.int64))
    out = np.empty(ms.shape, dtype=float)
    for i, mi in enumerate(ms.ravel()):
        a = abs(int(mi))
        if a >= nk:
            out.flat[i] = 0.0
            continue
        n = np.arange(nk - a, dtype=float)
        cyc = np.mod((n * n + a * n) / (N * K * K) - n / K, 1.0)
        out.flat[i] = abs(np.exp(2j * np.pi * cyc).sum()) / nk
    return out[0] if np.ndim(m) == 0 else out.reshape(np.shape(m))


def xcorr_cfo_closed(m, cfo, N: int, K: int):
    """Correlation magnitude of a down-chirp with CFO against its clean copy.

    Lag convention: ``sum_n s*[n] s[n+m] exp(j2pi*cfo*(n+m))``; the peak sits
    at ``m = N*K**2*cfo``. The overlap length is ``N*K - |m|``.
    """
    nk = N * K
    m = np.asarray(m, dtype=float)
    mp = m - N * K * K * np.asarray(cfo, dtype=float)
    out = _dirichlet(-2 * np.pi * mp / (N * K * K), nk - np.abs(m)) / nk
    out = np.where(np.abs(m) >= nk, 0.0, out)
    return out[()] if out.ndim == 0 else out


def peak_lag(cfo, N: int, K: int):
    """Integer lag of the correlation peak, ``round(N*K**2*cfo)`` (ties away from zero)."""
    c = N * K * K * np.asarray(cfo, dtype=float)
    return (np.sign(c) * np.floor(np.abs(c) + 0.5)).astype(np.int64)


def _peak_sampled(cfo, N: int, K: int) -> np.ndarray:
    """Largest sampled correlation magnitude for a chirp with CFO ``cfo`` (sync-rate units)."""
    c = N * K * K * np.asarray(cfo, dtype=float)
    lo = xcorr_cfo_closed(np.floor(c), cfo, N, K)
    hi = xcorr_cfo_closed(np.ceil(c), cfo, N, K)
    return np.maximum(lo, hi)


def rho_max(K: int, cfo_b, N: int):
    """Sampled correlation peak for a chip-rate-normalized CFO ``cfo_b``.

    ``K = np.inf`` returns the continuous-time peak ``1 - |cfo_b|``.
    """
    cfo_b = np.asarray(cfo_b, dtype=float)
    if np.isinf(K):
        out = 1.0 - np.abs(cfo_b)
    else:
        out = _peak_sampled(cfo_b / K, N, int(K))
    return out[()] if np.ndim(out) == 0 else out


def rho_ratio(K: int, cfo_b, N: int):
    """Sampled peak relative to the continuous-time peak."""
    return rho_max(K, cfo_b, N) / rho_max(np.inf, cfo_b, N)


def cfo_resolution(N: int, K: int) -> float:
    """Coarse CFO grid step in sync-rate units, ``1/(2*N*K**2)``."""
    return 1.0 / (2 * N * K * K)


# ---------------------------------------------------------------- CFAR


def _check_pfa_w(pfa, W):
    pfa = np.asarray(pfa, dtype=float)
    if np.any((pfa <= 0) | (pfa >= 1)):
        raise ValueError("P_FA must lie in (0, 1)")
    if np.any(np.asarray(W) < 1):
        raise ValueError("window width must be >= 1")
    return pfa


def gamma_for_pfa(pfa, W):
    """CFAR scale factor for a two-chirp false-alarm target over ``W``-sample windows."""
    pfa = _check_pfa_w(pfa, W)
    per_sample = -np.expm1(np.log1p(-np.sqrt(pfa)) / np.asarray(W, dtype=float))
    return np.sqrt(-(4 / np.pi) * np.log(per_sample))


def pfa_per_chirp(gamma, W):
    """Probability that one window of ``W`` noise-only samples crosses the threshold."""
    g = np.asarray(gamma, dtype=float)
    return -np.expm1(W * np.log1p(-np.exp(-np.pi * g * g / 4)))


def pfa_closed(gamma, W):
    """Two-chirp false-alarm probability (both chirp tests fire on noise)."""
    return pfa_per_chirp(gamma, W) ** 2


# ---------------------------------------------------------------- detection probability


def marcum_q1(a, b):
    """First-order Marcum Q function via the noncentral chi-square tail."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    central = np.exp(-b * b / 2)
    with np.errstate(invalid="ignore"):
        nc = stats.ncx2.sf(b * b, 2, np.where(a > 0, a * a, 1.0))
    out = np.where(a > 0, nc, central)
    return out[()] if out.ndim == 0 else out


def ncx2_tail(x, lam):
    """Right tail of a noncentral chi-square with 2 degrees of freedom."""
    return marcum_q1(np.sqrt(lam), np.sqrt(x))


class CfoKind(enum.Enum):
    UNIFORM = "uniform"


@dataclass(frozen=True)
class CfoDistribution:
    """CFO prior in chip-rate units (``Delta_f / B``)."""

    lo: float = -0.2
    hi: float = 0.2
    kind: CfoKind = CfoKind.UNIFORM

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("CfoDistribution needs lo < hi")
        if self.lo < -0.25 or self.hi > 0.25:
            raise ValueError("CFO bounds must lie inside [-0.25, 0.25]")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def sample(self, gen: np.random.Generator, size=None):
        return gen.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class TheoryPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError("TheoryPoint values must be finite")


def sigma_mf(snr_db: float, N: int) -> float:
    """Rayleigh scale of the matched-filter noise magnitude, ``sigma/sqrt(2N)``."""
    return 10.0 ** (-snr_db / 20.0) / np.sqrt(2 * N)


def pd_chirp(gamma: float, snr_db: float, cfo_b, N: int, K: int, gain: float = 1.0):
    """Single-chirp detection probability at a given chip-rate CFO.

    The peak magnitude is Rician with the sampled (leakage-affected) peak as
    its line-of-sight term; the threshold sits at ``gamma`` times the mean of
    the Rayleigh noise floor.
    """
    m = gain * _peak_sampled(np.asarray(cfo_b, dtype=float) / K, N, K)
    lam = (m / sigma_mf(snr_db, N)) ** 2
    return ncx2_tail(np.pi * gamma * gamma / 2, lam)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _gauss_panels(f, edges: np.ndarray) -> tuple[float, np.ndarray]:
    a, b = edges[:-1, None], edges[1:, None]
    x = (a + b) / 2 + (b - a) / 2 * _GL_X
    vals = f(x)
    per_panel = ((b - a)[:, 0] / 2) * (vals @ _GL_W)
    return float(per_panel.sum()), per_panel


def pd_closed(gamma: float, snr_db: float, N: int, K: int,
              dist: CfoDistribution = CfoDistribution(), kind: str = "awgn",
              tol: float = 1e-6) -> float:
    """Preamble detection probability averaged over the CFO prior (AWGN only).

    The integrand has kinks wherever the sampled peak switches lag, i.e. at
    half-integer values of ``N*K*cfo_b``. Panels are aligned to those kinks
    and each is integrated with Gauss-Legendre, halving panels until the
    refined estimate agrees within ``tol``.
    """
    if str(kind).lower() != "awgn":
        raise ValueError("closed-form detection probability is only defined for AWGN")
    if not isinstance(dist, CfoDistribution):
        raise TypeError("dist must be a CfoDistribution")

    def integrand(x):
        p = pd_chirp(gamma, snr_db, x, N, K)
        return p * p * dist.pdf(x)

    step = 1.0 / (N * K)  # kink spacing in cfo_b units
    kinks = (np.arange(np.ceil(dist.lo / step - 0.5), np.floor(dist.hi / step - 0.5) + 1) + 0.5) * step
    edges = np.unique(np.concatenate([[dist.lo], kinks[(kinks > dist.lo) & (kinks < dist.hi)], [dist.hi]]))
    total, _ = _gauss_panels(integrand, edges)
    for _ in range(12):
        mid = (edges[:-1] + edges[1:]) / 2
        edges = np.sort(np.concatenate([edges, mid]))
        refined, _ = _gauss_panels(integrand, edges)
        if abs(refined - total) < tol:
            return float(np.clip(refined, 0.0, 1.0))
        total = refined
    return float(np.clip(total, 0.0, 1.0))


def pm_closed(gamma: float, snr_db: float, N: int, K: int,
              dist: CfoDistribution = CfoDistribution()) -> float:
    return 1.0 - pd_closed(gamma, snr_db, N, K, dist)


# ---------------------------------------------------------------- CRLB


def crlb_cfo(N: int, K: int, snr_h):
    """Lower bound on the CFO variance (sync-rate units) from a 2NK-sample preamble.

    ``snr_h`` is the linear per-sample SNR ``|h|^2 / sigma_sample^2``.
    """
    snr_h = np.asarray(snr_h, dtype=float)
    nk = N * K
    return 3.0 / (4 * np.pi ** 2 * nk * (4 * nk * nk - 1) * snr_h)


def crlb_cfo_numeric(N: int, K: int, snr_h: float, h: float = 1.0, theta: float = 0.3,
                     cfo: float = 0.01, step: float = 1e-7) -> float:
    """CFO bound from a finite-difference Fisher matrix over ``(|h|, theta_h, cfo)``."""
    from .waveform import preamble_samples

    pre = preamble_samples(N, K)
    n = np.arange(pre.size)
    sigma2 = h * h / snr_h

    def model(xi):
        return xi[0] * np.exp(1j * xi[1]) * pre * np.exp(2j * np.pi * n * xi[2])

    xi0 = np.array([h, theta, cfo])
    jac = np.empty((pre.size, 3), dtype=complex)
    for i in range(3):
        d = np.zeros(3)
        d[i] = step
        jac[:, i] = (model(xi0 + d) - model(xi0 - d)) / (2 * step)
    fim = (2 / sigma2) * np.real(jac.conj().T @ jac)
    return float(np.linalg.inv(fim)[2, 2])


# ---------------------------------------------------------------- link budget and payload


def sensitivity(obw_hz, snr_min_db, nf_db):
    """Receiver sensitivity in dBm: thermal floor + bandwidth + required SNR + NF."""
    return -174.0 + 10 * np.log10(obw_hz) + snr_min_db + nf_db


def spreading_gain_db(sf_p):
    return 10 * np.log10(sf_p)


def residual_cfo_corr(df_eps, K: int, sf_p: int):
    """Matched-filter magnitude loss over one ``K*SF_p``-sample symbol under residual CFO."""
    length = K * sf_p
    out = _dirichlet(2 * np.pi * np.asarray(df_eps, dtype=float), length) / length
    return out[()] if out.ndim == 0 else out


def rho_dm_closed(d, K: int) -> float:
    """Symbol correlation coefficient of DSSS-MSK from the per-chip phase sum (MSK only)."""
    d = np.asarray(d, dtype=float)
    alt = (-1.0) ** np.arange(d.size)
    s = np.sum(alt * np.exp(1j * np.pi * (K - 1) * d / (2 * K)))
    return float(abs(s) / (K * d.size * np.sin(np.pi / (2 * K))))
