"""Flat-fading channel with CFO, sample-domain STO and AWGN.

The channel runs at the fine rate ``R*K*B``. The CFO is normalized to the
sync rate ``f_s = K*B``, so the per-sample phase step at the fine rate is
``cfo / R``.

SNR is defined against unit signal power in the chip bandwidth ``B``. White
noise sampled at ``K`` samples per chip therefore has per-sample variance
``K * sigma**2`` at the sync rate; the fine-rate noise uses the same
per-sample variance so that sample-picking decimation preserves it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .phy import IqBuffer, RandomStream

MAX_ABS_CFO = 0.25


class ChannelKind(enum.Enum):
    AWGN = "awgn"
    RAYLEIGH = "rayleigh"

    @classmethod
    def parse(cls, value) -> "ChannelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown channel kind {value!r} (use awgn or rayleigh)") from None


@dataclass(frozen=True)
class ChannelSpec:
    """One channel realization.

    ``cfo`` is normalized to ``K*B``; ``tau_fine`` is the delay in fine-rate
    samples; ``samples_per_chip`` is ``K`` and sets the per-sample noise
    variance ``K * sigma**2``.
    """

    h: complex = 1.0 + 0.0j
    kind: ChannelKind = ChannelKind.AWGN
    cfo: float = 0.0
    tau_fine: int = 0
    snr_db: float = np.inf
    samples_per_chip: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", ChannelKind.parse(self.kind))
        if self.kind is ChannelKind.AWGN and self.h != 1:
            raise ValueError("AWGN channel requires h = 1")
        if abs(self.cfo) > MAX_ABS_CFO:
            raise ValueError(f"|cfo| must be <= {MAX_ABS_CFO}, got {self.cfo}")
        if int(self.tau_fine) != self.tau_fine or self.tau_fine < 0:
            raise ValueError("tau_fine must be a non-negative integer")
        if self.samples_per_chip < 1:
            raise ValueError("samples_per_chip must be >= 1")

    @property
    def sigma(self) -> float:
        return snr_to_sigma(self.snr_db)

    @property
    def noise_var(self) -> float:
        """Per-sample noise variance at the sync and fine rates."""
        return self.samples_per_chip * self.sigma ** 2


def snr_to_sigma(snr_db: float) -> float:
    """Noise standard deviation against unit signal power: ``10^(-snr/20)``."""
    return float(10.0 ** (-np.asarray(snr_db, dtype=float) / 20.0))


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RandomStream):
        return rng.generator()
    raise TypeError("rng must be a RandomStream or numpy Generator")


def complex_noise(gen: np.random.Generator, shape, var: float) -> np.ndarray:
    """Circularly symmetric complex Gaussian samples with total variance ``var``."""
    if var == 0:
        return np.zeros(shape, dtype=np.complex128)
    w = gen.standard_normal(shape + (2,) if isinstance(shape, tuple) else (shape, 2))
    return np.sqrt(var / 2) * (w[..., 0] + 1j * w[..., 1])


def gen_noise(rng, n_samples: int, sigma: float, rate_mult: int = 1) -> IqBuffer:
    """Pure noise buffer, variance ``sigma**2`` per sample."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    return IqBuffer(complex_noise(_generator(rng), n_samples, sigma ** 2), rate_mult)


def draw_rayleigh_gain(rng) -> complex:
    """``h ~ CN(0, 1)``, drawn once per frame."""
    z = _generator(rng).standard_normal(2)
    return complex(z[0], z[1]) / np.sqrt(2)


def apply_channel_array(tx: np.ndarray, spec: ChannelSpec, gen: np.random.Generator,
                        out_len: int, rate_mult: int) -> np.ndarray:
    """Array version of :func:`apply_channel` (no IqBuffer wrapping)."""
    tx = np.asarray(tx)
    tau = int(spec.tau_fine)
    if out_len < tx.size + tau:
        raise ValueError(f"out_len={out_len} < len(tx) + tau_fine = {tx.size + tau}")
    out = complex_noise(gen, out_len, spec.noise_var)
    n = np.arange(tx.size)  # n - tau_fine over the support of tx
    ramp = np.exp(2j * np.pi * np.mod(spec.cfo / rate_mult * n, 1.0))
    out[tau: tau + tx.size] += spec.h * tx * ramp
    return out


def apply_channel(tx: IqBuffer, spec: ChannelSpec, rng, out_len: int) -> IqBuffer:
    """``out[n] = h*tx[n-tau]*exp(j2pi*(cfo/R)*(n-tau)) + w[n]`` at the buffer's rate."""
    out = apply_channel_array(tx.samples, spec, _generator(rng), out_len, tx.rate_mult)
    return IqBuffer(out, tx.rate_mult)
