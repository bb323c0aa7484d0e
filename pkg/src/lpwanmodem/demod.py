"""Non-coherent joint despreading and demodulation of DSSS-CPFSK symbols.

One coded bit is one ``K*SF_p``-sample symbol. Each symbol is correlated with
the zero-phase waveforms of bit 1 and bit 0 and the soft output is the
difference of the two magnitudes, so any constant phase rotation per symbol
(accumulated CPFSK phase, channel phase, slow residual CFO) drops out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coding import SpreadingSequence, orthogonality_sum
from .phy import IqBuffer, PhyParams
from .theory import rho_dm_closed
from .waveform import cpfsk_samples


def _seq(d) -> np.ndarray:
    return d.d if isinstance(d, SpreadingSequence) else np.asarray(d)


@dataclass(frozen=True, eq=False)
class MatchedFilterPair:
    """Reference symbol waveforms; correlation uses their conjugates."""

    mf1: IqBuffer
    mf0: IqBuffer
    rho_dm: float

    @property
    def length(self) -> int:
        return len(self.mf1)


def symbol_waveform(d, h_m: float, kp: int) -> np.ndarray:
    """CPFSK waveform of one spread bit 1 (chips ``d``), phase starting at zero."""
    return cpfsk_samples(_seq(d).astype(np.int64), h_m, kp)


def _rho(s1: np.ndarray) -> float:
    # mf0 = conj(mf1), so s1 * conj(s0) = s1**2
    return float(abs(np.sum(s1 * s1)) / s1.size)


def build_matched_filters(d, p: PhyParams) -> MatchedFilterPair:
    s1 = symbol_waveform(d, p.h_m, p.k)
    return MatchedFilterPair(IqBuffer(s1), IqBuffer(np.conj(s1)), _rho(s1))


def rho_dm(d, p: PhyParams) -> float:
    """Correlation coefficient between the bit-1 and bit-0 symbol waveforms (direct sum)."""
    return _rho(symbol_waveform(d, p.h_m, p.k))


def rho_dm_phase_sum(d, p: PhyParams) -> float:
    """Same quantity from the per-chip phase-rotation sum; valid for MSK only."""
    if p.h_m != 0.5:
        raise ValueError("the phase-sum form assumes h_m = 1/2")
    return rho_dm_closed(_seq(d), p.k)


def check_orthogonal(d) -> bool:
    return orthogonality_sum(_seq(d)) == 0


def demod_symbol(r_sym, mf: MatchedFilterPair) -> tuple[float, float, float]:
    """Return ``(lambda, z1, z0)`` for one symbol."""
    x = r_sym.samples if isinstance(r_sym, IqBuffer) else np.asarray(r_sym)
    if x.shape != (mf.length,):
        raise ValueError(f"symbol must have {mf.length} samples, got {x.shape}")
    z1 = float(abs(np.dot(x, np.conj(mf.mf1.samples))))
    z0 = float(abs(np.dot(x, np.conj(mf.mf0.samples))))
    return z1 - z0, z1, z0


def demod_block(x: np.ndarray, mf: MatchedFilterPair) -> np.ndarray:
    """Soft values for an array whose last axis holds consecutive symbols."""
    L = mf.length
    sym = x.reshape(*x.shape[:-1], x.shape[-1] // L, L)
    z1 = np.abs(sym @ np.conj(mf.mf1.samples))
    z0 = np.abs(sym @ np.conj(mf.mf0.samples))
    return z1 - z0


def demod_payload(r, start: int, n_bits: int, mf: MatchedFilterPair) -> np.ndarray:
    """Soft values for ``n_bits`` consecutive symbols beginning at sample ``start``."""
    x = r.samples if isinstance(r, IqBuffer) else np.asarray(r)
    end = start + n_bits * mf.length
    if start < 0 or end > x.shape[-1]:
        raise IndexError(f"payload [{start}, {end}) outside a {x.shape[-1]}-sample buffer")
    return demod_block(x[..., start:end], mf)
