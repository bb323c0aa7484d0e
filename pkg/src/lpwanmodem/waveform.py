"""Transmit-side baseband waveforms: chirps, conjugate-chirp preamble, binary CPFSK.

Every waveform is a closed-form evaluation on the sample grid ``n / (K*rate_mult)``
(in chips), so a signal generated at the fine rate and decimated by ``R`` is
identical to the one generated directly at the sync rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phy import IqBuffer, PhyParams, validate_params


def _cycles_to_iq(cycles: np.ndarray) -> np.ndarray:
    # reduce modulo one cycle first so the 2*pi scaling never sees large phases
    return np.exp(2j * np.pi * np.mod(cycles, 1.0))


def down_chirp_samples(n_chirp: int, kp: int) -> np.ndarray:
    n = np.arange(n_chirp * kp)
    x = n / kp  # time in chips, exact for power-of-two kp
    return _cycles_to_iq(-(x * x / (2 * n_chirp) - x / 2))


def gen_down_chirp(p: PhyParams, rate_mult: int = 1) -> IqBuffer:
    """Base down-chirp sweeping ``[B/2, -B/2]`` over ``N*K*rate_mult`` samples."""
    validate_params(p)
    return IqBuffer(down_chirp_samples(p.n, p.k * rate_mult), rate_mult)


def gen_up_chirp(p: PhyParams, rate_mult: int = 1) -> IqBuffer:
    validate_params(p)
    return IqBuffer(np.conj(down_chirp_samples(p.n, p.k * rate_mult)), rate_mult)


def preamble_samples(n_chirp: int, kp: int) -> np.ndarray:
    d = down_chirp_samples(n_chirp, kp)
    return np.concatenate([d, np.conj(d)])


def gen_preamble(p: PhyParams, rate_mult: int = 1) -> IqBuffer:
    """Down-chirp followed by its conjugate, ``2*N*K*rate_mult`` samples."""
    validate_params(p)
    return IqBuffer(preamble_samples(p.n, p.k * rate_mult), rate_mult)


def cpfsk_phase(chips: np.ndarray, h_m: float, kp: int) -> np.ndarray:
    """Phase in cycles of a rectangular-pulse CPFSK signal, starting at zero.

    ``chips`` may be 1-D or 2-D (one row per frame); the sample axis is last.
    Within chip ``c`` at offset ``o`` the phase is
    ``h_m/2 * (sum(chips[:c]) + chips[c] * o / kp)`` cycles.
    """
    chips = np.asarray(chips)
    acc = np.cumsum(chips, axis=-1) - chips  # exclusive prefix sum
    frac = np.arange(kp) / kp
    ph = acc[..., :, None] + chips[..., :, None] * frac
    ph = ph.reshape(*chips.shape[:-1], chips.shape[-1] * kp)
    return (h_m / 2) * ph


def cpfsk_samples(chips, h_m: float, kp: int) -> np.ndarray:
    return _cycles_to_iq(cpfsk_phase(chips, h_m, kp))


def cpfsk_modulate(chips, p: PhyParams, rate_mult: int = 1) -> IqBuffer:
    """Binary CPFSK modulation of +/-1 chips, phase accumulator starting at 0."""
    chips = np.asarray(chips)
    if chips.ndim != 1 or chips.size == 0:
        raise ValueError("cpfsk_modulate needs a non-empty 1-D chip sequence")
    if not np.all(np.abs(chips) == 1):
        raise ValueError("chips must be +/-1")
    return IqBuffer(cpfsk_samples(chips.astype(np.int64), p.h_m, p.k * rate_mult), rate_mult)


@dataclass(frozen=True, eq=False)
class Frame:
    preamble: IqBuffer
    header_chips: np.ndarray
    payload_chips: np.ndarray
    combined: IqBuffer

    @property
    def n_chips(self) -> int:
        return self.header_chips.size + self.payload_chips.size


def assemble_frame(p: PhyParams, header_chips, payload_chips, rate_mult: int = 1) -> Frame:
    """Preamble followed by the CPFSK-modulated header and payload chips.

    The CPFSK phase restarts at zero on the first header chip, so the payload
    section does not depend on the preamble's final phase.
    """
    validate_params(p)
    hdr = np.asarray(header_chips, dtype=np.int8).ravel()
    pay = np.asarray(payload_chips, dtype=np.int8).ravel()
    pre = gen_preamble(p, rate_mult)
    chips = np.concatenate([hdr, pay])
    if chips.size:
        body = cpfsk_modulate(chips, p, rate_mult).samples
        combined = IqBuffer(np.concatenate([pre.samples, body]), rate_mult)
    else:
        combined = pre
    hdr.flags.writeable = False
    pay.flags.writeable = False
    return Frame(pre, hdr, pay, combined)
