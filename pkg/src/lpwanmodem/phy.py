"""Shared PHY types, parameter validation and per-trial random streams.

Sample-rate conventions used across the package:

* the *sync rate* is ``K * B`` (``rate_mult == 1``), where detection,
  synchronization and demodulation run;
* the *fine rate* is ``R * K * B`` (``rate_mult == R``), where the channel
  applies integer delays so that the STO is fractional at the sync rate.

CFO values inside the signal chain are normalized to the sync rate ``f_s = K*B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np


class ParamError(ValueError):
    """Raised when a PhyParams invariant does not hold."""


@dataclass(frozen=True)
class PhyParams:
    """Static PHY constants. Defaults follow the reference operating point."""

    sf: int = 7
    n: int = 128
    k: int = 2
    r: int = 4
    bandwidth: float = 76.8e3
    sf_p: int = 8
    h_m: float = 0.5
    payload_len: int = 50
    code_rate: Fraction = Fraction(1, 2)

    @property
    def nk(self) -> int:
        """Samples per chirp at the sync rate."""
        return self.n * self.k

    @property
    def fs(self) -> float:
        return self.k * self.bandwidth

    @property
    def samples_per_bit(self) -> int:
        return self.k * self.sf_p

    def with_(self, **changes) -> "PhyParams":
        return validate_params(replace(self, **changes))


def validate_params(p: PhyParams) -> PhyParams:
    """Return ``p`` unchanged if every invariant holds, else raise ParamError."""
    if p.n != 2 ** p.sf:
        raise ParamError(f"N != 2^SF (N={p.n}, SF={p.sf})")
    if not (isinstance(p.k, int) and p.k >= 1):
        raise ParamError(f"K must be a positive integer, got {p.k!r}")
    if not p.h_m > 0:
        raise ParamError(f"h_m must be > 0, got {p.h_m}")
    if p.k < math.ceil(2 * p.h_m):
        raise ParamError(f"K < ceil(2*h_m) (K={p.k}, h_m={p.h_m})")
    if not (isinstance(p.r, int) and p.r >= 1):
        raise ParamError(f"R must be an integer >= 1, got {p.r!r}")
    if not (isinstance(p.sf_p, int) and p.sf_p >= 2):
        raise ParamError(f"SF_p must be an integer >= 2, got {p.sf_p!r}")
    if not 0 <= p.payload_len <= 255:
        raise ParamError(f"payload length must fit in one byte, got {p.payload_len}")
    if p.bandwidth <= 0:
        raise ParamError("bandwidth must be positive")
    if Fraction(p.code_rate) != Fraction(1, 2):
        raise ParamError(f"only code rate 1/2 is implemented, got {p.code_rate}")
    return p


DEFAULT_PARAMS = validate_params(PhyParams())


@dataclass(frozen=True, eq=False)
class IqBuffer:
    """Complex baseband samples tagged with their sample-rate multiple.

    Behaves like a read-only 1-D array (``np.asarray(buf)`` is free).
    """

    samples: np.ndarray
    rate_mult: int = 1

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.complex128, copy=True)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("IqBuffer needs a non-empty 1-D sample sequence")
        if not np.all(np.isfinite(s)):
            raise ValueError("IqBuffer samples must be finite")
        if not (isinstance(self.rate_mult, (int, np.integer)) and self.rate_mult >= 1):
            raise ValueError(f"rate_mult must be a positive integer, got {self.rate_mult!r}")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.samples
        return self.samples.astype(dtype)

    def __len__(self) -> int:
        return self.samples.size

    def __getitem__(self, idx):
        return self.samples[idx]

    def decimate(self, r: int, offset: int = 0) -> "IqBuffer":
        """Sample-picking decimation by ``r`` starting at ``offset``."""
        if self.rate_mult % r:
            raise ValueError(f"cannot decimate rate_mult={self.rate_mult} by {r}")
        return IqBuffer(self.samples[offset::r], self.rate_mult // r)

    def to_file(self, path) -> None:
        """Write interleaved little-endian float32 (I, Q) pairs."""
        out = np.empty(2 * len(self), dtype="<f4")
        out[0::2] = self.samples.real
        out[1::2] = self.samples.imag
        out.tofile(path)

    @classmethod
    def from_file(cls, path, rate_mult: int = 1) -> "IqBuffer":
        raw = np.fromfile(path, dtype="<f4")
        if raw.size % 2:
            raise ValueError("odd number of float32 values in I/Q file")
        return cls(raw[0::2].astype(np.float64) + 1j * raw[1::2], rate_mult)


@dataclass(frozen=True)
class RandomStream:
    """Deterministic random stream keyed by ``(seed, stream_id)``.

    ``stream_id`` may be an int or a tuple of ints, e.g. ``(point, trial)``.
    Distinct ids map to independent ``SeedSequence`` children.
    """

    seed: int
    stream_id: int | tuple = 0
    _key: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        sid = self.stream_id if isinstance(self.stream_id, tuple) else (self.stream_id,)
        object.__setattr__(self, "_key", tuple(int(x) for x in sid))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1), spawn_key=self._key)
        return np.random.Generator(np.random.PCG64(ss))


def round_half_away(x):
    """Round to nearest, ties away from zero (works on scalars and arrays)."""
    y = np.sign(x) * np.floor(np.abs(x) + 0.5)
    if np.ndim(y) == 0:
        return int(y)
    return y.astype(np.int64)
