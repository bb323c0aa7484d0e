"""Bit-domain transmit/receive chain.

Payload:  CRC-16 -> (2,1,7) conv code -> additive scrambler -> block interleaver
Header:   16-bit header -> (2,1,7) conv code
Both are spread with the same +/-1 sequence (bit 1 -> d, bit 0 -> -d).

Soft metrics follow the demodulator convention: positive means bit 1.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

# ---------------------------------------------------------------- bit helpers


def bytes_to_bits(data) -> np.ndarray:
    """MSB-first bit expansion of a bytes-like or uint8 array."""
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8) if isinstance(data, (bytes, bytearray))
                         else np.asarray(data, dtype=np.uint8))


def bits_to_bytes(bits) -> bytes:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 8:
        raise ValueError("bit count is not a multiple of 8")
    return np.packbits(bits).tobytes()


def _as_bits(bits) -> np.ndarray:
    b = np.asarray(bits, dtype=np.uint8)
    if b.size and b.max() > 1:
        raise ValueError("bits must be 0/1")
    return b


# ---------------------------------------------------------------- CRC-16/CCITT-FALSE

CRC_POLY = 0x1021
CRC_INIT = 0xFFFF


def _crc_table() -> np.ndarray:
    table = np.zeros(256, dtype=np.uint16)
    for byte in range(256):
        c = byte << 8
        for _ in range(8):
            c = ((c << 1) ^ CRC_POLY) if c & 0x8000 else (c << 1)
        table[byte] = c & 0xFFFF
    return table


_CRC_TABLE = _crc_table()


def crc16(bits) -> int:
    """CRC-16/CCITT-FALSE over an MSB-first bit sequence of any length."""
    b = _as_bits(bits)
    crc = CRC_INIT
    n_full = b.size // 8
    for byte in np.packbits(b[: 8 * n_full]).tolist():
        crc = ((crc << 8) & 0xFFFF) ^ int(_CRC_TABLE[(crc >> 8) ^ byte])
    for bit in b[8 * n_full:].tolist():
        top = ((crc >> 15) & 1) ^ bit
        crc = (crc << 1) & 0xFFFF
        if top:
            crc ^= CRC_POLY
    return crc


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def _bits_to_int(bits) -> int:
    v = 0
    for b in np.asarray(bits).tolist():
        v = (v << 1) | int(b)
    return v


def crc16_append(bits) -> np.ndarray:
    b = _as_bits(bits)
    return np.concatenate([b, _int_to_bits(crc16(b), 16)])


def crc16_check(bits) -> bool:
    b = _as_bits(bits)
    if b.size < 16:
        return False
    return crc16(b[:-16]) == _bits_to_int(b[-16:])


# ---------------------------------------------------------------- convolutional code

CONSTRAINT_LEN = 7
GENERATORS = (0o133, 0o171)
TAIL = CONSTRAINT_LEN - 1
_N_STATES = 1 << TAIL


def _parity(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    out = np.zeros_like(x)
    while np.any(x):
        out ^= x & 1
        x >>= 1
    return out


def conv_encode(bits) -> np.ndarray:
    """Rate-1/2, K=7 encoder (133/171 octal), zero start, 6 zero tail bits.

    Accepts 1-D input or 2-D (one message per row). Output interleaves the
    two generator streams, first generator first.
    """
    b = _as_bits(bits)
    u = np.concatenate([b, np.zeros(b.shape[:-1] + (TAIL,), dtype=np.uint8)], axis=-1)
    out = np.zeros(u.shape[:-1] + (2 * u.shape[-1],), dtype=np.uint8)
    for g_idx, g in enumerate(GENERATORS):
        y = np.zeros_like(u)
        for j in range(CONSTRAINT_LEN):
            if (g >> j) & 1:
                # tap j sees the input from j steps ago
                y[..., j:] ^= u[..., : u.shape[-1] - j]
        out[..., g_idx::2] = y
    return out


def _trellis():
    s_new = np.arange(_N_STATES)
    pred = np.empty((2, _N_STATES), dtype=np.int64)
    signs = np.empty((2, 2, _N_STATES))
    for x in (0, 1):
        pred[x] = (s_new >> 1) | (x << (TAIL - 1))
        reg = (x << TAIL) | s_new
        for g_idx, g in enumerate(GENERATORS):
            signs[x, g_idx] = 2.0 * _parity(reg & g) - 1.0
    return pred, signs


_PRED, _SIGNS = _trellis()


def viterbi_decode_soft(soft) -> np.ndarray:
    """Maximum-likelihood decoding of tail-terminated codewords.

    Maximizes ``sum(c_i * soft_i)`` with coded bits mapped 0 -> -1, 1 -> +1,
    traceback from the zero state. Returns the information bits (tail
    stripped). A 2-D input decodes one codeword per row.
    """
    lam = np.asarray(soft, dtype=np.float64)
    single = lam.ndim == 1
    if single:
        lam = lam[None, :]
    n = lam.shape[-1]
    if n % 2 or n < 2 * (TAIL + 1):
        raise ValueError(f"soft length must be even and >= {2 * (TAIL + 1)}, got {n}")
    if not np.all(np.isfinite(lam)):
        raise ValueError("soft metrics must be finite")
    n_batch, steps = lam.shape[0], n // 2

    pm = np.full((n_batch, _N_STATES), -np.inf)
    pm[:, 0] = 0.0
    decisions = np.empty((steps, n_batch, _N_STATES), dtype=bool)
    l0, l1 = lam[:, 0::2], lam[:, 1::2]
    for t in range(steps):
        a, b = l0[:, t, None], l1[:, t, None]
        m0 = pm[:, _PRED[0]] + _SIGNS[0, 0] * a + _SIGNS[0, 1] * b
        m1 = pm[:, _PRED[1]] + _SIGNS[1, 0] * a + _SIGNS[1, 1] * b
        d = m1 > m0
        decisions[t] = d
        pm = np.where(d, m1, m0)

    rows = np.arange(n_batch)
    state = np.zeros(n_batch, dtype=np.int64)
    out = np.empty((n_batch, steps), dtype=np.uint8)
    for t in range(steps - 1, -1, -1):
        out[:, t] = state & 1
        x = decisions[t, rows, state]
        state = (state >> 1) | (x.astype(np.int64) << (TAIL - 1))
    out = out[:, : steps - TAIL]
    return out[0] if single else out


# ---------------------------------------------------------------- scrambler

SCRAMBLER_PERIOD = 511


def scrambler_keystream(n: int, seed: int = 0x1FF) -> np.ndarray:
    """Output of the x^9 + x^5 + 1 Fibonacci LFSR, one bit per step."""
    reg = seed & 0x1FF
    period = np.empty(SCRAMBLER_PERIOD, dtype=np.uint8)
    for i in range(SCRAMBLER_PERIOD):
        bit = ((reg >> 8) ^ (reg >> 4)) & 1
        reg = ((reg << 1) | bit) & 0x1FF
        period[i] = bit
    reps = -(-n // SCRAMBLER_PERIOD)
    return np.tile(period, reps)[:n]


_KEYSTREAM = scrambler_keystream(SCRAMBLER_PERIOD)


def scramble(bits) -> np.ndarray:
    b = _as_bits(bits)
    ks = scrambler_keystream(b.shape[-1]) if b.shape[-1] > SCRAMBLER_PERIOD else _KEYSTREAM[: b.shape[-1]]
    return b ^ ks


descramble = scramble


def descramble_soft(soft) -> np.ndarray:
    """Soft-domain descrambling: flip the metric wherever the keystream is 1."""
    s = np.asarray(soft, dtype=np.float64)
    ks = scrambler_keystream(s.shape[-1])
    return np.where(ks == 1, -s, s)


# ---------------------------------------------------------------- interleaver

INTERLEAVER_ROWS = 8


def interleaver_permutation(n: int, rows: int = INTERLEAVER_ROWS) -> np.ndarray:
    """``out[i] = in[perm[i]]``: write row-wise into rows x (n/rows), read column-wise."""
    if n % rows:
        raise ValueError(f"length {n} is not divisible by {rows} rows")
    return np.arange(n).reshape(rows, n // rows).T.ravel()


def interleave(bits, rows: int = INTERLEAVER_ROWS) -> np.ndarray:
    b = np.asarray(bits)
    return b[..., interleaver_permutation(b.shape[-1], rows)]


def deinterleave(values, rows: int = INTERLEAVER_ROWS) -> np.ndarray:
    """Inverse of :func:`interleave`; works on bits or soft metrics."""
    v = np.asarray(values)
    perm = interleaver_permutation(v.shape[-1], rows)
    out = np.empty_like(v)
    out[..., perm] = v
    return out


def pad_count(n: int, rows: int = INTERLEAVER_ROWS) -> int:
    return (-n) % rows


# ---------------------------------------------------------------- spreading


def orthogonality_sum(d) -> int:
    d = np.asarray(d)
    return int(np.sum(d * (1 - 2 * (np.arange(d.size) % 2))))


@dataclass(frozen=True, eq=False)
class SpreadingSequence:
    """A +/-1 DSSS code. ``orthogonal`` is True iff sum((-1)^l d[l]) == 0."""

    d: np.ndarray
    orthogonal: bool = field(init=False)

    def __post_init__(self):
        d = np.asarray(self.d)
        if d.ndim != 1 or d.size == 0 or not np.all(np.abs(d) == 1):
            raise ValueError("spreading sequence must be a non-empty 1-D +/-1 sequence")
        d = d.astype(np.int8)
        d.flags.writeable = False
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "orthogonal", orthogonality_sum(d) == 0)

    @property
    def sf_p(self) -> int:
        return self.d.size

    def __eq__(self, other):
        return isinstance(other, SpreadingSequence) and np.array_equal(self.d, other.d)

    def __hash__(self):
        return hash(self.d.tobytes())

    def __repr__(self):
        body = "".join("+" if x > 0 else "-" for x in self.d)
        return f"SpreadingSequence({body}, orthogonal={self.orthogonal})"


def parse_spreading_text(text: str) -> SpreadingSequence:
    tokens = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line not in ("+1", "-1", "1"):
            raise ValueError(f"line {lineno}: expected +1 or -1, got {line!r}")
        tokens.append(-1 if line == "-1" else 1)
    seq = SpreadingSequence(np.array(tokens))
    if not seq.orthogonal:
        warnings.warn(f"spreading sequence {seq!r} violates the orthogonality condition", stacklevel=2)
    return seq


def load_spreading_sequence(path) -> SpreadingSequence:
    """Read one +1/-1 token per line (blank lines and ``#`` comments ignored)."""
    with open(path) as fh:
        return parse_spreading_text(fh.read())


def default_spreading_sequence(sf_p: int) -> SpreadingSequence:
    """The bundled sequence for ``sf_p`` in {4, 8, 16}."""
    name = f"seq_sf{sf_p}.txt"
    try:
        text = resources.files("lpwanmodem").joinpath("data", name).read_text()
    except FileNotFoundError:
        raise ValueError(f"no bundled spreading sequence for SF_p={sf_p}") from None
    return parse_spreading_text(text)


def spread(bits, d: SpreadingSequence) -> np.ndarray:
    """Bit 1 -> d, bit 0 -> -d; rows of a 2-D input are spread independently."""
    b = _as_bits(bits)
    sign = 2 * b.astype(np.int8) - 1
    chips = sign[..., :, None] * d.d
    return chips.reshape(*b.shape[:-1], b.shape[-1] * d.sf_p)


# ---------------------------------------------------------------- header

HEADER_BITS = 16
HEADER_CODED_BITS = 2 * (HEADER_BITS + TAIL)


class HeaderError(ValueError):
    """Header checksum mismatch: the frame must be dropped."""


def _checksum12(bits12: np.ndarray) -> np.ndarray:
    nib = np.asarray(bits12, dtype=np.uint8).reshape(3, 4)
    return nib[0] ^ nib[1] ^ nib[2]


@dataclass(frozen=True)
class FrameHeader:
    payload_len: int
    code_rate_idx: int = 0
    crc_present: bool = True
    mod_type: int = 0

    def __post_init__(self):
        if not 0 <= self.payload_len <= 255:
            raise ValueError("payload_len must be 0..255")
        if not 0 <= self.code_rate_idx <= 3:
            raise ValueError("code_rate_idx is a 2-bit field")
        if self.mod_type not in (0, 1):
            raise ValueError("mod_type is a 1-bit field")

    @property
    def checksum(self) -> int:
        return _bits_to_int(_checksum12(build_header(self)[:12]))


def build_header(h: FrameHeader) -> np.ndarray:
    """``[len:8 | rate:2 | crc:1 | mod:1 | checksum:4]``, MSB first."""
    first = np.concatenate([
        _int_to_bits(h.payload_len, 8),
        _int_to_bits(h.code_rate_idx, 2),
        _int_to_bits(int(h.crc_present), 1),
        _int_to_bits(h.mod_type, 1),
    ])
    return np.concatenate([first, _checksum12(first)])


def parse_header(bits) -> FrameHeader:
    b = _as_bits(bits)
    if b.size != HEADER_BITS:
        raise HeaderError(f"header must be {HEADER_BITS} bits, got {b.size}")
    if not np.array_equal(_checksum12(b[:12]), b[12:]):
        raise HeaderError("header checksum mismatch")
    return FrameHeader(
        payload_len=_bits_to_int(b[:8]),
        code_rate_idx=_bits_to_int(b[8:10]),
        crc_present=bool(b[10]),
        mod_type=int(b[11]),
    )


# ---------------------------------------------------------------- full chains


def coded_payload_len(n_info_bits: int) -> int:
    """Coded payload bits on air for ``n_info_bits`` raw bits (CRC, tail and pad included)."""
    n = 2 * (n_info_bits + 16 + TAIL)
    return n + pad_count(n)


def encode_payload(bits) -> np.ndarray:
    """CRC -> conv -> scramble -> zero-pad -> interleave (1-D or one frame per row)."""
    b = _as_bits(bits)
    if b.ndim == 1:
        withcrc = crc16_append(b)
    else:
        withcrc = np.stack([crc16_append(row) for row in b])
    coded = scramble(conv_encode(withcrc))
    pad = pad_count(coded.shape[-1])
    if pad:
        coded = np.concatenate([coded, np.zeros(coded.shape[:-1] + (pad,), dtype=np.uint8)], axis=-1)
    return interleave(coded)


def decode_payload_soft(soft, n_info_bits: int):
    """Invert :func:`encode_payload` on soft metrics.

    Returns ``(bits, crc_ok)``; for 2-D input both are per-row arrays.
    """
    s = np.asarray(soft, dtype=np.float64)
    n_coded = 2 * (n_info_bits + 16 + TAIL)
    if s.shape[-1] != n_coded + pad_count(n_coded):
        raise ValueError("soft length does not match the payload size")
    s = descramble_soft(deinterleave(s)[..., :n_coded])
    dec = viterbi_decode_soft(s)
    if dec.ndim == 1:
        return dec[:n_info_bits], crc16_check(dec)
    ok = np.array([crc16_check(row) for row in dec])
    return dec[:, :n_info_bits], ok


def encode_header(h: FrameHeader) -> np.ndarray:
    return conv_encode(build_header(h))


def decode_header_soft(soft) -> FrameHeader:
    """Viterbi-decode and parse a header; raises HeaderError on a bad checksum."""
    s = np.asarray(soft, dtype=np.float64)
    if s.shape != (HEADER_CODED_BITS,):
        raise HeaderError(f"header needs {HEADER_CODED_BITS} soft values")
    return parse_header(viterbi_decode_soft(s))


def frame_chips(payload_bits, d: SpreadingSequence, header: FrameHeader | None = None):
    """Return ``(header_chips, payload_chips)`` ready for the modulator."""
    b = _as_bits(payload_bits)
    if b.size % 8:
        raise ValueError("payload must be whole bytes")
    if header is None:
        header = FrameHeader(payload_len=b.size // 8)
    return spread(encode_header(header), d), spread(encode_payload(b), d)
