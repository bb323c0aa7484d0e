"""Monte-Carlo harness: detection, synchronization MSE, PER and BER sweeps.

Every trial draws from its own ``RandomStream(seed, (point, trial))`` so the
results do not depend on batching or ordering, and identical configurations
produce byte-identical CSV files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import time
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .channel import ChannelKind, ChannelSpec, apply_channel_array, complex_noise
from .coding import (
    FrameHeader, HeaderError, SpreadingSequence, decode_header_soft, decode_payload_soft,
    default_spreading_sequence, encode_header, encode_payload, load_spreading_sequence, spread,
    HEADER_CODED_BITS, coded_payload_len,
)
from .demod import build_matched_filters, demod_block, rho_dm
from .phy import DEFAULT_PARAMS, PhyParams, RandomStream, validate_params
from .sync import DetectorConfig, compensate_cfo, detect_preamble, noise_window_test, synchronize
from .theory import CfoDistribution, crlb_cfo, pd_closed
from .waveform import cpfsk_samples, preamble_samples

EXPERIMENTS = ("detect", "sync_mse", "per", "ber", "loopback", "theory", "seqcheck")
STO_CASES = {"case1": (0.25, 0.75), "case2": (0.25, 1.5)}


# ---------------------------------------------------------------- configuration


def parse_snr(text: str) -> list[float]:
    """``"a:b:step"`` (inclusive) or a comma list."""
    text = str(text).strip()
    if ":" in text:
        a, b, step = (float(v) for v in text.split(":"))
        if step <= 0 or b < a:
            raise ValueError(f"bad SNR range {text!r}")
        n = int(np.floor((b - a) / step + 1e-9)) + 1
        return [round(a + i * step, 10) for i in range(n)]
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty SNR list")
    return vals


@dataclass(frozen=True)
class SweepConfig:
    experiment: str = "detect"
    snr_points: tuple = (-5.0,)
    n_trials: int = 1000
    channel: ChannelKind = ChannelKind.AWGN
    sto_case: str = "case2"
    cfo_dist: CfoDistribution = CfoDistribution()
    cfo_fixed: float | None = None  # chip-rate units; overrides cfo_dist
    sto_fixed: float | None = None  # chips; overrides sto_case
    ideal_sync: bool = False
    seed: int = 1
    params: PhyParams = DEFAULT_PARAMS
    detector: DetectorConfig = DetectorConfig()
    spreading: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"experiment must be one of {EXPERIMENTS}")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if len(self.snr_points) == 0:
            raise ValueError("snr_points must be non-empty")
        if self.sto_case not in STO_CASES:
            raise ValueError(f"sto_case must be one of {sorted(STO_CASES)}")
        object.__setattr__(self, "channel", ChannelKind.parse(self.channel))
        object.__setattr__(self, "snr_points", tuple(float(s) for s in self.snr_points))
        validate_params(self.params)

    def sequence(self) -> SpreadingSequence:
        if self.spreading:
            seq = load_spreading_sequence(self.spreading)
        else:
            seq = default_spreading_sequence(self.params.sf_p)
        if seq.sf_p != self.params.sf_p:
            raise ValueError(f"spreading file has {seq.sf_p} chips but SF_p={self.params.sf_p}")
        return seq

    def config_hash(self) -> str:
        blob = repr(sorted(_flatten(self).items())).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _flatten(cfg: SweepConfig) -> dict:
    out = {}
    for k, v in asdict(cfg).items():
        if isinstance(v, dict):
            for k2, v2 in v.items():
                out[f"{k}.{k2}"] = str(v2)
        else:
            out[k] = str(v)
    return out


_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.lower().replace("-", "_")] = v
    return out


def config_from_mapping(values: dict, base: SweepConfig | None = None) -> SweepConfig:
    """Build a SweepConfig from string key/values (config file merged with CLI flags)."""
    base = base or SweepConfig()
    v = dict(values)
    p = base.params
    pkw = {}
    for key, attr, conv in (("sf", "sf", int), ("k", "k", int), ("r", "r", int), ("sfp", "sf_p", int),
                            ("sf_p", "sf_p", int), ("bandwidth", "bandwidth", float),
                            ("h_m", "h_m", float), ("payload_len", "payload_len", int)):
        if key in v:
            pkw[attr] = conv(v.pop(key))
    if "code_rate" in v:
        pkw["code_rate"] = Fraction(v.pop("code_rate"))
    if "sf" in pkw and "n" not in v:
        pkw["n"] = 2 ** pkw["sf"]
    if "n" in v:
        pkw["n"] = int(v.pop("n"))
    params = validate_params(replace(p, **pkw)) if pkw else p

    det = base.detector
    dkw = {}
    for key, conv in (("gamma", float), ("eta", float), ("w_d", int), ("w_u", int),
                      ("up_window", str), ("backend", str)):
        if key in v:
            dkw[key] = conv(v.pop(key))
    if "target_pfa" in v:
        t = float(v.pop("target_pfa"))
        dkw["target_pfa"] = t
        if "gamma" not in dkw:
            from .theory import gamma_for_pfa
            dkw["gamma"] = float(gamma_for_pfa(t, dkw.get("w_d") or params.nk))
    detector = replace(det, **dkw) if dkw else det

    ckw = {}
    dist = base.cfo_dist
    if "cfo_lo" in v or "cfo_hi" in v:
        dist = CfoDistribution(float(v.pop("cfo_lo", dist.lo)), float(v.pop("cfo_hi", dist.hi)))
    ckw["cfo_dist"] = dist
    if "cfo" in v:
        ckw["cfo_fixed"] = float(v.pop("cfo"))
    if "sto" in v:
        ckw["sto_fixed"] = float(v.pop("sto"))
    if "snr" in v:
        ckw["snr_points"] = tuple(parse_snr(v.pop("snr")))
    if "trials" in v:
        ckw["n_trials"] = int(v.pop("trials"))
    if "seed" in v:
        ckw["seed"] = int(v.pop("seed"))
    if "ideal_sync" in v:
        ckw["ideal_sync"] = _BOOL[str(v.pop("ideal_sync")).lower()]
    for key in ("experiment", "channel", "sto_case", "spreading"):
        if key in v:
            ckw[key] = v.pop(key)
    if v:
        raise ValueError(f"unknown config keys: {sorted(v)}")
    return replace(base, params=params, detector=detector, **ckw)


# ---------------------------------------------------------------- results


@dataclass
class SweepResult:
    experiment: str
    columns: list
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, val in self.meta.items():
            buf.write(f"# {k}: {val}\n")
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.columns)
        for row in self.rows:
            wr.writerow([_fmt(row.get(c)) for c in self.columns])
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.9g}"
    return str(v)


def _meta(cfg: SweepConfig) -> dict:
    p = cfg.params
    return {
        "experiment": cfg.experiment, "version": __version__, "seed": cfg.seed,
        "config_hash": cfg.config_hash(), "trials": cfg.n_trials, "channel": cfg.channel.value,
        "params": f"N={p.n} K={p.k} R={p.r} SF_p={p.sf_p} h_m={p.h_m} L={p.payload_len}",
    }


def wilson_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = stats.binomtest(int(k), int(n)).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


def threshold_snr(snr, rate, target: float) -> float | None:
    """First SNR where a decreasing error-rate curve crosses ``target``.

    Log-linear interpolation between grid points; linear when the lower point
    has no errors (its log is undefined).
    """
    snr = np.asarray(snr, dtype=float)
    rate = np.asarray(rate, dtype=float)
    for i in range(len(snr) - 1):
        a, b = rate[i], rate[i + 1]
        if a >= target > b:
            if b <= 0:
                return float(snr[i] + (a - target) / (a - b) * (snr[i + 1] - snr[i]))
            la, lb, lt = np.log10(a), np.log10(b), np.log10(target)
            return float(snr[i] + (la - lt) / (la - lb) * (snr[i + 1] - snr[i]))
    return None


# ---------------------------------------------------------------- trial helpers


def _trial_gen(cfg: SweepConfig, point: int, trial: int) -> np.random.Generator:
    return RandomStream(cfg.seed, (point, trial)).generator()


def _draw_offsets(cfg: SweepConfig, gen: np.random.Generator, sto_case: str | None = None):
    """Return ``(cfo_b, tau_fine, h)``."""
    p = cfg.params
    cfo_b = cfg.cfo_fixed if cfg.cfo_fixed is not None else float(cfg.cfo_dist.sample(gen))
    if cfg.sto_fixed is not None:
        u_chips = cfg.sto_fixed
    else:
        lo, hi = STO_CASES[sto_case or cfg.sto_case]
        u_chips = gen.uniform(lo, hi) * p.n
    tau_fine = int(round(u_chips * p.k * p.r))
    if cfg.channel is ChannelKind.RAYLEIGH:
        z = gen.standard_normal(2)
        h = complex(z[0], z[1]) / np.sqrt(2)
    else:
        h = 1.0 + 0.0j
    return cfo_b, tau_fine, h


def _spec(cfg, cfo_b, tau_fine, h, snr_db) -> ChannelSpec:
    return ChannelSpec(h=h, kind=cfg.channel, cfo=cfo_b / cfg.params.k, tau_fine=tau_fine,
                       snr_db=snr_db, samples_per_chip=cfg.params.k)


def _preamble_burst(p: PhyParams, gen: np.random.Generator, tail_chips: int) -> np.ndarray:
    """Preamble followed by random CPFSK chips, at the fine rate."""
    chips = gen.choice(np.array([-1, 1]), tail_chips)
    kp = p.k * p.r
    return np.concatenate([preamble_samples(p.n, kp), cpfsk_samples(chips, p.h_m, kp)])


def _noise_var(cfg: SweepConfig, snr_db: float) -> float:
    return cfg.params.k * 10.0 ** (-snr_db / 10.0)


# ---------------------------------------------------------------- detection


def run_detect_sweep(cfg: SweepConfig, noise_trials: int | None = None) -> SweepResult:
    """Detection rate on signal+noise and false-alarm rate on noise-only buffers."""
    p = cfg.params
    t0 = time.perf_counter()
    nk = p.nk
    w_d, _ = cfg.detector.widths(p)
    noise_trials = cfg.n_trials if noise_trials is None else noise_trials
    cols = ["snr_db", "trials", "detected", "missed", "p_d", "p_m", "p_m_lo", "p_m_hi",
            "pd_theory", "noise_windows", "false_alarms", "p_fa", "p_fa_chirp"]
    res = SweepResult("detect", cols, meta=_meta(cfg))
    for pi, snr in enumerate(cfg.snr_points):
        det = 0
        var = _noise_var(cfg, snr)
        for t in range(cfg.n_trials):
            gen = _trial_gen(cfg, pi, t)
            cfo_b, tau_fine, h = _draw_offsets(cfg, gen)
            burst = _preamble_burst(p, gen, 3 * p.n)
            out_len = tau_fine + burst.size + nk * p.r
            y = apply_channel_array(burst, _spec(cfg, cfo_b, tau_fine, h, snr), gen, out_len, p.r)
            rep = detect_preamble(y[:: p.r], p, cfg.detector)
            if rep.detected and abs(rep.mu - tau_fine / p.r) <= p.k:
                det += 1
        fa = fa_chirp = 0
        for t in range(noise_trials):
            gen = RandomStream(cfg.seed, (pi, t, 1)).generator()
            noise = complex_noise(gen, w_d + 3 * nk, var)
            down, both = noise_window_test(noise, p, cfg.detector)
            fa_chirp += down
            fa += both
        n = cfg.n_trials
        lo, hi = wilson_interval(n - det, n)
        theory = None
        if cfg.channel is ChannelKind.AWGN and cfg.cfo_fixed is None:
            theory = pd_closed(cfg.detector.gamma, snr, p.n, p.k, cfg.cfo_dist)
        res.rows.append({
            "snr_db": snr, "trials": n, "detected": det, "missed": n - det, "p_d": det / n,
            "p_m": (n - det) / n, "p_m_lo": lo, "p_m_hi": hi, "pd_theory": theory,
            "noise_windows": noise_trials, "false_alarms": fa,
            "p_fa": fa / noise_trials if noise_trials else None,
            "p_fa_chirp": fa_chirp / noise_trials if noise_trials else None,
        })
    res.wall_time = time.perf_counter() - t0
    return res


def run_false_alarm(p: PhyParams, det: DetectorConfig, n_windows: int, seed: int = 1,
                    sigma: float = 1.0) -> tuple[int, int]:
    """Count ``(down_fired, preamble_fired)`` over ``n_windows`` noise-only attempts."""
    w_d, _ = det.widths(p)
    down = both = 0
    for t in range(n_windows):
        gen = RandomStream(seed, (t,)).generator()
        d_, b_ = noise_window_test(complex_noise(gen, w_d + 3 * p.nk, sigma ** 2), p, det)
        down += d_
        both += b_
    return down, both


# ---------------------------------------------------------------- synchronization MSE


def run_sync_mse_sweep(cfg: SweepConfig) -> SweepResult:
    """STO (chips^2) and CFO (sync-rate units^2) MSE without threshold tests, Case 1 STO."""
    p = cfg.params
    t0 = time.perf_counter()
    det = replace(cfg.detector, skip_thresholds=True)
    cols = ["snr_db", "trials", "mse_sto_chips2", "mse_cfo", "crlb_cfo", "mse_cfo_over_crlb_db"]
    res = SweepResult("sync_mse", cols, meta=_meta(cfg))
    for pi, snr in enumerate(cfg.snr_points):
        se_t = np.empty(cfg.n_trials)
        se_f = np.empty(cfg.n_trials)
        for t in range(cfg.n_trials):
            gen = _trial_gen(cfg, pi, t)
            cfo_b, tau_fine, h = _draw_offsets(cfg, gen, "case1")
            burst = _preamble_burst(p, gen, 2 * p.n)
            out_len = tau_fine + burst.size + p.nk * p.r
            y = apply_channel_array(burst, _spec(cfg, cfo_b, tau_fine, h, snr), gen, out_len, p.r)
            rep = synchronize(y, p, det)
            se_t[t] = ((rep.tau - tau_fine / p.r) / p.k) ** 2
            se_f[t] = (rep.cfo - cfo_b / p.k) ** 2
        snr_h = 10.0 ** (snr / 10.0) / p.k if np.isfinite(snr) else np.inf
        bound = float(crlb_cfo(p.n, p.k, snr_h)) if np.isfinite(snr_h) else 0.0
        mse_f = float(se_f.mean())
        ratio = 10 * np.log10(mse_f / bound) if bound > 0 and mse_f > 0 else None
        res.rows.append({"snr_db": snr, "trials": cfg.n_trials, "mse_sto_chips2": float(se_t.mean()),
                         "mse_cfo": mse_f, "crlb_cfo": bound, "mse_cfo_over_crlb_db": ratio})
    res.wall_time = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------- packet error rate


@dataclass
class _FrameTx:
    bits: np.ndarray
    header_chips: np.ndarray
    payload_chips: np.ndarray


def _make_frame(p: PhyParams, seq: SpreadingSequence, gen: np.random.Generator) -> _FrameTx:
    bits = gen.integers(0, 2, 8 * p.payload_len, dtype=np.uint8)
    hdr = FrameHeader(payload_len=p.payload_len)
    return _FrameTx(bits, spread(encode_header(hdr), seq), spread(encode_payload(bits), seq))


def _decode_frames(soft_hdr: list, soft_pay: list, bits: list, p: PhyParams) -> np.ndarray:
    """Return per-frame success flags (header valid, length right, CRC and bits correct)."""
    ok = np.zeros(len(bits), dtype=bool)
    keep = []
    for i, sh in enumerate(soft_hdr):
        if sh is None:
            continue
        try:
            h = decode_header_soft(sh)
        except HeaderError:
            continue
        if h.payload_len != p.payload_len or h.code_rate_idx != 0:
            continue
        keep.append(i)
    if keep:
        dec, crc = decode_payload_soft(np.stack([soft_pay[i] for i in keep]), 8 * p.payload_len)
        for j, i in enumerate(keep):
            ok[i] = bool(crc[j]) and np.array_equal(dec[j], bits[i])
    return ok


def _per_point_ideal(cfg, pi, snr, seq, mf):
    p = cfg.params
    n_hdr = HEADER_CODED_BITS
    var = _noise_var(cfg, snr)
    soft_h, soft_p, bits = [], [], []
    for t in range(cfg.n_trials):
        gen = _trial_gen(cfg, pi, t)
        fr = _make_frame(p, seq, gen)
        _, _, h = _draw_offsets(cfg, gen)
        chips = np.concatenate([fr.header_chips, fr.payload_chips]).astype(np.int64)
        x = h * cpfsk_samples(chips, p.h_m, p.k) + complex_noise(gen, chips.size * p.k, var)
        soft = demod_block(x, mf)
        soft_h.append(soft[:n_hdr])
        soft_p.append(soft[n_hdr:])
        bits.append(fr.bits)
    return _decode_frames(soft_h, soft_p, bits, p), np.zeros(cfg.n_trials, dtype=bool)


def receive_frame(y: np.ndarray, p: PhyParams, det: DetectorConfig, mf, n_pay_bits: int):
    """Synchronize a fine-rate buffer and return ``(report, header_soft, payload_soft)``.

    Soft outputs are None when the preamble is not found or the buffer is too short.
    """
    rep = synchronize(y, p, det)
    if not rep.detected:
        return rep, None, None
    start = rep.tau_fine + 2 * p.nk * p.r
    n_sym = HEADER_CODED_BITS + n_pay_bits
    need = n_sym * mf.length
    if start < 0:
        return rep, None, None
    x = y[start:: p.r][:need]
    if x.size < need:
        return rep, None, None
    x = compensate_cfo(x, rep.cfo).samples
    soft = demod_block(x, mf)
    return rep, soft[:HEADER_CODED_BITS], soft[HEADER_CODED_BITS:]


def _per_point_real(cfg, pi, snr, seq, mf):
    p = cfg.params
    n_pay = coded_payload_len(8 * p.payload_len)
    soft_h, soft_p, bits = [], [], []
    sync_fail = np.zeros(cfg.n_trials, dtype=bool)
    kp = p.k * p.r
    pre = preamble_samples(p.n, kp)
    for t in range(cfg.n_trials):
        gen = _trial_gen(cfg, pi, t)
        fr = _make_frame(p, seq, gen)
        cfo_b, tau_fine, h = _draw_offsets(cfg, gen)
        chips = np.concatenate([fr.header_chips, fr.payload_chips]).astype(np.int64)
        tx = np.concatenate([pre, cpfsk_samples(chips, p.h_m, kp)])
        out_len = tau_fine + tx.size + p.nk * p.r
        y = apply_channel_array(tx, _spec(cfg, cfo_b, tau_fine, h, snr), gen, out_len, p.r)
        rep, sh, sp = receive_frame(y, p, cfg.detector, mf, n_pay)
        sync_fail[t] = not (rep.detected and abs(rep.mu - tau_fine / p.r) <= p.k)
        soft_h.append(sh)
        soft_p.append(sp if sp is not None else np.zeros(n_pay))
        bits.append(fr.bits)
    return _decode_frames(soft_h, soft_p, bits, p), sync_fail


def run_per_sweep(cfg: SweepConfig) -> SweepResult:
    """Packet error rate through the full chain, or with genie timing/CFO if ``ideal_sync``."""
    p = cfg.params
    t0 = time.perf_counter()
    seq = cfg.sequence()
    mf = build_matched_filters(seq, p)
    cols = ["snr_db", "frames", "failed", "per", "per_lo", "per_hi", "sync_fail"]
    res = SweepResult("per", cols, meta={**_meta(cfg), "ideal_sync": int(cfg.ideal_sync),
                                         "sequence": repr(seq)})
    for pi, snr in enumerate(cfg.snr_points):
        point = _per_point_ideal if cfg.ideal_sync else _per_point_real
        ok, sync_fail = point(cfg, pi, snr, seq, mf)
        n = cfg.n_trials
        failed = int(n - ok.sum())
        lo, hi = wilson_interval(failed, n)
        res.rows.append({"snr_db": snr, "frames": n, "failed": failed, "per": failed / n,
                         "per_lo": lo, "per_hi": hi, "sync_fail": int(sync_fail.sum())})
    res.wall_time = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------- uncoded BER


def run_ber_sweep(cfg: SweepConfig, bits_per_trial: int = 1000) -> SweepResult:
    """Uncoded, ideally synchronized BER of spread DSSS-CPFSK bits (hard decisions)."""
    p = cfg.params
    t0 = time.perf_counter()
    seq = cfg.sequence()
    mf = build_matched_filters(seq, p)
    cols = ["snr_db", "bits", "errors", "ber"]
    res = SweepResult("ber", cols, meta=_meta(cfg))
    for pi, snr in enumerate(cfg.snr_points):
        var = _noise_var(cfg, snr)
        errors = 0
        for t in range(cfg.n_trials):
            gen = _trial_gen(cfg, pi, t)
            b = gen.integers(0, 2, bits_per_trial, dtype=np.uint8)
            chips = spread(b, seq).astype(np.int64)
            _, _, h = _draw_offsets(cfg, gen)
            x = h * cpfsk_samples(chips, p.h_m, p.k) + complex_noise(gen, chips.size * p.k, var)
            errors += int(np.count_nonzero((demod_block(x, mf) > 0) != b.astype(bool)))
        n = cfg.n_trials * bits_per_trial
        res.rows.append({"snr_db": snr, "bits": n, "errors": errors, "ber": errors / n})
    res.wall_time = time.perf_counter() - t0
    return res


# ---------------------------------------------------------------- loopback and sequence check


def run_loopback(cfg: SweepConfig) -> dict:
    """One deterministic frame with all intermediate products, for debugging."""
    p = cfg.params
    seq = cfg.sequence()
    mf = build_matched_filters(seq, p)
    gen = _trial_gen(cfg, 0, 0)
    fr = _make_frame(p, seq, gen)
    cfo_b = cfg.cfo_fixed if cfg.cfo_fixed is not None else 0.0
    sto = cfg.sto_fixed if cfg.sto_fixed is not None else 0.5 * p.n
    tau_fine = int(round(sto * p.k * p.r))
    h = 1.0 + 0.0j
    snr = cfg.snr_points[0]
    kp = p.k * p.r
    chips = np.concatenate([fr.header_chips, fr.payload_chips]).astype(np.int64)
    tx = np.concatenate([preamble_samples(p.n, kp), cpfsk_samples(chips, p.h_m, kp)])
    y = apply_channel_array(tx, _spec(cfg, cfo_b, tau_fine, h, snr), gen,
                            tau_fine + tx.size + p.nk * p.r, p.r)
    n_pay = coded_payload_len(8 * p.payload_len)
    rep, sh, sp = receive_frame(y, p, cfg.detector, mf, n_pay)
    trace = {
        "payload_bits": fr.bits, "header_chips": fr.header_chips, "payload_chips": fr.payload_chips,
        "tx": tx, "rx": y, "report": rep, "header_soft": sh, "payload_soft": sp,
        "true_tau": tau_fine / p.r, "true_cfo": cfo_b / p.k, "crc_ok": False, "header": None,
        "decoded_bits": None,
    }
    if sh is None:
        return trace
    try:
        trace["header"] = decode_header_soft(sh)
    except HeaderError:
        return trace
    dec, ok = decode_payload_soft(sp, 8 * trace["header"].payload_len)
    trace["decoded_bits"] = dec
    trace["crc_ok"] = bool(ok) and np.array_equal(dec, fr.bits)
    return trace


def run_seqcheck(paths, p: PhyParams = DEFAULT_PARAMS) -> list[dict]:
    """Orthogonality flag and symbol correlation for each sequence file (bundled ones if empty)."""
    rows = []
    items = [(str(x), load_spreading_sequence(x)) for x in paths] if paths else \
        [(f"default_sf{s}", default_spreading_sequence(s)) for s in (4, 8, 16)]
    for name, seq in items:
        rows.append({"source": name, "sf_p": seq.sf_p,
                     "sequence": " ".join("+1" if x > 0 else "-1" for x in seq.d),
                     "orthogonal": seq.orthogonal, "rho_dm": rho_dm(seq, p)})
    return rows
