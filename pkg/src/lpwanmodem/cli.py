"""``modem`` command line entry point."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import __version__, theory
from .sim import (
    EXPERIMENTS, SweepConfig, config_from_mapping, read_config_file, run_ber_sweep,
    run_detect_sweep, run_loopback, run_per_sweep, run_seqcheck, run_sync_mse_sweep, _fmt,
)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modem", description="LPWAN chirp/DSSS-CPFSK modem simulator")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="flat key=value configuration file")
    ap.add_argument("--snr", help="SNR points in dB: a:b:step or a,b,c")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--channel", choices=["awgn", "rayleigh"])
    ap.add_argument("--sfp", type=int, choices=[4, 8, 16])
    ap.add_argument("--ideal-sync", action="store_true", default=None)
    ap.add_argument("--cfo", type=float, help="fixed CFO as a fraction of B")
    ap.add_argument("--gamma", type=float)
    ap.add_argument("--sequence", action="append", default=[],
                    help="spreading sequence file (seqcheck: may repeat; per/ber: used as d)")
    ap.add_argument("--dump", help="loopback: write all intermediate arrays to this .npz file")
    ap.add_argument("--out", help="write CSV here instead of stdout")
    ap.add_argument("--version", action="version", version=__version__)
    return ap


def _config(args) -> SweepConfig:
    values = read_config_file(args.config) if args.config else {}
    values["experiment"] = args.experiment
    for key in ("snr", "trials", "seed", "channel", "sfp", "cfo", "gamma"):
        val = getattr(args, key)
        if val is not None:
            values[key] = str(val)
    if args.ideal_sync:
        values["ideal_sync"] = "1"
    if args.sequence and args.experiment != "seqcheck":
        values["spreading"] = args.sequence[0]
    return config_from_mapping(values)


def _rows_csv(columns, rows, meta=None) -> str:
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}: {v}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(columns)
    for r in rows:
        wr.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def theory_tables(cfg: SweepConfig) -> str:
    """(quantity, x, y) rows for each closed form at the configured parameters."""
    p = cfg.params
    N, K = p.n, p.k
    rows = []

    def add(name, xs, ys):
        rows.extend({"quantity": name, "x": float(x), "y": float(y)} for x, y in zip(xs, ys))

    lags = np.arange(-(p.nk - 1), p.nk)
    add("autocorr", lags, theory.autocorr_closed(lags, N, K))
    add("xcorr_du", lags, theory.xcorr_du_closed(lags, N, K))
    cfo_b = np.linspace(-0.25, 0.25, 501)
    for k in (1, 2, 4):
        add(f"rho_max_k{k}", cfo_b, theory.rho_max(k, cfo_b, N))
        add(f"rho_ratio_k{k}", cfo_b, theory.rho_ratio(k, cfo_b, N))
    add("rho_max_kinf", cfo_b, theory.rho_max(np.inf, cfo_b, N))
    gammas = np.linspace(2.0, 6.0, 41)
    add("pfa", gammas, theory.pfa_closed(gammas, p.nk))
    g = cfg.detector.gamma
    snrs = np.array(cfg.snr_points)
    add(f"pd_gamma{g:g}", snrs, [theory.pd_closed(g, s, N, K, cfg.cfo_dist) for s in snrs])
    add("crlb_cfo", snrs, theory.crlb_cfo(N, K, 10 ** (snrs / 10) / K))
    add("sensitivity_dbm", snrs, theory.sensitivity(p.bandwidth, snrs, 6.0))
    eps = np.linspace(0, 1 / (2 * K * p.sf_p), 51)
    add("residual_cfo_corr", eps, theory.residual_cfo_corr(eps, K, p.sf_p))
    meta = {"experiment": "theory", "version": __version__,
            "params": f"N={N} K={K} SF_p={p.sf_p} gamma={g:g}", "config_hash": cfg.config_hash()}
    return _rows_csv(["quantity", "x", "y"], rows, meta)


def _join_negative_values(argv: list[str]) -> list[str]:
    # "--snr -6:-2:1" would otherwise be read as an unknown option
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in ("--snr", "--cfo") and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(_join_negative_values(argv))
    try:
        cfg = _config(args)
    except (ValueError, KeyError) as exc:
        print(f"modem: {exc}", file=sys.stderr)
        return 2

    status = 0
    if args.experiment == "detect":
        res = run_detect_sweep(cfg)
        text = res.to_csv()
    elif args.experiment == "sync_mse":
        text = run_sync_mse_sweep(cfg).to_csv()
    elif args.experiment == "per":
        text = run_per_sweep(cfg).to_csv()
    elif args.experiment == "ber":
        text = run_ber_sweep(cfg).to_csv()
    elif args.experiment == "theory":
        text = theory_tables(cfg)
    elif args.experiment == "seqcheck":
        rows = run_seqcheck(args.sequence, cfg.params)
        text = _rows_csv(["source", "sf_p", "orthogonal", "rho_dm", "sequence"], rows,
                         {"experiment": "seqcheck", "version": __version__, "K": cfg.params.k})
    else:
        tr = run_loopback(cfg)
        rep = tr["report"]
        rows = [{"field": k, "value": v} for k, v in (
            ("detected", rep.detected), ("true_tau", tr["true_tau"]), ("tau", rep.tau),
            ("mu", rep.mu), ("eps_r", rep.eps_r), ("true_cfo", tr["true_cfo"]), ("cfo", rep.cfo),
            ("cfo_int", rep.cfo_int), ("cfo_frac", rep.cfo_frac), ("peak_d", rep.peak_d),
            ("peak_u", rep.peak_u), ("header", tr["header"]), ("crc_ok", tr["crc_ok"]),
        )]
        text = _rows_csv(["field", "value"], rows, {"experiment": "loopback", "version": __version__,
                                                     "seed": cfg.seed, "config_hash": cfg.config_hash()})
        if args.dump:
            arrays = {k: v for k, v in tr.items() if isinstance(v, np.ndarray)}
            np.savez(args.dump, **arrays)
        status = 0 if tr["crc_ok"] else 1

    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
