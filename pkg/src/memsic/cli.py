"""
Command-line front end.

Subcommands: ``ber-sweep``, ``timing``, ``energy``, ``slicer-table`` and
``demo``. Library errors are reported on stderr with exit code 2.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

from .errors import MemsicError
from .harness import ExperimentConfig, ber_sweep, load_experiment_config, parse_precision, run_demo
from .mimo import build_constellation
from .perf import (
    TIMING_FAST,
    TIMING_LT1016_ADG1608,
    EnergyParams,
    comparison_table,
    default_report,
    format_comparison,
    load_params,
    make_report,
)
from .slicer import SlicerConfig, Structure, truth_table

PRESETS = {"fast": TIMING_FAST, "lt1016": TIMING_LT1016_ADG1608}

SNR_HELP = ("SNR is K / sigma_n^2 in dB: total received signal power per antenna "
            "over noise power, with unit transmit powers and CN(0,1) fading")


def _precision_arg(text):
    return [parse_precision(t) for t in text.split(",") if t.strip()]


def _write(text, path=None):
    if path:
        with open(path, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text.rstrip("\n"))


def _cmd_ber_sweep(args):
    overrides = {"seed": args.seed, "threads": args.threads, "out": args.out,
                 "trials": args.trials, "max_errors": args.max_errors}
    if args.plot:
        overrides["plot"] = True
    if args.snr_db:
        overrides["snr_db"] = [float(s) for s in args.snr_db.split(",")]
    if args.precisions:
        overrides["precisions"] = _precision_arg(args.precisions)
    if args.config:
        cfg = load_experiment_config(args.config, **overrides)
    else:
        cfg = ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})
    records = ber_sweep(cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["snr_db", "precision", "bits_sent", "bit_errors", "ber"])
    for r in records:
        w.writerow([r.snr_db, r.precision, r.bits_sent, r.bit_errors, repr(r.ber)])
    _write(buf.getvalue())
    if cfg.out:
        print(f"wrote {os.path.join(cfg.out, 'ber.csv')}", file=sys.stderr)


def _timing_params(args):
    timing, energy = PRESETS[args.preset], EnergyParams()
    if args.params:
        timing, energy = load_params(args.params)
    return timing, energy


def _cmd_timing(args):
    timing, _ = _timing_params(args)
    report = make_report(args.K, args.R, timing, flops=args.flops)
    _write(report.to_csv() if args.format == "csv" else report.to_text(), args.output)


def _cmd_energy(args):
    timing, energy = _timing_params(args)
    bits = None if args.bits in (None, "inf") else int(args.bits)
    report = default_report(args.K, args.R, args.order, args.snr_db, args.seed, bits,
                            args.structure, timing, energy, flops=args.flops)
    text = report.to_csv() if args.format == "csv" else report.to_text()
    if args.compare:
        sep = "\n" if args.format == "csv" else "\n\n"
        text += sep + format_comparison(comparison_table([report]), args.format)
    _write(text, args.output)


def _slicer_rows(args):
    const = build_constellation(args.order)
    cfg = SlicerConfig.from_constellation(const, args.structure)
    return cfg, truth_table(cfg)


def _cmd_slicer_table(args):
    cfg, rows = _slicer_rows(args)
    indirect = cfg.structure is Structure.INDIRECT

    def bits(t):
        return "[" + ",".join(str(b) for b in t) + "]"

    header = ["v_sin", "p", "q", "channel", "v_sout", "v_sout_volts"]
    table = [[r.interval, bits(r.p), bits(r.q) if indirect else "-", str(r.channel + 1),
              r.level, f"{r.v_sout:.6f}"] for r in rows]
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r, row in zip(rows, table):
            w.writerow(row[:5] + [repr(r.v_sout)])
        _write(buf.getvalue(), args.output)
        return
    widths = [max(len(x) for x in col) for col in zip(header, *table)]
    lines = [f"{args.order}-QAM, {cfg.structure.value} select, "
             f"{cfg.mux_channel_count}-channel multiplexer (channels 1-based)"]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
              for row in [header] + table]
    _write("\n".join(lines), args.output)


def _cmd_demo(args):
    bits = None if args.bits in (None, "inf") else int(args.bits)
    result = run_demo(args.order, args.seed, bits, args.structure)
    if args.out:
        from .crossbar import dump_program

        os.makedirs(args.out, exist_ok=True)
        for prog in result["detector"].programs:
            dump_program(prog, os.path.join(args.out, f"stage{prog.stage}.json"))
        with open(os.path.join(args.out, "trace.json"), "w") as fh:
            json.dump({"r": [r.tolist() for r in result["trace"].r],
                       "s": [[z.real, z.imag] for z in result["s"]],
                       "s_hat": [[z.real, z.imag] for z in result["s_hat"]]}, fh, indent=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memsic", description="Memristor-crossbar MMSE-SIC detector simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ber-sweep", help="Monte Carlo BER vs SNR and memristor precision",
                       description="Monte Carlo BER sweep. " + SNR_HELP + ".")
    p.add_argument("--config", help="JSON or YAML experiment file")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker processes (results do not depend on it)")
    p.add_argument("--out", help="directory for ber.csv, ber_plot.csv and ber.svg")
    p.add_argument("--trials", type=int)
    p.add_argument("--snr-db", help="comma-separated SNR grid in dB")
    p.add_argument("--precisions", help="comma-separated, e.g. 4,6,8,inf,digital")
    p.add_argument("--max-errors", type=int, help="stop a point after this many bit errors")
    p.add_argument("--plot", action="store_true", help="also write ber.svg")
    p.set_defaults(func=_cmd_ber_sweep)

    def perf_args(p):
        p.add_argument("--K", type=int, default=32)
        p.add_argument("--R", type=int, default=64)
        p.add_argument("--params", help="JSON or YAML file with 'timing' and 'energy' sections")
        p.add_argument("--preset", choices=sorted(PRESETS), default="fast",
                       help="timing preset when no --params file is given")
        p.add_argument("--flops", help="'reference', 'convention' or a number")
        p.add_argument("--format", choices=["text", "csv"], default="text")
        p.add_argument("--output", help="write here instead of stdout")

    p = sub.add_parser("timing", help="computing time and speed report")
    perf_args(p)
    p.set_defaults(func=_cmd_timing)

    p = sub.add_parser("energy", help="energy and efficiency report for one seeded instance",
                       description="Energy report. " + SNR_HELP + ".")
    perf_args(p)
    p.add_argument("--order", type=int, default=16)
    p.add_argument("--snr-db", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bits", help="conductance precision, default unquantized")
    p.add_argument("--structure", choices=["direct", "indirect"], default="direct")
    p.add_argument("--compare", action="store_true", help="append the processor comparison table")
    p.set_defaults(func=_cmd_energy)

    p = sub.add_parser("slicer-table", help="slicer truth table")
    p.add_argument("--order", type=int, default=16)
    p.add_argument("--structure", choices=["direct", "indirect"], default="indirect")
    p.add_argument("--format", choices=["text", "csv"], default="text")
    p.add_argument("--output")
    p.set_defaults(func=_cmd_slicer_table)

    p = sub.add_parser("demo", help="noise-free 4x4 stage-by-stage walk-through")
    p.add_argument("--order", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bits")
    p.add_argument("--structure", choices=["direct", "indirect"], default="direct")
    p.add_argument("--out", help="directory for per-stage program dumps and the trace")
    p.set_defaults(func=_cmd_demo)
    return parser


def _flops(value):
    if value is None or value in ("reference", "convention"):
        return value
    return float(value)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if hasattr(args, "flops"):
            args.flops = _flops(args.flops)
        args.func(args)
    except (MemsicError, ValueError, OSError) as exc:
        print(f"memsic {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
