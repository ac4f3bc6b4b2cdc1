"""
Monte Carlo BER sweeps, the noise-free 4x4 walk-through and plot output.

BER CSV schema (version 1), one row per (SNR, precision) point::

    snr_db,precision,bits_sent,bit_errors,ber

``precision`` is an integer bit count, ``inf`` (analog path, unquantized
conductances) or ``digital`` (exact digital MMSE-SIC). Plot CSVs keep only
``snr_db,precision,ber``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import List, Optional, Sequence

import numpy as np

from .crossbar import ConductanceRange
from .detector import build_detector, detect, detect_batch
from .errors import ConfigurationError, MemsicError
from .mimo import (
    ChannelRealization,
    MimoConfig,
    build_constellation,
    demap_bits,
    generate_channel,
    modulate_bits,
    noise_var_from_snr_db,
    random_bits,
    transmit,
)
from .sic import sic_detect, sic_detect_batch
from .slicer import Structure

__all__ = [
    "ExperimentConfig",
    "BerRecord",
    "parse_precision",
    "load_experiment_config",
    "ber_sweep",
    "write_ber_csv",
    "read_ber_csv",
    "emit_plot_data",
    "read_plot_data",
    "run_demo",
]

logger = logging.getLogger(__name__)

BER_COLUMNS = ("snr_db", "precision", "bits_sent", "bit_errors", "ber")
PLOT_COLUMNS = ("snr_db", "precision", "ber")


def parse_precision(value):
    """``"digital"``, ``math.inf`` or a positive int."""
    if isinstance(value, str):
        v = value.strip().lower()
        if v == "digital":
            return "digital"
        if v in ("inf", "infinite", "analog"):
            return math.inf
        value = v
    try:
        if float(value) == math.inf:
            return math.inf
        bits = int(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"bad precision {value!r}") from None
    if bits < 1 or bits != float(value):
        raise ConfigurationError(f"bad precision {value!r}")
    return bits


def _precision_label(p) -> str:
    if p == "digital":
        return "digital"
    return "inf" if p == math.inf else str(p)


@dataclass
class ExperimentConfig:
    """Settings of a BER sweep.

    The defaults are the desk-scale study (8 users, 16 antennas, 16-QAM).
    ``max_errors`` switches a precision off at an SNR point once it has
    collected that many bit errors (checked after every chunk).
    """

    num_users: int = 8
    num_bs_antennas: int = 16
    modulation_order: int = 16
    snr_db: Sequence[float] = (8.0, 12.0, 16.0)
    precisions: Sequence = (4, 6, 8, "digital")
    trials: int = 20000
    seed: int = 0
    structure: str = "direct"
    alpha_min: float = 0.1e-6
    alpha_max: float = 30e-6
    max_errors: Optional[int] = None
    chunk: int = 500
    threads: int = 1
    out: Optional[str] = None
    plot: bool = False

    def __post_init__(self):
        self.snr_db = tuple(float(s) for s in self.snr_db)
        self.precisions = tuple(parse_precision(p) for p in self.precisions)
        if not self.snr_db:
            raise ConfigurationError("SNR grid is empty")
        if not self.precisions:
            raise ConfigurationError("precision list is empty")
        if self.trials < 1 or self.chunk < 1:
            raise ConfigurationError("trials and chunk must be >= 1")
        Structure.parse(self.structure)
        MimoConfig(self.num_users, self.num_bs_antennas, modulation_order=self.modulation_order)
        ConductanceRange(self.alpha_min, self.alpha_max)

    @property
    def mimo(self) -> MimoConfig:
        return MimoConfig(self.num_users, self.num_bs_antennas,
                          modulation_order=self.modulation_order)

    @property
    def crange(self) -> ConductanceRange:
        return ConductanceRange(self.alpha_min, self.alpha_max)


def load_experiment_config(path, **overrides) -> ExperimentConfig:
    """Read an :class:`ExperimentConfig` from JSON or YAML; ``overrides`` win."""
    path = str(path)
    try:
        with open(path) as fh:
            if path.endswith((".yaml", ".yml")):
                import yaml
                doc = yaml.safe_load(fh) or {}
            else:
                doc = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**doc)


@dataclass
class BerRecord:
    snr_db: float
    precision: str
    bits_sent: int
    bit_errors: int
    wall_time: float = field(default=0.0, compare=False)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_sent if self.bits_sent else 0.0


def _trial_data(cfg: ExperimentConfig, const, trial: int):
    """Channel, bits and unit-variance noise of one trial.

    Seeded by (seed, trial) only, so every SNR point and every precision
    sees the same draws.
    """
    s_chan, s_bits, s_noise = np.random.SeedSequence(cfg.seed, spawn_key=(trial,)).spawn(3)
    chan = generate_channel(cfg.mimo, s_chan)
    bits = random_bits(cfg.num_users * const.bits_per_symbol, s_bits)
    s = modulate_bits(bits, const)
    unit = transmit(chan, s, 1.0, s_noise).n
    return chan.F, bits, s, unit


def _run_chunk(cfg: ExperimentConfig, jobs, start: int, stop: int):
    """Bit errors for trials ``start:stop``; ``jobs`` maps SNR -> precisions."""
    const = build_constellation(cfg.modulation_order)
    data = [_trial_data(cfg, const, t) for t in range(start, stop)]
    F = np.stack([d[0] for d in data])
    bits = np.stack([d[1] for d in data]).ravel()
    clean = (F @ np.stack([d[2] for d in data])[..., None])[..., 0]
    unit = np.stack([d[3] for d in data])
    errors = {}
    for snr, precisions in jobs.items():
        noise_var = noise_var_from_snr_db(snr, cfg.num_users)
        Y = clean + math.sqrt(noise_var) * unit
        analog = [p for p in precisions if p != "digital"]
        decisions = {}
        if analog:
            decisions.update(zip(analog, detect_batch(F, Y, noise_var, const, cfg.crange,
                                                      analog, cfg.structure)))
        if "digital" in precisions:
            decisions["digital"] = sic_detect_batch(F, Y, noise_var, const)
        for p in precisions:
            wrong = demap_bits(decisions[p].ravel(), const) != bits
            errors[snr, p] = int(np.count_nonzero(wrong))
    return errors


def ber_sweep(cfg: ExperimentConfig) -> List[BerRecord]:
    """Run the sweep; writes ``ber.csv`` (and plot files) when ``cfg.out`` is set.

    Trials are processed in fixed chunks and merged in chunk order, so
    the result does not depend on ``cfg.threads``. Every chunk is drawn
    once and reused for all SNR points and precisions.
    """
    const = build_constellation(cfg.modulation_order)
    bits_per_trial = cfg.num_users * const.bits_per_symbol
    chunks = [(a, min(a + cfg.chunk, cfg.trials)) for a in range(0, cfg.trials, cfg.chunk)]
    keys = [(snr, p) for snr in cfg.snr_db for p in cfg.precisions]
    sent = dict.fromkeys(keys, 0)
    errs = dict.fromkeys(keys, 0)
    pool = ProcessPoolExecutor(cfg.threads) if cfg.threads > 1 else None
    wave = max(cfg.threads, 1)
    t0 = time.perf_counter()
    try:
        for i in range(0, len(chunks), wave):
            jobs = {}
            for snr, p in keys:
                if cfg.max_errors is None or errs[snr, p] < cfg.max_errors:
                    jobs.setdefault(snr, []).append(p)
            if not jobs:
                break
            batch = chunks[i:i + wave]
            if pool is None:
                results = [_run_chunk(cfg, jobs, a, b) for a, b in batch]
            else:
                futures = [pool.submit(_run_chunk, cfg, jobs, a, b) for a, b in batch]
                results = [f.result() for f in futures]
            for (a, b), res in zip(batch, results):
                for key, e in res.items():
                    sent[key] += (b - a) * bits_per_trial
                    errs[key] += e
    finally:
        if pool is not None:
            pool.shutdown()
    wall = time.perf_counter() - t0
    records = []
    for snr, p in keys:
        rec = BerRecord(snr, _precision_label(p), sent[snr, p], errs[snr, p], wall)
        logger.info("snr=%g dB precision=%s ber=%.3e (%d bits)",
                    snr, rec.precision, rec.ber, rec.bits_sent)
        records.append(rec)
    if cfg.out:
        os.makedirs(cfg.out, exist_ok=True)
        write_ber_csv(records, os.path.join(cfg.out, "ber.csv"))
        emit_plot_data(records, os.path.join(cfg.out, "ber_plot.csv"),
                       os.path.join(cfg.out, "ber.svg") if cfg.plot else None)
    return records


def write_ber_csv(records: Sequence[BerRecord], path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BER_COLUMNS)
            for r in records:
                w.writerow([repr(r.snr_db), r.precision, r.bits_sent, r.bit_errors, repr(r.ber)])
    except OSError as exc:
        raise MemsicError(f"cannot write {path}: {exc}") from None


def read_ber_csv(path) -> List[BerRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [BerRecord(float(r["snr_db"]), r["precision"], int(r["bits_sent"]),
                      int(r["bit_errors"])) for r in rows]


def emit_plot_data(records: Sequence[BerRecord], path, svg_path=None) -> None:
    """Write ``snr_db,precision,ber`` rows and optionally a log-scale SVG."""
    if not records:
        raise ConfigurationError("no records to plot")
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PLOT_COLUMNS)
            for r in records:
                w.writerow([repr(r.snr_db), r.precision, repr(r.ber)])
    except OSError as exc:
        raise MemsicError(f"cannot write {path}: {exc}") from None
    if svg_path is not None:
        _plot_svg(records, svg_path)


def read_plot_data(path) -> List[tuple]:
    with open(path, newline="") as fh:
        return [(float(r["snr_db"]), r["precision"], float(r["ber"]))
                for r in csv.DictReader(fh)]


def _plot_svg(records, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    labels = list(dict.fromkeys(r.precision for r in records))
    for label in labels:
        pts = sorted((r.snr_db, r.ber) for r in records if r.precision == label)
        x, y = zip(*pts)
        y = [v if v > 0 else np.nan for v in y]
        name = "digital" if label == "digital" else f"{label}-bit"
        ax.semilogy(x, y, marker="o", label=name)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def run_demo(order: int = 16, seed: int = 0, bits=None, structure="direct",
             noise_var: float = 0.0, printer=print) -> dict:
    """Noise-free 4x4 walk-through of every stage, checked against the oracle.

    Returns a dict with the channel, true symbols, detector trace, oracle
    trace and final decisions; also prints a readable summary via
    ``printer`` (pass ``None`` to stay quiet).
    """
    K = R = 4
    const = build_constellation(order)
    ss = np.random.SeedSequence(seed)
    s_chan, s_bits = ss.spawn(2)
    rng = np.random.default_rng(s_chan)
    # K == R here, so the channel is drawn directly rather than through MimoConfig
    H = (rng.standard_normal((R, K)) + 1j * rng.standard_normal((R, K))) / np.sqrt(2)
    chan = ChannelRealization(H=H, F=H.copy())
    s = modulate_bits(random_bits(K * const.bits_per_symbol, s_bits), const)
    y = chan.F @ s
    det = build_detector(chan, noise_var, const, bits=bits, structure=structure)
    s_hat, trace = detect(det, y)
    s_ref, ref = sic_detect(chan.F, y, noise_var, const)

    if printer is not None:
        printer(f"4x4 MIMO, {order}-QAM, noise-free, detector noise variance {noise_var:g}, "
                f"precision {'inf' if bits is None else bits}")
        printer(f"detection order (0-based users): {list(det.order)}")
        for k, (r, volts) in enumerate(zip(trace.r, trace.voltages), start=1):
            err = np.max(np.abs(r - ref.r[k - 1])) / np.max(np.abs(ref.r[k - 1]))
            printer(f"stage {k}: output dim {r.size}, max rel. deviation from digital {err:.2e}")
            printer("  r_k = " + np.array2string(r, precision=4, suppress_small=True))
            printer(f"  slicer in  = ({volts.v_sin[0]:+.5f} V, {volts.v_sin[1]:+.5f} V)"
                    f"  out = ({volts.v_sout[0]:+.5f} V, {volts.v_sout[1]:+.5f} V)")
            printer(f"  e = {trace.estimates[k - 1]:.4f}")
        printer("sent    : " + np.array2string(s, precision=4))
        printer("detected: " + np.array2string(s_hat, precision=4))
        printer(f"symbol errors: {int(np.count_nonzero(~np.isclose(s_hat, s)))}")
    return {"channel": chan, "s": s, "y": y, "s_hat": s_hat, "trace": trace,
            "reference": ref, "s_reference": s_ref, "detector": det}
