"""
Latency, energy and throughput model of the analog detector.

The worst-case settling rule is sequential: each stage needs its module
settling time ``T2`` plus one slicer delay before the next stage's inputs
are final. DAC settling precedes the first stage and ADC conversion
follows the last.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, fields
from typing import Dict, Iterable, List, Optional

import numpy as np

from .crossbar import operating_point
from .errors import ConfigurationError

__all__ = [
    "TimingParams",
    "EnergyParams",
    "PerfReport",
    "TIMING_FAST",
    "TIMING_LT1016_ADG1608",
    "REFERENCE_FLOPS_32X64",
    "REFERENCE_ENERGY_32X64",
    "BASELINES",
    "convergence_time",
    "timing_breakdown",
    "component_counts",
    "memristor_power",
    "estimate_energy",
    "compute_tops",
    "compute_tops_per_watt",
    "make_report",
    "default_report",
    "comparison_table",
    "format_comparison",
    "load_params",
]

# 5.5 TOPS x 4.874 us, the equivalent workload implied for K=32, R=64
REFERENCE_FLOPS_32X64 = 2.68e7
REFERENCE_ENERGY_32X64 = 18.98e-6

BASELINES = {
    "8-core DSP (TMS320C6678)": {"speed_tops": 0.128, "energy_j": 2.1e-3, "efficiency_tops_per_w": 0.0128},
    "FPGA (Virtex-7 690T)": {"speed_tops": 3.12, "energy_j": 343.1e-6, "efficiency_tops_per_w": 0.078},
    "GPU (RTX A1000)": {"speed_tops": 6.7, "energy_j": 199.7e-6, "efficiency_tops_per_w": 0.134},
}


@dataclass(frozen=True)
class TimingParams:
    """Component delays in seconds. ``oa_gbp`` (Hz) is informational only."""

    T2: float = 130e-9
    comparator_delay: float = 8e-9
    mux_delay: float = 14e-9
    dac_settle: float = 0.4e-9
    adc_delay: float = 10e-9
    oa_gbp: float = 500e6

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigurationError(f"{f.name} must be nonnegative")

    @property
    def slicer_delay(self) -> float:
        return self.comparator_delay + self.mux_delay


TIMING_FAST = TimingParams()
TIMING_LT1016_ADG1608 = TimingParams(comparator_delay=10e-9, mux_delay=150e-9)


@dataclass(frozen=True)
class EnergyParams:
    """Typical power per component in watts.

    Defaults: 12 uW OAs; the remaining entries are typical-class values for
    fast comparators, CMOS analog multiplexers and the converters, tuned so
    the K=32, R=64 default lands near 19 uJ.
    """

    oa_power: float = 12e-6
    comparator_power: float = 18e-3
    mux_power: float = 5e-6
    adc_power: float = 1.1e-3
    dac_power: float = 1.1e-3
    include_memristors: bool = True

    def __post_init__(self):
        for f in fields(self):
            if f.name.endswith("_power") and getattr(self, f.name) < 0:
                raise ConfigurationError(f"{f.name} must be nonnegative")


def load_params(path) -> tuple:
    """Read ``[timing]`` and ``[energy]`` sections from a JSON or YAML file."""
    path = str(path)
    with open(path) as fh:
        if path.endswith((".yaml", ".yml")):
            import yaml
            doc = yaml.safe_load(fh) or {}
        else:
            doc = json.load(fh)
    try:
        timing = TimingParams(**doc.get("timing", {}))
        energy = EnergyParams(**doc.get("energy", {}))
    except TypeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return timing, energy


def convergence_time(K: int, params: TimingParams = TIMING_FAST) -> float:
    """Total computing time ``dac + K (T2 + T_slicer) + adc`` in seconds."""
    if K < 1:
        raise ConfigurationError("K must be >= 1")
    return params.dac_settle + K * (params.T2 + params.slicer_delay) + params.adc_delay


def timing_breakdown(K: int, params: TimingParams = TIMING_FAST) -> Dict[str, float]:
    return {
        "dac_settle": params.dac_settle,
        "module_settle": K * params.T2,
        "comparators": K * params.comparator_delay,
        "multiplexers": K * params.mux_delay,
        "adc": params.adc_delay,
    }


def component_counts(K: int, R: int, W: int) -> Dict[str, int]:
    """Active component counts of a K-user, R-antenna detector.

    Per stage k (``n = 2(K-k+1)`` outputs): two OA sets of ``2R`` and ``n``
    amplifiers and inverter sets of ``2R``, ``n`` and ``2(k-1)``. Add one
    buffer OA per DAC and one follower per slicer.
    """
    oas = sum(4 * R + 4 * (K - k + 1) + 2 * (k - 1) for k in range(1, K + 1))
    return {
        "oa": oas + 2 * R + 2 * K,
        "comparator": 2 * K * (W - 1),
        "mux": 2 * K,
        "adc": 2 * K,
        "dac": 2 * R,
    }


def memristor_power(det, trace) -> float:
    """Steady-state Joule power of every memristor, summed over stages.

    Every array column (or row, for ``C3``/``C6``) ends on a virtual ground,
    so each memristor sees the full voltage of the node driving it.
    """
    total = 0.0
    for prog, volts in zip(det.programs, trace.voltages):
        io_ = operating_point(prog, volts.v_in1, volts.v_in2)
        sq_in2, sq1, sq2 = io_.v_in2 ** 2, io_.v1 ** 2, io_.v2 ** 2
        if prog.C1 is not None:
            total += np.sum((prog.C1 + prog.C4) @ sq_in2)
        total += np.sum((prog.C2 + prog.C5) @ sq2)
        total += np.sum(sq1 @ (prog.C3 + prog.C6))
        total += prog.lam0 * np.sum(io_.v_in1 ** 2)
        total += prog.lam1 * np.sum(sq1)
        total += prog.lam2 * np.sum(sq2)
    return float(total)


def estimate_energy(det, trace, time: float, params: EnergyParams = EnergyParams()):
    """Energy in joules over ``time`` seconds and its per-component split.

    ``trace`` is the :class:`~memsic.detector.AnalogTrace` of a detection on
    ``det``; its stage voltages fix the memristor operating points.
    """
    counts = component_counts(det.K, det.R, det.constellation.W)
    breakdown = {name: count * getattr(params, f"{name}_power") * time
                 for name, count in counts.items()}
    if params.include_memristors:
        breakdown["memristor"] = memristor_power(det, trace) * time
    return sum(breakdown.values()), breakdown


def compute_tops(flops: float, time: float) -> float:
    if not time > 0:
        raise ConfigurationError("time must be positive")
    return flops / time / 1e12


def compute_tops_per_watt(flops: float, energy: float) -> float:
    if not energy > 0:
        raise ConfigurationError("energy must be positive")
    return flops / energy / 1e12


@dataclass
class PerfReport:
    K: int
    R: int
    total_time: float
    flops: float
    flops_convention: int
    flops_reference: Optional[float]
    speed_tops: float
    energy: Optional[float] = None
    efficiency_tops_per_w: Optional[float] = None
    timing: Dict[str, float] = field(default_factory=dict)
    energy_breakdown: Dict[str, float] = field(default_factory=dict)
    label: str = "Proposed circuit"

    @property
    def convention_ratio(self) -> Optional[float]:
        if self.flops_reference is None:
            return None
        return self.flops_convention / self.flops_reference

    def rows(self) -> List[tuple]:
        out = [("K", self.K), ("R", self.R),
               ("total_time_s", self.total_time)]
        out += [(f"time_{k}_s", v) for k, v in self.timing.items()]
        out += [("flops_used", self.flops),
                ("flops_convention", self.flops_convention),
                ("flops_reference", self.flops_reference),
                ("convention_over_reference", self.convention_ratio),
                ("speed_tops", self.speed_tops)]
        if self.energy is not None:
            out += [(f"energy_{k}_j", v) for k, v in self.energy_breakdown.items()]
            out += [("energy_j", self.energy),
                    ("efficiency_tops_per_w", self.efficiency_tops_per_w)]
            if self.K == 32 and self.R == 64:
                out.append(("energy_over_18.98uJ", self.energy / REFERENCE_ENERGY_32X64))
        return out

    def to_text(self) -> str:
        width = max(len(k) for k, _ in self.rows())
        lines = []
        for key, value in self.rows():
            if isinstance(value, float):
                value = f"{value:.6g}"
            lines.append(f"{key:<{width}}  {value}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["quantity", "value"])
        for key, value in self.rows():
            w.writerow([key, "" if value is None else repr(value) if isinstance(value, float) else value])
        return buf.getvalue()


def make_report(K: int, R: int, timing: TimingParams = TIMING_FAST, flops=None,
                det=None, trace=None, energy: EnergyParams = None) -> PerfReport:
    """Assemble timing, speed and (if ``det`` and ``trace`` are given) energy.

    ``flops`` is a number, ``"convention"`` or ``"reference"``; the default
    is the reference figure for K=32, R=64 and the counting convention
    otherwise.
    """
    from .sic import flop_count
    from .mimo import MimoConfig

    conv = flop_count(MimoConfig(K, R))
    ref = REFERENCE_FLOPS_32X64 if (K, R) == (32, 64) else None
    if flops is None:
        flops = "reference" if ref is not None else "convention"
    if flops == "reference":
        if ref is None:
            raise ConfigurationError("a reference FLOP figure exists only for K=32, R=64")
        flops = ref
    elif flops == "convention":
        flops = conv
    total = convergence_time(K, timing)
    report = PerfReport(K=K, R=R, total_time=total, flops=float(flops),
                        flops_convention=conv, flops_reference=ref,
                        speed_tops=compute_tops(flops, total),
                        timing=timing_breakdown(K, timing))
    if det is not None:
        report.energy, report.energy_breakdown = estimate_energy(
            det, trace, total, energy or EnergyParams())
        report.efficiency_tops_per_w = compute_tops_per_watt(flops, report.energy)
    return report


def default_report(K: int = 32, R: int = 64, order: int = 16, snr_db: float = 20.0,
                   seed: int = 0, bits=None, structure="direct",
                   timing: TimingParams = TIMING_FAST, energy: EnergyParams = None,
                   flops=None) -> PerfReport:
    """Report for one seeded channel/symbol draw (32x64, 16-QAM by default)."""
    from .detector import build_detector, detect
    from .mimo import (MimoConfig, build_constellation, generate_channel, modulate_bits,
                       noise_var_from_snr_db, random_bits, transmit)

    const = build_constellation(order)
    noise_var = noise_var_from_snr_db(snr_db, K)
    cfg = MimoConfig(K, R, noise_variance=noise_var, modulation_order=order)
    ss = np.random.SeedSequence(seed)
    s_chan, s_bits, s_noise = ss.spawn(3)
    chan = generate_channel(cfg, s_chan)
    s = modulate_bits(random_bits(K * const.bits_per_symbol, s_bits), const)
    rx = transmit(chan, s, noise_var, s_noise)
    det = build_detector(chan, noise_var, const, bits=bits, structure=structure)
    _, trace = detect(det, rx.y)
    return make_report(K, R, timing, flops, det, trace, energy)


def comparison_table(reports: Iterable[PerfReport]) -> List[dict]:
    """Table rows: one column per baseline processor plus one per report."""
    reports = list(reports)
    if not reports:
        raise ConfigurationError("need at least one report")
    columns = dict(BASELINES)
    for i, rep in enumerate(reports):
        label = rep.label if len(reports) == 1 else f"{rep.label} #{i + 1}"
        columns[label] = {"speed_tops": rep.speed_tops, "energy_j": rep.energy,
                          "efficiency_tops_per_w": rep.efficiency_tops_per_w}
    names = [("Computing speed (TOPS)", "speed_tops"),
             ("Energy consumption (J)", "energy_j"),
             ("Computational energy efficiency (TOPS/W)", "efficiency_tops_per_w")]
    return [{"quantity": title, **{col: vals[key] for col, vals in columns.items()}}
            for title, key in names]


def format_comparison(rows: List[dict], fmt: str = "text") -> str:
    header = list(rows[0].keys())
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, header, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()

    def cell(v):
        if v is None:
            return "-"
        return v if isinstance(v, str) else f"{v:.4g}"

    table = [header] + [[cell(r[h]) for h in header] for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in table)
