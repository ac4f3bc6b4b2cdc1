"""
Full analog SIC detector: K crossbar stages, each followed by two slicers.

The received vector drives every stage; the slicer outputs of stage k feed
the cancellation inputs of stages k+1..K. Stages are evaluated in order at
steady state, so the result matches the settled circuit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .crossbar import (
    DEFAULT_RANGE,
    ConductanceRange,
    CrossbarProgram,
    decode_output,
    encode_inputs,
    map_matrix,
    program_stage,
    quantize_conductance,
    solve_module,
)
from .errors import CalibrationError, ContractViolation, DegenerateChannelError
from .mimo import ChannelRealization, Constellation
from .sic import DetectionOrder, SicTrace, order_columns, realify_matrix, realify_vector
from .slicer import SlicerConfig, Structure, slicer_eval, slicer_level_index

__all__ = ["DetectorInstance", "AnalogTrace", "StageVoltages", "build_detector", "detect",
           "detect_batch"]


@dataclass(frozen=True, eq=False)
class DetectorInstance:
    programs: Tuple[CrossbarProgram, ...]
    slicers: Tuple[Tuple[SlicerConfig, SlicerConfig], ...]
    order: DetectionOrder
    constellation: Constellation
    c: float
    G: np.ndarray
    noise_var: float
    bits: Optional[int] = None
    v_max: Optional[float] = None

    @property
    def K(self) -> int:
        return len(self.programs)

    @property
    def R(self) -> int:
        return self.G.shape[0]

    @property
    def structure(self) -> Structure:
        return self.slicers[0][0].structure


@dataclass(frozen=True)
class StageVoltages:
    v_in1: np.ndarray
    v_in2: np.ndarray
    v_out: np.ndarray
    v_sin: Tuple[float, float]
    v_sout: Tuple[float, float]


@dataclass
class AnalogTrace(SicTrace):
    """:class:`SicTrace` with decoded ``r_k`` plus the stage voltages."""

    voltages: List[StageVoltages] = field(default_factory=list)


def build_detector(chan, noise_var: float, constellation: Constellation,
                   crange: ConductanceRange = DEFAULT_RANGE, bits: Optional[int] = None,
                   structure=Structure.DIRECT, c: Optional[float] = None,
                   v_max: Optional[float] = None) -> DetectorInstance:
    """Order the users and program every stage for one channel realization.

    ``chan`` is a :class:`ChannelRealization` or an effective channel
    matrix ``F``. The voltage scale ``c`` defaults to the constellation
    reference voltage, so the slicer levels are the constellation levels
    in volts.
    """
    F = chan.F if isinstance(chan, ChannelRealization) else np.asarray(chan, dtype=complex)
    R, K = F.shape
    c = constellation.reference_voltage if c is None else float(c)
    order = order_columns(F)
    G = F[:, order.as_array()]
    programs = []
    for k in range(1, K + 1):
        G_tail = realify_matrix(G[:, k - 1:])
        G_head = realify_matrix(G[:, :k - 1]) if k > 1 else None
        programs.append(program_stage(k, G_tail, G_head, noise_var, crange, bits, c))
    # both slicers of a stage see levels scaled by the module's c
    cfg = SlicerConfig(constellation.levels * c, structure, constellation.reference_voltage)
    slicers = tuple((cfg, cfg) for _ in range(K))
    return DetectorInstance(tuple(programs), slicers, order, constellation, c, G,
                            float(noise_var), bits, v_max)


def detect(det: DetectorInstance, y):
    """Run the detector on received vector ``y``.

    Returns
    -------
    s_hat : complex ndarray, shape (K,)
        Decisions in original user order.
    trace : AnalogTrace
        ``trace.r[k-1]`` is the decoded output of stage k in symbol units.
    """
    y = np.asarray(y, dtype=complex)
    if y.shape != (det.R,):
        raise ContractViolation(f"y must have length {det.R}")
    K = det.K
    y_real = realify_vector(y)
    levels = det.constellation.levels
    trace = AnalogTrace(order=det.order, G=det.G)
    for k, prog in enumerate(det.programs, start=1):
        n = K - k + 1
        e_head = realify_vector(trace.e) if k > 1 else np.zeros(0)
        v_in1, v_in2 = encode_inputs(y_real, e_head, prog, det.v_max)
        v_out = solve_module(prog, v_in1, v_in2)
        r = decode_output(v_out, prog.c)
        sl_re, sl_im = det.slicers[k - 1]
        v_sin = (float(v_out[0]), float(v_out[n]))
        v_sout = (slicer_eval(v_sin[0], sl_re), slicer_eval(v_sin[1], sl_im))
        # the selected level is exact, so take it by index rather than v_sout / c
        e = complex(levels[int(slicer_level_index(v_sin[0], sl_re))],
                    levels[int(slicer_level_index(v_sin[1], sl_im))])
        trace.r.append(r)
        trace.b.append(r[:n] + 1j * r[n:])
        trace.slicer_inputs.append((r[0], r[n]))
        trace.estimates.append(e)
        trace.voltages.append(StageVoltages(v_in1, v_in2, v_out, v_sin, v_sout))
    s_hat = np.empty(K, dtype=complex)
    s_hat[det.order.as_array()] = trace.e
    return s_hat, trace


def _realify_stack(G):
    return np.concatenate([np.concatenate([G.real, -G.imag], axis=-1),
                           np.concatenate([G.imag, G.real], axis=-1)], axis=-2)


def detect_batch(F, Y, noise_var: float, constellation: Constellation,
                 crange: ConductanceRange = DEFAULT_RANGE, bits=None,
                 structure=Structure.DIRECT, c: Optional[float] = None):
    """Decisions of :func:`build_detector` + :func:`detect` for many trials.

    Same calibration, quantization and slicing as the per-instance path,
    evaluated on stacks: ``F`` is (T, R, K), ``Y`` is (T, R). Returns the
    (T, K) decisions in user order, no traces.

    ``bits`` may also be a list of precisions, in which case the mapping
    is shared and a list of decision arrays comes back.
    """
    many = isinstance(bits, (list, tuple))
    precisions = list(bits) if many else [bits]
    precisions = [None if b == math.inf else b for b in precisions]
    F = np.asarray(F, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    T, R, K = F.shape
    if Y.shape != (T, R):
        raise ContractViolation(f"Y must have shape {(T, R)}")
    if noise_var < 0:
        raise ContractViolation("noise variance must be nonnegative")
    c = constellation.reference_voltage if c is None else float(c)
    lo, hi = crange.alpha_min, crange.alpha_max

    norms = np.linalg.norm(F, axis=1)
    if np.any(norms == 0):
        raise DegenerateChannelError("channel has an all-zero column")
    order = np.argsort(-norms, axis=1, kind="stable")
    G = np.take_along_axis(F, order[:, None, :], axis=2)
    Gr = _realify_stack(G)
    yr = np.concatenate([Y.real, Y.imag], axis=1)

    cfg = SlicerConfig(constellation.levels * c, structure, constellation.reference_voltage)
    levels = constellation.levels
    lam0 = [quantize_conductance(crange.midpoint, b, crange) for b in precisions]
    e_real = [np.zeros((T, K)) for _ in precisions]
    e_imag = [np.zeros((T, K)) for _ in precisions]
    cols = np.arange(K)
    for k in range(1, K + 1):
        n = K - k + 1
        tail_idx = np.concatenate([cols[k - 1:], K + cols[k - 1:]])
        tail = map_matrix(Gr[:, :, tail_idx], crange)
        beta_g = np.atleast_1d(tail.beta)
        if noise_var > 0:
            over = beta_g ** 2 * noise_var > hi ** 2
            if np.any(over):
                beta_g = np.where(over, hi / math.sqrt(noise_var), beta_g)
                tail = map_matrix(Gr[:, :, tail_idx], crange, beta=beta_g)
            product = beta_g ** 2 * noise_var
            if np.any(product < lo * lo * (1 - 1e-12)):
                raise CalibrationError("lambda1*lambda2 below alpha_min^2 for some trial")
            root = np.sqrt(product)
        if k > 1:
            head_idx = np.concatenate([cols[:k - 1], K + cols[:k - 1]])
            head = map_matrix(Gr[:, :, head_idx], crange)
            head_gain = beta_g * c / np.atleast_1d(head.beta)
        eye = np.eye(2 * n)
        for j, b in enumerate(precisions):
            # U holds only alpha_min / alpha_max, which every level grid contains
            D = tail.U - quantize_conductance(tail.V, b, crange)
            Dt = D.transpose(0, 2, 1)
            A = Dt @ D
            if noise_var > 0:
                lam = quantize_conductance(root, b, crange)
                A = A + (lam * lam)[:, None, None] * eye
            rhs = lam0[j] * ((beta_g * c / lam0[j])[:, None] * yr)
            if k > 1:
                D1 = head.U - quantize_conductance(head.V, b, crange)
                e_head = np.concatenate([e_real[j][:, :k - 1], e_imag[j][:, :k - 1]], axis=1)
                v_in2 = head_gain[:, None] * e_head
                rhs = rhs - (D1 @ v_in2[..., None])[..., 0]
            v_out = np.linalg.solve(A, Dt @ rhs[..., None])[..., 0]
            e_real[j][:, k - 1] = levels[slicer_level_index(v_out[:, 0], cfg)]
            e_imag[j][:, k - 1] = levels[slicer_level_index(v_out[:, n], cfg)]

    out = []
    for j in range(len(precisions)):
        s_hat = np.empty((T, K), dtype=complex)
        np.put_along_axis(s_hat, order, e_real[j] + 1j * e_imag[j], axis=1)
        out.append(s_hat)
    return out if many else out[0]
