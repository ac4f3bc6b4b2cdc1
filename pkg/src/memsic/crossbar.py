"""
Memristor crossbar matrix-computing module.

A module holds six crossbar arrays ``C1..C6`` plus three kinds of scalar
memristors (``lambda0`` on the ``v_in1`` inputs, ``lambda1``/``lambda2`` in
the feedback paths of the two OA sets). With ``D1 = C1 - C4``,
``D2 = C2 - C5``, ``D3 = C3 - C6`` the node equations are::

    lambda0 v_in1 - D1 v_in2 + D2 v2 + lambda1 v1 = 0
    D3^T v1 - lambda2 v2 = 0
    v_out = -v2

and the steady-state output is
``v_out = (D3^T D2 + lambda1 lambda2 I)^-1 D3^T (lambda0 v_in1 - D1 v_in2)``.

Conductances are in siemens, voltages in volts.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    CalibrationError,
    ConfigurationError,
    ContractViolation,
    DegenerateMatrixError,
    SingularSystemError,
)

__all__ = [
    "ConductanceRange",
    "DEFAULT_RANGE",
    "MappedMatrix",
    "CrossbarProgram",
    "ModuleIO",
    "map_matrix",
    "quantize_conductance",
    "quantization_levels",
    "split_feedback",
    "program_stage",
    "solve_module",
    "operating_point",
    "encode_inputs",
    "decode_output",
    "dump_program",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConductanceRange:
    alpha_min: float = 0.1e-6
    alpha_max: float = 30e-6

    def __post_init__(self):
        if not 0 < self.alpha_min < self.alpha_max:
            raise ConfigurationError("need 0 < alpha_min < alpha_max")

    @property
    def span(self) -> float:
        return self.alpha_max - self.alpha_min

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.alpha_min + self.alpha_max)

    def contains(self, g, rtol=1e-12) -> bool:
        g = np.asarray(g, dtype=float)
        if g.size == 0:
            return True
        slack = rtol * self.alpha_max
        return bool(g.min() >= self.alpha_min - slack and g.max() <= self.alpha_max + slack)


DEFAULT_RANGE = ConductanceRange()


@dataclass(frozen=True)
class MappedMatrix:
    """Signed matrix ``O`` stored as ``U - V = beta * O``."""

    U: np.ndarray
    V: np.ndarray
    beta: float

    @property
    def shape(self):
        return self.U.shape

    @property
    def difference(self) -> np.ndarray:
        return self.U - self.V


def map_matrix(O, crange: ConductanceRange = DEFAULT_RANGE, beta=None) -> MappedMatrix:
    """Map a signed real matrix onto two conductance matrices.

    ``u_ij`` is ``alpha_max`` for positive entries and ``alpha_min``
    otherwise, and ``v_ij = u_ij - beta * o_ij``. By default ``beta`` uses
    the full conductance span, ``(alpha_max - alpha_min) / max|o_ij|``; a
    smaller explicit ``beta`` is allowed and keeps every entry in range.

    A stack of matrices (``O.ndim > 2``) is mapped matrix by matrix and
    ``beta`` then has the stack's leading shape.
    """
    O = np.asarray(O, dtype=float)
    if O.ndim < 2:
        raise ContractViolation("expected a matrix")
    if not np.all(np.isfinite(O)):
        raise ContractViolation("matrix has non-finite entries")
    peak = np.max(np.abs(O), axis=(-2, -1)) if O.size else np.zeros(O.shape[:-2])
    if np.any(peak == 0):
        raise DegenerateMatrixError("cannot map an all-zero matrix")
    full = crange.span / peak
    if beta is None:
        beta = full
    else:
        beta = np.asarray(beta, dtype=float)
        if np.any(beta <= 0) or np.any(beta > full * (1 + 1e-12)):
            raise ContractViolation(f"beta={beta!r} outside (0, {full!r}]")
    b = np.asarray(beta)[..., None, None]
    U = np.where(O > 0, crange.alpha_max, crange.alpha_min)
    # the peak entry lands on the opposite bound up to rounding
    V = np.clip(U - b * O, crange.alpha_min, crange.alpha_max)
    beta = float(beta) if np.ndim(beta) == 0 else np.asarray(beta)
    return MappedMatrix(U=U, V=V, beta=beta)


def quantization_levels(bits: int, crange: ConductanceRange = DEFAULT_RANGE) -> np.ndarray:
    return np.linspace(crange.alpha_min, crange.alpha_max, 2 ** bits)


def quantize_conductance(g, bits: Optional[int], crange: ConductanceRange = DEFAULT_RANGE):
    """Round conductance(s) to the nearest of ``2**bits`` uniform levels.

    Levels span ``[alpha_min, alpha_max]`` including both ends. ``bits``
    of ``None`` (or ``math.inf``) means infinite precision. A
    :class:`MappedMatrix` is quantized array by array.
    """
    if isinstance(g, MappedMatrix):
        return MappedMatrix(quantize_conductance(g.U, bits, crange),
                            quantize_conductance(g.V, bits, crange), g.beta)
    if bits is None or bits == math.inf:
        return g
    if int(bits) != bits or bits < 1:
        raise ConfigurationError(f"bit precision must be a positive integer, got {bits!r}")
    arr = np.asarray(g, dtype=float)
    if not crange.contains(arr):
        raise ContractViolation("conductance outside the device range")
    top = 2 ** int(bits) - 1
    step = crange.span / top
    idx = np.clip(np.rint((arr - crange.alpha_min) / step), 0, top)
    # pin the top level so both range ends are reproduced exactly
    out = np.where(idx == top, crange.alpha_max, crange.alpha_min + idx * step)
    return float(out) if np.ndim(out) == 0 else out


def split_feedback(product: float, crange: ConductanceRange = DEFAULT_RANGE):
    """Factor ``lambda1 * lambda2 = product`` with both factors in range.

    The symmetric split ``sqrt(product)`` is in range whenever the product
    is in ``[alpha_min**2, alpha_max**2]``; anything else is infeasible.
    """
    lo, hi = crange.alpha_min, crange.alpha_max
    if product < lo * lo * (1 - 1e-12):
        raise CalibrationError(
            f"lambda1*lambda2={product:.4g} S^2 below alpha_min^2={lo * lo:.4g} S^2")
    if product > hi * hi * (1 + 1e-12):
        raise CalibrationError(
            f"lambda1*lambda2={product:.4g} S^2 above alpha_max^2={hi * hi:.4g} S^2")
    root = math.sqrt(product)
    return root, root


@dataclass(frozen=True, eq=False)
class CrossbarProgram:
    """Programmed state of one stage's matrix-computing module.

    ``C1``/``C4`` are ``None`` in stage 1 (no cancellation input).
    """

    stage: int
    C2: np.ndarray
    C5: np.ndarray
    C3: np.ndarray
    C6: np.ndarray
    lam0: float
    lam1: float
    lam2: float
    beta_g: float
    c: float
    C1: Optional[np.ndarray] = None
    C4: Optional[np.ndarray] = None
    beta_1: Optional[float] = None
    bits: Optional[int] = None
    crange: ConductanceRange = DEFAULT_RANGE
    warnings: list = field(default_factory=list, compare=False)

    @property
    def D1(self) -> Optional[np.ndarray]:
        return None if self.C1 is None else self.C1 - self.C4

    @property
    def D2(self) -> np.ndarray:
        return self.C2 - self.C5

    @property
    def D3(self) -> np.ndarray:
        return self.C3 - self.C6

    @property
    def n_inputs(self) -> int:
        return self.C2.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.C2.shape[1]

    @property
    def n_head(self) -> int:
        return 0 if self.C1 is None else self.C1.shape[1]

    def arrays(self) -> dict:
        out = {"C2": self.C2, "C3": self.C3, "C5": self.C5, "C6": self.C6}
        if self.C1 is not None:
            out.update(C1=self.C1, C4=self.C4)
        return out


def program_stage(k: int, G_tail, G_head=None, noise_var: float = 0.0,
                  crange: ConductanceRange = DEFAULT_RANGE, bits: Optional[int] = None,
                  c: float = 0.1, lam0: Optional[float] = None) -> CrossbarProgram:
    """Calibrate the module of stage ``k``.

    Parameters
    ----------
    k : int
        1-based stage index.
    G_tail : ndarray, shape (2R, 2(K-k+1))
        Realified remaining columns, mapped onto both ``D2`` and ``D3``.
    G_head : ndarray, shape (2R, 2(k-1)), optional
        Realified detected columns, mapped onto ``D1``. Absent for k = 1.
    noise_var : float
        Regularization, realized as ``lambda1 * lambda2 = beta_g**2 * noise_var``.
        Zero removes the feedback memristors (zero-forcing limit).
    bits : int or None
        Memristor precision; ``None`` is infinite precision.
    c : float
        Volts per symbol unit at the module output.

    Notes
    -----
    When ``beta_g**2 * noise_var`` exceeds ``alpha_max**2`` the tail
    mapping scale is lowered to ``alpha_max / sqrt(noise_var)``, which
    keeps every conductance in range at the cost of using less of it.
    """
    G_tail = np.asarray(G_tail, dtype=float)
    if noise_var < 0:
        raise ContractViolation("noise variance must be nonnegative")
    if not c > 0:
        raise ContractViolation("voltage scale c must be positive")
    if k < 1:
        raise ContractViolation("stage index is 1-based")

    tail = map_matrix(G_tail, crange)
    if noise_var > 0:
        if tail.beta ** 2 * noise_var > crange.alpha_max ** 2:
            tail = map_matrix(G_tail, crange, beta=crange.alpha_max / math.sqrt(noise_var))
        lam1, lam2 = split_feedback(tail.beta ** 2 * noise_var, crange)
        lam1 = quantize_conductance(lam1, bits, crange)
        lam2 = quantize_conductance(lam2, bits, crange)
    else:
        lam1 = lam2 = 0.0

    d2 = quantize_conductance(tail, bits, crange)
    d3 = quantize_conductance(tail, bits, crange)

    C1 = C4 = beta_1 = None
    if G_head is not None and np.size(G_head):
        if k == 1:
            raise ContractViolation("stage 1 has no cancellation input")
        head = quantize_conductance(map_matrix(G_head, crange), bits, crange)
        C1, C4, beta_1 = head.U, head.V, head.beta

    if lam0 is None:
        lam0 = crange.midpoint
    lam0 = quantize_conductance(lam0, bits, crange)
    if not crange.contains(lam0):
        raise CalibrationError(f"lambda0={lam0!r} outside the conductance range")

    return CrossbarProgram(
        stage=k, C2=d2.U, C5=d2.V, C3=d3.U, C6=d3.V,
        lam0=float(lam0), lam1=float(lam1), lam2=float(lam2),
        beta_g=tail.beta, c=float(c), C1=C1, C4=C4, beta_1=beta_1,
        bits=bits, crange=crange,
    )


@dataclass(frozen=True)
class ModuleIO:
    v_in1: np.ndarray
    v_in2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray

    @property
    def v_out(self) -> np.ndarray:
        return -self.v2


def _drive(prog: CrossbarProgram, v_in1, v_in2):
    v_in1 = np.asarray(v_in1, dtype=float)
    v_in2 = np.asarray(v_in2, dtype=float).ravel()
    if v_in1.shape != (prog.n_inputs,):
        raise ContractViolation(f"v_in1 must have length {prog.n_inputs}")
    if v_in2.size != prog.n_head:
        raise ContractViolation(f"v_in2 must have length {prog.n_head}")
    rhs = prog.lam0 * v_in1
    if prog.n_head:
        rhs = rhs - prog.D1 @ v_in2
    return rhs, v_in1, v_in2


def solve_module(prog: CrossbarProgram, v_in1, v_in2=()) -> np.ndarray:
    """Steady-state output voltages ``v_out`` of the module."""
    rhs, _, _ = _drive(prog, v_in1, v_in2)
    D3 = prog.D3
    A = D3.T @ prog.D2 + prog.lam1 * prog.lam2 * np.eye(prog.n_outputs)
    try:
        out = np.linalg.solve(A, D3.T @ rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("module system matrix is singular") from exc
    if not np.all(np.isfinite(out)):
        raise SingularSystemError("module system matrix is singular")
    return out


def operating_point(prog: CrossbarProgram, v_in1, v_in2=()) -> ModuleIO:
    """Node voltages ``v1``, ``v2`` at steady state.

    ``v1`` follows from the first node equation, so it needs
    ``lambda1 > 0``.
    """
    rhs, v_in1, v_in2 = _drive(prog, v_in1, v_in2)
    if prog.lam1 <= 0:
        raise SingularSystemError("v1 is undetermined without feedback memristors")
    v2 = -solve_module(prog, v_in1, v_in2)
    v1 = -(rhs + prog.D2 @ v2) / prog.lam1
    return ModuleIO(v_in1=v_in1, v_in2=v_in2, v1=v1, v2=v2)


def encode_inputs(y_real, e_head, prog: CrossbarProgram, v_max: Optional[float] = None):
    """Input voltages that make the module output ``c * r_k``.

    ``v_in1 = beta_g c / lambda0 * y_real`` and
    ``v_in2 = beta_g c / beta_1 * e_head``. Inputs above ``v_max`` are
    logged and recorded on ``prog.warnings``; they are not clipped.
    """
    y_real = np.asarray(y_real, dtype=float)
    e_head = np.asarray(e_head, dtype=float).ravel()
    v_in1 = (prog.beta_g * prog.c / prog.lam0) * y_real
    if e_head.size:
        if prog.beta_1 is None:
            raise ContractViolation("stage has no cancellation input")
        v_in2 = (prog.beta_g * prog.c / prog.beta_1) * e_head
    else:
        v_in2 = np.zeros(0)
    if v_max is not None:
        peak = max(np.max(np.abs(v_in1), initial=0.0), np.max(np.abs(v_in2), initial=0.0))
        if peak > v_max:
            msg = f"stage {prog.stage}: input voltage {peak:.4g} V exceeds {v_max:.4g} V"
            prog.warnings.append(msg)
            logger.warning(msg)
    return v_in1, v_in2


def decode_output(v_out, c: float) -> np.ndarray:
    if not c > 0:
        raise ContractViolation("voltage scale c must be positive")
    return np.asarray(v_out, dtype=float) / c


def _sig(x):
    return float(f"{x:.12g}")


def dump_program(prog: CrossbarProgram, path) -> None:
    """Write ``prog`` as JSON, conductances in siemens to 12 significant digits."""
    def mat(a):
        return None if a is None else [[_sig(v) for v in row] for row in np.asarray(a)]

    doc = {
        "stage": prog.stage,
        "bits": prog.bits,
        "alpha_min": prog.crange.alpha_min,
        "alpha_max": prog.crange.alpha_max,
        "lambda0": _sig(prog.lam0),
        "lambda1": _sig(prog.lam1),
        "lambda2": _sig(prog.lam2),
        "beta_g": _sig(prog.beta_g),
        "beta_1": None if prog.beta_1 is None else _sig(prog.beta_1),
        "c": prog.c,
        **{name: mat(getattr(prog, name)) for name in ("C1", "C2", "C3", "C4", "C5", "C6")},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
