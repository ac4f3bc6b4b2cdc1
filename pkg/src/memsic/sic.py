"""
Exact digital MMSE-SIC detection, used as the reference for the analog
detector.

All matrix algebra is carried out on the real-valued forms produced by
:func:`realify_vector` and :func:`realify_matrix`, i.e. the same layout the
crossbar modules see.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy import linalg

from .errors import ContractViolation, DegenerateChannelError, SingularSystemError

__all__ = [
    "realify_vector",
    "realify_matrix",
    "DetectionOrder",
    "SicTrace",
    "order_columns",
    "mmse_stage",
    "nearest_level_index",
    "ideal_slice",
    "sic_detect",
    "flop_count",
    "stage_flops",
    "sic_detect_batch",
]


def realify_vector(x) -> np.ndarray:
    """``[Re(x); Im(x)]``."""
    x = np.asarray(x, dtype=complex)
    return np.concatenate([x.real, x.imag])


def realify_matrix(A) -> np.ndarray:
    """``[[Re A, -Im A], [Im A, Re A]]``."""
    A = np.asarray(A, dtype=complex)
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


@dataclass(frozen=True)
class DetectionOrder:
    """Zero-based permutation; ``sequence[k]`` is the user detected at stage k+1."""

    sequence: tuple

    def __post_init__(self):
        seq = tuple(int(i) for i in self.sequence)
        if sorted(seq) != list(range(len(seq))):
            raise ContractViolation(f"{seq} is not a permutation")
        object.__setattr__(self, "sequence", seq)

    def __len__(self):
        return len(self.sequence)

    def __iter__(self):
        return iter(self.sequence)

    def as_array(self) -> np.ndarray:
        return np.array(self.sequence, dtype=int)


def order_columns(F) -> DetectionOrder:
    """Strongest column first; equal norms keep their original order."""
    F = np.asarray(F)
    norms = np.linalg.norm(F, axis=0)
    if np.any(norms == 0):
        raise DegenerateChannelError("channel has an all-zero column")
    return DetectionOrder(tuple(np.argsort(-norms, kind="stable")))


def mmse_stage(G_tail, residual, noise_var: float) -> np.ndarray:
    """Real-valued MMSE estimate for one SIC stage.

    Parameters
    ----------
    G_tail : complex ndarray, shape (R, n)
        Columns of the ordered channel still to be detected.
    residual : complex ndarray, shape (R,)
        Received vector with already-detected users cancelled.
    noise_var : float
        Regularization ``sigma_n^2``.

    Returns
    -------
    ndarray, shape (2n,)
        ``(Gt^T Gt + sigma^2 I)^-1 Gt^T rt`` with ``Gt = M(G_tail)`` and
        ``rt = V(residual)``.
    """
    if noise_var < 0:
        raise ContractViolation("noise variance must be nonnegative")
    Gt = realify_matrix(G_tail)
    rt = realify_vector(residual)
    if Gt.shape[0] != rt.shape[0]:
        raise ContractViolation("residual length does not match G_tail rows")
    A = Gt.T @ Gt + noise_var * np.eye(Gt.shape[1])
    try:
        factor = linalg.cho_factor(A)
    except linalg.LinAlgError as exc:
        raise SingularSystemError("normal matrix is not positive definite") from exc
    return linalg.cho_solve(factor, Gt.T @ rt)


def nearest_level_index(a, levels) -> np.ndarray:
    """Index of the nearest level; an exact midpoint picks the lower level.

    Counts the thresholds strictly below ``a``, which is what a bank of
    strict greater-than comparators produces.
    """
    levels = np.asarray(levels, dtype=float)
    thresholds = (levels[:-1] + levels[1:]) / 2.0
    return np.searchsorted(thresholds, a, side="left")


def ideal_slice(a1: float, a2: float, levels) -> complex:
    """Slice a pair of real values onto the nearest per-axis levels.

    ``levels`` is a sorted level set, e.g. ``Constellation.s_value`` for
    volts or ``Constellation.levels`` for symbol units.
    """
    levels = np.asarray(levels, dtype=float)
    return complex(levels[nearest_level_index(a1, levels)],
                   levels[nearest_level_index(a2, levels)])


@dataclass
class SicTrace:
    """Intermediate quantities of one SIC run (all indices stage-ordered)."""

    order: DetectionOrder
    G: np.ndarray
    r: List[np.ndarray] = field(default_factory=list)
    b: List[np.ndarray] = field(default_factory=list)
    estimates: List[complex] = field(default_factory=list)
    slicer_inputs: List[tuple] = field(default_factory=list)

    @property
    def K(self) -> int:
        return self.G.shape[1]

    def G_head(self, k: int) -> np.ndarray:
        """First ``k`` ordered columns (1-based stage convention)."""
        return self.G[:, :k]

    def G_tail(self, k: int) -> np.ndarray:
        """Ordered columns ``k..K`` (1-based)."""
        return self.G[:, k - 1:]

    @property
    def e(self) -> np.ndarray:
        return np.array(self.estimates, dtype=complex)


def sic_detect(F, y, noise_var: float, constellation):
    """Ordered MMSE-SIC detection.

    Returns
    -------
    s_hat : complex ndarray, shape (K,)
        Decisions in the original user order.
    trace : SicTrace
    """
    F = np.asarray(F, dtype=complex)
    y = np.asarray(y, dtype=complex)
    R, K = F.shape
    if y.shape != (R,):
        raise ContractViolation(f"y must have length {R}")
    order = order_columns(F)
    G = F[:, order.as_array()]
    trace = SicTrace(order=order, G=G)
    levels = constellation.levels
    residual = y.copy()
    for k in range(1, K + 1):
        n = K - k + 1
        r = mmse_stage(G[:, k - 1:], residual, noise_var)
        a1, a2 = r[0], r[n]
        e = ideal_slice(a1, a2, levels)
        trace.r.append(r)
        trace.b.append(r[:n] + 1j * r[n:])
        trace.slicer_inputs.append((a1, a2))
        trace.estimates.append(e)
        residual = residual - G[:, k - 1] * e
    s_hat = np.empty(K, dtype=complex)
    s_hat[order.as_array()] = trace.e
    return s_hat, trace


def stage_flops(k: int, K: int, R: int) -> int:
    """Real FLOPs of stage ``k`` under the counting convention below.

    With ``n = 2(K-k+1)`` unknowns and ``m = 2R`` rows: Gram product
    ``2 n^2 m``, diagonal loading ``n``, Cholesky ``n^3 // 3``, two
    triangular solves ``2 n^2``, matched filter ``2 n m`` and the
    cancellation of the ``2(k-1)`` detected real components
    ``2 m 2(k-1)``. One real add or multiply counts as one FLOP.
    """
    n = 2 * (K - k + 1)
    m = 2 * R
    return 2 * n * n * m + n + n ** 3 // 3 + 2 * n * n + 2 * n * m + 2 * m * 2 * (k - 1)


def flop_count(cfg) -> int:
    """Equivalent FLOP count of a full digital MMSE-SIC for ``cfg`` (K, R)."""
    return sum(stage_flops(k, cfg.K, cfg.R) for k in range(1, cfg.K + 1))


def sic_detect_batch(F, Y, noise_var: float, constellation) -> np.ndarray:
    """:func:`sic_detect` decisions for a stack of trials, (T, R, K) and (T, R)."""
    F = np.asarray(F, dtype=complex)
    Y = np.asarray(Y, dtype=complex)
    T, R, K = F.shape
    if Y.shape != (T, R):
        raise ContractViolation(f"Y must have shape {(T, R)}")
    norms = np.linalg.norm(F, axis=1)
    if np.any(norms == 0):
        raise DegenerateChannelError("channel has an all-zero column")
    order = np.argsort(-norms, axis=1, kind="stable")
    G = np.take_along_axis(F, order[:, None, :], axis=2)
    levels = constellation.levels
    residual = Y.copy()
    est = np.empty((T, K), dtype=complex)
    for k in range(1, K + 1):
        Gk = G[:, :, k - 1:]
        Gt = np.concatenate([np.concatenate([Gk.real, -Gk.imag], axis=-1),
                             np.concatenate([Gk.imag, Gk.real], axis=-1)], axis=-2)
        rt = np.concatenate([residual.real, residual.imag], axis=1)
        n = K - k + 1
        GtT = Gt.transpose(0, 2, 1)
        A = GtT @ Gt + noise_var * np.eye(2 * n)
        try:
            r = np.linalg.solve(A, GtT @ rt[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError("normal matrix is singular") from exc
        e = levels[nearest_level_index(r[:, 0], levels)] + 1j * levels[nearest_level_index(r[:, n], levels)]
        est[:, k - 1] = e
        residual = residual - G[:, :, k - 1] * e[:, None]
    s_hat = np.empty((T, K), dtype=complex)
    np.put_along_axis(s_hat, order, est, axis=1)
    return s_hat
