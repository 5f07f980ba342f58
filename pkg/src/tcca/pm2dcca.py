"""Alternating power method for matrix-sample CCA.

With the factor of one mode held fixed, the other mode's problem is an
ordinary CCA between ``X_t u_other`` (or ``X_t^T u_other``) and the
analogous ``Y`` projections.  :func:`power_step` performs one regularized
power iteration on that problem and :func:`run_power_method` alternates
the two modes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .errors import DegenerateProjection, RankDeficient, ShapeError
from .tensor import as_array


@dataclass
class ModeCovariances:
    """Covariances of the ``mode`` problem (0 updates ``U_1``, 1 updates ``U_2``)."""

    sxx: np.ndarray
    syy: np.ndarray
    sxy: np.ndarray
    ridge: float = 0.0
    mode: int = 0

    def __post_init__(self):
        self.sxx = 0.5 * (np.asarray(self.sxx, float) + np.asarray(self.sxx, float).T)
        self.syy = 0.5 * (np.asarray(self.syy, float) + np.asarray(self.syy, float).T)
        self.sxy = np.asarray(self.sxy, float)
        if self.sxy.shape != (self.sxx.shape[0], self.syy.shape[0]):
            raise ShapeError("cross-covariance shape does not match the covariances")
        if self.mode not in (0, 1):
            raise ShapeError(f"mode must be 0 or 1, got {self.mode}")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")

    def metric_x(self) -> np.ndarray:
        return self.sxx + self.ridge * np.eye(self.sxx.shape[0])

    def metric_y(self) -> np.ndarray:
        return self.syy + self.ridge * np.eye(self.syy.shape[0])


def _contract(arr: np.ndarray, w: np.ndarray, mode: int) -> np.ndarray:
    # mode 0 keeps the row index (X_t w), mode 1 keeps the column index (X_t^T w)
    other = 2 if mode == 0 else 1
    if w.shape != (arr.shape[other],):
        raise ShapeError(f"vector of shape {w.shape} cannot contract extent {arr.shape[other]}")
    return np.tensordot(arr, w, axes=([other], [0]))


def mode_covariances(X, Y, u_other, v_other, mode: int, ridge: float = 0.0) -> ModeCovariances:
    """Sample covariances ``(1/n) sum_t X_{j,t} u u^T X_{j,t}^T`` and friends.

    Parameters
    ----------
    X, Y : DataTensor or array of shape ``(n, d1, d2)``
    u_other, v_other : ndarray
        Fixed factors of the mode that is *not* being updated.
    mode : {0, 1}
        Mode being updated.
    """
    Xa, Ya = as_array(X), as_array(Y)
    if Xa.ndim != 3 or Ya.ndim != 3:
        raise ShapeError("mode covariances need matrix samples")
    if Xa.shape[0] != Ya.shape[0]:
        raise ShapeError("X and Y have different sample counts")
    if mode not in (0, 1):
        raise ShapeError(f"mode must be 0 or 1, got {mode}")
    A = _contract(Xa, np.asarray(u_other, float), mode)
    B = _contract(Ya, np.asarray(v_other, float), mode)
    n = Xa.shape[0]
    return ModeCovariances(A.T @ A / n, B.T @ B / n, A.T @ B / n, ridge, mode)


def _metric_solve(M: np.ndarray, rhs: np.ndarray, ridge: float) -> np.ndarray:
    w = np.linalg.eigvalsh(M)
    if w[0] <= M.shape[0] * np.finfo(float).eps * max(abs(w[-1]), 1e-300):
        raise RankDeficient("metric is singular; use ridge > 0" if ridge == 0 else
                            "regularized metric is singular")
    return np.linalg.solve(M, rhs)


def _unit_in(M: np.ndarray, w: np.ndarray, what: str) -> np.ndarray:
    q = float(w @ M @ w)
    if q <= 0.0:
        raise DegenerateProjection(f"{what} has zero metric norm")
    return w / np.sqrt(q)


def power_step(cov: ModeCovariances, u, v) -> tuple:
    """One regularized power iteration.

    ``u' ~ (Sxx + eps I)^{-1} Sxy v`` and ``v' ~ (Syy + eps I)^{-1} Syx u``,
    both from the *incoming* pair, each normalized to unit norm in its
    regularized metric.
    """
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    Mx, My = cov.metric_x(), cov.metric_y()
    ut = _metric_solve(Mx, cov.sxy @ v, cov.ridge)
    vt = _metric_solve(My, cov.sxy.T @ u, cov.ridge)
    return _unit_in(Mx, ut, "u"), _unit_in(My, vt, "v")


def metric_angle(w1, w2, metric) -> tuple:
    """``(cos, sin)`` of the angle between ``w1`` and ``w2`` in the inner product ``metric``.

    Examples
    --------
    >>> c, s = metric_angle([1.0, 0.0], [1.0, 1.0], np.diag([4.0, 1.0]))
    >>> round(c, 12) == round(2 / np.sqrt(5), 12)
    True
    """
    w1 = np.asarray(w1, float)
    w2 = np.asarray(w2, float)
    M = np.asarray(metric, float)
    n1, n2 = float(w1 @ M @ w1), float(w2 @ M @ w2)
    if n1 <= 0.0 or n2 <= 0.0:
        raise DegenerateProjection("zero metric norm")
    c = float(np.clip((w1 @ M @ w2) / np.sqrt(n1 * n2), -1.0, 1.0))
    return c, float(np.sqrt(max(0.0, 1.0 - c * c)))


@dataclass
class PowerIterate:
    u1: np.ndarray
    u2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray


CovBuilder = Callable[[np.ndarray, np.ndarray, int], ModeCovariances]


def sample_builder(X, Y, ridge: float) -> CovBuilder:
    Xa, Ya = as_array(X), as_array(Y)
    return lambda u, v, mode: mode_covariances(Xa, Ya, u, v, mode, ridge)


def default_ridge_schedule(n: int) -> float:
    """``n^{-1/4}``: vanishing, while ``eps + eps^{-3/2} n^{-1/2} -> 0``."""
    return float(n) ** -0.25


def run_power_method(builder: CovBuilder, start: PowerIterate, steps: int,
                     callback: Optional[Callable[[int, PowerIterate], None]] = None
                     ) -> List[PowerIterate]:
    """Alternate mode-0 and mode-1 power steps.

    Each outer step updates ``(U_1, V_1)`` from covariances contracted with
    ``(U_2, V_2)``, then ``(U_2, V_2)`` from covariances contracted with the
    new ``(U_1, V_1)``.  Returns the iterates, starting with ``start``.
    """
    it = PowerIterate(*(np.asarray(w, float).copy() for w in
                        (start.u1, start.u2, start.v1, start.v2)))
    path = [it]
    for k in range(steps):
        u1, v1 = power_step(builder(it.u2, it.v2, 0), it.u1, it.v1)
        u2, v2 = power_step(builder(u1, v1, 1), it.u2, it.v2)
        it = PowerIterate(u1, u2, v1, v2)
        path.append(it)
        if callback is not None:
            callback(k + 1, it)
    return path
