"""Vector CCA baseline and the sample correlation functional."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DegenerateProjection, ShapeError
from .linalg import best_rank1, spd_inv_sqrt
from .tensor import as_array


@dataclass
class CcaSolution:
    """Leading canonical pair.

    ``u`` and ``v`` are normalized to unit variance under the (regularized)
    covariances that were used, and ``rho`` is the leading singular value
    of the whitened cross-covariance.
    """

    u: np.ndarray
    v: np.ndarray
    rho: float


def projections(X, U) -> np.ndarray:
    """Scores ``<U, X_t>`` for every sample ``t``.

    ``U`` may be a full tensor with the per-sample dims of ``X``, a
    sequence of factor vectors (rank-one tensor), or any object with a
    ``factors`` attribute (optionally with a ``scale``).
    """
    arr = as_array(X)
    factors = getattr(U, "factors", None)
    scale = float(getattr(U, "scale", 1.0))
    if factors is None and isinstance(U, (list, tuple)):
        factors = U
    if factors is not None:
        if len(factors) != arr.ndim - 1:
            raise ShapeError(f"{len(factors)} factors for {arr.ndim - 1}-mode samples")
        out = arr
        for k in range(arr.ndim - 2, -1, -1):
            f = np.asarray(factors[k], dtype=np.float64)
            if f.shape != (arr.shape[k + 1],):
                raise ShapeError(f"factor {k} has shape {f.shape}, expected ({arr.shape[k + 1]},)")
            out = np.tensordot(out, f, axes=([k + 1], [0]))
        return scale * out
    full = np.asarray(U, dtype=np.float64)
    if full.shape != arr.shape[1:]:
        raise ShapeError(f"direction of shape {full.shape} for samples of shape {arr.shape[1:]}")
    return arr.reshape(arr.shape[0], -1) @ full.ravel()


def correlation_of_scores(xs, ys, center: bool = False) -> float:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ShapeError("score vectors must be 1-D and of equal length")
    if xs.size < 2:
        raise ValueError("need at least 2 samples")
    if center:
        xs = xs - xs.mean()
        ys = ys - ys.mean()
    sxx = float(np.dot(xs, xs))
    syy = float(np.dot(ys, ys))
    if sxx == 0.0 or syy == 0.0:
        raise DegenerateProjection("a projection sequence has zero variance")
    return float(np.dot(xs, ys)) / np.sqrt(sxx * syy)


def sample_correlation(U, V, X, Y, center: bool = False) -> float:
    """Sample correlation of ``<U, X_t>`` and ``<V, Y_t>``.

    With ``center=False`` (default) this is the zero-mean (uncentered)
    correlation that the tensor CCA solvers maximize; ``center=True`` gives
    the Pearson coefficient.

    Raises
    ------
    DegenerateProjection
        Either projection sequence is identically zero.
    """
    xs, ys = projections(X, U), projections(Y, V)
    if xs.shape != ys.shape:
        raise ShapeError("X and Y have different sample counts")
    return correlation_of_scores(xs, ys, center=center)


def constraint_residual(U, V, X, Y) -> tuple[float, float]:
    """Violation of the unit empirical second-moment constraints."""
    xs, ys = projections(X, U), projections(Y, V)
    return abs(1.0 - float(np.mean(xs ** 2))), abs(1.0 - float(np.mean(ys ** 2)))


def _pair(ridge) -> tuple[float, float]:
    if np.ndim(ridge) == 0:
        return float(ridge), float(ridge)
    rx, ry = ridge
    return float(rx), float(ry)


def cca_from_covariances(sxx, syy, sxy, ridge: Union[float, tuple] = 0.0) -> CcaSolution:
    """Leading CCA pair from (cross-)covariance matrices.

    The whitened cross-covariance ``Rx Sxy Ry`` with
    ``Rx = (Sxx + rx I)^{-1/2}`` is decomposed and its top singular pair
    mapped back.  Singular covariances are handled through pseudo-inverse
    square roots.
    """
    rx, ry = _pair(ridge)
    Rx = spd_inv_sqrt(sxx, rx)
    Ry = spd_inv_sqrt(syy, ry)
    rho, ub, vb = best_rank1(Rx @ np.asarray(sxy) @ Ry)
    return CcaSolution(Rx @ ub, Ry @ vb, rho)


def flatten_samples(X) -> np.ndarray:
    """``(n, prod(dims))`` matrix of vectorized samples (first index fastest)."""
    arr = as_array(X)
    if arr.ndim < 2:
        raise ShapeError("expected samples along mode 0")
    return arr.reshape(arr.shape[0], -1, order="F")


def cca_1d(X, Y, ridge: Union[float, tuple] = 0.0, center: bool = True) -> CcaSolution:
    """Classical CCA on vectorized samples.

    Parameters
    ----------
    X, Y : DataTensor or array
        Samples along mode 0; higher modes are vectorized.
    ridge : float or (float, float)
        Ridge added to the X and Y covariances.
    center : bool
        Subtract the empirical means first.

    Returns
    -------
    CcaSolution
        Directions in the vectorized coordinates, ``rho >= 0``.
    """
    A, B = flatten_samples(X), flatten_samples(Y)
    if A.shape[0] != B.shape[0]:
        raise ShapeError("X and Y have different sample counts")
    n = A.shape[0]
    if n < 2:
        raise ValueError("need at least 2 samples")
    if center:
        A = A - A.mean(axis=0)
        B = B - B.mean(axis=0)
    return cca_from_covariances(A.T @ A / n, B.T @ B / n, A.T @ B / n, ridge)
