"""Synthetic low-rank matrix-CCA model with a known population optimum.

Samples are

    X_t = Phi1 (L1 * C_t + L2 * E_xt) Phi2^T,
    Y_t = Omg1 (L1 * C_t + L2 * E_yt) Omg2^T,

with ``*`` the entrywise product and ``C_t, E_xt, E_yt`` independent
``k x k`` standard normal matrices.  The shared part has entrywise
cross-covariance ``Theta = L1**2``; when ``L1**2 + L2**2 == 1`` entrywise,
``vec`` of the latent matrix has identity variance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .cca import cca_from_covariances
from .errors import NotPsd, ShapeError
from .hopm import RankOneDirections
from .init import rank1_factors
from .pm2dcca import CovBuilder, ModeCovariances
from .tensor import DataTensor, kronecker


def random_orthonormal(rows: int, cols: int, seed) -> np.ndarray:
    """Column-orthonormal ``rows x cols`` matrix from the QR of a Gaussian draw.

    ``seed`` may be an int or a ``numpy.random.Generator``.  Signs are fixed
    so that ``R`` has a positive diagonal, which makes the result a
    deterministic function of the draw.
    """
    if rows < cols:
        raise ShapeError(f"cannot have {cols} orthonormal columns in dimension {rows}")
    if cols < 1:
        raise ShapeError("need at least one column")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((rows, cols)))
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def default_masks(k: int, lam: float, lambdas: Optional[Sequence[float]] = None) -> tuple:
    """Signal/noise masks.

    With ``lambdas`` omitted, the single signal ``lam`` sits at ``(0, 0)``:
    ``L1 = sqrt(lam) e_0 e_0^T`` and ``L2`` is ``sqrt(1 - lam)`` there and 1
    elsewhere.  With ``lambdas = (l_0, l_1, ...)`` the signals sit on the
    diagonal, one per entry.
    """
    if lambdas is None:
        lambdas = [lam]
    lambdas = [float(x) for x in lambdas]
    if len(lambdas) > k:
        raise ShapeError(f"{len(lambdas)} signals need k >= {len(lambdas)}")
    if any(not 0.0 <= x <= 1.0 for x in lambdas):
        raise ValueError("signal strengths must lie in [0, 1]")
    L1 = np.zeros((k, k))
    L2 = np.ones((k, k))
    for i, x in enumerate(lambdas):
        L1[i, i] = np.sqrt(x)
        L2[i, i] = np.sqrt(1.0 - x)
    return L1, L2


@dataclass
class P2dccaModel:
    phi1: np.ndarray
    phi2: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    lambda_: float
    seed: int = 0

    def __post_init__(self):
        k = self.lambda1.shape[0]
        for name in ("phi1", "phi2", "omega1", "omega2"):
            if getattr(self, name).shape[1] != k:
                raise ShapeError(f"{name} must have {k} columns")
        if self.lambda1.shape != (k, k) or self.lambda2.shape != (k, k):
            raise ShapeError("masks must be k x k")
        if np.any(self.lambda1 < 0) or np.any(self.lambda2 < 0):
            raise ValueError("masks must be nonnegative")

    @classmethod
    def build(cls, k: int, dims: Sequence[int], lam: float, seed: int,
              lambdas: Optional[Sequence[float]] = None) -> "P2dccaModel":
        """Random factors with ``dims = (m_x, n_x, m_y, n_y)`` and default masks."""
        dims = [int(d) for d in dims]
        if len(dims) != 4:
            raise ShapeError("dims must be (m_x, n_x, m_y, n_y)")
        rng = np.random.default_rng(seed)
        factors = [random_orthonormal(d, k, rng) for d in dims]
        L1, L2 = default_masks(k, lam, lambdas)
        return cls(*factors, L1, L2, float(lam), int(seed))

    @classmethod
    def from_theta(cls, factors: Sequence[np.ndarray], theta, seed: int = 0) -> "P2dccaModel":
        """Model with cross-covariance ``theta`` and unit latent variance."""
        theta = np.asarray(theta, float)
        if np.any(theta < 0) or np.any(theta > 1):
            raise ValueError("theta entries must lie in [0, 1]")
        return cls(*[np.asarray(f, float) for f in factors], np.sqrt(theta),
                   np.sqrt(1.0 - theta), float(theta.max()), seed)

    @property
    def k(self) -> int:
        return self.lambda1.shape[0]

    @property
    def dims_x(self) -> tuple:
        return self.phi1.shape[0], self.phi2.shape[0]

    @property
    def dims_y(self) -> tuple:
        return self.omega1.shape[0], self.omega2.shape[0]

    @property
    def theta(self) -> np.ndarray:
        """Entrywise cross-covariance of the two latent matrices."""
        return self.lambda1 ** 2

    @property
    def latent_variance(self) -> np.ndarray:
        """Entrywise variance of each latent matrix."""
        return self.lambda1 ** 2 + self.lambda2 ** 2


Sampler = Callable[[np.random.Generator, tuple], np.ndarray]


def _normal(rng: np.random.Generator, shape: tuple) -> np.ndarray:
    return rng.standard_normal(shape)


def generate(model: P2dccaModel, n: int, seed=None, sampler: Sampler = _normal) -> tuple:
    """Draw ``n`` i.i.d. sample pairs.

    ``seed`` defaults to one derived from ``model.seed``.  ``sampler(rng,
    shape)`` supplies the zero-mean unit-variance latent entries.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng([model.seed, 1] if seed is None else seed)
    k = model.k
    C = sampler(rng, (n, k, k))
    Ex = sampler(rng, (n, k, k))
    Ey = sampler(rng, (n, k, k))
    Zx = model.lambda1 * C + model.lambda2 * Ex
    Zy = model.lambda1 * C + model.lambda2 * Ey
    X = model.phi1 @ Zx @ model.phi2.T
    Y = model.omega1 @ Zy @ model.omega2.T
    return DataTensor(X), DataTensor(Y)


def population_covariances(model: P2dccaModel) -> tuple:
    """Exact ``(Sigma_XX, Sigma_YY, Sigma_XY)`` of the vectorized samples."""
    Px = kronecker(model.phi2, model.phi1)
    Py = kronecker(model.omega2, model.omega1)
    s = model.latent_variance.ravel(order="F")
    t = model.theta.ravel(order="F")
    return (Px * s) @ Px.T, (Py * s) @ Py.T, (Px * t) @ Py.T


def population_mode_covariances(model: P2dccaModel, u_other, v_other, mode: int,
                                ridge: float = 0.0) -> ModeCovariances:
    """Exact mode-wise covariances for fixed factors of the other mode.

    For mode 0 with ``a = Phi2^T u``, ``b = Omg2^T v``::

        Sxx = Phi1 diag(S a^2) Phi1^T,  Sxy = Phi1 diag(Theta (a*b)) Omg1^T,

    with ``S`` the latent variance; mode 1 is the same with the roles of the
    factors swapped and ``S, Theta`` transposed.
    """
    S, T = model.latent_variance, model.theta
    if mode == 0:
        Fx, Gx, Fy, Gy = model.phi1, model.phi2, model.omega1, model.omega2
    elif mode == 1:
        Fx, Gx, Fy, Gy = model.phi2, model.phi1, model.omega2, model.omega1
        S, T = S.T, T.T
    else:
        raise ShapeError(f"mode must be 0 or 1, got {mode}")
    a = Gx.T @ np.asarray(u_other, float)
    b = Gy.T @ np.asarray(v_other, float)
    sxx = (Fx * (S @ a ** 2)) @ Fx.T
    syy = (Fy * (S @ b ** 2)) @ Fy.T
    sxy = (Fx * (T @ (a * b))) @ Fy.T
    return ModeCovariances(sxx, syy, sxy, ridge, mode)


def population_builder(model: P2dccaModel, ridge: float = 0.0) -> CovBuilder:
    return lambda u, v, mode: population_mode_covariances(model, u, v, mode, ridge)


class PopulationOptimum(NamedTuple):
    u: RankOneDirections
    v: RankOneDirections
    rho: float
    u_vec: np.ndarray
    v_vec: np.ndarray


def population_optimum(model: P2dccaModel) -> PopulationOptimum:
    """Leading population canonical pair of the vectorized samples.

    The whitened cross-covariance is formed with pseudo-inverse square roots
    (the covariances live on a ``k^2``-dimensional subspace).  Factors are
    unit vectors; ``u_vec`` has unit population variance and equals
    ``sigma * kron(U_2, U_1)`` exactly when the optimum is rank one.
    """
    for F in (model.phi1, model.phi2, model.omega1, model.omega2):
        if np.linalg.matrix_rank(F) < model.k:
            raise NotPsd("factor matrix is rank deficient")
    sxx, syy, sxy = population_covariances(model)
    sol = cca_from_covariances(sxx, syy, sxy)
    fu, _ = rank1_factors(sol.u, model.dims_x)
    fv, _ = rank1_factors(sol.v, model.dims_y)
    return PopulationOptimum(RankOneDirections(fu), RankOneDirections(fv), sol.rho, sol.u, sol.v)


def error_metric(true: tuple, est: tuple) -> float:
    """``sum_j 1 - (U_j^T Uhat_j)^2`` over all ``U`` and ``V`` factors.

    Factors are unit-normalized first, so the value is invariant to the
    scale and sign of each factor.
    """
    total = 0.0
    for a, b in zip(true, est):
        fa = a.factors if hasattr(a, "factors") else a
        fb = b.factors if hasattr(b, "factors") else b
        if len(fa) != len(fb):
            raise ShapeError("different numbers of factors")
        for x, y in zip(fa, fb):
            x = np.asarray(x, float).ravel()
            y = np.asarray(y, float).ravel()
            c = float(x @ y) / (np.linalg.norm(x) * np.linalg.norm(y))
            total += 1.0 - c * c
    return max(total, 0.0)
