"""Starting points for the tensor CCA solvers."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .cca import cca_1d, flatten_samples
from .hopm import RankOneDirections
from .linalg import best_rank1
from .tensor import as_array


def init_random(dims_x: Sequence[int], dims_y: Sequence[int], seed) -> tuple:
    """Standard-normal factors, unit-normalized; ``X`` factors are drawn first."""
    rng = np.random.default_rng(seed)
    out = []
    for dims in (dims_x, dims_y):
        fs = []
        for d in dims:
            f = rng.standard_normal(int(d))
            fs.append(f / np.linalg.norm(f))
        out.append(RankOneDirections(fs))
    return out[0], out[1]


def rank1_factors(c: np.ndarray, dims: Sequence[int]) -> tuple:
    """Approximate a vectorized direction by ``sigma * vec(U_1 o ... o U_m)``.

    The vector is reshaped (first index fastest) into ``d_1 x (d_2...d_m)``;
    the left singular vector gives ``U_1`` and the right one is peeled
    recursively.  For ``m = 2`` this is the best rank-one approximation; for
    ``m > 2`` it is a sequential heuristic.

    Returns
    -------
    factors : list of unit vectors
    sigma : float
    """
    dims = tuple(int(d) for d in dims)
    c = np.asarray(c, dtype=np.float64).ravel()
    if len(dims) == 1:
        s = float(np.linalg.norm(c))
        return [c / s], s
    factors, sigma = [], 1.0
    rest = c
    for j in range(len(dims) - 1):
        M = rest.reshape(dims[j], -1, order="F")
        s, u, v = best_rank1(M)
        factors.append(u)
        sigma *= s
        rest = v
    factors.append(rest / np.linalg.norm(rest))
    return factors, sigma


def default_effective_ridge(A: np.ndarray) -> float:
    """``1e-6 * trace(A^T A / n) / D``."""
    n, D = A.shape
    return 1e-6 * float(np.vdot(A, A)) / (n * D)


def init_effective(X, Y, ridge: Optional[float] = None) -> tuple:
    """Rank-one factors of the vectorized CCA solution.

    Classical CCA (uncentered, matching the tensor objective) is solved on
    ``vec(X_t), vec(Y_t)``; each direction is reshaped to the sample shape
    and replaced by its leading rank-one factors.

    Parameters
    ----------
    ridge : float, optional
        Ridge for the vectorized covariances.  Defaults to
        ``1e-6 * trace / D`` separately for each side, since those
        covariances are singular whenever ``n < prod(dims)``.
    """
    Xa, Ya = as_array(X), as_array(Y)
    if ridge is None:
        ridge = (default_effective_ridge(flatten_samples(Xa)),
                 default_effective_ridge(flatten_samples(Ya)))
    sol = cca_1d(Xa, Ya, ridge=ridge, center=False)
    fx, _ = rank1_factors(sol.u, Xa.shape[1:])
    fy, _ = rank1_factors(sol.v, Ya.shape[1:])
    return RankOneDirections(fx), RankOneDirections(fy)
