"""Small dense linear-algebra services used by the solvers.

Least-squares problems follow the scaled convention

    f(u) = (1/2n) ||A u - b||^2 + (r/2) ||u||^2,

whose minimizer solves ``(A^T A / n + r I) u = A^T b / n``.  ``b`` may be a
matrix, in which case every column is solved at once (block updates).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .errors import Budget, NotPsd, RankDeficient, ShapeError, ZeroInput

#: relative ridge used for the pseudo-inverse limit when r = 0 is singular
PINV_RIDGE = 1e-8


@dataclass(frozen=True)
class LeastSquaresProblem:
    design: np.ndarray
    target: np.ndarray
    ridge: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.design, dtype=np.float64)
        b = np.asarray(self.target, dtype=np.float64)
        if A.ndim != 2:
            raise ShapeError(f"design must be a matrix, got shape {A.shape}")
        if b.shape[:1] != A.shape[:1] or b.ndim > 2:
            raise ShapeError(f"target shape {b.shape} does not match design {A.shape}")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        object.__setattr__(self, "design", A)
        object.__setattr__(self, "target", b)

    @property
    def n(self) -> int:
        return self.design.shape[0]

    def objective(self, u) -> float:
        resid = self.design @ u - self.target
        return float(0.5 * np.vdot(resid, resid) / self.n + 0.5 * self.ridge * np.vdot(u, u))

    def gradient(self, u) -> np.ndarray:
        A = self.design
        return A.T @ (A @ u - self.target) / self.n + self.ridge * u

    def hessian(self) -> np.ndarray:
        A = self.design
        return A.T @ A / self.n + self.ridge * np.eye(A.shape[1])


def _rank_tol(s: np.ndarray, shape) -> float:
    return max(shape) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)


def ridge_solve_exact(p: LeastSquaresProblem) -> np.ndarray:
    """Closed-form minimizer of the ridge least-squares objective.

    Solved through a thin SVD of the design, which stays accurate when the
    ridge is tiny.

    Raises
    ------
    RankDeficient
        ``ridge == 0`` and the design does not have full column rank.
    """
    A, b, n = p.design, p.target, p.n
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if p.ridge == 0.0:
        if A.shape[0] < A.shape[1] or s.size == 0 or s[-1] <= _rank_tol(s, A.shape):
            raise RankDeficient(f"design of shape {A.shape} is rank deficient and ridge is 0")
        return Vt.T @ ((U.T @ b) / (s if b.ndim == 1 else s[:, None]))
    return _svd_ridge(U, s, Vt, b, n * p.ridge, _rank_tol(s, A.shape))


def _svd_ridge(U, s, Vt, b, shift, tol):
    keep = s > tol
    w = np.zeros_like(s)
    w[keep] = s[keep] / (s[keep] ** 2 + shift)
    coef = U.T @ b
    coef = coef * (w if b.ndim == 1 else w[:, None])
    return Vt.T @ coef


def default_ridge(A) -> float:
    """Scale-relative ridge ``1e-8 * trace(A^T A / n) / d`` for the pinv limit.

    Scaling ``A`` by ``c`` scales this ridge by ``c**2``, so solutions stay
    equivariant under rescaling of the design.
    """
    A = np.asarray(A)
    n, d = A.shape
    return PINV_RIDGE * float(np.vdot(A, A)) / (n * d)


def ridge_solve(p: LeastSquaresProblem) -> tuple[np.ndarray, float]:
    """Exact solve; falls back to the pseudo-inverse limit when singular.

    Returns the solution and the ridge actually used.
    """
    try:
        return ridge_solve_exact(p), p.ridge
    except RankDeficient:
        r = default_ridge(p.design)
        if r == 0.0:
            raise
        return ridge_solve_exact(LeastSquaresProblem(p.design, p.target, r)), r


class InexactSolution(NamedTuple):
    x: np.ndarray
    gap: float
    iterations: int


def ridge_solve_inexact(p: LeastSquaresProblem, eps: float, warm=None, *,
                        method: str = "gd", max_iter: int = 200_000,
                        seed: Optional[int] = 0, step_scale: float = 1.0) -> InexactSolution:
    """Return an ``eps``-suboptimal point of the ridge objective.

    The gap ``f(u) - min f`` is certified by strong convexity,
    ``gap <= ||grad f(u)||^2 / (2 sigma_min)`` with
    ``sigma_min = lambda_min(A^T A / n) + r``; the reported ``gap`` is this
    upper bound, and the first iterate whose bound is ``<= eps`` is returned.

    Parameters
    ----------
    p : LeastSquaresProblem
    eps : float
        Target suboptimality, > 0.
    warm : ndarray, optional
        Starting point (zeros if omitted).
    method : {"gd", "svrg"}
        ``"gd"``: gradient descent with the fixed step
        ``step_scale * 2 / (sigma_min + sigma_max)``.  Its iterates are
        evaluated in closed form in the eigenbasis of the Hessian, so the
        cost does not grow with the iteration count.  ``"svrg"``: stochastic
        variance reduced gradient, one pass over the rows per epoch,
        certified with a full gradient at every epoch boundary.
    max_iter : int
        Iteration budget (GD steps, or SVRG epochs times ``n``).
    step_scale : float
        Multiplier in ``(0, 1]`` on the GD step.  Smaller steps make the
        returned gap track ``eps`` more closely.

    Raises
    ------
    RankDeficient
        The objective is not strongly convex, so no gap can be certified.
    Budget
        The budget ran out; carries the best iterate and its certified gap.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if not 0 < step_scale <= 1:
        raise ValueError("step_scale must lie in (0, 1]")
    A, b, n, r = p.design, p.target, p.n, p.ridge
    d = A.shape[1]
    H = A.T @ A / n
    H[np.diag_indices(d)] += r
    H = 0.5 * (H + H.T)
    c = A.T @ b / n
    evals, Q = np.linalg.eigh(H)
    smin, smax = float(evals[0]), float(evals[-1])
    if smin <= 1e-14 * max(smax, 1e-300):
        raise RankDeficient("objective is not strongly convex: no gap certificate")

    x = np.zeros_like(c) if warm is None else np.array(warm, dtype=np.float64)
    if x.shape != c.shape:
        raise ShapeError(f"warm start shape {x.shape} != {c.shape}")

    def certificate(z):
        g = H @ z - c
        return g, float(np.vdot(g, g)) / (2.0 * smin)

    g, gap = certificate(x)
    if gap <= eps:
        return InexactSolution(x, gap, 0)

    if method == "gd":
        step = step_scale * 2.0 / (smin + smax)
        # x_t - x* = Q diag(q^t) Q^T (x_0 - x*),  q = 1 - step * evals
        xstar = Q @ ((Q.T @ c) / (evals if c.ndim == 1 else evals[:, None]))
        z0 = Q.T @ (x - xstar)
        q = 1.0 - step * evals
        w2 = (evals ** 2) * (z0 ** 2 if z0.ndim == 1 else np.sum(z0 ** 2, axis=1))

        def bound(t):
            return float(np.sum(w2 * q ** (2 * t))) / (2.0 * smin)

        if bound(max_iter) > eps:
            t = max_iter
            xt = xstar + Q @ ((q ** t) * z0 if z0.ndim == 1 else (q ** t)[:, None] * z0)
            raise Budget(f"gradient descent did not reach gap {eps:g} in {max_iter} steps",
                         xt, certificate(xt)[1])
        lo, hi = 0, 1
        while bound(hi) > eps:
            lo, hi = hi, min(2 * hi, max_iter)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if bound(mid) > eps:
                lo = mid
            else:
                hi = mid
        qt = q ** hi
        xt = xstar + Q @ (qt * z0 if z0.ndim == 1 else qt[:, None] * z0)
        return InexactSolution(xt, certificate(xt)[1], hi)

    if method == "svrg":
        rng = np.random.default_rng(seed)
        row_l = np.einsum("ij,ij->i", A, A) + r
        step = step_scale / (4.0 * float(row_l.max()))
        best, best_gap = x, gap
        it = 0
        while it < max_iter:
            snap, mu = x.copy(), g
            for i in rng.integers(0, n, size=n):
                a = A[i]
                diff = np.multiply.outer(a, a @ (x - snap)) if x.ndim == 2 else a * (a @ (x - snap))
                x = x - step * (diff + r * (x - snap) + mu)
            it += n
            g, gap = certificate(x)
            if gap < best_gap:
                best, best_gap = x, gap
            if gap <= eps:
                return InexactSolution(x, gap, it)
        raise Budget(f"SVRG did not reach gap {eps:g} in {max_iter} inner steps", best, best_gap)

    raise ValueError(f"unknown inexact method {method!r}")


def _sign_fix(u: np.ndarray, v: np.ndarray):
    nz = np.flatnonzero(np.abs(u) > 1e-14 * np.abs(u).max())
    if nz.size and u[nz[0]] < 0:
        return -u, -v
    return u, v


def best_rank1(M) -> tuple[float, np.ndarray, np.ndarray]:
    """Top singular triple ``(sigma_1, u, v)`` of ``M``.

    The sign is fixed so that the first nonzero entry of ``u`` is positive.

    Raises
    ------
    ZeroInput
        ``M`` is the zero matrix.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise ShapeError("best_rank1 expects a matrix")
    if not np.any(M):
        raise ZeroInput("best rank-1 approximation of a zero matrix")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    u, v = _sign_fix(U[:, 0], Vt[0])
    return float(s[0]), u, v


def spd_inv_sqrt(S, floor: float = 0.0) -> np.ndarray:
    """Symmetric inverse square root of ``S + floor * I``.

    Eigenvalues that vanish to working precision are treated as zero and
    left out, so for singular ``S`` the result is the pseudo-inverse square
    root on the range.

    Raises
    ------
    NotPsd
        An eigenvalue of ``S`` lies below ``-1e-10`` (relative to its scale).
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ShapeError(f"expected a square matrix, got {S.shape}")
    if floor < 0:
        raise ValueError("floor must be >= 0")
    Ssym = 0.5 * (S + S.T)
    w, Q = np.linalg.eigh(Ssym)
    scale = max(1.0, float(np.abs(w).max()) if w.size else 1.0)
    if w.size and w[0] < -1e-10 * scale:
        raise NotPsd(f"smallest eigenvalue {w[0]:.3e} is negative")
    w = np.clip(w, 0.0, None) + floor
    tol = S.shape[0] * np.finfo(np.float64).eps * (w.max() if w.size else 0.0)
    inv = np.zeros_like(w)
    keep = w > tol
    inv[keep] = 1.0 / np.sqrt(w[keep])
    return (Q * inv) @ Q.T
