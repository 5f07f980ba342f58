"""Higher-order power method for tensor CCA.

One sweep visits modes ``j = 0..m-1``; for each mode the ``U`` factor is
refit by (ridge) least squares against the current ``V`` scores, then the
``V`` factor against the fresh ``U`` scores.  Contractions use the factors
already updated in this sweep for modes ``< j`` and last sweep's factors
for modes ``> j``.

Two normalizations are supported:

``metric`` (HOPM)
    the refit factor is scaled so its scores have unit empirical second
    moment;
``sphere`` (sHOPM)
    the refit factor is scaled to unit Euclidean norm.

Started from the same point, both produce the same correlation after every
half-update, and their factors differ only by positive scalings.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .cca import correlation_of_scores, flatten_samples, projections
from .errors import DegenerateProjection, ShapeError
from .linalg import LeastSquaresProblem, ridge_solve, ridge_solve_inexact
from .tensor import as_array, outer_product

#: a pre-normalization factor below this norm aborts the run
DEGENERATE_NORM = 1e-14


class Normalization(str, enum.Enum):
    METRIC = "metric"
    SPHERE = "sphere"


class Inner(str, enum.Enum):
    EXACT = "exact"
    INEXACT = "inexact"


@dataclass
class RankOneDirections:
    """Rank-one direction ``scale * (U_1 o ... o U_m)``."""

    factors: List[np.ndarray]
    scale: float = 1.0

    def __post_init__(self):
        self.factors = [np.array(f, dtype=np.float64).ravel() for f in self.factors]

    @property
    def dims(self) -> tuple:
        return tuple(f.size for f in self.factors)

    def copy(self) -> "RankOneDirections":
        return RankOneDirections([f.copy() for f in self.factors], self.scale)

    def unit(self) -> "RankOneDirections":
        """Factors rescaled to unit norm (scale reset to 1)."""
        return RankOneDirections([f / np.linalg.norm(f) for f in self.factors])

    def full(self) -> np.ndarray:
        return self.scale * outer_product(*self.factors).data


@dataclass
class HopmConfig:
    """Solver options.

    ``ridge_x``/``ridge_y`` are ridges on the *scaled* least-squares
    objective ``(1/2n)||A u - b||^2 + (r/2)||u||^2``.  With ridge 0 a
    rank-deficient system is solved in the pseudo-inverse limit.
    """

    ridge_x: float = 0.0
    ridge_y: float = 0.0
    inner_eps: float = 1e-6
    normalization: Normalization = Normalization.METRIC
    inner: Inner = Inner.EXACT
    max_sweeps: int = 500
    tol: float = 1e-8
    seed: int = 0
    inner_method: str = "gd"
    inner_max_iter: int = 200_000
    inner_step: float = 1.0

    def __post_init__(self):
        self.normalization = Normalization(self.normalization)
        self.inner = Inner(self.inner)
        if self.tol <= 0:
            raise ValueError("tol must be > 0")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.ridge_x < 0 or self.ridge_y < 0:
            raise ValueError("ridges must be >= 0")
        if self.inner is Inner.INEXACT and self.inner_eps <= 0:
            raise ValueError("inner_eps must be > 0")


@dataclass
class ConvergenceTrace:
    rho: List[float] = field(default_factory=list)
    diff: List[float] = field(default_factory=list)
    inner_gaps: List[float] = field(default_factory=list)
    #: correlation after every half-update, ``2m`` entries per sweep
    half_rho: List[List[float]] = field(default_factory=list)

    def copy(self) -> "ConvergenceTrace":
        return ConvergenceTrace(list(self.rho), list(self.diff), list(self.inner_gaps),
                                [list(h) for h in self.half_rho])


@dataclass
class HopmState:
    u: RankOneDirections
    v: RankOneDirections
    lambda_: float = float("nan")
    mu: float = float("nan")
    trace: ConvergenceTrace = field(default_factory=ConvergenceTrace)
    rho0: float = float("nan")
    converged: bool = False
    sign_flipped: bool = False
    warm_u: Optional[List[np.ndarray]] = None
    warm_v: Optional[List[np.ndarray]] = None

    @property
    def sweeps(self) -> int:
        return len(self.trace.rho)

    @property
    def rho(self) -> float:
        return self.trace.rho[-1] if self.trace.rho else self.rho0


@dataclass
class AssumptionReport:
    sigma_lx: float
    sigma_ux: float
    sigma_ly: float
    sigma_uy: float
    rho0: float
    sign_flipped: bool = False
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


# --------------------------------------------------------------- kernels

def partial_contraction(X, dirs, skip: int) -> np.ndarray:
    """Contract every sample with all factors except mode ``skip``.

    Returns the ``n x d_skip`` design matrix ``X_j`` with
    ``X_j @ U_j == <U, X_t>`` row by row.
    """
    arr = as_array(X)
    factors = dirs.factors if hasattr(dirs, "factors") else dirs
    m = arr.ndim - 1
    if len(factors) != m:
        raise ShapeError(f"{len(factors)} factors for {m}-mode samples")
    if not 0 <= skip < m:
        raise ShapeError(f"mode {skip} out of range for {m}-mode samples")
    out = arr
    for k in range(m - 1, -1, -1):
        if k == skip:
            continue
        f = factors[k]
        if f.shape != (arr.shape[k + 1],):
            raise ShapeError(f"factor {k} has shape {f.shape}, expected ({arr.shape[k + 1]},)")
        out = np.tensordot(out, f, axes=([k + 1], [0]))
    return out


def _normalize(tilde: np.ndarray, A: np.ndarray, how: Normalization, what: str) -> np.ndarray:
    norm = float(np.linalg.norm(tilde))
    if norm < DEGENERATE_NORM:
        raise DegenerateProjection(f"{what} collapsed (norm {norm:.2e})")
    if how is Normalization.SPHERE:
        return tilde / norm
    scores = A @ tilde
    metric = float(np.sqrt(np.mean(scores ** 2)))
    if metric < DEGENERATE_NORM:
        raise DegenerateProjection(f"{what} has zero data-metric norm")
    return tilde / metric


def _solve(A, b, ridge, cfg: HopmConfig, warm, seed) -> tuple:
    p = LeastSquaresProblem(A, b, ridge)
    if cfg.inner is Inner.EXACT:
        x, _ = ridge_solve(p)
        return x, 0.0
    res = ridge_solve_inexact(p, cfg.inner_eps, warm, method=cfg.inner_method,
                              max_iter=cfg.inner_max_iter, seed=seed,
                              step_scale=cfg.inner_step)
    return res.x, res.gap


def _warm(previous, current):
    # first sweep: no earlier solution, start from the incoming factor
    return current if previous is None else previous


def _inv_rms(s: np.ndarray) -> float:
    return 1.0 / float(np.sqrt(np.mean(s ** 2)))


def hopm_sweep(state: HopmState, X, Y, cfg: HopmConfig,
               on_update: Optional[Callable] = None) -> HopmState:
    """One full sweep over all modes; returns a new state.

    ``on_update(j, side, factors, design)`` is called after every
    half-update with ``side`` in ``{"u", "v"}``, the (copied) factor list of
    that side and the design matrix used.
    """
    Xa, Ya = as_array(X), as_array(Y)
    m = Xa.ndim - 1
    U = [f.copy() for f in state.u.factors]
    V = [f.copy() for f in state.v.factors]
    warm_u = list(state.warm_u) if state.warm_u is not None else [None] * m
    warm_v = list(state.warm_v) if state.warm_v is not None else [None] * m
    k = state.sweeps
    halves, gaps = [], []
    alpha, beta = state.u.scale, state.v.scale
    lam, mu = state.lambda_, state.mu

    for j in range(m):
        Xj = partial_contraction(Xa, U, j)
        Yj = partial_contraction(Ya, V, j)
        if not np.any(Xj) or not np.any(Yj):
            raise DegenerateProjection(f"contracted design for mode {j} is all zero")

        ys_old = Yj @ V[j]
        ut, gap_u = _solve(Xj, ys_old, cfg.ridge_x, cfg, _warm(warm_u[j], U[j]), cfg.seed + 2 * (k * m + j))
        U[j] = _normalize(ut, Xj, cfg.normalization, f"U factor {j}")
        warm_u[j] = ut
        xs = Xj @ U[j]
        alpha = _inv_rms(xs)
        rho_a = alpha * _inv_rms(ys_old) * float(np.mean(xs * ys_old))
        lam = 0.5 * (1.0 - rho_a)
        if on_update is not None:
            on_update(j, "u", [f.copy() for f in U], Xj)

        vt, gap_v = _solve(Yj, xs, cfg.ridge_y, cfg, _warm(warm_v[j], V[j]), cfg.seed + 2 * (k * m + j) + 1)
        V[j] = _normalize(vt, Yj, cfg.normalization, f"V factor {j}")
        warm_v[j] = vt
        ys = Yj @ V[j]
        beta = _inv_rms(ys)
        rho_b = alpha * beta * float(np.mean(xs * ys))
        mu = 0.5 * (1.0 - rho_b)
        if on_update is not None:
            on_update(j, "v", [f.copy() for f in V], Yj)

        halves.extend([rho_a, rho_b])
        gaps.extend([gap_u, gap_v])

    diff = sum(float(np.linalg.norm(a - b)) for a, b in zip(U, state.u.factors))
    diff += sum(float(np.linalg.norm(a - b)) for a, b in zip(V, state.v.factors))
    trace = state.trace.copy()
    trace.rho.append(halves[-1])
    trace.diff.append(diff)
    trace.inner_gaps.append(max(gaps))
    trace.half_rho.append(halves)
    return HopmState(RankOneDirections(U, alpha), RankOneDirections(V, beta), lam, mu, trace,
                     rho0=state.rho0, converged=False, sign_flipped=state.sign_flipped,
                     warm_u=warm_u, warm_v=warm_v)


def diff_metric(prev, cur) -> float:
    """Sum of Euclidean distances between corresponding factor vectors."""
    total = 0.0
    for a, b in ((prev.u, cur.u), (prev.v, cur.v)):
        if a.dims != b.dims:
            raise ShapeError("factor shapes differ")
        total += sum(float(np.linalg.norm(x - y)) for x, y in zip(a.factors, b.factors))
    return total


def _coerce_init(init) -> tuple:
    u, v = init
    if not isinstance(u, RankOneDirections):
        u = RankOneDirections(list(u))
    if not isinstance(v, RankOneDirections):
        v = RankOneDirections(list(v))
    return u.copy(), v.copy()


def initial_state(X, Y, init, normalization=Normalization.SPHERE) -> HopmState:
    """State at sweep 0, with the sign of ``V`` fixed so that ``rho_0 > 0``.

    Under data-metric normalization the first factor of each side is
    rescaled so the initial scores have unit second moment; this leaves
    every correlation unchanged but puts the first least-squares targets
    on the same scale as later ones.
    """
    u, v = _coerce_init(init)
    xs, ys = projections(X, u), projections(Y, v)
    rho0 = correlation_of_scores(xs, ys)
    flipped = False
    if rho0 < 0:
        v.factors[0] = -v.factors[0]
        rho0, flipped = -rho0, True
    if Normalization(normalization) is Normalization.METRIC:
        u.factors[0] = u.factors[0] * _inv_rms(xs)
        v.factors[0] = v.factors[0] * _inv_rms(ys)
    return HopmState(u, v, 0.5 * (1.0 - rho0), 0.5 * (1.0 - rho0), rho0=rho0,
                     sign_flipped=flipped)


def fit_tcca(X, Y, init=None, cfg: Optional[HopmConfig] = None,
             on_sweep: Optional[Callable[[HopmState], None]] = None) -> HopmState:
    """Run sweeps until ``diff < cfg.tol`` or ``cfg.max_sweeps``.

    Parameters
    ----------
    X, Y : DataTensor or array
        Sample-stacked data, samples along mode 0.
    init : pair of RankOneDirections (or factor lists), "random",
        "effective" or None
        Starting directions.  ``None``/``"random"`` draws them from
        ``cfg.seed``.
    cfg : HopmConfig

    Returns
    -------
    HopmState
        ``converged`` is False when the sweep budget ran out.
    """
    cfg = cfg or HopmConfig()
    Xa, Ya = as_array(X), as_array(Y)
    if Xa.shape[0] != Ya.shape[0]:
        raise ShapeError(f"sample counts differ: {Xa.shape[0]} vs {Ya.shape[0]}")
    if Xa.ndim != Ya.ndim:
        raise ShapeError("X and Y need the same number of modes")
    if init is None or (isinstance(init, str) and init == "random"):
        from .init import init_random
        init = init_random(Xa.shape[1:], Ya.shape[1:], cfg.seed)
    elif isinstance(init, str) and init == "effective":
        from .init import init_effective
        init = init_effective(Xa, Ya)
    elif isinstance(init, str):
        raise ValueError(f"unknown initialization {init!r}")
    state = initial_state(Xa, Ya, init, cfg.normalization)
    for _ in range(cfg.max_sweeps):
        state = hopm_sweep(state, Xa, Ya, cfg)
        if on_sweep is not None:
            on_sweep(state)
        if state.trace.diff[-1] < cfg.tol:
            state.converged = True
            break
    return state


def _extreme_second_moments(A: np.ndarray) -> tuple:
    n, D = A.shape
    s = np.linalg.svd(A, compute_uv=False)
    upper = float(s[0] ** 2 / n)
    lower = float(s[-1] ** 2 / n) if n >= D else 0.0
    return lower, upper


def check_assumptions(X, Y, init=None) -> AssumptionReport:
    """Report the conditioning and initial-correlation conditions.

    Extreme eigenvalues are those of ``(1/n) sum_t vec(X_t) vec(X_t)^T``
    (and the ``Y`` analogue).  Violations are listed, never raised.
    """
    lx, ux = _extreme_second_moments(flatten_samples(X))
    ly, uy = _extreme_second_moments(flatten_samples(Y))
    notes = []
    for side, lo, hi in (("X", lx, ux), ("Y", ly, uy)):
        if lo <= 1e-12 * max(hi, 1.0):
            notes.append(f"sigma_l,{side.lower()} = {lo:.3e}: {side} second-moment matrix is "
                         f"singular; use ridge > 0")
    rho0, flipped = float("nan"), False
    if init is not None:
        u, v = _coerce_init(init)
        rho0 = correlation_of_scores(projections(X, u), projections(Y, v))
        if rho0 <= 0:
            flipped = rho0 < 0
            notes.append(f"rho_0 = {rho0:.4f} <= 0" + ("; sign flip applied" if flipped else ""))
    return AssumptionReport(lx, ux, ly, uy, rho0, flipped, notes)
