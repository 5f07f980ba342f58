"""Several canonical components: block updates and deflation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .cca import projections
from .errors import IllConditioned, NotPsd, ShapeError
from .hopm import HopmConfig, RankOneDirections, diff_metric, fit_tcca, HopmState
from .linalg import LeastSquaresProblem, ridge_solve
from .tensor import as_array


@dataclass
class BlockDirections:
    """Factor blocks ``U_j`` of shape ``d_j x k_j``."""

    factors: List[np.ndarray]

    def __post_init__(self):
        self.factors = [np.array(F, dtype=np.float64, ndmin=2) for F in self.factors]
        for F in self.factors:
            if F.ndim != 2:
                raise ShapeError("block factors must be matrices")

    @property
    def ranks(self) -> tuple:
        return tuple(F.shape[1] for F in self.factors)

    @property
    def dims(self) -> tuple:
        return tuple(F.shape[0] for F in self.factors)

    def copy(self) -> "BlockDirections":
        return BlockDirections([F.copy() for F in self.factors])

    def rank_one(self) -> RankOneDirections:
        if any(k != 1 for k in self.ranks):
            raise ShapeError("not a rank-one block")
        return RankOneDirections([F[:, 0] for F in self.factors])


@dataclass
class BlockTrace:
    rho: List[float] = field(default_factory=list)
    diff: List[float] = field(default_factory=list)


@dataclass
class BlockResult:
    u: BlockDirections
    v: BlockDirections
    trace: BlockTrace
    converged: bool = False


def _orthonormal_columns(rng: np.random.Generator, d: int, k: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((d, k)))
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def init_block_random(dims_x, dims_y, ranks, seed) -> tuple:
    """Random column-orthonormal blocks; rank one reproduces ``init_random``."""
    ranks = tuple(int(k) for k in ranks)
    rng = np.random.default_rng(seed)
    out = []
    for dims in (dims_x, dims_y):
        if len(dims) != len(ranks):
            raise ShapeError("one rank per mode is required")
        out.append(BlockDirections([_orthonormal_columns(rng, int(d), k)
                                    for d, k in zip(dims, ranks)]))
    return out[0], out[1]


def block_design(X, blocks: Sequence[np.ndarray], skip: int) -> np.ndarray:
    """Stacked design for mode ``skip``.

    Every sample is contracted on the other modes with the transposed blocks
    (``X_t x_i U_i^T``); the result is reshaped so each row pairs one sample
    with one multi-index over the other modes' components.  The shape is
    ``(n * prod_{i != skip} k_i) x d_skip``.
    """
    arr = as_array(X)
    m = arr.ndim - 1
    if len(blocks) != m:
        raise ShapeError(f"{len(blocks)} blocks for {m}-mode samples")
    out = arr
    for i in range(m):
        if i == skip:
            continue
        F = blocks[i]
        if F.shape[0] != arr.shape[i + 1]:
            raise ShapeError(f"block {i} has {F.shape[0]} rows, expected {arr.shape[i + 1]}")
        out = np.moveaxis(np.tensordot(out, F, axes=([i + 1], [0])), -1, i + 1)
    out = np.moveaxis(out, skip + 1, -1)
    return out.reshape(-1, arr.shape[skip + 1])


def whiten(tilde: np.ndarray, A: np.ndarray, n: int) -> np.ndarray:
    """``tilde (tilde^T A^T A tilde / n)^{-1/2}``.

    Raises
    ------
    NotPsd
        The block collapsed (its data-metric Gram matrix is singular).
    """
    S = A @ tilde
    G = S.T @ S / n
    G = 0.5 * (G + G.T)
    w, Q = np.linalg.eigh(G)
    if w[0] <= 1e-14 * max(w[-1], 1e-300):
        raise NotPsd("block collapsed: data-metric Gram matrix is singular")
    return tilde @ ((Q / np.sqrt(w)) @ Q.T)


def block_sweep(X, Y, u: BlockDirections, v: BlockDirections, cfg: HopmConfig) -> tuple:
    Xa, Ya = as_array(X), as_array(Y)
    n = Xa.shape[0]
    U = [F.copy() for F in u.factors]
    V = [F.copy() for F in v.factors]
    for j in range(len(U)):
        Ax = block_design(Xa, U, j)
        Ay = block_design(Ya, V, j)
        if Ax.shape[0] != Ay.shape[0]:
            raise ShapeError("X and Y blocks must share ranks")
        ut, _ = ridge_solve(LeastSquaresProblem(Ax, Ay @ V[j], cfg.ridge_x))
        U[j] = whiten(ut, Ax, n)
        vt, _ = ridge_solve(LeastSquaresProblem(Ay, Ax @ U[j], cfg.ridge_y))
        V[j] = whiten(vt, Ay, n)
    rho = float(np.mean(np.diag((Ax @ U[-1]).T @ (Ay @ V[-1]) / n)))
    return BlockDirections(U), BlockDirections(V), rho


def fit_block_tcca(X, Y, ranks: Sequence[int], cfg: Optional[HopmConfig] = None,
                   init: Optional[tuple] = None) -> BlockResult:
    """Alternating block updates with data-metric whitening.

    For every mode ``j``, ``U_j`` is refit by ridge least squares against the
    ``V`` scores and whitened so that ``U_j^T (X_j^T X_j / n) U_j = I``;
    then the same for ``V_j``.  With all ranks equal to one this coincides
    with :func:`fit_tcca` under data-metric normalization.  The trace
    records the mean diagonal cross-moment of the final block scores.
    """
    cfg = cfg or HopmConfig()
    Xa, Ya = as_array(X), as_array(Y)
    ranks = tuple(int(k) for k in ranks)
    for dims in (Xa.shape[1:], Ya.shape[1:]):
        if len(dims) != len(ranks) or any(k < 1 or k > d for k, d in zip(ranks, dims)):
            raise ShapeError(f"ranks {ranks} incompatible with dims {dims}")
    if init is None:
        init = init_block_random(Xa.shape[1:], Ya.shape[1:], ranks, cfg.seed)
    u, v = (b.copy() if isinstance(b, BlockDirections) else BlockDirections(b) for b in init)
    trace = BlockTrace()
    for _ in range(cfg.max_sweeps):
        nu, nv, rho = block_sweep(Xa, Ya, u, v, cfg)
        d = sum(float(np.linalg.norm(a - b)) for a, b in zip(nu.factors, u.factors))
        d += sum(float(np.linalg.norm(a - b)) for a, b in zip(nv.factors, v.factors))
        u, v = nu, nv
        trace.rho.append(rho)
        trace.diff.append(d)
        if d < cfg.tol:
            return BlockResult(u, v, trace, True)
    return BlockResult(u, v, trace, False)


# ------------------------------------------------------------- deflation

def orthonormal_scores(T: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the score columns (thin QR).

    Raises
    ------
    IllConditioned
        The score columns are (numerically) linearly dependent.
    """
    T = np.asarray(T, float)
    if T.ndim != 2:
        raise ShapeError("scores must be an n x c matrix")
    if T.shape[1] == 0:
        return T
    Q, R = np.linalg.qr(T)
    d = np.abs(np.diag(R))
    if d.min() <= 1e-10 * max(d.max(), 1e-300):
        raise IllConditioned("score columns are linearly dependent")
    return Q


def project_samples(X, Q: np.ndarray) -> np.ndarray:
    """Remove the span of orthonormal ``Q`` along the sample mode: ``(I - Q Q^T) x_1 X``."""
    arr = as_array(X)
    if Q.shape[1] == 0:
        return arr.copy()
    if Q.shape[0] != arr.shape[0]:
        raise ShapeError("score rows must match the sample count")
    flat = arr.reshape(arr.shape[0], -1)
    return (flat - Q @ (Q.T @ flat)).reshape(arr.shape)


@dataclass
class DeflationSet:
    components: List[tuple]
    #: per component, the orthonormalized X / Y scores of the other components
    x_bases: List[np.ndarray]
    y_bases: List[np.ndarray]
    rho: List[float]
    rounds: int
    states: List[HopmState] = field(default_factory=list)

    def x_scores(self, X) -> np.ndarray:
        return np.column_stack([projections(X, u) for u, _ in self.components])

    def y_scores(self, Y) -> np.ndarray:
        return np.column_stack([projections(Y, v) for _, v in self.components])


def sub_seed(master: int, index: int) -> int:
    """Splitmix64 mix of ``(master, index)``; used for per-cell and per-component seeds."""
    mask = (1 << 64) - 1
    z = (int(master) * 0x9E3779B97F4A7C15 + (int(index) + 1) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return (z ^ (z >> 31)) >> 1


def deflate(X, Y, r: int, cfg: Optional[HopmConfig] = None, outer_rounds: int = 3,
            init: Optional[str] = None, round_tol: float = 1e-6) -> DeflationSet:
    """Fit ``r`` rank-one components by cyclic deflation.

    Each round visits ``k = 0..r-1``: the scores of every *other* fitted
    component on the original data are orthonormalized and projected out of
    the samples, then component ``k`` is refit on the projected data (warm
    started from its previous fit).  Rounds stop after ``outer_rounds`` or
    once the summed factor change of a round drops below ``round_tol``.

    Parameters
    ----------
    init : {None, "random", "effective"}
        First-round initialization of each component.  ``None``/"random"
        uses ``cfg.seed`` for component 0 and derived seeds for the others;
        "effective" uses the vectorized-CCA initialization of the projected
        data.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if outer_rounds < 1:
        raise ValueError("outer_rounds must be >= 1")
    cfg = cfg or HopmConfig()
    Xa, Ya = as_array(X), as_array(Y)
    comps: List[Optional[tuple]] = [None] * r
    states: List[Optional[HopmState]] = [None] * r
    xb: List[np.ndarray] = [np.zeros((Xa.shape[0], 0))] * r
    yb: List[np.ndarray] = [np.zeros((Ya.shape[0], 0))] * r
    rounds = 0
    for rnd in range(1 if r == 1 else outer_rounds):
        before = list(comps)
        for k in range(r):
            others = [i for i in range(r) if i != k and comps[i] is not None]
            if others:
                xb[k] = orthonormal_scores(np.column_stack([projections(Xa, comps[i][0]) for i in others]))
                yb[k] = orthonormal_scores(np.column_stack([projections(Ya, comps[i][1]) for i in others]))
                Xk, Yk = project_samples(Xa, xb[k]), project_samples(Ya, yb[k])
            else:
                Xk, Yk = Xa, Ya
            cfg_k = cfg if k == 0 else dataclasses.replace(cfg, seed=sub_seed(cfg.seed, k))
            start = comps[k] if comps[k] is not None else init
            st = fit_tcca(Xk, Yk, start, cfg_k)
            comps[k] = (st.u, st.v)
            states[k] = st
        rounds = rnd + 1
        if rnd > 0:
            change = sum(diff_metric(_Pair(*a), _Pair(*b)) for a, b in zip(before, comps))
            if change < round_tol:
                break
    return DeflationSet(comps, xb, yb, [s.rho for s in states], rounds, states)


@dataclass
class _Pair:
    u: RankOneDirections
    v: RankOneDirections
