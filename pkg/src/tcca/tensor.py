"""Dense multilinear algebra kernel.

Storage convention
------------------
Tensors are held as ``numpy`` arrays whose *linearization* is first-index
fastest (Fortran / column-major order).  With this convention

    vec(U1 o U2 o ... o Um) == kron(Um, ..., U1)

holds literally, and the mode-``a`` matricization puts element
``(i_1, ..., i_m)`` in column ``sum_{k != a} i_k * J_k`` with
``J_k = prod_{q < k, q != a} d_q`` (zero-based).  Modes are zero-based
throughout the package.

The binary file format is::

    b"TCCA" | u32 version=1 | u32 m | m x u64 dims | prod(dims) x f64

all little-endian, values in the linearization above.
"""

from __future__ import annotations

import functools
import os
import struct
import tempfile
from typing import Sequence

import numpy as np

from .errors import ShapeError

MAGIC = b"TCCA"
FORMAT_VERSION = 1


class DenseTensor:
    """An ``m``-mode real tensor with explicit extents.

    Parameters
    ----------
    data : array_like
        Array of shape ``(d_1, ..., d_m)``; copied to float64.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim == 0:
            raise ShapeError("a tensor needs at least one mode")
        if min(arr.shape) < 1:
            raise ShapeError(f"all extents must be >= 1, got {arr.shape}")
        self.data = arr

    @classmethod
    def from_flat(cls, flat, dims: Sequence[int]) -> "DenseTensor":
        return unvectorize(flat, dims)

    @classmethod
    def zeros(cls, dims: Sequence[int]) -> "DenseTensor":
        return cls(np.zeros(tuple(dims)))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def order(self) -> int:
        return self.data.ndim

    @property
    def flat(self) -> np.ndarray:
        """Values in the documented (first index fastest) linearization."""
        return vectorize(self)

    def __eq__(self, other):
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.dims == other.dims and bool(np.array_equal(self.data, other.data))

    def __repr__(self):
        return f"DenseTensor(dims={self.dims})"


class DataTensor:
    """Sample-stacked tensor: mode 0 indexes the ``n`` samples.

    ``data[t]`` is the ``t``-th sample, a tensor of extents ``dims``.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim < 2:
            raise ShapeError("a data tensor needs a sample mode and >= 1 data mode")
        if min(arr.shape) < 1:
            raise ShapeError(f"all extents must be >= 1, got {arr.shape}")
        self.data = arr

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape[1:]

    @property
    def body(self) -> DenseTensor:
        return DenseTensor(self.data)

    def sample(self, t: int) -> DenseTensor:
        return DenseTensor(self.data[t])

    def vectorized(self) -> np.ndarray:
        """``(n, prod(dims))`` matrix whose row ``t`` is ``vec(X_t)``."""
        return self.data.reshape(self.n, -1, order="F")

    def __repr__(self):
        return f"DataTensor(n={self.n}, dims={self.dims})"


def as_array(x) -> np.ndarray:
    """Return the raw float64 array behind a tensor-like argument."""
    if isinstance(x, (DenseTensor, DataTensor)):
        return x.data
    return np.asarray(x, dtype=np.float64)


def _check_mode(a: int, m: int) -> None:
    if not 0 <= a < m:
        raise ShapeError(f"mode {a} out of range for a {m}-mode tensor")


def matricize(X, a: int) -> np.ndarray:
    """Mode-``a`` unfolding: a ``d_a x prod_{k != a} d_k`` matrix.

    The mode-``a`` fibers become columns; remaining indices enumerate the
    columns first-index fastest.

    Examples
    --------
    >>> X = unvectorize(np.arange(1, 9), (2, 2, 2))
    >>> matricize(X, 0)
    array([[1., 3., 5., 7.],
           [2., 4., 6., 8.]])
    """
    arr = as_array(X)
    _check_mode(a, arr.ndim)
    return np.moveaxis(arr, a, 0).reshape(arr.shape[a], -1, order="F")


def fold(M, a: int, dims: Sequence[int]) -> DenseTensor:
    """Inverse of :func:`matricize`."""
    dims = tuple(int(d) for d in dims)
    _check_mode(a, len(dims))
    M = np.asarray(M, dtype=np.float64)
    rest = dims[:a] + dims[a + 1:]
    if M.shape != (dims[a], int(np.prod(rest))):
        raise ShapeError(f"matrix of shape {M.shape} cannot fold to {dims} on mode {a}")
    arr = M.reshape((dims[a],) + rest, order="F")
    return DenseTensor(np.moveaxis(arr, 0, a))


def mode_product(X, a: int, A) -> DenseTensor:
    """Mode-``a`` product ``X x_a A`` with ``A`` of shape ``p x d_a``."""
    arr = as_array(X)
    _check_mode(a, arr.ndim)
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] != arr.shape[a]:
        raise ShapeError(
            f"matrix with shape {A.shape} cannot multiply mode {a} of extent {arr.shape[a]}")
    return DenseTensor(np.moveaxis(np.tensordot(A, arr, axes=(1, a)), 0, a))


def vectorize(X) -> np.ndarray:
    return as_array(X).reshape(-1, order="F")


def unvectorize(v, dims: Sequence[int]) -> DenseTensor:
    v = np.asarray(v, dtype=np.float64)
    dims = tuple(int(d) for d in dims)
    if v.ndim != 1 or v.size != int(np.prod(dims)):
        raise ShapeError(f"vector of length {v.size} does not match dims {dims}")
    return DenseTensor(v.reshape(dims, order="F"))


def outer_product(*vectors) -> DenseTensor:
    """``U_1 o U_2 o ... o U_m``."""
    if not vectors:
        raise ShapeError("outer product needs at least one vector")
    vecs = [np.asarray(u, dtype=np.float64).ravel() for u in vectors]
    if any(u.size == 0 for u in vecs):
        raise ShapeError("outer product of an empty vector")
    return DenseTensor(functools.reduce(np.multiply.outer, vecs))


def kronecker(*mats) -> np.ndarray:
    """Kronecker product ``A_1 (x) A_2 (x) ...`` of matrices or vectors."""
    if not mats:
        raise ShapeError("kronecker needs at least one operand")
    return functools.reduce(np.kron, [np.asarray(A, dtype=np.float64) for A in mats])


def inner_product(X, Y) -> float:
    a, b = as_array(X), as_array(Y)
    if a.shape != b.shape:
        raise ShapeError(f"inner product of shapes {a.shape} and {b.shape}")
    return float(np.vdot(a, b))


def frobenius_norm(X) -> float:
    return float(np.linalg.norm(as_array(X).ravel()))


# ---------------------------------------------------------------- file I/O

def _atomic_write(path, payload: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_tensor(X) -> bytes:
    arr = as_array(X)
    header = MAGIC + struct.pack("<II", FORMAT_VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return header + arr.reshape(-1, order="F").astype("<f8").tobytes()


def decode_tensor(payload: bytes) -> np.ndarray:
    if len(payload) < 12 or payload[:4] != MAGIC:
        raise ValueError("not a TCCA tensor file (bad magic)")
    version, m = struct.unpack_from("<II", payload, 4)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported tensor format version {version}")
    if m < 1:
        raise ValueError("tensor file declares zero modes")
    offset = 12 + 8 * m
    if len(payload) < offset:
        raise ValueError("truncated tensor header")
    dims = struct.unpack_from(f"<{m}Q", payload, 12)
    count = int(np.prod(dims))
    if len(payload) != offset + 8 * count:
        raise ValueError(
            f"tensor payload holds {(len(payload) - offset) // 8} values, dims {dims} need {count}")
    flat = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
    return flat.astype(np.float64).reshape(dims, order="F")


def write_tensor(path, X) -> None:
    """Write ``X`` in the binary format (atomically)."""
    _atomic_write(path, encode_tensor(X))


def read_tensor(path) -> np.ndarray:
    """Read a binary tensor file, or a CSV file holding a 2-mode tensor.

    CSV rows index the first mode.
    """
    path = os.fspath(path)
    if path.lower().endswith(".csv"):
        arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
        return arr
    with open(path, "rb") as fh:
        return decode_tensor(fh.read())


def write_csv_matrix(path, M) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    lines = [",".join(repr(float(x)) for x in row) for row in M]
    _atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))
