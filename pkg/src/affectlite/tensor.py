"""Dense tensor substrate and seeded randomness.

Every value the engine computes flows through :class:`Tensor`: a
shape-frozen, row-major (C-order) array of f32 or f64 reals backed by
numpy. The wrapper is deliberately thin -- layers unwrap to ndarrays for
arithmetic and re-wrap the results -- but it pins down the storage
contract: f32 by default (f64 exists only for finite-difference gradient
checking), immutable buffers, flat data laid out row-major.

Randomness comes from :class:`Rng`, a Philox 4x64 counter-based generator.
The algorithm is fixed by name rather than left to the platform default so
that a seed produces the same stream on every machine.
"""

from __future__ import annotations

import functools

import numpy as np

_DTYPES = {"f32": np.float32, "f64": np.float64}
_DTYPE_NAMES = {np.dtype(np.float32): "f32", np.dtype(np.float64): "f64"}


class TensorError(ValueError):
    """Invalid shape, mismatched data length, or unsupported dtype."""


def _np_dtype(name):
    try:
        return _DTYPES[name]
    except KeyError:
        raise TensorError(f"unknown dtype {name!r}; expected 'f32' or 'f64'") from None


def _check_shape(shape):
    dims = tuple(int(d) for d in shape)
    if len(dims) == 0:
        raise TensorError("shape must be nonempty")
    for d in dims:
        if d < 1:
            raise TensorError(f"all dimensions must be >= 1, got {dims}")
    return dims


class Tensor:
    """N-dimensional real array, row-major, with an immutable buffer."""

    __slots__ = ("_array",)

    def __init__(self, values, dtype: str = "f32"):
        arr = np.array(values, dtype=_np_dtype(dtype), order="C")
        if arr.ndim == 0:
            raise TensorError("rank-0 tensors are not supported; use shape (1,)")
        if not np.all(np.isfinite(arr)):
            raise TensorError("tensor values must be finite")
        arr.flags.writeable = False
        self._array = arr

    @classmethod
    def wrap(cls, arr: np.ndarray) -> "Tensor":
        """Adopt an ndarray without copying or re-validating.

        The caller gives up ownership: the buffer is frozen in place.
        """
        if arr.dtype not in _DTYPE_NAMES:
            arr = arr.astype(np.float32)
        out = object.__new__(cls)
        a = np.ascontiguousarray(arr)
        a.flags.writeable = False
        out._array = a
        return out

    @property
    def array(self) -> np.ndarray:
        """The read-only backing ndarray."""
        return self._array

    @property
    def shape(self) -> tuple:
        return self._array.shape

    @property
    def dtype(self) -> str:
        return _DTYPE_NAMES[self._array.dtype]

    @property
    def size(self) -> int:
        return self._array.size

    @property
    def data(self) -> np.ndarray:
        """Flat row-major view of the values."""
        return self._array.reshape(-1)

    def astype(self, dtype: str) -> "Tensor":
        return Tensor.wrap(self._array.astype(_np_dtype(dtype)))

    def tolist(self):
        return self._array.tolist()

    def __len__(self):
        return self._array.shape[0]

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype})"


def as_array(t) -> np.ndarray:
    """Accept a Tensor or array-like and return the underlying ndarray."""
    if isinstance(t, Tensor):
        return t.array
    return np.asarray(t)


def zeros(shape, dtype: str = "f32") -> Tensor:
    return Tensor.wrap(np.zeros(_check_shape(shape), dtype=_np_dtype(dtype)))


def fill(shape, value, dtype: str = "f32") -> Tensor:
    if not np.isfinite(value):
        raise TensorError("fill value must be finite")
    return Tensor.wrap(np.full(_check_shape(shape), value, dtype=_np_dtype(dtype)))


def from_data(shape, values, dtype: str = "f32") -> Tensor:
    dims = _check_shape(shape)
    flat = np.asarray(values, dtype=_np_dtype(dtype)).reshape(-1)
    expected = int(np.prod(dims))
    if flat.size != expected:
        raise TensorError(
            f"data length {flat.size} does not match shape {dims} (needs {expected})"
        )
    if not np.all(np.isfinite(flat)):
        raise TensorError("tensor values must be finite")
    return Tensor.wrap(flat.reshape(dims))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Standard rank-2 matrix product."""
    av, bv = as_array(a), as_array(b)
    if av.ndim != 2 or bv.ndim != 2:
        raise TensorError(f"matmul needs rank-2 operands, got ranks {av.ndim} and {bv.ndim}")
    if av.shape[1] != bv.shape[0]:
        raise TensorError(f"inner dimensions disagree: {av.shape} x {bv.shape}")
    return Tensor.wrap(av @ bv)


def tmap(fn, t: Tensor) -> Tensor:
    """Apply a scalar function elementwise."""
    arr = as_array(t)
    out = np.frompyfunc(fn, 1, 1)(arr).astype(arr.dtype)
    return Tensor.wrap(out)


def tzip(fn, a: Tensor, b: Tensor) -> Tensor:
    """Combine two equally shaped tensors elementwise."""
    av, bv = as_array(a), as_array(b)
    if av.shape != bv.shape:
        raise TensorError(f"zip requires equal shapes, got {av.shape} and {bv.shape}")
    out = np.frompyfunc(fn, 2, 1)(av, bv).astype(av.dtype)
    return Tensor.wrap(out)


def treduce(fn, t: Tensor, axis: int) -> Tensor:
    """Fold a binary function along one axis."""
    arr = as_array(t)
    if not -arr.ndim <= axis < arr.ndim:
        raise TensorError(f"axis {axis} out of range for rank {arr.ndim}")
    slices = np.moveaxis(arr, axis, 0)
    folded = functools.reduce(np.frompyfunc(fn, 2, 1), slices[1:], slices[0])
    out = np.asarray(folded, dtype=arr.dtype)
    if out.ndim == 0:
        out = out.reshape(1)
    return Tensor.wrap(out)


class Rng:
    """Reproducible random stream.

    Backed by numpy's Philox 4x64 counter-based bit generator, chosen (and
    fixed here) because its output is defined by the algorithm, not the
    platform: equal seeds give equal sequences everywhere.
    """

    algorithm = "philox4x64"

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise TensorError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self._gen = np.random.Generator(np.random.Philox(key=seed))

    def random(self, shape=None) -> np.ndarray:
        return self._gen.random(size=shape)

    def uniform(self, low: float, high: float, shape=None) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def normal(self, mean: float, std: float, shape=None) -> np.ndarray:
        return self._gen.normal(mean, std, size=shape)

    def integers(self, low: int, high: int, shape=None) -> np.ndarray:
        return self._gen.integers(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)
