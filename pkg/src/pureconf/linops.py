"""Linear measurement operators: identity and periodic 2D convolution.

Images are stored as flat row-major arrays with the channel axis last, i.e. a
``(height, width, channels)`` array raveled in C order. Operators act on each
channel independently. The array-level helpers (``apply_array`` and friends)
accept any number of leading batch axes, which the estimators use to push a
stack of tangent vectors through the operator at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.fft

Dims = tuple[int, int, int]


@dataclass(frozen=True)
class ImageGrid:
    height: int
    width: int
    channels: int
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if min(self.height, self.width, self.channels) < 1:
            raise ValueError("image dimensions must be positive")
        if values.size != self.height * self.width * self.channels:
            raise ValueError(
                f"expected {self.height * self.width * self.channels} values, "
                f"got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("image values must be finite")

    @classmethod
    def from_array(cls, arr) -> "ImageGrid":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError("expected a (height, width[, channels]) array")
        h, w, c = arr.shape
        return cls(h, w, c, arr.ravel())

    @property
    def dims(self) -> Dims:
        return (self.height, self.width, self.channels)

    @property
    def array(self) -> np.ndarray:
        return self.values.reshape(self.dims)

    def __eq__(self, other):
        if not isinstance(other, ImageGrid):
            return NotImplemented
        return self.dims == other.dims and np.array_equal(self.values, other.values)

    __hash__ = None


@dataclass(frozen=True)
class ConvolutionKernel:
    """Normalized, nonnegative point-spread function on an odd square support."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] % 2 == 0:
            raise ValueError("kernel must be a square array with odd side length")
        if np.any(w < 0):
            raise ValueError("kernel weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"kernel weights must sum to 1 (got {w.sum()!r})")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ConvolutionKernel):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    __hash__ = None


def gaussian_kernel(sigma: float, size: int) -> ConvolutionKernel:
    """Sampled isotropic Gaussian truncated to ``size x size`` and renormalized."""
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ValueError("sigma must be positive and finite")
    if size < 3 or size % 2 == 0:
        raise ValueError("kernel size must be odd and at least 3")
    r = np.arange(size) - size // 2
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return ConvolutionKernel(w / w.sum())


def default_kernel_size(sigma: float) -> int:
    """Odd support covering about three standard deviations on each side."""
    return max(3, 2 * math.ceil(3 * sigma) + 1)


@dataclass(frozen=True)
class LinearOperatorSpec:
    """Square operator on ``dims``; ``kernel=None`` means the identity."""

    dims: Dims
    kernel: Optional[ConvolutionKernel] = None
    _response: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"invalid operator dims {self.dims!r}")
        object.__setattr__(self, "dims", dims)
        response = _kernel_response(self.kernel, dims[0], dims[1])
        response.setflags(write=False)
        object.__setattr__(self, "_response", response)

    @classmethod
    def identity(cls, dims) -> "LinearOperatorSpec":
        return cls(tuple(dims))

    @classmethod
    def convolution(cls, dims, kernel: ConvolutionKernel) -> "LinearOperatorSpec":
        return cls(tuple(dims), kernel)

    @property
    def is_identity(self) -> bool:
        return self.kernel is None

    @property
    def input_dims(self) -> Dims:
        return self.dims

    @property
    def output_dims(self) -> Dims:
        return self.dims

    @property
    def m(self) -> int:
        return math.prod(self.dims)

    @property
    def n(self) -> int:
        return math.prod(self.dims)


def _kernel_response(kernel: Optional[ConvolutionKernel], h: int, w: int) -> np.ndarray:
    if kernel is None:
        return np.ones((h, w), dtype=complex)
    # Wrap the centered kernel onto the periodic grid; supports larger than
    # the grid fold back onto themselves, which is still exact circular
    # convolution.
    padded = np.zeros((h, w))
    half = kernel.size // 2
    offs = np.arange(kernel.size) - half
    rows = np.mod(offs, h)[:, None]
    cols = np.mod(offs, w)[None, :]
    np.add.at(padded, (np.broadcast_to(rows, kernel.weights.shape),
                       np.broadcast_to(cols, kernel.weights.shape)), kernel.weights)
    return np.fft.fft2(padded)


def frequency_response(op: LinearOperatorSpec) -> np.ndarray:
    """Eigenvalues of the circulant operator on the 2D DFT basis, shape (H, W, C)."""
    return np.repeat(np.asarray(op._response)[:, :, None], op.dims[2], axis=2)


def _filter(op: LinearOperatorSpec, arr: np.ndarray, response: np.ndarray) -> np.ndarray:
    # Responses of real filters are Hermitian, so the half spectrum suffices.
    h, w = op.dims[0], op.dims[1]
    spec = scipy.fft.rfft2(arr, axes=(-3, -2))
    half = response[:, : w // 2 + 1, None]
    return scipy.fft.irfft2(spec * half, s=(h, w), axes=(-3, -2))


def apply_array(op: LinearOperatorSpec, arr: np.ndarray) -> np.ndarray:
    """A applied over the trailing (H, W, C) axes of ``arr``."""
    if arr.shape[-3:] != op.dims:
        raise ValueError(f"array shape {arr.shape} does not end in {op.dims}")
    if op.is_identity:
        return np.array(arr, dtype=float)
    return _filter(op, arr, op._response)


def adjoint_array(op: LinearOperatorSpec, arr: np.ndarray) -> np.ndarray:
    if arr.shape[-3:] != op.dims:
        raise ValueError(f"array shape {arr.shape} does not end in {op.dims}")
    if op.is_identity:
        return np.array(arr, dtype=float)
    return _filter(op, arr, np.conj(op._response))


def filter_array(op: LinearOperatorSpec, arr: np.ndarray, response: np.ndarray) -> np.ndarray:
    """Apply a real circulant filter given by its (H, W) frequency response.

    The response must be Hermitian-symmetric (the DFT of a real kernel).
    """
    if arr.shape[-3:] != op.dims:
        raise ValueError(f"array shape {arr.shape} does not end in {op.dims}")
    return _filter(op, arr, response)


def apply(op: LinearOperatorSpec, x: ImageGrid) -> np.ndarray:
    """Return ``A x`` as a flat vector of length m."""
    if x.dims != op.input_dims:
        raise ValueError(f"image dims {x.dims} do not match operator {op.input_dims}")
    return apply_array(op, x.array).ravel()


def adjoint_apply(op: LinearOperatorSpec, v) -> ImageGrid:
    """Return ``A^T v``; for convolutions this is correlation with the kernel."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size != op.m:
        raise ValueError(f"vector length {v.size} does not match m={op.m}")
    return ImageGrid.from_array(adjoint_array(op, v.reshape(op.output_dims)))
