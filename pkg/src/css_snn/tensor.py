"""Dense float64 kernels used by the ANN reference and the spiking simulator.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. ``as_tensor``
is the single validation gate: it rejects NaN/Inf so that every kernel can
assume finite input. ``conv2d`` and ``avgpool2d`` accept optional leading
batch dimensions, which the simulator uses to run a whole test set at once.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class ConfigError(ValueError):
    """Raised when a kernel configuration (stride, padding, window) is invalid."""


def as_tensor(x, name: str = "tensor") -> np.ndarray:
    arr = np.array(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of ``a[m, k]`` and ``b[k, n]``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def dense(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Affine map ``x @ w.T + b`` over the last axis; ``w`` is ``[out, in]``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != w.shape[1]:
        raise ShapeError(f"dense input has {x.shape[-1]} features, weight expects {w.shape[1]}")
    lead = x.shape[:-1]
    out = matmul(x.reshape(-1, w.shape[1]), np.ascontiguousarray(w.T))
    if b is not None:
        out = out + b
    return out.reshape(*lead, w.shape[0])


def conv_output_size(size: int, k: int, stride: int, pad: int) -> int:
    span = size + 2 * pad - k
    if stride < 1 or pad < 0:
        raise ConfigError(f"invalid stride={stride} / pad={pad}")
    if span < 0:
        raise ConfigError(f"kernel {k} does not fit padded input {size + 2 * pad}")
    if span % stride:
        raise ConfigError(
            f"non-integral output size: ({size} + 2*{pad} - {k}) / {stride} + 1"
        )
    return span // stride + 1


def conv2d(
    x: np.ndarray,
    w: np.ndarray,
    b: np.ndarray | None = None,
    stride: int = 1,
    pad: int = 0,
) -> np.ndarray:
    """2-D cross-correlation of ``x[..., C, H, W]`` with ``w[O, C, kh, kw]``.

    Accumulates one kernel offset at a time, always in the same
    ``(i, j)`` order, so repeated calls are bit-identical.
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if x.ndim < 3 or w.ndim != 4:
        raise ShapeError(f"conv2d expects x[..., C, H, W] and w[O, C, kh, kw], got {x.shape}, {w.shape}")
    c, h, wd = x.shape[-3:]
    o, wc, kh, kw = w.shape
    if wc != c:
        raise ShapeError(f"input has {c} channels, kernel expects {wc}")
    ho = conv_output_size(h, kh, stride, pad)
    wo = conv_output_size(wd, kw, stride, pad)
    lead = x.shape[:-3]
    xp = x.reshape(-1, c, h, wd)
    if pad:
        xp = np.pad(xp, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros((xp.shape[0], o, ho, wo))
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride]
            out += np.einsum("nchw,oc->nohw", patch, w[:, :, i, j], optimize=False)
    if b is not None:
        out += np.asarray(b, dtype=np.float64)[None, :, None, None]
    return out.reshape(*lead, o, ho, wo)


def avgpool2d(x: np.ndarray, size: int = 2, stride: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    stride = size if stride is None else stride
    if x.ndim < 2:
        raise ShapeError(f"avgpool2d expects [..., H, W], got {x.shape}")
    h, wd = x.shape[-2:]
    ho = conv_output_size(h, size, stride, 0)
    wo = conv_output_size(wd, size, stride, 0)
    out = np.zeros(x.shape[:-2] + (ho, wo))
    for i in range(size):
        for j in range(size):
            out += x[..., i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride]
    return out / (size * size)


def flatten(x: np.ndarray, start: int = 0) -> np.ndarray:
    """Collapse all axes from ``start`` onwards (``start=0`` flattens everything)."""
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(x.shape[:start] + (-1,))


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)
