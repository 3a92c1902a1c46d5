"""Spatial ops on C×H×W tensors: convolution, pooling, bilinear sampling, spatial softmax.

Coordinates follow one convention throughout: a point is ``(x, y)`` with
``x`` the column and ``y`` the row. Pixel coordinates run over
``[0, W-1] × [0, H-1]``; normalized coordinates map those ranges onto
``[-1, 1]`` (corner-aligned: ``x_n = 2x/(W-1) - 1``).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from fpmm.engine.tensor import Tensor, as_tensor
from fpmm.shared.errors import ShapeMismatchError

# ----------------------------------------------------------------------
# Coordinate grids
# ----------------------------------------------------------------------


def pixel_grid(height: int, width: int, dtype: np.dtype | type = np.float64) -> np.ndarray:
    """H×W×2 array whose entry at row y, column x is ``(x, y)``."""
    ys, xs = np.meshgrid(np.arange(height, dtype=dtype), np.arange(width, dtype=dtype), indexing="ij")
    return np.stack([xs, ys], axis=-1)


def _to_normalized(values: np.ndarray, size: int) -> np.ndarray:
    if size == 1:
        return np.zeros_like(values)
    return 2.0 * values / (size - 1) - 1.0


def normalized_grid(height: int, width: int, dtype: np.dtype | type = np.float64) -> np.ndarray:
    """H×W×2 grid of normalized ``(x, y)`` coordinates in ``[-1, 1]``."""
    grid = pixel_grid(height, width, dtype)
    return np.stack([_to_normalized(grid[..., 0], width), _to_normalized(grid[..., 1], height)], axis=-1)


def pixels_to_normalized(points: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Convert ``(..., 2)`` pixel points on an ``(H, W)`` image to normalized coordinates."""
    height, width = size
    points = np.asarray(points, dtype=np.float64)
    return np.stack([_to_normalized(points[..., 0], width), _to_normalized(points[..., 1], height)], axis=-1)


def normalized_to_pixels(points: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Inverse of :func:`pixels_to_normalized`."""
    height, width = size
    points = np.asarray(points, dtype=np.float64)
    return np.stack([(points[..., 0] + 1.0) * (width - 1) / 2.0, (points[..., 1] + 1.0) * (height - 1) / 2.0], axis=-1)


# ----------------------------------------------------------------------
# Convolution and resampling
# ----------------------------------------------------------------------


def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    """Cross-correlate a C_in×H×W input with a C_out×C_in×k×k kernel (zero padding)."""
    if x.ndim != 3 or weight.ndim != 4:
        raise ShapeMismatchError(f"conv2d expects C×H×W input and 4-d kernel, got {x.shape} and {weight.shape}")
    c_in, height, width = x.shape
    c_out, k_in, k, k2 = weight.shape
    if k_in != c_in:
        raise ShapeMismatchError(f"conv2d channel mismatch: input has {c_in}, kernel expects {k_in}")
    if k != k2 or k % 2 == 0:
        raise ShapeMismatchError(f"conv2d needs a square kernel of odd size, got {k}×{k2}")
    if padding < 0 or stride < 1:
        raise ShapeMismatchError(f"conv2d needs padding >= 0 and stride >= 1, got {padding}, {stride}")
    if bias is not None and bias.shape != (c_out,):
        raise ShapeMismatchError(f"conv2d bias must have shape ({c_out},), got {bias.shape}")

    padded = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding)))
    if padded.shape[1] < k or padded.shape[2] < k:
        raise ShapeMismatchError(f"conv2d kernel {k} larger than padded input {padded.shape[1:]}")
    windows = sliding_window_view(padded, (k, k), axis=(1, 2))[:, ::stride, ::stride]
    out_h, out_w = windows.shape[1], windows.shape[2]
    w = weight.data
    out = np.tensordot(w, windows, axes=([1, 2, 3], [0, 3, 4]))
    if bias is not None:
        out = out + bias.data[:, None, None]

    def backward(g: np.ndarray) -> tuple[np.ndarray, ...]:
        grad_w = np.tensordot(g, windows, axes=([1, 2], [1, 2]))
        grad_windows = np.tensordot(w, g, axes=([0], [0]))  # C_in×k×k×out_h×out_w
        grad_padded = np.zeros(padded.shape, dtype=g.dtype)
        span_h = stride * (out_h - 1) + 1
        span_w = stride * (out_w - 1) + 1
        for i in range(k):
            for j in range(k):
                grad_padded[:, i : i + span_h : stride, j : j + span_w : stride] += grad_windows[:, i, j]
        grad_x = grad_padded[:, padding : padding + height, padding : padding + width]
        if bias is None:
            return grad_x, grad_w
        return grad_x, grad_w, g.sum(axis=(1, 2))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor.from_op(out, parents, backward, "conv2d")


def avg_pool2d(x: Tensor, factor: int = 2) -> Tensor:
    """Average non-overlapping ``factor``×``factor`` blocks."""
    c, height, width = x.shape
    if height % factor or width % factor:
        raise ShapeMismatchError(f"avg_pool2d: {height}×{width} not divisible by {factor}")
    blocks = x.data.reshape(c, height // factor, factor, width // factor, factor)
    scale = 1.0 / (factor * factor)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (np.repeat(np.repeat(g, factor, axis=1), factor, axis=2) * scale,)

    return Tensor.from_op(blocks.mean(axis=(2, 4)), (x,), backward, "avg_pool2d")


def upsample_nearest(x: Tensor, factor: int = 2) -> Tensor:
    """Repeat every pixel ``factor`` times along both spatial axes."""
    c, height, width = x.shape

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (g.reshape(c, height, factor, width, factor).sum(axis=(2, 4)),)

    out = np.repeat(np.repeat(x.data, factor, axis=1), factor, axis=2)
    return Tensor.from_op(out, (x,), backward, "upsample_nearest")


def sample_bilinear(frame: Tensor, coords: Tensor | np.ndarray) -> Tensor:
    """Bilinearly sample a C×H×W frame at H'×W'×2 pixel coordinates.

    Coordinates outside the frame are clamped to the border; the gradient
    with respect to a clamped coordinate is zero.
    """
    frame = as_tensor(frame)
    coords = as_tensor(coords, like=frame)
    if frame.ndim != 3 or coords.ndim != 3 or coords.shape[-1] != 2:
        raise ShapeMismatchError(f"sample_bilinear expects C×H×W and H'×W'×2, got {frame.shape} and {coords.shape}")
    c, height, width = frame.shape
    x = coords.data[..., 0]
    y = coords.data[..., 1]
    xc = np.clip(x, 0, width - 1)
    yc = np.clip(y, 0, height - 1)
    x0 = np.minimum(np.floor(xc).astype(np.intp), max(width - 2, 0))
    y0 = np.minimum(np.floor(yc).astype(np.intp), max(height - 2, 0))
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    wx = (xc - x0).astype(frame.dtype)
    wy = (yc - y0).astype(frame.dtype)

    f = frame.data
    v00, v01 = f[:, y0, x0], f[:, y0, x1]
    v10, v11 = f[:, y1, x0], f[:, y1, x1]
    out = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11)

    def backward(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        plane = height * width
        offsets = (np.arange(c) * plane)[:, None, None]
        grad_frame = np.zeros(c * plane, dtype=g.dtype)
        for yi, xi, weight in (
            (y0, x0, (1 - wy) * (1 - wx)),
            (y0, x1, (1 - wy) * wx),
            (y1, x0, wy * (1 - wx)),
            (y1, x1, wy * wx),
        ):
            index = (offsets + (yi * width + xi)[None]).ravel()
            grad_frame += np.bincount(index, weights=(g * weight[None]).ravel(), minlength=c * plane)

        inside_x = (x >= 0) & (x <= width - 1) & (width > 1)
        inside_y = (y >= 0) & (y <= height - 1) & (height > 1)
        dx = (1 - wy) * (v01 - v00) + wy * (v11 - v10)
        dy = (1 - wx) * (v10 - v00) + wx * (v11 - v01)
        grad_x = np.where(inside_x, (g * dx).sum(axis=0), 0.0)
        grad_y = np.where(inside_y, (g * dy).sum(axis=0), 0.0)
        return grad_frame.reshape(c, height, width), np.stack([grad_x, grad_y], axis=-1)

    return Tensor.from_op(out, (frame, coords), backward, "sample_bilinear")


def warp(frame: Tensor, flow: Tensor | np.ndarray) -> Tensor:
    """Backward-warp a C×H×W frame with an H×W×2 pixel flow.

    Output pixel ``(x, y)`` reads the input at ``(x, y) + flow(x, y)``.
    """
    frame = as_tensor(frame)
    flow = as_tensor(flow, like=frame)
    _, height, width = frame.shape
    if flow.shape != (height, width, 2):
        raise ShapeMismatchError(f"warp: flow shape {flow.shape} does not match frame {height}×{width}")
    return sample_bilinear(frame, flow + pixel_grid(height, width, frame.dtype))


def resize_bilinear(x: Tensor, size: tuple[int, int]) -> Tensor:
    """Corner-aligned bilinear resize of a C×H×W tensor to ``size`` = (H', W')."""
    _, height, width = x.shape
    out_h, out_w = size
    if (out_h, out_w) == (height, width):
        return x
    xs = np.arange(out_w, dtype=np.float64) * ((width - 1) / (out_w - 1) if out_w > 1 else 0.0)
    ys = np.arange(out_h, dtype=np.float64) * ((height - 1) / (out_h - 1) if out_h > 1 else 0.0)
    grid_y, grid_x = np.meshgrid(ys, xs, indexing="ij")
    return sample_bilinear(x, np.stack([grid_x, grid_y], axis=-1).astype(x.dtype))


# ----------------------------------------------------------------------
# Normalization and keypoint extraction
# ----------------------------------------------------------------------


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax along ``axis``."""
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g: np.ndarray) -> tuple[np.ndarray]:
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor.from_op(out, (x,), backward, "softmax")


def spatial_softmax(heatmap: Tensor, temperature: float) -> Tensor:
    """Softmax over the last two (spatial) axes of ``(..., H, W)``."""
    if temperature <= 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    *lead, height, width = heatmap.shape
    flat = heatmap.reshape(tuple(lead) + (height * width,)) * (1.0 / temperature)
    return softmax(flat, axis=-1).reshape(tuple(lead) + (height, width))


def expected_coordinates(distribution: Tensor, *, normalized: bool = False) -> Tensor:
    """Expectation of the ``(x, y)`` coordinate under ``(..., H, W)`` distributions."""
    height, width = distribution.shape[-2:]
    grid = (normalized_grid if normalized else pixel_grid)(height, width, distribution.dtype)
    weighted = distribution.reshape(distribution.shape + (1,)) * grid
    return weighted.sum(axis=(-3, -2))


def soft_argmax(heatmap: Tensor, temperature: float, *, normalized: bool = False) -> Tensor:
    """Differentiable argmax of ``(..., H, W)`` heatmaps, returned as ``(..., 2)`` points.

    A flat heatmap yields the image center. Points are pixel coordinates
    unless ``normalized`` is set.
    """
    heatmap = as_tensor(heatmap)
    return expected_coordinates(spatial_softmax(heatmap, temperature), normalized=normalized)
