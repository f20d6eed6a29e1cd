"""Dense-array building blocks shared by every stage of the pipeline.

All functions operate on plain numpy arrays in row-major [C, D, H, W]
layout (channels outermost) and are pure: no hidden state, bitwise
deterministic results. float32 is the working precision of the pipeline;
float64 is used by the finite-difference gradient harness.

Border policy: both `conv3d` and `trilinear_sample` treat everything
outside the array as zero, so out-of-view samples contribute nothing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf, expit

__all__ = [
    "Conv3dParams",
    "elementwise",
    "concat",
    "softmax",
    "sigmoid",
    "gelu",
    "group_norm",
    "conv3d",
    "conv3d_backward",
    "trilinear_sample",
    "trilinear_sample_grads",
    "trilinear_scatter",
    "bilinear_sample",
    "finite_diff_grad",
]


# ---------------------------------------------------------------------------
# parameter containers
# ---------------------------------------------------------------------------

@dataclass
class Conv3dParams:
    """Weights of a 3D cross-correlation with optional dilation.

    weights: [out_ch, in_ch, k, k, k], bias: [out_ch]. `padding` is the
    symmetric zero padding applied to each spatial axis; for a "same"
    spatial output with an odd kernel use padding = dilation * (k - 1) / 2.
    """

    weights: np.ndarray
    bias: np.ndarray
    dilation: int = 1
    padding: int = 0

    def __post_init__(self):
        self.weights = np.asarray(self.weights)
        self.bias = np.asarray(self.bias)
        if self.weights.ndim != 5:
            raise ValueError(f"conv weights must be 5D, got shape {self.weights.shape}")
        o, _, k1, k2, k3 = self.weights.shape
        if not (k1 == k2 == k3):
            raise ValueError(f"kernel must be cubic, got {(k1, k2, k3)}")
        if self.bias.shape != (o,):
            raise ValueError(f"bias shape {self.bias.shape} does not match out_ch {o}")
        if self.dilation < 1:
            raise ValueError("dilation must be >= 1")
        if self.padding < 0:
            raise ValueError("padding must be >= 0")

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.weights.shape[2]

    @classmethod
    def same(cls, weights: np.ndarray, bias: np.ndarray, dilation: int = 1) -> "Conv3dParams":
        """Build params whose padding keeps the spatial shape (odd kernels only)."""
        k = np.asarray(weights).shape[2]
        if k % 2 == 0:
            raise ValueError("'same' padding requires an odd kernel")
        return cls(weights, bias, dilation=dilation, padding=dilation * (k - 1) // 2)


# ---------------------------------------------------------------------------
# elementwise and shape ops
# ---------------------------------------------------------------------------

_ELEMENTWISE = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "scale": np.multiply,
}


def elementwise(op: str, a: np.ndarray, b) -> np.ndarray:
    """Apply a binary op between two equal-shape arrays, or array and scalar.

    No broadcasting beyond the scalar case: a shape mismatch is an error.
    """
    if op not in _ELEMENTWISE:
        raise ValueError(f"unknown elementwise op {op!r}")
    a = np.asarray(a)
    if np.isscalar(b) or np.ndim(b) == 0:
        return _ELEMENTWISE[op](a, b)
    b = np.asarray(b)
    if op == "scale":
        raise ValueError("scale expects a scalar second operand")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return _ELEMENTWISE[op](a, b)


def concat(tensors, axis: int) -> np.ndarray:
    """Concatenate along `axis`; all other dimensions must match exactly."""
    tensors = list(tensors)
    if not tensors:
        raise ValueError("concat of an empty list")
    ref = np.asarray(tensors[0]).shape
    for t in tensors[1:]:
        s = np.asarray(t).shape
        if len(s) != len(ref) or any(
            s[i] != ref[i] for i in range(len(ref)) if i != axis % len(ref)
        ):
            raise ValueError(f"incompatible shapes for concat: {ref} vs {s}")
    return np.concatenate(tensors, axis=axis)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax (max subtraction). NaN input is an error."""
    x = np.asarray(x)
    if np.isnan(x).any():
        raise ValueError("softmax input contains NaN")
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(np.asarray(x))


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact Gaussian-CDF GELU: x * Phi(x), no tanh approximation."""
    x = np.asarray(x)
    return x * 0.5 * (1.0 + erf(x / np.sqrt(np.asarray(2.0, dtype=x.dtype))))


def group_norm(
    x: np.ndarray,
    num_groups: int,
    gamma: np.ndarray,
    beta: np.ndarray,
    eps: float = 1e-5,
) -> np.ndarray:
    """Normalize channel groups to zero mean / unit variance, then affine.

    x is [C, ...]; statistics are taken over each group of C/num_groups
    channels together with all trailing axes. eps sits inside the sqrt.
    """
    x = np.asarray(x)
    c = x.shape[0]
    if c % num_groups != 0:
        raise ValueError(f"channels {c} not divisible by num_groups {num_groups}")
    gamma = np.asarray(gamma).reshape((c,) + (1,) * (x.ndim - 1))
    beta = np.asarray(beta).reshape((c,) + (1,) * (x.ndim - 1))
    grouped = x.reshape(num_groups, c // num_groups, *x.shape[1:])
    axes = tuple(range(1, grouped.ndim))
    mean = grouped.mean(axis=axes, keepdims=True)
    var = grouped.var(axis=axes, keepdims=True)
    normed = (grouped - mean) / np.sqrt(var + eps)
    return normed.reshape(x.shape) * gamma + beta


# ---------------------------------------------------------------------------
# 3D convolution
# ---------------------------------------------------------------------------

def _conv3d_taps(x: np.ndarray, p: Conv3dParams):
    """Padded sliding-window view subsampled at the dilation stride.

    Returns [C_in, D', H', W', k, k, k] windows aligned with the output grid.
    """
    k = p.kernel_size
    ke = (k - 1) * p.dilation + 1
    pad = p.padding
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (pad, pad)))
    if any(s < ke for s in xp.shape[1:]):
        raise ValueError(
            f"kernel (effective size {ke}) does not fit input {x.shape[1:]} with padding {pad}"
        )
    windows = sliding_window_view(xp, (ke, ke, ke), axis=(1, 2, 3))
    d = p.dilation
    return windows[..., ::d, ::d, ::d]


def conv3d(x: np.ndarray, p: Conv3dParams) -> np.ndarray:
    """3D cross-correlation with zero padding and dilation, stride 1.

    x: [C_in, D, H, W] -> [C_out, D', H', W'] with
    D' = D + 2*padding - ((k-1)*dilation + 1) + 1.
    """
    x = np.asarray(x)
    if x.ndim != 4:
        raise ValueError(f"conv3d input must be [C, D, H, W], got {x.shape}")
    if x.shape[0] != p.in_channels:
        raise ValueError(f"input channels {x.shape[0]} != weight in_ch {p.in_channels}")
    taps = _conv3d_taps(x, p)
    out = np.einsum("cdhwijl,ocijl->odhw", taps, p.weights)
    return out + p.bias.reshape(-1, 1, 1, 1)


def conv3d_backward(x: np.ndarray, p: Conv3dParams, grad_out: np.ndarray):
    """Gradients of conv3d w.r.t. input, weights, and bias.

    grad_out: [C_out, D', H', W']. Returns (grad_x, grad_w, grad_b).
    """
    x = np.asarray(x)
    grad_out = np.asarray(grad_out)
    taps = _conv3d_taps(x, p)
    grad_b = grad_out.sum(axis=(1, 2, 3))
    grad_w = np.einsum("odhw,cdhwijl->ocijl", grad_out, taps)

    k = p.kernel_size
    pad = p.padding
    dil = p.dilation
    od, oh, ow = grad_out.shape[1:]
    xp_shape = (x.shape[0],) + tuple(s + 2 * pad for s in x.shape[1:])
    grad_xp = np.zeros(xp_shape, dtype=np.result_type(grad_out, p.weights))
    for i in range(k):
        for j in range(k):
            for l in range(k):
                contrib = np.einsum("odhw,oc->cdhw", grad_out, p.weights[:, :, i, j, l])
                grad_xp[
                    :,
                    i * dil : i * dil + od,
                    j * dil : j * dil + oh,
                    l * dil : l * dil + ow,
                ] += contrib
    if pad:
        grad_x = grad_xp[:, pad:-pad, pad:-pad, pad:-pad]
    else:
        grad_x = grad_xp
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# continuous sampling
# ---------------------------------------------------------------------------

def _corner_data(sizes, coords_flat):
    """Shared corner bookkeeping for trilinear gather/scatter.

    coords_flat: [N, 3] in (d, h, w) order. Returns (valid [N],
    lo [N,3] int, hi [N,3] int, frac [N,3]) with indices clipped in-range.
    Coordinates outside [0, size-1] on any axis are flagged invalid.
    """
    sizes = np.asarray(sizes)
    valid = np.all((coords_flat >= 0) & (coords_flat <= sizes - 1), axis=1)
    clipped = np.clip(coords_flat, 0, sizes - 1)
    lo = np.floor(clipped).astype(np.int64)
    frac = clipped - lo
    hi = np.minimum(lo + 1, sizes - 1)
    return valid, lo, hi, frac


_CORNERS = [(a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)]


def trilinear_sample(vol: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Trilinear interpolation of a [C, D, H, W] volume at continuous coords.

    coords: [..., 3] in (d, h, w) index space; a lattice point returns the
    stored value exactly. Any coordinate outside [0, size-1] yields 0.
    Output is [C, ...coords.shape[:-1]].
    """
    vol = np.asarray(vol)
    coords = np.asarray(coords)
    lead = coords.shape[:-1]
    flat = coords.reshape(-1, 3)
    valid, lo, hi, frac = _corner_data(vol.shape[1:], flat)

    out = np.zeros((vol.shape[0], flat.shape[0]), dtype=np.result_type(vol, coords))
    for a, b, c in _CORNERS:
        idx_d = hi[:, 0] if a else lo[:, 0]
        idx_h = hi[:, 1] if b else lo[:, 1]
        idx_w = hi[:, 2] if c else lo[:, 2]
        wt = (
            (frac[:, 0] if a else 1.0 - frac[:, 0])
            * (frac[:, 1] if b else 1.0 - frac[:, 1])
            * (frac[:, 2] if c else 1.0 - frac[:, 2])
        )
        out += vol[:, idx_d, idx_h, idx_w] * wt
    out *= valid
    return out.reshape((vol.shape[0],) + lead)


def trilinear_sample_grads(vol: np.ndarray, coords: np.ndarray):
    """Values plus their derivative w.r.t. the sampling coordinates.

    Returns (values [C, ...], dval_dcoord [C, ..., 3]). The derivative is
    the piecewise-linear one; it is zero at invalid (outside) coordinates
    and one-sided exactly on lattice planes.
    """
    vol = np.asarray(vol)
    coords = np.asarray(coords)
    lead = coords.shape[:-1]
    flat = coords.reshape(-1, 3)
    valid, lo, hi, frac = _corner_data(vol.shape[1:], flat)

    c_ch = vol.shape[0]
    n = flat.shape[0]
    dtype = np.result_type(vol, coords)
    out = np.zeros((c_ch, n), dtype=dtype)
    grad = np.zeros((c_ch, n, 3), dtype=dtype)
    w_ax = [(1.0 - frac[:, i], frac[:, i]) for i in range(3)]
    for a, b, c in _CORNERS:
        idx_d = hi[:, 0] if a else lo[:, 0]
        idx_h = hi[:, 1] if b else lo[:, 1]
        idx_w = hi[:, 2] if c else lo[:, 2]
        v = vol[:, idx_d, idx_h, idx_w]
        wd, wh, ww = w_ax[0][a], w_ax[1][b], w_ax[2][c]
        out += v * (wd * wh * ww)
        sd = 1.0 if a else -1.0
        sh = 1.0 if b else -1.0
        sw = 1.0 if c else -1.0
        grad[:, :, 0] += v * (sd * wh * ww)
        grad[:, :, 1] += v * (wd * sh * ww)
        grad[:, :, 2] += v * (wd * wh * sw)
    out *= valid
    grad *= valid[None, :, None]
    return out.reshape((c_ch,) + lead), grad.reshape((c_ch,) + lead + (3,))


def trilinear_scatter(shape, coords: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Adjoint of `trilinear_sample`: spread values back onto the lattice.

    shape: (C, D, H, W) of the target volume; values: [C, ...] matching
    coords [..., 3]. Invalid coordinates contribute nothing.
    """
    c_ch, d, h, w = shape
    coords = np.asarray(coords)
    flat = coords.reshape(-1, 3)
    vals = np.asarray(values).reshape(c_ch, -1)
    valid, lo, hi, frac = _corner_data((d, h, w), flat)
    vals = vals * valid

    buf = np.zeros((d * h * w, c_ch), dtype=vals.dtype)
    for a, b, c in _CORNERS:
        idx_d = hi[:, 0] if a else lo[:, 0]
        idx_h = hi[:, 1] if b else lo[:, 1]
        idx_w = hi[:, 2] if c else lo[:, 2]
        wt = (
            (frac[:, 0] if a else 1.0 - frac[:, 0])
            * (frac[:, 1] if b else 1.0 - frac[:, 1])
            * (frac[:, 2] if c else 1.0 - frac[:, 2])
        )
        lin = (idx_d * h + idx_h) * w + idx_w
        np.add.at(buf, lin, (vals * wt).T)
    return buf.T.reshape(shape)


def bilinear_sample(img: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of a [C, H, W] image at (row, col) coords.

    Same border policy as `trilinear_sample`: outside [0, size-1] -> 0.
    """
    img = np.asarray(img)
    coords = np.asarray(coords)
    lead = coords.shape[:-1]
    flat = coords.reshape(-1, 2)
    sizes = np.asarray(img.shape[1:])
    valid = np.all((flat >= 0) & (flat <= sizes - 1), axis=1)
    clipped = np.clip(flat, 0, sizes - 1)
    lo = np.floor(clipped).astype(np.int64)
    frac = clipped - lo
    hi = np.minimum(lo + 1, sizes - 1)

    out = np.zeros((img.shape[0], flat.shape[0]), dtype=np.result_type(img, coords))
    for a in (0, 1):
        for b in (0, 1):
            idx_h = hi[:, 0] if a else lo[:, 0]
            idx_w = hi[:, 1] if b else lo[:, 1]
            wt = (frac[:, 0] if a else 1.0 - frac[:, 0]) * (
                frac[:, 1] if b else 1.0 - frac[:, 1]
            )
            out += img[:, idx_h, idx_w] * wt
    out *= valid
    return out.reshape((img.shape[0],) + lead)


# ---------------------------------------------------------------------------
# gradient harness
# ---------------------------------------------------------------------------

def finite_diff_grad(f, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function, element by element.

    x must be float64; f must be pure and deterministic.
    """
    x = np.asarray(x)
    if x.dtype != np.float64:
        raise ValueError("finite_diff_grad requires float64 input")
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = f(x)
        flat[i] = orig - eps
        f_minus = f(x)
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad
