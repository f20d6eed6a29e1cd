"""Naive loop-based reference implementations used as verification oracles.

Everything here is written as literally as possible (nested Python loops,
no vectorization) and stays independent of the optimized code paths it
checks. These run on deliberately tiny inputs.
"""

from __future__ import annotations

import math

import numpy as np

from .ops import Conv3dParams


def softmax_ref(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Direct exp/sum formula, no stabilization (small inputs only)."""
    e = np.exp(np.asarray(x, dtype=np.float64))
    return e / e.sum(axis=axis, keepdims=True)


def group_norm_ref(x, num_groups, gamma, beta, eps=1e-5):
    """Two-pass mean/variance per channel group."""
    x = np.asarray(x, dtype=np.float64)
    c = x.shape[0]
    gs = c // num_groups
    out = np.empty_like(x)
    for g in range(num_groups):
        block = x[g * gs : (g + 1) * gs]
        mean = block.mean()
        var = ((block - mean) ** 2).mean()
        out[g * gs : (g + 1) * gs] = (block - mean) / math.sqrt(var + eps)
    shape = (c,) + (1,) * (x.ndim - 1)
    return out * np.reshape(gamma, shape) + np.reshape(beta, shape)


def conv3d_ref(x: np.ndarray, p: Conv3dParams) -> np.ndarray:
    """Seven nested loops over output location, channel, and kernel tap."""
    x = np.asarray(x)
    c_in, d, h, w = x.shape
    k = p.kernel_size
    dil = p.dilation
    pad = p.padding
    ke = (k - 1) * dil + 1
    od = d + 2 * pad - ke + 1
    oh = h + 2 * pad - ke + 1
    ow = w + 2 * pad - ke + 1
    out = np.zeros((p.out_channels, od, oh, ow), dtype=np.float64)
    for o in range(p.out_channels):
        for zd in range(od):
            for zh in range(oh):
                for zw in range(ow):
                    acc = 0.0
                    for c in range(c_in):
                        for i in range(k):
                            for j in range(k):
                                for l in range(k):
                                    sd = zd + i * dil - pad
                                    sh = zh + j * dil - pad
                                    sw = zw + l * dil - pad
                                    if 0 <= sd < d and 0 <= sh < h and 0 <= sw < w:
                                        acc += float(x[c, sd, sh, sw]) * float(
                                            p.weights[o, c, i, j, l]
                                        )
                    out[o, zd, zh, zw] = acc + float(p.bias[o])
    return out


def trilinear_ref(vol: np.ndarray, coord) -> np.ndarray:
    """8-corner manual blend for a single (d, h, w) coordinate."""
    vol = np.asarray(vol)
    sizes = vol.shape[1:]
    cd, ch, cw = float(coord[0]), float(coord[1]), float(coord[2])
    for c, s in zip((cd, ch, cw), sizes):
        if c < 0 or c > s - 1:
            return np.zeros(vol.shape[0], dtype=np.float64)
    d0, h0, w0 = int(math.floor(cd)), int(math.floor(ch)), int(math.floor(cw))
    d1, h1, w1 = min(d0 + 1, sizes[0] - 1), min(h0 + 1, sizes[1] - 1), min(w0 + 1, sizes[2] - 1)
    td, th, tw = cd - d0, ch - h0, cw - w0
    out = np.zeros(vol.shape[0], dtype=np.float64)
    for a, idx_d in ((0, d0), (1, d1)):
        for b, idx_h in ((0, h0), (1, h1)):
            for c, idx_w in ((0, w0), (1, w1)):
                wt = (td if a else 1 - td) * (th if b else 1 - th) * (tw if c else 1 - tw)
                out += vol[:, idx_d, idx_h, idx_w].astype(np.float64) * wt
    return out


def group_affinity_ref(ci: np.ndarray, hi: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Per-location channel-centered correlation, one location at a time."""
    ci = np.asarray(ci, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    _, d, h, w = ci.shape
    out = np.zeros((d, h, w))
    for zd in range(d):
        for zh in range(h):
            for zw in range(w):
                a = ci[:, zd, zh, zw]
                b = hi[:, zd, zh, zw]
                ac = a - a.mean()
                bc = b - b.mean()
                num = float(np.dot(ac, bc))
                den = math.sqrt(float(np.dot(ac, ac))) * math.sqrt(float(np.dot(bc, bc)))
                out[zd, zh, zw] = num / max(den, eps)
    return out


def cosine_ref(a: np.ndarray, b: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Uncentered per-location cosine over the channel axis."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _, d, h, w = a.shape
    out = np.zeros((d, h, w))
    for zd in range(d):
        for zh in range(h):
            for zw in range(w):
                va = a[:, zd, zh, zw]
                vb = b[:, zd, zh, zw]
                den = math.sqrt(float(np.dot(va, va))) * math.sqrt(float(np.dot(vb, vb)))
                out[zd, zh, zw] = float(np.dot(va, vb)) / max(den, eps)
    return out


def deformable_ref(
    vol: np.ndarray,
    offsets: np.ndarray,
    weights: np.ndarray,
    affinity: np.ndarray,
    base_grid: np.ndarray,
) -> np.ndarray:
    """Per-location, per-sampling-point loop for the affinity-gated gather.

    Returns the accumulated volume before the final channel-mixing conv.
    """
    vol = np.asarray(vol)
    _, d, h, w = vol.shape
    kw = base_grid.shape[0]
    out = np.zeros((vol.shape[0], d, h, w), dtype=np.float64)
    aff_vol = np.asarray(affinity, dtype=np.float64)[None]
    for zd in range(d):
        for zh in range(h):
            for zw in range(w):
                acc = np.zeros(vol.shape[0], dtype=np.float64)
                for k in range(kw):
                    q = (
                        np.array([zd, zh, zw], dtype=np.float64)
                        + base_grid[k]
                        + offsets[k, :, zd, zh, zw]
                    )
                    sample = trilinear_ref(vol, q)
                    a_k = trilinear_ref(aff_vol, q)[0]
                    acc = acc + weights[k, zd, zh, zw] * sample * a_k
                out[:, zd, zh, zw] = acc
    return out


def lift_splat_ref(points_vox: np.ndarray, contribs: np.ndarray, dims) -> np.ndarray:
    """Dictionary-based scatter-mean of per-point features into a voxel grid.

    points_vox: [N, 3] float voxel-space positions, contribs: [N, C].
    """
    x, y, z = dims
    c = contribs.shape[1]
    sums: dict[tuple, np.ndarray] = {}
    counts: dict[tuple, int] = {}
    for n in range(points_vox.shape[0]):
        idx = tuple(int(math.floor(points_vox[n, i])) for i in range(3))
        if not (0 <= idx[0] < x and 0 <= idx[1] < y and 0 <= idx[2] < z):
            continue
        if idx not in sums:
            sums[idx] = np.zeros(c, dtype=np.float64)
            counts[idx] = 0
        sums[idx] += contribs[n]
        counts[idx] += 1
    out = np.zeros((c, x, y, z), dtype=np.float64)
    for idx, s in sums.items():
        out[:, idx[0], idx[1], idx[2]] = s / counts[idx]
    return out


def attention_ref(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Scaled dot-product attention, one query row at a time.

    q: [Nq, dh], k: [Nk, dh], v: [Nk, dv] -> [Nq, dv].
    """
    q = np.asarray(q, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nq, dh = q.shape
    out = np.zeros((nq, v.shape[1]))
    for i in range(nq):
        scores = np.array([np.dot(q[i], k[j]) / math.sqrt(dh) for j in range(k.shape[0])])
        scores = scores - scores.max()
        e = np.exp(scores)
        probs = e / e.sum()
        out[i] = sum(probs[j] * v[j] for j in range(k.shape[0]))
    return out


def ssim_mean3_ref(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sliding 3x3 window SSIM with reflect borders, one pixel at a time."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    h, w = a.shape
    c1, c2 = 0.01**2, 0.03**2
    ap = np.pad(a, 1, mode="reflect")
    bp = np.pad(b, 1, mode="reflect")
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            wa = ap[i : i + 3, j : j + 3]
            wb = bp[i : i + 3, j : j + 3]
            mu_a, mu_b = wa.mean(), wb.mean()
            var_a = (wa**2).mean() - mu_a**2
            var_b = (wb**2).mean() - mu_b**2
            cov = (wa * wb).mean() - mu_a * mu_b
            out[i, j] = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / (
                (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
            )
    return out


def argmax_labels_ref(probs: np.ndarray) -> np.ndarray:
    """Per-voxel argmax with explicit first-maximum tie-break."""
    probs = np.asarray(probs)
    _, x, y, z = probs.shape
    out = np.zeros((x, y, z), dtype=np.int64)
    for i in range(x):
        for j in range(y):
            for k in range(z):
                best, best_c = -np.inf, 0
                for c in range(probs.shape[0]):
                    if probs[c, i, j, k] > best:
                        best, best_c = probs[c, i, j, k], c
                out[i, j, k] = best_c
    return out
