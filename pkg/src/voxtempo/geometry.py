"""Pinhole cameras and homography warping onto depth hypothesis planes.

Conventions:
- Camera coordinates are x-right, y-down, z-forward; "depth" is the z
  coordinate (perpendicular depth), not ray length.
- A `CameraFrame` stores the pose mapping current-frame camera coordinates
  into its own frame: X_frame = R @ X_current + t. The current frame itself
  uses R = I, t = 0.
- Pixel (u, v) of a feature map of size (h, w) corresponds to the image
  point ((u + 0.5) * width / w, (v + 0.5) * height / h): pixel centers,
  scaled by the downsampling factor. Warp grids are expressed back in
  feature index space, so an identity warp lands exactly on (v, u).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ops import bilinear_sample

__all__ = [
    "CameraFrame",
    "DepthHypotheses",
    "backproject",
    "project",
    "warp_pixel",
    "build_warp_grid",
    "warp_feature",
]

MIN_WARP_DEPTH = 1e-6


@dataclass
class CameraFrame:
    """Intrinsics plus pose relative to the current frame."""

    K: np.ndarray
    R: np.ndarray
    t: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=np.float64)
        self.R = np.asarray(self.R, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if self.K.shape != (3, 3) or self.R.shape != (3, 3):
            raise ValueError("K and R must be 3x3")
        lower = np.abs([self.K[1, 0], self.K[2, 0], self.K[2, 1]])
        if lower.max() > 1e-9:
            raise ValueError("K must be upper triangular")
        if self.K[0, 0] <= 0 or self.K[1, 1] <= 0 or self.K[2, 2] <= 0:
            raise ValueError("K diagonal must be positive")
        ortho_err = np.abs(self.R.T @ self.R - np.eye(3)).max()
        if ortho_err > 1e-6:
            raise ValueError(f"R not orthonormal (max error {ortho_err:.2e})")
        if abs(np.linalg.det(self.R) - 1.0) > 1e-6:
            raise ValueError("R must be a proper rotation (det 1)")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")

    @classmethod
    def identity(cls, K, width, height) -> "CameraFrame":
        return cls(K, np.eye(3), np.zeros(3), width, height)

    def camera_center(self) -> np.ndarray:
        """Position of this camera in current-frame coordinates."""
        return -self.R.T @ self.t

    def to_current(self, points: np.ndarray) -> np.ndarray:
        """Map [3, N] points from this frame back into the current frame."""
        return self.R.T @ (points - self.t.reshape(3, 1))


@dataclass
class DepthHypotheses:
    """Strictly ascending metric depth plane values."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("hypotheses must be a non-empty 1D list")
        if (self.values <= 0).any():
            raise ValueError("depth hypotheses must be positive")
        if (np.diff(self.values) <= 0).any():
            raise ValueError("depth hypotheses must be strictly ascending")

    @property
    def count(self) -> int:
        return int(self.values.size)

    @classmethod
    def inverse_depth(cls, near: float, far: float, count: int) -> "DepthHypotheses":
        """Planes linearly spaced in 1/depth between near and far (default)."""
        inv = np.linspace(1.0 / near, 1.0 / far, count)
        return cls(np.sort(1.0 / inv))

    @classmethod
    def uniform(cls, near: float, far: float, count: int) -> "DepthHypotheses":
        return cls(np.linspace(near, far, count))


def backproject(p: np.ndarray, d: float, K0: np.ndarray) -> np.ndarray:
    """Lift a homogeneous pixel to the 3D point K0^-1 * p * d."""
    if d <= 0:
        raise ValueError("depth must be positive")
    K0 = np.asarray(K0, dtype=np.float64)
    if abs(np.linalg.det(K0)) < 1e-12:
        raise ValueError("singular intrinsics")
    return np.linalg.solve(K0, np.asarray(p, dtype=np.float64)) * d


def project(X: np.ndarray, K: np.ndarray):
    """Project a camera-frame 3D point; returns ((u, v), depth)."""
    hom = np.asarray(K, dtype=np.float64) @ np.asarray(X, dtype=np.float64)
    return hom[:2] / hom[2], float(hom[2])


def warp_pixel(p, d_j: float, K0, Ki, R, t):
    """Map one current-frame pixel at hypothesis depth d_j into a source view.

    Computes Ki @ (R @ (K0^-1 @ p * d_j) + t) and dehomogenizes. The input
    pixel is first normalized to its z=1 representative, so the result is
    invariant to positive rescaling of the homogeneous input. Returns
    ((u, v), warped_depth, valid); valid is False when the warped point lies
    on or behind the source camera plane (depth <= 1e-6).

    The arithmetic deliberately mirrors `build_warp_grid` step for step so a
    per-pixel loop reproduces the dense grid bitwise.
    """
    if d_j <= 0:
        raise ValueError("depth must be positive")
    p = np.asarray(p, dtype=np.float64)
    p = p / p[2]
    K0 = np.asarray(K0, dtype=np.float64)
    if abs(np.linalg.det(K0)) < 1e-12:
        raise ValueError("singular intrinsics")
    ray = np.einsum("ij,j->i", np.linalg.inv(K0), p)
    X = ray * np.float64(d_j)
    Y = np.einsum("ij,j->i", np.asarray(R, dtype=np.float64), X) + np.asarray(
        t, dtype=np.float64
    )
    hom = np.einsum("ij,j->i", np.asarray(Ki, dtype=np.float64), Y)
    depth = float(hom[2])
    if depth <= MIN_WARP_DEPTH:
        return np.zeros(2), depth, False
    return hom[:2] / depth, depth, True


def _feature_scale(frame: CameraFrame, feat_h: int, feat_w: int):
    if frame.width % feat_w or frame.height % feat_h:
        raise ValueError(
            f"feature size ({feat_h}, {feat_w}) must divide image size "
            f"({frame.height}, {frame.width})"
        )
    return frame.width / feat_w, frame.height / feat_h


def build_warp_grid(
    cur: CameraFrame,
    his: CameraFrame,
    hyp: DepthHypotheses,
    feat_h: int,
    feat_w: int,
):
    """Dense source-feature sampling coordinates per depth hypothesis.

    Returns (grid [D, feat_h, feat_w, 2], mask [D, feat_h, feat_w]) where
    grid[..., 0] is the source row and grid[..., 1] the source column in
    feature index space. mask is False where the warp lands behind the
    source camera or outside the source feature bounds; those grid entries
    are zeroed.
    """
    sx_cur, sy_cur = _feature_scale(cur, feat_h, feat_w)
    sx_his, sy_his = _feature_scale(his, feat_h, feat_w)

    vv, uu = np.meshgrid(np.arange(feat_h), np.arange(feat_w), indexing="ij")
    u_img = (uu.ravel().astype(np.float64) + 0.5) * sx_cur
    v_img = (vv.ravel().astype(np.float64) + 0.5) * sy_cur
    pix = np.stack([u_img, v_img, np.ones_like(u_img)], axis=0)  # [3, N]

    # same elementary ops as warp_pixel so a scalar loop matches bitwise
    rays = np.einsum("ij,jn->in", np.linalg.inv(cur.K), pix)  # K0^-1 p
    d = hyp.values.reshape(-1, 1, 1)  # [D, 1, 1]
    X = rays[None] * d  # [D, 3, N]
    Y = np.einsum("ij,djn->din", his.R, X) + his.t.reshape(1, 3, 1)
    hom = np.einsum("ij,djn->din", his.K, Y)  # [D, 3, N]

    depth = hom[:, 2, :]
    safe = np.where(depth > MIN_WARP_DEPTH, depth, 1.0)
    u_src = hom[:, 0, :] / safe
    v_src = hom[:, 1, :] / safe
    col = u_src / sx_his - 0.5
    row = v_src / sy_his - 0.5

    mask = (
        (depth > MIN_WARP_DEPTH)
        & (col >= 0)
        & (col <= feat_w - 1)
        & (row >= 0)
        & (row <= feat_h - 1)
    )
    row = np.where(mask, row, 0.0)
    col = np.where(mask, col, 0.0)

    grid = np.stack([row, col], axis=-1).reshape(hyp.count, feat_h, feat_w, 2)
    return grid, mask.reshape(hyp.count, feat_h, feat_w)


def warp_feature(f_src: np.ndarray, grid: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Resample a [C, h, w] source feature map along a warp grid.

    Bilinear sampling at grid coordinates; masked-out cells are zero.
    Returns [C, D, h, w].
    """
    f_src = np.asarray(f_src)
    d, h, w, _ = grid.shape
    if f_src.shape[1:] != (h, w):
        raise ValueError(f"grid built for {(h, w)}, feature map is {f_src.shape[1:]}")
    sampled = bilinear_sample(f_src, grid.reshape(-1, 2))
    vol = sampled.reshape(f_src.shape[0], d, h, w)
    return vol * mask[None].astype(vol.dtype)
