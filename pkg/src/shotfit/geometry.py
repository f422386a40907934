"""Camera models, projection, triangulation and Procrustes alignment.

Conventions: camera looks down +z with x right and y down, matching a
top-left image origin. Stored extrinsics map camera coordinates to world
coordinates; the world-to-camera transform is derived on demand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, DegenerateInput, PointBehindCamera

_MIN_DEPTH = 1e-9
_ROT_TOL = 1e-9


@dataclass(frozen=True)
class CameraParams:
    """Pinhole camera with camera-to-world extrinsics.

    intrinsics: 3x3 matrix with focal lengths fx, fy and principal point
    cx, cy in pixels, zero skew. rotation_cw / translation_cw map
    camera-frame points into the world frame. image_size is (width, height).
    """

    intrinsics: np.ndarray
    rotation_cw: np.ndarray
    translation_cw: np.ndarray
    image_size: tuple[int, int]

    def __post_init__(self):
        K = np.asarray(self.intrinsics, dtype=float)
        R = np.asarray(self.rotation_cw, dtype=float)
        t = np.asarray(self.translation_cw, dtype=float).reshape(3)
        object.__setattr__(self, "intrinsics", K)
        object.__setattr__(self, "rotation_cw", R)
        object.__setattr__(self, "translation_cw", t)
        if K.shape != (3, 3) or R.shape != (3, 3):
            raise ValueError("intrinsics and rotation_cw must be 3x3")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValueError("focal lengths must be positive")
        if self.image_size[0] <= 0 or self.image_size[1] <= 0:
            raise ValueError("image_size components must be positive")
        if not np.allclose(R @ R.T, np.eye(3), atol=_ROT_TOL):
            raise ValueError("rotation_cw is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > _ROT_TOL:
            raise ValueError("rotation_cw must have determinant +1")

    @property
    def fx(self) -> float:
        return float(self.intrinsics[0, 0])

    @property
    def fy(self) -> float:
        return float(self.intrinsics[1, 1])

    @property
    def cx(self) -> float:
        return float(self.intrinsics[0, 2])

    @property
    def cy(self) -> float:
        return float(self.intrinsics[1, 2])

    def world_to_camera(self, points_world: np.ndarray) -> np.ndarray:
        """Map world points (..., 3) into the camera frame."""
        p = np.asarray(points_world, dtype=float)
        return (p - self.translation_cw) @ self.rotation_cw

    def camera_to_world(self, points_cam: np.ndarray) -> np.ndarray:
        """Map camera-frame points (..., 3) into the world frame."""
        p = np.asarray(points_cam, dtype=float)
        return p @ self.rotation_cw.T + self.translation_cw

    @property
    def center_world(self) -> np.ndarray:
        """Camera optical center in world coordinates."""
        return self.translation_cw.copy()

    def projection_matrix(self) -> np.ndarray:
        """3x4 world-to-pixel homogeneous projection matrix K [R|t]_wc."""
        R_wc = self.rotation_cw.T
        t_wc = -R_wc @ self.translation_cw
        return self.intrinsics @ np.hstack([R_wc, t_wc[:, None]])


def make_intrinsics(fx: float, fy: float, cx: float, cy: float) -> np.ndarray:
    return np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])


def heuristic_intrinsics(width: int, height: int) -> np.ndarray:
    """Uncalibrated fallback: focal = image diagonal, principal point = center."""
    focal = float(np.hypot(width, height))
    return make_intrinsics(focal, focal, width / 2.0, height / 2.0)


def project_cam(intrinsics: np.ndarray, points_cam: np.ndarray) -> np.ndarray:
    """Project camera-frame points (..., 3) with K only; raises behind camera."""
    p = np.asarray(points_cam, dtype=float)
    z = p[..., 2]
    if np.any(z <= _MIN_DEPTH):
        raise PointBehindCamera("camera-frame z <= 1e-9")
    u = intrinsics[0, 0] * p[..., 0] / z + intrinsics[0, 2]
    v = intrinsics[1, 1] * p[..., 1] / z + intrinsics[1, 2]
    return np.stack([u, v], axis=-1)


def project(camera: CameraParams, point_world: np.ndarray) -> np.ndarray:
    """Project world points (..., 3) to pixels (..., 2)."""
    return project_cam(camera.intrinsics, camera.world_to_camera(point_world))


def backproject(camera: CameraParams, pixel: np.ndarray, depth: float) -> np.ndarray:
    """Invert projection for a pixel at the given camera-frame depth."""
    u, v = float(pixel[0]), float(pixel[1])
    q = np.array(
        [
            (u - camera.cx) / camera.fx * depth,
            (v - camera.cy) / camera.fy * depth,
            depth,
        ]
    )
    return camera.camera_to_world(q)


def _reprojection_residuals(
    cameras: list[CameraParams], observations: np.ndarray, point: np.ndarray
) -> np.ndarray:
    res = []
    for cam, obs in zip(cameras, observations):
        res.append(project(cam, point) - obs)
    return np.concatenate(res)


def triangulate(cameras: list[CameraParams], observations) -> np.ndarray:
    """DLT triangulation refined by one Gauss-Newton step on reprojection.

    Raises DegenerateGeometry when the stacked design matrix is rank
    deficient (parallel rays) or the homogeneous solution lies at infinity.
    """
    if len(cameras) < 2:
        raise ValueError("triangulation needs at least two cameras")
    obs = np.asarray(observations, dtype=float).reshape(len(cameras), 2)
    rows = []
    for cam, (u, v) in zip(cameras, obs):
        P = cam.projection_matrix()
        rows.append(u * P[2] - P[0])
        rows.append(v * P[2] - P[1])
    A = np.asarray(rows)
    # Normalize rows so the rank test is scale-free.
    norms = np.linalg.norm(A, axis=1)
    A = A / np.maximum(norms, 1e-300)[:, None]
    _, s, vt = np.linalg.svd(A)
    if s[2] <= 1e-10 * s[0]:
        raise DegenerateGeometry("design matrix rank deficient")
    X = vt[-1]
    if abs(X[3]) <= 1e-10 * np.linalg.norm(X[:3]):
        raise DegenerateGeometry("triangulated point at infinity")
    point = X[:3] / X[3]

    # Single damped Gauss-Newton polish on the geometric error, kept only
    # when it improves on the algebraic solution.
    try:
        r0 = _reprojection_residuals(cameras, obs, point)
    except PointBehindCamera:
        return point
    J = np.zeros((r0.size, 3))
    eps = 1e-6 * max(1.0, float(np.linalg.norm(point)))
    for k in range(3):
        dp = np.zeros(3)
        dp[k] = eps
        try:
            rp = _reprojection_residuals(cameras, obs, point + dp)
            rm = _reprojection_residuals(cameras, obs, point - dp)
        except PointBehindCamera:
            return point
        J[:, k] = (rp - rm) / (2 * eps)
    JtJ = J.T @ J
    JtJ[np.diag_indices(3)] += 1e-12 * max(1.0, np.trace(JtJ))
    try:
        step = np.linalg.solve(JtJ, -J.T @ r0)
    except np.linalg.LinAlgError:
        return point
    candidate = point + step
    try:
        r1 = _reprojection_residuals(cameras, obs, candidate)
    except PointBehindCamera:
        return point
    if r1 @ r1 < r0 @ r0:
        return candidate
    return point


def procrustes_align(source, target) -> tuple[np.ndarray, np.ndarray, float]:
    """Similarity transform (R, t, s) minimizing sum ||s R x + t - y||^2.

    Umeyama's closed form; R is orthonormal with det +1. Raises
    DegenerateInput when the source points are all coincident.
    """
    X = np.asarray(source, dtype=float)
    Y = np.asarray(target, dtype=float)
    if X.shape != Y.shape or X.ndim != 2 or X.shape[1] != 3:
        raise ValueError("source and target must both be (n, 3)")
    n = X.shape[0]
    if n < 3:
        raise ValueError("need at least 3 point pairs")
    mu_x = X.mean(axis=0)
    mu_y = Y.mean(axis=0)
    Xc = X - mu_x
    Yc = Y - mu_y
    var_x = (Xc**2).sum() / n
    if var_x <= 1e-24:
        raise DegenerateInput("source covariance is rank-0")
    cov = Yc.T @ Xc / n
    U, D, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    scale = float(np.trace(np.diag(D) @ S) / var_x)
    t = mu_y - scale * R @ mu_x
    return R, t, scale


def look_at(
    center: np.ndarray, target: np.ndarray, up: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Camera-to-world rotation/translation for a camera at `center` looking
    at `target`, with image "up" aligned against the world `up` direction."""
    center = np.asarray(center, dtype=float)
    z = np.asarray(target, dtype=float) - center
    nz = np.linalg.norm(z)
    if nz < 1e-12:
        raise ValueError("look_at target coincides with camera center")
    z = z / nz
    up = np.asarray(up, dtype=float)
    y = -(up - (up @ z) * z)  # image y points down
    ny = np.linalg.norm(y)
    if ny < 1e-12:
        raise ValueError("up direction parallel to viewing direction")
    y = y / ny
    x = np.cross(y, z)
    R_cw = np.stack([x, y, z], axis=1)
    return R_cw, center.copy()
