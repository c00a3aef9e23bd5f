"""Pin-hole camera primitives: intrinsics, poses, projection, radial distortion.

Conventions used throughout the package: world coordinates in millimetres,
image coordinates in pixels, angles in radians. A pose maps world points into
the camera frame via ``x_cam = R @ x_world + t`` with the optical axis along
+z. All types are immutable values and every function is pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NonPositiveDepth

__all__ = [
    "Intrinsics",
    "Pose",
    "Distortion",
    "intrinsic_matrix",
    "rotation_from_rodrigues",
    "rodrigues_from_rotation",
    "rotation_derivatives",
    "project",
    "project_points",
    "perspective_pixels",
    "distort",
    "distort_points",
    "undistort",
    "undistort_points",
]

# Angle below which sin/cos ratios switch to their Taylor expansions.
_SMALL_ANGLE = 1e-7


def _as_vec(x, n: int) -> np.ndarray:
    v = np.asarray(x, dtype=float).reshape(n)
    return v


@dataclass(frozen=True)
class Intrinsics:
    """Scale factors (pixels), skew, and principal point (pixels)."""

    alpha: float
    beta: float
    gamma: float = 0.0
    u0: float = 0.0
    v0: float = 0.0

    def __post_init__(self):
        vals = (self.alpha, self.beta, self.gamma, self.u0, self.v0)
        if not np.all(np.isfinite(vals)):
            raise ValueError("intrinsic parameters must be finite")
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("scale factors must be positive")

    @property
    def matrix(self) -> np.ndarray:
        """Upper-triangular 3x3 intrinsic matrix."""
        return np.array(
            [
                [self.alpha, self.gamma, self.u0],
                [0.0, self.beta, self.v0],
                [0.0, 0.0, 1.0],
            ]
        )


def intrinsic_matrix(intr: Intrinsics) -> np.ndarray:
    """Arrange intrinsic parameters as the 3x3 projection matrix."""
    return intr.matrix


@dataclass(frozen=True)
class Distortion:
    """Second-order radial distortion coefficients, zero by default."""

    k1: float = 0.0
    k2: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite((self.k1, self.k2))):
            raise ValueError("distortion coefficients must be finite")

    @property
    def is_zero(self) -> bool:
        return self.k1 == 0.0 and self.k2 == 0.0


# rotation parameterization


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def rotation_from_rodrigues(rvec) -> np.ndarray:
    """Rotation matrix for an axis-angle vector (angle = vector norm)."""
    r = _as_vec(rvec, 3)
    theta = float(np.linalg.norm(r))
    if theta < _SMALL_ANGLE:
        a = 1.0 - theta * theta / 6.0
        b = 0.5 - theta * theta / 24.0
    else:
        a = np.sin(theta) / theta
        # 2*sin(theta/2)**2 avoids cancellation in 1 - cos(theta)
        b = 2.0 * np.sin(theta / 2.0) ** 2 / (theta * theta)
    k = _skew(r)
    return np.eye(3) + a * k + b * (k @ k)


def rodrigues_from_rotation(rot) -> np.ndarray:
    """Axis-angle vector of a rotation matrix, stable near 0 and pi."""
    rot = np.asarray(rot, dtype=float)
    w = np.array(
        [rot[2, 1] - rot[1, 2], rot[0, 2] - rot[2, 0], rot[1, 0] - rot[0, 1]]
    )
    s = 0.5 * float(np.linalg.norm(w))  # |sin(theta)|
    c = 0.5 * (float(np.trace(rot)) - 1.0)
    theta = float(np.arctan2(s, c))
    if theta < _SMALL_ANGLE:
        return 0.5 * w
    if np.pi - theta > 1e-4:
        return (theta / (2.0 * s)) * w
    # Near pi the skew part vanishes; recover the axis from the symmetric part.
    sym = 0.5 * (rot + rot.T)
    outer = (sym - c * np.eye(3)) / (1.0 - c)
    k = int(np.argmax(np.diag(outer)))
    axis = outer[:, k] / np.sqrt(max(outer[k, k], np.finfo(float).tiny))
    axis /= np.linalg.norm(axis)
    if axis @ w < 0.0:
        axis = -axis
    return theta * axis


def rotation_derivatives(rvec) -> np.ndarray:
    """Partial derivatives of the rotation matrix, shape (3, 3, 3).

    Entry ``[i]`` is the derivative of ``rotation_from_rodrigues(rvec)`` with
    respect to component ``i`` of the axis-angle vector.
    """
    r = _as_vec(rvec, 3)
    theta = float(np.linalg.norm(r))
    t2 = theta * theta
    if theta < 1e-4:
        a = 1.0 - t2 / 6.0
        b = 0.5 - t2 / 24.0
        c1 = -1.0 / 3.0 + t2 / 30.0  # d(sin t / t)/dt / t
        c2 = -1.0 / 12.0 + t2 / 180.0  # d((1-cos t)/t^2)/dt / t
    else:
        sin_t = np.sin(theta)
        one_minus_cos = 2.0 * np.sin(theta / 2.0) ** 2
        a = sin_t / theta
        b = one_minus_cos / t2
        c1 = (theta * np.cos(theta) - sin_t) / (t2 * theta)
        c2 = (theta * sin_t - 2.0 * one_minus_cos) / (t2 * t2)
    k = _skew(r)
    k2 = k @ k
    out = np.empty((3, 3, 3))
    for i in range(3):
        ei = np.zeros(3)
        ei[i] = 1.0
        eik = _skew(ei)
        out[i] = c1 * r[i] * k + a * eik + c2 * r[i] * k2 + b * (eik @ k + k @ eik)
    return out


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid world-to-camera transform: axis-angle rotation plus translation."""

    rodrigues: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = _as_vec(self.rodrigues, 3).copy()
        t = _as_vec(self.translation, 3).copy()
        if not (np.isfinite(r).all() and np.isfinite(t).all()):
            raise ValueError("pose parameters must be finite")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rodrigues", r)
        object.__setattr__(self, "translation", t)

    @property
    def matrix(self) -> np.ndarray:
        """3x3 rotation matrix view of the axis-angle parameters."""
        return rotation_from_rodrigues(self.rodrigues)

    @classmethod
    def from_matrix(cls, rot, t) -> "Pose":
        rot = np.asarray(rot, dtype=float)
        if rot.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if np.linalg.norm(rot.T @ rot - np.eye(3)) > 1e-8 or np.linalg.det(rot) < 0:
            raise ValueError("matrix is not a proper rotation")
        return cls(rodrigues_from_rotation(rot), _as_vec(t, 3))

    def transform(self, points) -> np.ndarray:
        """Map world points (n, 3) into the camera frame."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.matrix.T + self.translation


# projection


def perspective_pixels(camera_points, intr: Intrinsics) -> np.ndarray:
    """Pixels for camera-frame points (n, 3) with strictly positive depth."""
    cam = np.atleast_2d(np.asarray(camera_points, dtype=float))
    z = cam[:, 2]
    if np.any(z <= 0.0) or not np.all(np.isfinite(cam)):
        raise NonPositiveDepth("point at or behind the camera plane")
    u = (intr.alpha * cam[:, 0] + intr.gamma * cam[:, 1]) / z + intr.u0
    v = intr.beta * cam[:, 1] / z + intr.v0
    return np.column_stack([u, v])


def project_points(world, intr: Intrinsics, pose: Pose) -> np.ndarray:
    """Project world points (n, 3) to pixels (n, 2)."""
    return perspective_pixels(pose.transform(world), intr)


def project(wp, intr: Intrinsics, pose: Pose) -> np.ndarray:
    """Project a single world point to inhomogeneous pixel coordinates."""
    return project_points(_as_vec(wp, 3)[None, :], intr, pose)[0]


# radial distortion

def _radial_gain(points, intr: Intrinsics, dist: Distortion) -> tuple:
    pts = np.asarray(points, dtype=float)
    du = pts[..., 0] - intr.u0
    dv = pts[..., 1] - intr.v0
    # Radius is normalized by the scale factors so the polynomial argument is
    # dimensionless; the correction itself stays in pixels.
    r2 = (du / intr.alpha) ** 2 + (dv / intr.beta) ** 2
    g = dist.k1 * r2 + dist.k2 * r2 * r2
    return du, dv, g


def undistort_points(observed, intr: Intrinsics, dist: Distortion) -> np.ndarray:
    """Closed-form map from distorted pixels to corrected pixels."""
    pts = np.asarray(observed, dtype=float)
    du, dv, g = _radial_gain(pts, intr, dist)
    return np.stack([pts[..., 0] + du * g, pts[..., 1] + dv * g], axis=-1)


def undistort(observed, intr: Intrinsics, dist: Distortion) -> np.ndarray:
    return undistort_points(_as_vec(observed, 2), intr, dist)


def distort_points(
    ideal,
    intr: Intrinsics,
    dist: Distortion,
    max_iterations: int = 50,
    tol: float = 1e-12,
) -> np.ndarray:
    """Invert the correction map by fixed-point iteration.

    Produces distorted pixels whose correction reproduces ``ideal``. Starts at
    the ideal position and iterates ``p <- ideal - delta(p)``; converges for
    mild distortion (correction slope below one).
    """
    target = np.asarray(ideal, dtype=float)
    if dist.is_zero:
        return target.copy()
    p = target.copy()
    for _ in range(max_iterations):
        du, dv, g = _radial_gain(p, intr, dist)
        new = np.stack([target[..., 0] - du * g, target[..., 1] - dv * g], axis=-1)
        step = float(np.max(np.abs(new - p)))
        p = new
        if step < tol:
            return p
    raise NoConvergence(
        f"distortion inversion did not reach {tol} in {max_iterations} iterations"
    )


def distort(ideal, intr: Intrinsics, dist: Distortion, **kwargs) -> np.ndarray:
    return distort_points(_as_vec(ideal, 2), intr, dist, **kwargs)
