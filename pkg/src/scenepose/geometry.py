"""Elementary 3D types and transforms.

Rotations are stored as 3x3 matrices acting on column vectors. Point sets are
``(N, 3)`` arrays, so rotating a cloud by ``R`` is ``points @ R.T`` and the
inverse rotation is ``points @ R``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCloud, InvalidRotation, ShapeMismatch, ValidationError

EPS_EXTENT = 1e-6
ROTATION_TOL = 1e-6
REORTHO_TOL = 1e-3


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


class Rotation:
    """Element of SO(3).

    Inputs within ``ROTATION_TOL`` of orthonormal are kept bit-for-bit,
    inputs within ``REORTHO_TOL`` are snapped to the nearest rotation, and
    anything worse raises :class:`InvalidRotation`.
    """

    __slots__ = ("m",)

    def __init__(self, m):
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise InvalidRotation(f"expected a finite 3x3 matrix, got shape {m.shape}")
        dev = np.abs(m.T @ m - np.eye(3)).max()
        det = np.linalg.det(m)
        if dev > REORTHO_TOL or det <= 0:
            raise InvalidRotation(f"not a rotation (orthogonality error {dev:.3g}, det {det:.3g})")
        if dev > ROTATION_TOL or abs(det - 1.0) > ROTATION_TOL:
            u, _, vt = np.linalg.svd(m)
            m = u @ vt
        object.__setattr__(self, "m", _readonly(m))

    def __setattr__(self, name, value):
        raise AttributeError("Rotation is immutable")

    def __repr__(self):
        return f"Rotation({np.array2string(self.m, precision=6)})"

    def __eq__(self, other):
        return isinstance(other, Rotation) and np.array_equal(self.m, other.m)

    def __hash__(self):
        return hash(self.m.tobytes())

    def __matmul__(self, other):
        if isinstance(other, Rotation):
            return Rotation(self.m @ other.m)
        return NotImplemented

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.eye(3))

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Rotation":
        axis = np.asarray(axis, dtype=np.float64)
        axis = axis / np.linalg.norm(axis)
        x, y, z = axis
        c, s = np.cos(angle), np.sin(angle)
        k = np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]])
        return cls(c * np.eye(3) + s * k + (1 - c) * np.outer(axis, axis))

    @classmethod
    def from_quaternion(cls, q) -> "Rotation":
        return cls(quat_to_matrix(np.asarray(q, dtype=np.float64)))

    def as_quaternion(self) -> np.ndarray:
        return matrix_to_quat(self.m)

    def inv(self) -> "Rotation":
        return Rotation(self.m.T)

    def apply(self, points) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.m.T


def rot_x(angle: float) -> Rotation:
    return Rotation.from_axis_angle([1, 0, 0], angle)


def rot_y(angle: float) -> Rotation:
    return Rotation.from_axis_angle([0, 1, 0], angle)


def rot_z(angle: float) -> Rotation:
    return Rotation.from_axis_angle([0, 0, 1], angle)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternion(s) ``(..., 4)`` in (w, x, y, z) order to ``(..., 3, 3)``."""
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = np.moveaxis(q, -1, 0)
    m = np.empty(q.shape[:-1] + (3, 3))
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Rotation matrix to a unit quaternion with nonnegative scalar part."""
    m = np.asarray(m, dtype=np.float64)
    tr = np.trace(m)
    # Shepperd's method: pivot on the largest diagonal term for stability.
    i = int(np.argmax([tr, m[0, 0], m[1, 1], m[2, 2]]))
    if i == 0:
        r = np.sqrt(1.0 + tr) * 2
        q = [0.25 * r, (m[2, 1] - m[1, 2]) / r, (m[0, 2] - m[2, 0]) / r, (m[1, 0] - m[0, 1]) / r]
    elif i == 1:
        r = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2
        q = [(m[2, 1] - m[1, 2]) / r, 0.25 * r, (m[0, 1] + m[1, 0]) / r, (m[0, 2] + m[2, 0]) / r]
    elif i == 2:
        r = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2
        q = [(m[0, 2] - m[2, 0]) / r, (m[0, 1] + m[1, 0]) / r, 0.25 * r, (m[1, 2] + m[2, 1]) / r]
    else:
        r = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2
        q = [(m[1, 0] - m[0, 1]) / r, (m[0, 2] + m[2, 0]) / r, (m[1, 2] + m[2, 1]) / r, 0.25 * r]
    q = np.array(q)
    q /= np.linalg.norm(q)
    return -q if q[0] < 0 else q


def random_rotations(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-uniform rotation matrices, shape ``(n, 3, 3)``."""
    q = rng.standard_normal((n, 4))
    return quat_to_matrix(q)


def geodesic_distance(a: Rotation, b: Rotation) -> float:
    """Angle of the relative rotation ``a^T b`` in radians, in ``[0, pi]``."""
    am = a.m if isinstance(a, Rotation) else np.asarray(a)
    bm = b.m if isinstance(b, Rotation) else np.asarray(b)
    c = (np.trace(am.T @ bm) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def distance_to_identity(mats: np.ndarray) -> np.ndarray:
    """Geodesic distance of each ``(..., 3, 3)`` rotation to the identity."""
    c = (np.trace(mats, axis1=-2, axis2=-1) - 1.0) / 2.0
    return np.arccos(np.clip(c, -1.0, 1.0))


@dataclass(frozen=True)
class RigidPose:
    """Translation ``T``, rotation ``R`` and box size ``s``.

    ``deltaT`` is a bounded correction added to ``T``; its components must
    not exceed ``t_max`` in magnitude.
    """

    T: np.ndarray
    R: Rotation = field(default_factory=Rotation.identity)
    s: float = 1.0
    deltaT: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t_max: float = 0.1

    def __post_init__(self):
        T = np.asarray(self.T, dtype=np.float64)
        dT = np.asarray(self.deltaT, dtype=np.float64)
        if T.shape != (3,) or dT.shape != (3,):
            raise ValidationError("T and deltaT must be 3-vectors")
        if not (np.isfinite(self.s) and self.s > 0):
            raise ValidationError(f"box size must be positive, got {self.s}")
        if np.any(np.abs(dT) > self.t_max):
            raise ValidationError(f"|deltaT| exceeds t_max={self.t_max}: {dT}")
        R = self.R if isinstance(self.R, Rotation) else Rotation(self.R)
        object.__setattr__(self, "T", _readonly(T))
        object.__setattr__(self, "deltaT", _readonly(dT))
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "s", float(self.s))

    @property
    def centre(self) -> np.ndarray:
        """Corrected location ``T + deltaT``."""
        return self.T + self.deltaT

    def to_canonical(self, points) -> np.ndarray:
        """Map world points to box coordinates without discarding any."""
        p = np.asarray(points, dtype=np.float64) - self.centre
        return (2.0 / self.s) * rotate_inverse(p, self.R.m)

    def to_world(self, canonical) -> np.ndarray:
        c = np.asarray(canonical, dtype=np.float64)
        return (self.s / 2.0) * (c @ self.R.m.T) + self.centre


def delta_translation(raw, t_max: float) -> np.ndarray:
    """Squash an unbounded offset into ``[-t_max, t_max]`` per axis."""
    return t_max * np.tanh(np.asarray(raw, dtype=np.float64))


@dataclass(frozen=True)
class Aabb:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,) or np.any(hi < lo):
            raise ValidationError("Aabb needs 3-vectors with hi >= lo")
        object.__setattr__(self, "lo", _readonly(lo))
        object.__setattr__(self, "hi", _readonly(hi))

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    colours: np.ndarray | None = None
    features: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValidationError("point coordinates must be finite")
        object.__setattr__(self, "points", pts)
        for name in ("colours", "features"):
            extra = getattr(self, name)
            if extra is not None:
                extra = np.asarray(extra, dtype=np.float64)
                if extra.shape[0] != len(pts):
                    raise ShapeMismatch(f"{name} has {extra.shape[0]} rows for {len(pts)} points")
                object.__setattr__(self, name, extra)

    def __len__(self):
        return len(self.points)

    def subset(self, keep) -> "PointCloud":
        return PointCloud(
            self.points[keep],
            None if self.colours is None else self.colours[keep],
            None if self.features is None else self.features[keep],
        )


def _as_points(pc) -> np.ndarray:
    if isinstance(pc, PointCloud):
        return pc.points
    return np.asarray(pc, dtype=np.float64).reshape(-1, 3)


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus a camera-to-world extrinsic."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    extrinsic: RigidPose = field(default_factory=lambda: RigidPose(np.zeros(3)))

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValidationError("principal point must lie inside the image")

    @classmethod
    def look_at(cls, eye, target, fx, fy, width, height, cx=None, cy=None) -> "CameraModel":
        """Camera at ``eye`` whose optical axis (+z) points at ``target``.

        Image rows grow along the camera +y axis, which is kept pointing
        towards world -z where possible.
        """
        eye = np.asarray(eye, dtype=np.float64)
        z = np.asarray(target, dtype=np.float64) - eye
        z /= np.linalg.norm(z)
        down = np.array([0.0, 0.0, -1.0])
        x = np.cross(down, z)
        if np.linalg.norm(x) < 1e-9:
            x = np.array([1.0, 0.0, 0.0])
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        R = Rotation(np.stack([x, y, z], axis=1))
        return cls(
            fx, fy,
            (width - 1) / 2 if cx is None else cx,
            (height - 1) / 2 if cy is None else cy,
            width, height, RigidPose(eye, R),
        )

    def pixel_rays(self, u, v) -> tuple[np.ndarray, np.ndarray]:
        """World-frame origin and per-unit-depth direction for pixels.

        A point at camera depth ``d`` along pixel ``(u, v)`` is
        ``origin + d * direction``.
        """
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        cam = np.stack([(u - self.cx) / self.fx, (v - self.cy) / self.fy, np.ones_like(u)], axis=-1)
        return self.extrinsic.T.copy(), cam @ self.extrinsic.R.m.T

    def project(self, points) -> tuple[np.ndarray, np.ndarray]:
        """World points to pixel coordinates ``(N, 2)`` and camera depth ``(N,)``."""
        p = rotate_inverse(_as_points(points) - self.extrinsic.T, self.extrinsic.R.m)
        d = p[:, 2]
        uv = np.stack([p[:, 0] / d * self.fx + self.cx, p[:, 1] / d * self.fy + self.cy], axis=-1)
        return uv, d


def rotate_inverse(points: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Apply ``m^-1 = m^T`` to row points, broadcasting over leading axes of ``m``.

    The three products are summed explicitly in a fixed order so a batch of
    rotations and a single rotation give bit-identical coordinates.
    """
    p = points[..., :, None]
    m = np.asarray(m)[..., None, :, :]
    return p[..., 0, :] * m[..., 0, :] + p[..., 1, :] * m[..., 1, :] + p[..., 2, :] * m[..., 2, :]


def centroid(pc) -> np.ndarray:
    pts = _as_points(pc)
    if len(pts) == 0:
        raise EmptyCloud("centroid of an empty cloud")
    return pts.mean(axis=0)


def canonical_transform(pc, pose: RigidPose) -> PointCloud:
    """Box coordinates of the points that fall inside the pose's box."""
    if not isinstance(pc, PointCloud):
        pc = PointCloud(pc)
    c = pose.to_canonical(pc.points)
    keep = np.all(np.abs(c) <= 1.0, axis=1)
    out = pc.subset(keep)
    return PointCloud(c[keep], out.colours, out.features)


def aabb_of(points) -> Aabb:
    pts = _as_points(points)
    if len(pts) == 0:
        raise EmptyCloud("bounding box of an empty cloud")
    return Aabb(pts.min(axis=0), pts.max(axis=0))


def volume(box: Aabb) -> float:
    e = np.maximum(box.extent, EPS_EXTENT)
    return float(e[0] * e[1] * e[2])


def backproject(depth, rgb, cam: CameraModel) -> PointCloud:
    """Lift valid depth pixels to a world-frame cloud; zero depth is skipped."""
    return backproject_pixels(depth, rgb, cam)[0]


def backproject_pixels(depth, rgb, cam: CameraModel) -> tuple[PointCloud, np.ndarray]:
    """As :func:`backproject`, also returning each point's ``(row, col)``."""
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != (cam.height, cam.width):
        raise ShapeMismatch(f"depth {depth.shape} vs camera {(cam.height, cam.width)}")
    if rgb is not None:
        rgb = np.asarray(rgb, dtype=np.float64)
        if rgb.shape != (cam.height, cam.width, 3):
            raise ShapeMismatch(f"rgb {rgb.shape} vs camera {(cam.height, cam.width, 3)}")
    if np.any(depth < 0):
        raise ValidationError("depth must be nonnegative")
    rows, cols = np.nonzero(depth > 0)
    d = depth[rows, cols]
    origin, direction = cam.pixel_rays(cols, rows)
    pts = origin + d[:, None] * direction
    colours = None if rgb is None else rgb[rows, cols]
    return PointCloud(pts, colours), np.stack([rows, cols], axis=1)
