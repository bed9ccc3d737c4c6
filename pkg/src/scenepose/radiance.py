"""Density composition of several component fields and voxelised shape recovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .canonical import DEFAULT_BETA, CanonicalPoseResult, canonical_pose
from .errors import EmptyShape, InvalidDepth, ValidationError
from .geometry import CameraModel, RigidPose, Rotation, rotate_inverse
from .icsbp import RandomTape
from .so3grid import RotationGrid

SIGMA_MAX = 10.0
SIGMA_T = 0.5
DEFAULT_SHARPNESS = 1000.0
EMPTY_LOGIT = -1e9


def softplus(x):
    return np.logaddexp(0.0, x)


def _softmax(x, axis=-1):
    z = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def compose(logits, sigma_max: float = SIGMA_MAX) -> tuple[np.ndarray, np.ndarray]:
    """Scene density and per-component shares from component logits.

    ``logits`` has components on the last axis. Returns ``sigma`` with that
    axis removed and ``sigma_hat`` of the same shape as ``logits``.
    """
    if sigma_max <= 0:
        raise ValidationError("sigma_max must be positive")
    logits = np.asarray(logits, dtype=np.float64)
    sigma = sigma_max * np.tanh(softplus(logits).sum(axis=-1))
    return sigma, sigma[..., None] * _softmax(logits)


def composed_colour(logits, colours, sigma_max: float = SIGMA_MAX) -> np.ndarray:
    _, sigma_hat = compose(logits, sigma_max)
    return np.einsum("...k,...kc->...c", sigma_hat, np.asarray(colours, dtype=np.float64)) / sigma_max


def occupancy_probability(logits):
    return np.tanh(softplus(np.asarray(logits, dtype=np.float64)))


class ComponentField:
    """Deterministic map from points (and view directions) to a density logit and colour.

    Subclasses implement :meth:`logits`; colour is constant per component
    unless :meth:`colours` is overridden.
    """

    colour: np.ndarray

    def logits(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def colours(self, points: np.ndarray, view_dirs=None) -> np.ndarray:
        return np.broadcast_to(self.colour, np.shape(points)[:-1] + (3,))

    def evaluate(self, points, view_dirs=None) -> tuple[np.ndarray, np.ndarray]:
        points = np.asarray(points, dtype=np.float64)
        return self.logits(points), self.colours(points, view_dirs)


def _colour(c) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (3,) or np.any(c < 0) or np.any(c > 1):
        raise ValidationError(f"colour must be a 3-vector in [0, 1], got {c}")
    return c


class ConstantField(ComponentField):
    def __init__(self, logit: float, colour=(0.5, 0.5, 0.5)):
        self.value = float(logit)
        self.colour = _colour(colour)

    def logits(self, points):
        return np.full(np.shape(points)[:-1], self.value)


class SphereField(ComponentField):
    """Solid sphere; the logit is ``sharpness`` times the signed depth inside."""

    def __init__(self, centre, radius: float, colour=(1.0, 0.0, 0.0), sharpness: float = DEFAULT_SHARPNESS):
        self.centre = np.asarray(centre, dtype=np.float64)
        self.radius = float(radius)
        self.colour = _colour(colour)
        self.sharpness = float(sharpness)

    def logits(self, points):
        return self.sharpness * (self.radius - np.linalg.norm(points - self.centre, axis=-1))


class BoxField(ComponentField):
    """Solid oriented box with half extents ``half`` along its local axes."""

    def __init__(self, centre, half, rotation: Rotation | None = None, colour=(0.0, 1.0, 0.0),
                 sharpness: float = DEFAULT_SHARPNESS):
        self.centre = np.asarray(centre, dtype=np.float64)
        self.half = np.asarray(half, dtype=np.float64)
        self.rotation = rotation or Rotation.identity()
        self.colour = _colour(colour)
        self.sharpness = float(sharpness)

    def logits(self, points):
        local = rotate_inverse(np.asarray(points, dtype=np.float64) - self.centre, self.rotation.m)
        inside = np.min(self.half - np.abs(local), axis=-1)
        return self.sharpness * inside


class HalfSpaceField(ComponentField):
    """Everything on the far side of a plane, e.g. a table top at ``z <= offset``."""

    def __init__(self, normal=(0.0, 0.0, 1.0), offset: float = 0.0, colour=(0.5, 0.5, 0.5),
                 sharpness: float = DEFAULT_SHARPNESS):
        n = np.asarray(normal, dtype=np.float64)
        self.normal = n / np.linalg.norm(n)
        self.offset = float(offset)
        self.colour = _colour(colour)
        self.sharpness = float(sharpness)

    def logits(self, points):
        return self.sharpness * (self.offset - points @ self.normal)


class VoxelGridField(ComponentField):
    """Tabulated logits on an ``S^3`` grid inside a pose box; nearest-cell lookup."""

    def __init__(self, pose: RigidPose, table, colour=(0.5, 0.5, 0.5), outside: float = EMPTY_LOGIT):
        self.pose = pose
        self.table = np.asarray(table, dtype=np.float64)
        S = self.table.shape[0]
        if self.table.shape != (S, S, S):
            raise ValidationError("voxel table must be S x S x S")
        self.colour = _colour(colour)
        self.outside = float(outside)

    def logits(self, points):
        S = self.table.shape[0]
        c = self.pose.to_canonical(np.asarray(points).reshape(-1, 3))
        idx = np.floor((c + 1.0) / 2.0 * S).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < S), axis=-1)
        idx = np.clip(idx, 0, S - 1)
        out = np.where(inside, self.table[idx[:, 0], idx[:, 1], idx[:, 2]], self.outside)
        return out.reshape(np.shape(points)[:-1])


@dataclass
class ComposedField:
    components: list
    sigma_max: float = SIGMA_MAX

    def __post_init__(self):
        if self.sigma_max <= 0:
            raise ValidationError("sigma_max must be positive")

    def evaluate(self, points, view_dirs=None):
        """Return ``(sigma, sigma_hat, colour, logits, component_colours)``."""
        points = np.asarray(points, dtype=np.float64)
        if self.components:
            evals = [f.evaluate(points, view_dirs) for f in self.components]
            logits = np.stack([e[0] for e in evals], axis=-1)
            cols = np.stack([e[1] for e in evals], axis=-2)
        else:
            logits = np.full(points.shape[:-1] + (1,), EMPTY_LOGIT)
            cols = np.zeros(points.shape[:-1] + (1, 3))
        sigma, sigma_hat = compose(logits, self.sigma_max)
        colour = np.einsum("...k,...kc->...c", sigma_hat, cols) / self.sigma_max
        return sigma, sigma_hat, colour, logits, cols

    def density(self, points) -> np.ndarray:
        return self.evaluate(points)[0]


def voxel_centres(S: int) -> np.ndarray:
    """Cell midpoints of ``[-1, 1]^3`` on an ``S^3`` grid, indexed ``[x, y, z]``."""
    c = -1.0 + (2.0 * np.arange(S) + 1.0) / S
    return np.stack(np.meshgrid(c, c, c, indexing="ij"), axis=-1)


@dataclass(frozen=True)
class VoxelShape:
    S: int
    occupancy: np.ndarray
    centres: np.ndarray
    sigma_T: float
    probability: np.ndarray

    @property
    def occupied_centres(self) -> np.ndarray:
        return self.centres[self.occupancy]

    @property
    def count(self) -> int:
        return int(self.occupancy.sum())


def voxel_occupancy(field: ComponentField, pose: RigidPose, S: int = 24, sigma_T: float = SIGMA_T) -> VoxelShape:
    if S < 2:
        raise ValidationError("need at least 2 voxels per dimension")
    centres = voxel_centres(S)
    world = pose.to_world(centres.reshape(-1, 3))
    logits, _ = field.evaluate(world)
    prob = occupancy_probability(logits).reshape(S, S, S)
    return VoxelShape(S, prob > sigma_T, centres, sigma_T, prob)


def shape_pose_from_voxels(
    shape: VoxelShape,
    world_pose: RigidPose,
    grid: RotationGrid,
    beta: float = DEFAULT_BETA,
    z_ground: float | None = None,
) -> CanonicalPoseResult:
    """Canonical pose of the occupied voxel centres, measured in world space.

    With ``z_ground`` set, centres below the ground plane are ignored.
    """
    pts = world_pose.to_world(shape.occupied_centres)
    if z_ground is not None:
        pts = pts[pts[:, 2] >= z_ground]
    if len(pts) == 0:
        raise EmptyShape("no occupied voxels")
    return canonical_pose(pts, grid, beta, box_size=world_pose.s)


def sample_rays(cam: CameraModel, pixels, d_surface, delta: float, near: float, tape: RandomTape):
    """Vectorised two-point ray sampling.

    ``pixels`` is ``(N, 2)`` in ``(u, v)`` order. Draws ``(N, 2)`` uniforms in
    ray order, surface first, so each ray's randomness depends only on its index.
    Returns surface points, air points and the air-sample density per ray.
    """
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    d = np.asarray(d_surface, dtype=np.float64).reshape(-1)
    if delta <= 0:
        raise ValidationError("surface thickness must be positive")
    if np.any(d <= near):
        raise InvalidDepth("surface depth must exceed the near plane")
    u = tape.uniform((len(d), 2))
    origin, direction = cam.pixel_rays(pixels[:, 0], pixels[:, 1])
    depth_surface = d + u[:, 0] * delta
    depth_air = near + u[:, 1] * (d - near)
    p_surface = origin + depth_surface[:, None] * direction
    p_air = origin + depth_air[:, None] * direction
    return p_surface, p_air, 1.0 / (d - near)


def sample_ray_points(cam: CameraModel, pixel, d_surface: float, delta: float, near: float, tape: RandomTape):
    ps, pa, rho = sample_rays(cam, [pixel], [d_surface], delta, near, tape)
    return ps[0], pa[0], float(rho[0])
