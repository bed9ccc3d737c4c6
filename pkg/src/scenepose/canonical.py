"""Shape-based canonical pose via the minimum volume principle."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import EmptyCloud
from .geometry import (
    EPS_EXTENT,
    RigidPose,
    Rotation,
    _as_points,
    centroid,
    distance_to_identity,
    geodesic_distance,
    rotate_inverse,
)
from .so3grid import RotationGrid

DEFAULT_BETA = 0.01
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class CanonicalPoseResult:
    pose: RigidPose
    min_volume: float
    candidate_count: int
    chosen_distance: float
    rotation_index: int
    degenerate: bool = False


def grid_volumes(points: np.ndarray, matrices: np.ndarray) -> np.ndarray:
    """AABB volume of ``points`` seen from each rotation, with extents floored."""
    points = np.asarray(points, dtype=np.float64)
    p0, p1, p2 = points[:, 0], points[:, 1], points[:, 2]
    out = np.empty(len(matrices))
    step = max(1, _CHUNK_ELEMENTS // max(1, len(points)))
    for start in range(0, len(matrices), step):
        m = matrices[start:start + step]
        vol = None
        for k in range(3):
            # same summation order as rotate_inverse, so results are bit-identical
            col = p0 * m[:, 0, k, None] + p1 * m[:, 1, k, None] + p2 * m[:, 2, k, None]
            ext = np.maximum(col.max(axis=1) - col.min(axis=1), EPS_EXTENT)
            vol = ext if vol is None else vol * ext
        out[start:start + step] = vol
    return out


def select_rotation(volumes: np.ndarray, distances: np.ndarray, beta: float) -> tuple[int, float, int]:
    """Index of the rotation nearest the identity among near-minimal boxes.

    Returns ``(index, v_min, candidate_count)``. Ties on distance go to the
    lowest index.
    """
    v_min = float(volumes.min())
    band = np.flatnonzero(volumes <= (1.0 + beta) * v_min)
    j = band[int(np.argmin(distances[band]))]
    return int(j), v_min, len(band)


def canonical_pose(pc, grid: RotationGrid, beta: float = DEFAULT_BETA, box_size: float = 0.4) -> CanonicalPoseResult:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    pts = _as_points(pc)
    if len(pts) == 0:
        raise EmptyCloud("canonical pose of an empty cloud")
    T = centroid(pts)
    volumes = grid_volumes(pts, grid.matrices)
    distances = distance_to_identity(grid.matrices)
    j, v_min, count = select_rotation(volumes, distances, beta)
    local = rotate_inverse(pts, grid.matrices[j])
    degenerate = bool(np.any(local.max(axis=0) - local.min(axis=0) < EPS_EXTENT))
    return CanonicalPoseResult(
        pose=RigidPose(T, grid[j], box_size),
        min_volume=v_min,
        candidate_count=count,
        chosen_distance=float(distances[j]),
        rotation_index=j,
        degenerate=degenerate,
    )


def cube_group() -> list[Rotation]:
    """The 24 proper rotations mapping the cube onto itself."""
    group = []
    for perm in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            m = np.zeros((3, 3))
            m[np.arange(3), perm] = signs
            if np.linalg.det(m) > 0:
                group.append(Rotation(m))
    return group


def symmetry_aware_rotation_error(estimate: Rotation, truth: Rotation, symmetry_group=None) -> float:
    """Smallest geodesic distance from ``estimate`` to ``truth @ g`` over the group."""
    group = cube_group() if symmetry_group is None else list(symmetry_group)
    if not group:
        raise ValueError("symmetry group must be nonempty")
    return min(geodesic_distance(estimate, Rotation(truth.m @ g.m)) for g in group)
