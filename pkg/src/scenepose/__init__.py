"""Shape-based object poses and stick-breaking scene decomposition for RGB-D video."""

from .canonical import CanonicalPoseResult, canonical_pose, cube_group, symmetry_aware_rotation_error
from .config import Hyperparameters, SceneManifest
from .errors import ScenePoseError, ValidationError
from .geometry import (
    Aabb,
    CameraModel,
    PointCloud,
    RigidPose,
    Rotation,
    aabb_of,
    backproject,
    canonical_transform,
    centroid,
    geodesic_distance,
    volume,
)
from .icsbp import MaskState, RandomTape, decompose_frame, label_map, sbp_step
from .losses import LossBreakdown, colour_loss, depth_loss, kl_diag_gaussian, total_loss
from .metrics import SegScores, ari_fg, miou_bg, msc_fg, score
from .radiance import ComposedField, compose, shape_pose_from_voxels, voxel_occupancy
from .so3grid import RotationGrid, generate_grid, grid_resolution
from .tensorfile import read_tensor, write_tensor

__version__ = "0.1.0"

__all__ = [
    "Aabb",
    "CameraModel",
    "CanonicalPoseResult",
    "ComposedField",
    "Hyperparameters",
    "LossBreakdown",
    "MaskState",
    "PointCloud",
    "RandomTape",
    "RigidPose",
    "Rotation",
    "RotationGrid",
    "SceneManifest",
    "ScenePoseError",
    "SegScores",
    "ValidationError",
    "aabb_of",
    "ari_fg",
    "backproject",
    "canonical_pose",
    "canonical_transform",
    "centroid",
    "colour_loss",
    "compose",
    "cube_group",
    "decompose_frame",
    "depth_loss",
    "generate_grid",
    "geodesic_distance",
    "grid_resolution",
    "kl_diag_gaussian",
    "label_map",
    "miou_bg",
    "msc_fg",
    "read_tensor",
    "sbp_step",
    "score",
    "shape_pose_from_voxels",
    "symmetry_aware_rotation_error",
    "total_loss",
    "volume",
    "voxel_occupancy",
    "write_tensor",
]
