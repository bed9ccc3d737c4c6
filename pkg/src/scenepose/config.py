"""Hyperparameters and scene manifests."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .geometry import CameraModel, RigidPose, Rotation


@dataclass(frozen=True)
class Hyperparameters:
    sigma_std: float = 0.1
    sigma_max: float = 10.0
    box_size: float = 0.4
    n_thresh: int = 10
    t_max: float = 0.1
    voxels: int = 24
    delta: float = 0.01
    beta: float = 0.01
    slots: int = 4
    grid_level: int = 2
    sigma_t: float = 0.5
    kernel_bandwidth: float = 1.0
    near: float = 0.01
    z_ground: float = 0.0
    seed: int = 0

    def __post_init__(self):
        positive = ("sigma_std", "sigma_max", "box_size", "t_max", "delta", "kernel_bandwidth", "near")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.slots < 1 or self.voxels < 2 or self.n_thresh < 0 or self.beta < 0:
            raise ValidationError("slots >= 1, voxels >= 2, n_thresh >= 0 and beta >= 0 required")
        if not 0 < self.sigma_t < 1:
            raise ValidationError("sigma_t must lie in (0, 1)")

    @classmethod
    def from_dict(cls, d: dict | None) -> "Hyperparameters":
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**d)

    def with_overrides(self, **kw) -> "Hyperparameters":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def as_dict(self) -> dict:
        return asdict(self)


def camera_to_dict(cam: CameraModel) -> dict:
    return {
        "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
        "width": cam.width, "height": cam.height,
        "extrinsic": {"T": cam.extrinsic.T.tolist(), "R": cam.extrinsic.R.m.tolist()},
    }


def camera_from_dict(d: dict) -> CameraModel:
    try:
        ext = d.get("extrinsic", {})
        pose = RigidPose(np.asarray(ext.get("T", [0, 0, 0]), dtype=float), Rotation(ext.get("R", np.eye(3))))
        return CameraModel(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                           int(d["width"]), int(d["height"]), pose)
    except KeyError as e:
        raise ValidationError(f"camera is missing {e}") from None


@dataclass
class SceneManifest:
    """A generated scene on disk: cameras, tensor paths, primitives and settings."""

    root: Path
    frames: int
    cameras: list
    files: list
    primitives: list
    table: dict
    hyperparameters: Hyperparameters
    extra: dict

    @classmethod
    def load(cls, path) -> "SceneManifest":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ValidationError(f"cannot read manifest {path}: {e}") from None
        for key in ("frames", "cameras", "files"):
            if key not in doc:
                raise ValidationError(f"manifest is missing '{key}'")
        root = path.parent
        frames = int(doc["frames"])
        if frames < 1 or len(doc["cameras"]) != frames or len(doc["files"]) != frames:
            raise ValidationError("frames, cameras and files must agree in length")
        for entry in doc["files"]:
            for key in ("rgb", "depth", "embeddings"):
                if key not in entry:
                    raise ValidationError(f"frame entry is missing '{key}'")
            for rel in entry.values():
                if not (root / rel).is_file():
                    raise ValidationError(f"referenced file does not exist: {rel}")
        return cls(
            root=root,
            frames=frames,
            cameras=[camera_from_dict(c) for c in doc["cameras"]],
            files=doc["files"],
            primitives=doc.get("primitives", []),
            table=doc.get("table", {"z": 0.0, "colour": [0.5, 0.5, 0.5]}),
            hyperparameters=Hyperparameters.from_dict(doc.get("hyperparameters")),
            extra={k: v for k, v in doc.items() if k not in
                   {"frames", "cameras", "files", "primitives", "table", "hyperparameters"}},
        )

    def path(self, frame: int, key: str) -> Path | None:
        rel = self.files[frame].get(key)
        return None if rel is None else self.root / rel
