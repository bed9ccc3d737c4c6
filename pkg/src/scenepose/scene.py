"""Synthetic table-top RGB-D videos rendered from analytic fields.

Primitives (spheres and boxes) rest on a table plane and drift slowly across
frames. Each frame is ray-marched at a fixed step; the first sample whose
composed density reaches ``sigma_max / 2`` defines the depth. Alongside
RGB-D the generator writes ground-truth labels and oracle embeddings (one-hot
instance id plus Gaussian noise) for the decomposition stage.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import Hyperparameters, camera_to_dict
from .errors import OverlapRejected, ValidationError
from .geometry import CameraModel, Rotation, rot_z
from .radiance import SIGMA_MAX, BoxField, HalfSpaceField, SphereField, compose
from .tensorfile import write_tensor

RAY_STEP = 0.002
MAX_ATTEMPTS = 100
MAX_OBJECTS = 4

DEFAULT_SKELETON = {
    "frames": 5,
    "objects": 3,
    "image": {"width": 128, "height": 96, "fx": 120.0, "fy": 120.0},
    "camera": {"eye": [0.0, -0.75, 0.6], "target": [0.0, 0.0, 0.03]},
    "table": {"z": 0.0, "colour": [0.5, 0.5, 0.5]},
    "embedding_noise": 0.1,
    "embedding_dims": MAX_OBJECTS + 1,
    "prescope_gain": 10.0,
    "ray_step": RAY_STEP,
    "near": 0.05,
    "far": 3.0,
    "spawn_region": [[-0.2, -0.15], [0.2, 0.15]],
    # one-hot embeddings sit sqrt(2) apart; a bandwidth of 1.0 lets slots bleed across instances
    "hyperparameters": {"kernel_bandwidth": 0.6},
}


@dataclass
class Primitive:
    """An object with a per-frame pose. ``size`` is a radius or half extents."""

    id: int
    kind: str
    size: np.ndarray
    colour: np.ndarray
    centres: np.ndarray
    yaws: np.ndarray

    @property
    def footprint(self) -> float:
        if self.kind == "sphere":
            return float(self.size[0])
        return float(np.hypot(self.size[0], self.size[1]))

    def rotation(self, frame: int) -> Rotation:
        return rot_z(float(self.yaws[frame]))

    def field(self, frame: int):
        c = self.centres[frame]
        if self.kind == "sphere":
            return SphereField(c, float(self.size[0]), self.colour)
        return BoxField(c, self.size, self.rotation(frame), self.colour)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "type": self.kind,
            "size": self.size.tolist(),
            "colour": self.colour.tolist(),
            "poses": [
                {"centre": self.centres[t].tolist(), "R": self.rotation(t).m.tolist()}
                for t in range(len(self.centres))
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Primitive":
        poses = d["poses"]
        yaws = [float(np.arctan2(p["R"][1][0], p["R"][0][0])) for p in poses]
        return cls(d["id"], d["type"], np.asarray(d["size"], dtype=float), np.asarray(d["colour"], dtype=float),
                   np.array([p["centre"] for p in poses], dtype=float), np.array(yaws))


def _spec_primitive(i: int, spec: dict, frames: int, rng: np.random.Generator, region) -> Primitive:
    kind = spec.get("type") or ("sphere" if rng.random() < 0.5 else "box")
    if kind == "sphere":
        size = np.array([spec.get("radius", rng.uniform(0.04, 0.07))], dtype=float)
        half_z = size[0]
    elif kind == "box":
        size = np.asarray(spec.get("half", rng.uniform(0.03, 0.07, 3)), dtype=float)
        half_z = size[2]
    else:
        raise ValidationError(f"unknown primitive type {kind!r}")
    colour = np.asarray(spec.get("colour", rng.uniform(0.1, 0.9, 3)), dtype=float)
    lo, hi = np.asarray(region[0], dtype=float), np.asarray(region[1], dtype=float)
    start = np.asarray(spec["centre"], dtype=float) if "centre" in spec else np.append(rng.uniform(lo, hi), half_z)
    velocity = np.asarray(spec.get("velocity", np.append(rng.uniform(-0.01, 0.01, 2), 0.0)), dtype=float)
    yaw0 = float(spec.get("yaw", rng.uniform(0, np.pi)))
    yaw_rate = float(spec.get("yaw_rate", rng.uniform(-0.1, 0.1)))
    t = np.arange(frames)
    centres = start + t[:, None] * velocity
    yaws = yaw0 + t * yaw_rate
    return Primitive(i + 1, kind, size, colour, centres, yaws)


def _overlaps(a: Primitive, b: Primitive, margin: float = 0.01) -> bool:
    gap = np.linalg.norm(a.centres[:, :2] - b.centres[:, :2], axis=1)
    return bool(np.any(gap < a.footprint + b.footprint + margin))


def place_primitives(skeleton: dict, frames: int, rng: np.random.Generator) -> list[Primitive]:
    specs = skeleton.get("primitives")
    if specs is None:
        specs = [{} for _ in range(int(skeleton.get("objects", 3)))]
    if len(specs) > MAX_OBJECTS:
        raise ValidationError(f"at most {MAX_OBJECTS} primitives are supported")
    region = skeleton.get("spawn_region", DEFAULT_SKELETON["spawn_region"])
    placed: list[Primitive] = []
    for i, spec in enumerate(specs):
        for _ in range(MAX_ATTEMPTS):
            prim = _spec_primitive(i, spec, frames, rng, region)
            if not any(_overlaps(prim, other) for other in placed):
                placed.append(prim)
                break
        else:
            raise OverlapRejected(f"could not place primitive {i + 1} after {MAX_ATTEMPTS} attempts")
    return placed


def table_field(table: dict) -> HalfSpaceField:
    return HalfSpaceField((0.0, 0.0, 1.0), float(table.get("z", 0.0)), table.get("colour", (0.5, 0.5, 0.5)))


def render(fields, ids, cam: CameraModel, step: float = RAY_STEP, near: float = 0.05, far: float = 3.0,
           sigma_max: float = SIGMA_MAX):
    """Ray-march composed fields; returns ``depth``, ``rgb`` and ``labels`` images.

    ``ids[k]`` is the label written where component ``k`` dominates the hit
    point. Rays that never reach ``sigma_max / 2`` get depth 0 and label 0.
    """
    fields = list(fields)
    H, W = cam.height, cam.width
    rows, cols = np.mgrid[0:H, 0:W]
    origin, direction = cam.pixel_rays(cols.ravel(), rows.ravel())
    n = H * W
    depth = np.zeros(n)
    rgb = np.zeros((n, 3))
    labels = np.zeros(n, dtype=np.int64)
    ids = np.asarray(ids)
    active = np.arange(n)
    for k in range(int(np.floor((far - near) / step)) + 1):
        if len(active) == 0:
            break
        t = near + k * step
        pts = origin + t * direction[active]
        logits = np.stack([f.logits(pts) for f in fields], axis=-1)
        sigma, _ = compose(logits, sigma_max)
        hit = sigma >= sigma_max / 2
        if np.any(hit):
            idx = active[hit]
            hit_logits = logits[hit]
            depth[idx] = t
            cols_k = np.stack([f.colours(pts[hit]) for f in fields], axis=-2)
            weights = np.exp(hit_logits - hit_logits.max(axis=1, keepdims=True))
            weights /= weights.sum(axis=1, keepdims=True)
            rgb[idx] = np.einsum("nk,nkc->nc", weights, cols_k)
            labels[idx] = ids[np.argmax(hit_logits, axis=1)]
            active = active[~hit]
    return depth.reshape(H, W), rgb.reshape(H, W, 3), labels.reshape(H, W)


def oracle_embeddings(labels: np.ndarray, dims: int, noise: float, rng: np.random.Generator) -> np.ndarray:
    if labels.max() >= dims:
        raise ValidationError("embedding has fewer channels than instance ids")
    emb = np.eye(dims)[labels]
    return emb + noise * rng.standard_normal(emb.shape)


def oracle_prescope(embeddings: np.ndarray, gain: float) -> np.ndarray:
    """Background-vs-scope logits read off the background channel."""
    bg = embeddings[..., 0]
    return gain * np.stack([bg, 1.0 - bg], axis=-1)


def gen_scene(skeleton: dict | None, out_dir, seed: int = 0, frames: int | None = None) -> Path:
    """Render a synthetic video into ``out_dir`` and return the manifest path."""
    sk = {**DEFAULT_SKELETON, **(skeleton or {})}
    frames = int(frames if frames is not None else sk["frames"])
    if frames < 1:
        raise ValidationError("need at least one frame")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    prims = place_primitives(sk, frames, rng)
    img = sk["image"]
    cam = CameraModel.look_at(sk["camera"]["eye"], sk["camera"]["target"], float(img["fx"]), float(img["fy"]),
                              int(img["width"]), int(img["height"]))
    table = sk["table"]
    hp_block = {**DEFAULT_SKELETON["hyperparameters"], **(sk.get("hyperparameters") or {})}
    hp = Hyperparameters.from_dict(hp_block).with_overrides(seed=seed)
    files = []
    for t in range(frames):
        fields = [table_field(table)] + [p.field(t) for p in prims]
        ids = [0] + [p.id for p in prims]
        depth, rgb, labels = render(fields, ids, cam, float(sk["ray_step"]), float(sk["near"]), float(sk["far"]),
                                    hp.sigma_max)
        emb = oracle_embeddings(labels, int(sk["embedding_dims"]), float(sk["embedding_noise"]), rng)
        entry = {}
        for key, arr in (
            ("rgb", rgb),
            ("depth", depth),
            ("labels", labels.astype(np.int32)),
            ("embeddings", emb),
            ("prescope", oracle_prescope(emb, float(sk["prescope_gain"]))),
        ):
            name = f"frame_{t:03d}_{key}.obpt"
            write_tensor(out / name, arr)
            entry[key] = name
        files.append(entry)
    manifest = {
        "version": 1,
        "frames": frames,
        "seed": seed,
        "cameras": [camera_to_dict(cam)] * frames,
        "files": files,
        "primitives": [p.to_dict() for p in prims],
        "table": table,
        "embedding_noise": sk["embedding_noise"],
        "ray_step": sk["ray_step"],
        "hyperparameters": hp.as_dict(),
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return path
