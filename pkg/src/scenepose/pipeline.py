"""End-to-end processing of a scene manifest.

Per frame: backproject RGB-D, decompose the embedding image into slot masks,
canonicalise each slot's point set, voxelise the slot's analytic field in its
pose box, score reconstruction losses and segmentation metrics. Everything
random is drawn from tapes derived from one seed, so reruns are
byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .canonical import canonical_pose
from .config import Hyperparameters, SceneManifest
from .errors import EmptyShape, NoForeground, ScenePoseError, ValidationError
from .geometry import RigidPose, Rotation, backproject_pixels
from .icsbp import RandomTape, Seed, decompose_frame, label_map
from .losses import attention_loss, colour_loss, depth_loss, scope_loss, total_loss, where_loss
from .metrics import score
from .radiance import compose, sample_rays, shape_pose_from_voxels, voxel_occupancy
from .scene import Primitive, table_field
from .so3grid import generate_grid
from .tensorfile import read_tensor, write_tensor

log = logging.getLogger(__name__)

POSE_HEADER = ["frame", "slot", "tx", "ty", "tz",
               "r00", "r01", "r02", "r10", "r11", "r12", "r20", "r21", "r22", "volume", "idle"]


@dataclass
class TrackState:
    """Slot identities and pose history carried across frames."""

    capacity: int
    seeds: tuple[Seed, ...] | None = None
    idle: np.ndarray | None = None
    last_T: dict = field(default_factory=dict)
    history: list = field(default_factory=list)

    def record(self, poses: dict) -> None:
        for slot, pose in poses.items():
            self.last_T[slot] = pose.centre.copy()
        self.history.append(dict(poses))

    @property
    def frames(self) -> int:
        return len(self.history)


@dataclass
class SlotResult:
    slot: int
    n_points: int
    pose: RigidPose
    fallback: bool
    volume: float
    primitive: int | None = None
    shape_pose: RigidPose | None = None
    shape_volume: float | None = None
    voxels: np.ndarray | None = None


def _floats(a) -> list:
    return [float(x) for x in np.asarray(a, dtype=np.float64).ravel()]


def _pose_row(frame: int, slot: int, pose: RigidPose, vol: float, idle: bool) -> list:
    return [frame, slot, *(repr(x) for x in _floats(pose.centre)), *(repr(x) for x in _floats(pose.R.m)),
            repr(float(vol)), int(idle)]


def _write_csv(path: Path, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(POSE_HEADER)
    w.writerows(rows)
    path.write_text(buf.getvalue())


def _slot_pose(k, pts, weights, cloud, track, grid, hp) -> tuple[RigidPose, bool, float]:
    """Canonical pose of the slot's points, or the fallback when too few remain."""
    if len(pts) >= max(hp.n_thresh, 1):
        res = canonical_pose(pts, grid, hp.beta, hp.box_size)
        return res.pose, False, res.min_volume
    if k in track.last_T:
        T = track.last_T[k]
    else:
        # first frame without enough points: soft-mask weighted centroid
        T = weights @ cloud / max(float(weights.sum()), 1e-12)
    return RigidPose(T, Rotation.identity(), hp.box_size), True, 0.0


def _nearest_primitive(T, prims: list[Primitive], frame: int) -> Primitive | None:
    if not prims:
        return None
    d = [np.linalg.norm(p.centres[frame] - T) for p in prims]
    return prims[int(np.argmin(d))]


def process_frame(t: int, manifest: SceneManifest, hp: Hyperparameters, grid, track: TrackState,
                  prims: list[Primitive], decomp_tape: RandomTape, ray_tape: RandomTape) -> dict:
    cam = manifest.cameras[t]
    rgb = read_tensor(manifest.path(t, "rgb")).astype(np.float64)
    depth = read_tensor(manifest.path(t, "depth")).astype(np.float64)
    emb = read_tensor(manifest.path(t, "embeddings")).astype(np.float64)
    pre_path = manifest.path(t, "prescope")
    pre = None if pre_path is None else read_tensor(pre_path).astype(np.float64)
    cloud, pix = backproject_pixels(depth, rgb, cam)

    state = decompose_frame(emb, pre, hp.slots, decomp_tape, seeds_in=track.seeds, sigma_k=hp.kernel_bandwidth)
    if track.seeds is None:
        track.seeds = state.seeds
        track.idle = state.idle.copy()
    labels = label_map(state)
    point_labels = labels[pix[:, 0], pix[:, 1]]

    slots: list[SlotResult] = []
    for k in state.active_slots:
        keep = (point_labels == k + 1) & (cloud.points[:, 2] >= hp.z_ground)
        weights = state.masks[k][pix[:, 0], pix[:, 1]]
        try:
            pose, fallback, vol = _slot_pose(k, cloud.points[keep], weights, cloud.points, track, grid, hp)
        except ScenePoseError as e:
            raise type(e)(f"frame {t} slot {k}: {e}") from e
        res = SlotResult(k, int(keep.sum()), pose, fallback, vol)
        prim = _nearest_primitive(pose.centre, prims, t)
        if prim is not None:
            res.primitive = prim.id
            box = RigidPose(pose.centre, pose.R, hp.box_size)
            shape = voxel_occupancy(prim.field(t), box, hp.voxels, hp.sigma_t)
            try:
                sp = shape_pose_from_voxels(shape, box, grid, hp.beta, hp.z_ground)
                res.shape_pose, res.shape_volume = sp.pose, sp.min_volume
                res.voxels = box.to_world(shape.occupied_centres)
                res.voxels = res.voxels[res.voxels[:, 2] >= hp.z_ground]
            except EmptyShape:
                log.info("frame %d slot %d: empty voxel shape", t, k)
        slots.append(res)
    track.record({s.slot: s.pose for s in slots})

    losses = _frame_losses(manifest, hp, cam, rgb, depth, pix, state, slots, prims, t, ray_tape)
    truth_path = manifest.path(t, "labels")
    metrics = None
    if truth_path is not None:
        truth = read_tensor(truth_path)
        try:
            metrics = score(labels, truth).as_dict()
        except NoForeground:
            metrics = None
    return {"state": state, "labels": labels, "slots": slots, "losses": losses, "metrics": metrics}


def _frame_losses(manifest, hp, cam, rgb, depth, pix, state, slots, prims, t, tape) -> dict:
    by_id = {p.id: p for p in prims}
    with_field = [s for s in slots if s.primitive is not None]
    fields = [table_field(manifest.table)] + [by_id[s.primitive].field(t) for s in with_field]
    rows, cols = pix[:, 0], pix[:, 1]
    d = depth[rows, cols]
    valid = d > hp.near
    rows, cols, d = rows[valid], cols[valid], d[valid]
    observed = rgb[rows, cols]
    uv = np.stack([cols, rows], axis=1).astype(np.float64)
    p_surf, p_air, rho = sample_rays(cam, uv, d, hp.delta, hp.near, tape)

    def evaluate(points):
        logits = np.stack([f.logits(points) for f in fields], axis=-1)
        colours = np.stack([f.colours(points) for f in fields], axis=-2)
        sigma, sigma_hat = compose(logits, hp.sigma_max)
        return sigma, sigma_hat, colours

    sig_s, hat_s, col_s = evaluate(p_surf)
    sig_a, _, _ = evaluate(p_air)
    masks = np.concatenate([state.special_masks[:1], state.masks[[s.slot for s in with_field]]], axis=0)
    shaped = [s for s in slots if s.shape_pose is not None]
    parts = dict(
        colour=colour_loss(observed, col_s, hat_s, hp.sigma_std, hp.sigma_max),
        depth=depth_loss(sig_s, sig_a, rho),
        kl=0.0,
        where=where_loss([s.pose.centre for s in shaped], [s.shape_pose.T for s in shaped]) if shaped else 0.0,
        att=attention_loss(masks[:, rows, cols], col_s, hat_s, observed, hp.sigma_std, hp.sigma_max),
        scope=scope_loss(state.remaining_scope),
    )
    return total_loss(**parts).as_dict()


def _centre_errors(slots: list[SlotResult], prims: list[Primitive], t: int) -> dict:
    """Per primitive: distance from the true centre to the shape centre of its best-supported slot."""
    out = {}
    for p in prims:
        mine = [s for s in slots if s.primitive == p.id and s.shape_pose is not None]
        if not mine:
            out[str(p.id)] = None
            continue
        best = max(mine, key=lambda s: (s.n_points, -s.slot))
        out[str(p.id)] = float(np.linalg.norm(best.shape_pose.T - p.centres[t]))
    return out


def _pose_json(pose: RigidPose | None) -> dict | None:
    if pose is None:
        return None
    return {"T": _floats(pose.centre), "R": [_floats(r) for r in pose.R.m]}


def run_pipeline(manifest_path, out_dir, seed: int | None = None, grid_level: int | None = None,
                 frames: int | None = None) -> dict:
    """Process a manifest and write reports into ``out_dir``; returns the summary."""
    manifest = SceneManifest.load(manifest_path)
    hp = manifest.hyperparameters.with_overrides(seed=seed, grid_level=grid_level)
    n_frames = manifest.frames if frames is None else int(frames)
    if not 1 <= n_frames <= manifest.frames:
        raise ValidationError(f"frames must be in 1..{manifest.frames}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = generate_grid(hp.grid_level)
    prims = [Primitive.from_dict(p) for p in manifest.primitives]

    ss = np.random.SeedSequence(hp.seed)
    decomp_ss, ray_ss = ss.spawn(2)
    decomp_tape = RandomTape(seed=decomp_ss)
    ray_seeds = ray_ss.spawn(n_frames)

    track = TrackState(hp.slots)
    pose_rows, shape_rows, frame_summaries = [], [], []
    for t in range(n_frames):
        res = process_frame(t, manifest, hp, grid, track, prims, decomp_tape, RandomTape(seed=ray_seeds[t]))
        state, labels, slots = res["state"], res["labels"], res["slots"]
        write_tensor(out / f"masks_{t:03d}.obpt", state.masks)
        write_tensor(out / f"scope_{t:03d}.obpt", state.remaining_scope)
        write_tensor(out / f"labels_{t:03d}.obpt", labels.astype(np.uint8))
        Image.fromarray(labels.astype(np.uint8), mode="L").save(out / f"labels_{t:03d}.png")
        for s in slots:
            pose_rows.append(_pose_row(t, s.slot, s.pose, s.volume, False))
            if s.shape_pose is not None:
                shape_rows.append(_pose_row(t, s.slot, s.shape_pose, s.shape_volume, False))
                lines = "".join(f"{x!r} {y!r} {z!r}\n" for x, y, z in s.voxels.tolist())
                (out / f"voxels_{t:03d}_slot{s.slot}.txt").write_text(lines)
        report = {
            "frame": t,
            "active_slots": [s.slot for s in slots],
            "idle_slots": [int(k) for k in np.flatnonzero(state.idle)],
            "losses": res["losses"],
            "metrics": res["metrics"],
            "centre_errors": _centre_errors(slots, prims, t),
            "slots": [
                {
                    "slot": s.slot,
                    "points": s.n_points,
                    "fallback": s.fallback,
                    "primitive": s.primitive,
                    "pose": _pose_json(s.pose),
                    "volume": s.volume,
                    "shape_pose": _pose_json(s.shape_pose),
                    "shape_volume": s.shape_volume,
                }
                for s in slots
            ],
        }
        (out / f"report_frame_{t:03d}.json").write_text(json.dumps(report, indent=1, sort_keys=True, allow_nan=False))
        frame_summaries.append({k: report[k] for k in ("frame", "metrics", "losses", "centre_errors", "active_slots")})
        log.info("frame %d: %s", t, res["metrics"])
    _write_csv(out / "poses.csv", pose_rows)
    _write_csv(out / "shape_poses.csv", shape_rows)

    scored = [f["metrics"] for f in frame_summaries if f["metrics"] is not None]
    means = {m: float(np.mean([s[m] for s in scored])) for m in ("ari_fg", "msc_fg", "miou_bg")} if scored else None
    summary = {
        "frames": n_frames,
        "seed": hp.seed,
        "grid_level": hp.grid_level,
        "hyperparameters": hp.as_dict(),
        "mean_metrics": means,
        "per_frame": frame_summaries,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True, allow_nan=False))
    return summary
