"""Equivolumetric rotation grids built from HEALPix and the Hopf fibration.

A level-``L`` grid crosses the ``12 * 4**L`` ring-scheme HEALPix pixel
centres on S^2 with ``6 * 2**L`` half-step-offset angles on S^1, giving
``72 * 8**L`` rotations. The raw Hopf grid never contains the identity, so
the whole grid is left-translated by the inverse of its element nearest to
the identity. Left translation is an isometry of SO(3), so cell volumes and
the resolution are unchanged, and the identity becomes an exact member.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LevelOutOfRange
from .geometry import Rotation, matrix_to_quat, quat_to_matrix

MAX_LEVEL = 3


def healpix_ring_centres(nside: int) -> tuple[np.ndarray, np.ndarray]:
    """Colatitude ``theta`` and longitude ``phi`` of ring-scheme pixel centres."""
    npix = 12 * nside * nside
    ncap = 2 * nside * (nside - 1)
    pix = np.arange(npix)
    z = np.empty(npix)
    phi = np.empty(npix)

    north = pix < ncap
    p = pix[north]
    ring = (1 + np.floor(np.sqrt(1 + 2 * p)).astype(int)) // 2
    iphi = p + 1 - 2 * ring * (ring - 1)
    z[north] = 1.0 - ring**2 * 4.0 / npix
    phi[north] = (iphi - 0.5) * (np.pi / 2) / ring

    equator = (pix >= ncap) & (pix < npix - ncap)
    p = pix[equator] - ncap
    ring = p // (4 * nside) + nside
    iphi = p % (4 * nside) + 1
    fodd = np.where((ring + nside) % 2 == 1, 1.0, 0.5)
    z[equator] = (2 * nside - ring) * 2.0 / (3 * nside)
    phi[equator] = (iphi - fodd) * np.pi / (2 * nside)

    south = pix >= npix - ncap
    p = npix - pix[south]
    ring = (1 + np.floor(np.sqrt(2 * p - 1)).astype(int)) // 2
    iphi = 4 * ring + 1 - (p - 2 * ring * (ring - 1))
    z[south] = -1.0 + ring**2 * 4.0 / npix
    phi[south] = (iphi - 0.5) * (np.pi / 2) / ring

    return np.arccos(z), phi


def circle_angles(level: int) -> np.ndarray:
    n = 6 * 2**level
    step = 2 * np.pi / n
    return np.arange(n) * step + step / 2


def hopf_to_quat(theta, phi, psi) -> np.ndarray:
    """Hopf coordinates to unit quaternions (w, x, y, z)."""
    ct, st = np.cos(theta / 2), np.sin(theta / 2)
    return np.stack(
        [ct * np.cos(psi / 2), ct * np.sin(psi / 2), st * np.cos(phi + psi / 2), st * np.sin(phi + psi / 2)],
        axis=-1,
    )


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def _canonical_sign(q: np.ndarray) -> np.ndarray:
    return np.where(q[..., :1] < 0, -q, q)


@dataclass(frozen=True, eq=False)
class RotationGrid:
    """Immutable set of rotations, stored as ``(M, 3, 3)`` matrices."""

    level: int
    matrices: np.ndarray
    quaternions: np.ndarray

    def __post_init__(self):
        for name in ("matrices", "quaternions"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    def __len__(self):
        return len(self.matrices)

    def __getitem__(self, i) -> Rotation:
        return Rotation(self.matrices[i])

    @property
    def rotations(self) -> list[Rotation]:
        return [Rotation(m) for m in self.matrices]

    @classmethod
    def from_matrices(cls, mats, level: int = -1) -> "RotationGrid":
        """Wrap arbitrary rotation matrices, e.g. for single-element test grids."""
        mats = np.asarray(mats, dtype=np.float64).reshape(-1, 3, 3)
        quats = np.array([matrix_to_quat(m) for m in mats])
        return cls(level, mats, quats)

    def to_bytes(self) -> bytes:
        return self.matrices.tobytes()


def generate_grid(level: int) -> RotationGrid:
    if not isinstance(level, (int, np.integer)) or not 0 <= level <= MAX_LEVEL:
        raise LevelOutOfRange(f"grid level must be in [0, {MAX_LEVEL}], got {level!r}")
    theta, phi = healpix_ring_centres(2**level)
    psi = circle_angles(level)
    q = hopf_to_quat(np.repeat(theta, len(psi)), np.repeat(phi, len(psi)), np.tile(psi, len(theta)))
    q = _canonical_sign(q)

    anchor = int(np.argmax(np.abs(q[:, 0])))
    conj = q[anchor] * np.array([1.0, -1.0, -1.0, -1.0])
    q = _canonical_sign(quat_multiply(conj, q))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    q[anchor] = [1.0, 0.0, 0.0, 0.0]

    mats = quat_to_matrix(q)
    mats[anchor] = np.eye(3)
    return RotationGrid(level, mats, q)


def nearest_distances(grid: RotationGrid, quats: np.ndarray, chunk: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Geodesic distance from each query quaternion to its nearest grid rotation."""
    quats = np.asarray(quats, dtype=np.float64).reshape(-1, 4)
    dist = np.empty(len(quats))
    index = np.empty(len(quats), dtype=np.int64)
    for start in range(0, len(quats), chunk):
        dots = np.abs(quats[start:start + chunk] @ grid.quaternions.T)
        j = np.argmax(dots, axis=1)
        best = dots[np.arange(len(j)), j]
        dist[start:start + chunk] = 2 * np.arccos(np.clip(best, -1.0, 1.0))
        index[start:start + chunk] = j
    return dist, index


def grid_resolution(grid: RotationGrid, probes: int = 10_000, seed: int = 0) -> float:
    """Worst nearest-neighbour distance from random probe rotations to the grid."""
    if probes < 1:
        raise ValueError("probes must be >= 1")
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((probes, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    dist, _ = nearest_distances(grid, q)
    return float(dist.max())
