"""Training objective terms as pure functions.

Per-ray terms accept batches along leading axes and return the sum over the
batch, so a single ray gives its own value.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DimMismatch, ValidationError

LOG_FLOOR = 1e-12
SIGMA_STD = 0.1


def _log(x):
    return np.log(np.maximum(x, LOG_FLOOR))


def gaussian_rgb_pdf(observed, colours, sigma_std: float = SIGMA_STD) -> np.ndarray:
    """Product of per-channel normal densities of ``observed`` under each colour.

    ``observed`` is ``(..., 3)``, ``colours`` is ``(..., K, 3)``; returns ``(..., K)``.
    """
    x = np.asarray(observed, dtype=np.float64)[..., None, :]
    c = np.asarray(colours, dtype=np.float64)
    z = (x - c) / sigma_std
    return np.exp(-0.5 * np.sum(z * z, axis=-1)) / (sigma_std * np.sqrt(2 * np.pi)) ** 3


def colour_loss(observed, colours, sigma_hat_surface, sigma_std: float = SIGMA_STD, sigma_max: float = 10.0) -> float:
    w = np.asarray(sigma_hat_surface, dtype=np.float64) / sigma_max
    if np.any(w.sum(axis=-1) > 1.0 + 1e-6 / sigma_max):
        raise ValidationError("component densities sum above sigma_max")
    mix = np.sum(gaussian_rgb_pdf(observed, colours, sigma_std) * w, axis=-1)
    return float(-np.sum(_log(mix)))


def depth_loss(sigma_surface, sigma_air, rho_air) -> float:
    rho_air = np.asarray(rho_air, dtype=np.float64)
    if np.any(rho_air <= 0):
        raise ValidationError("air sample density must be positive")
    return float(np.sum(-_log(np.asarray(sigma_surface, dtype=np.float64)) + np.asarray(sigma_air) / rho_air))


@dataclass(frozen=True)
class GaussianParams:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=np.float64))
        std = np.atleast_1d(np.asarray(self.std, dtype=np.float64))
        if mean.shape != std.shape:
            raise DimMismatch(f"mean {mean.shape} vs std {std.shape}")
        if np.any(std <= 0):
            raise ValidationError("std must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)


def kl_diag_gaussian(q: GaussianParams, p: GaussianParams) -> float:
    """KL(q || p) between diagonal Gaussians, summed over dimensions."""
    if q.mean.shape != p.mean.shape:
        raise DimMismatch(f"q has shape {q.mean.shape}, p has {p.mean.shape}")
    terms = np.log(p.std / q.std) + (q.std**2 + (q.mean - p.mean) ** 2) / (2 * p.std**2) - 0.5
    return float(np.sum(terms))


def where_loss(T_hat, T_shape, active=None) -> float:
    T_hat = np.asarray(T_hat, dtype=np.float64).reshape(-1, 3)
    T_shape = np.asarray(T_shape, dtype=np.float64).reshape(-1, 3)
    if T_hat.shape != T_shape.shape:
        raise DimMismatch("T_hat and T_shape differ in length")
    active = np.ones(len(T_hat), dtype=bool) if active is None else np.asarray(active, dtype=bool)
    if active.shape != (len(T_hat),):
        raise DimMismatch("active flags differ in length")
    d = T_hat[active] - T_shape[active]
    return float(np.sum(d * d))


def attention_loss(masks, colours, sigma_hat_surface, observed, sigma_std: float = SIGMA_STD,
                   sigma_max: float = 10.0, valid=None) -> float:
    """Mask-weighted mixture likelihood plus mask-weighted occupancy, summed over pixels.

    ``masks`` is ``(K, H, W)``; per-pixel inputs are ``(H, W, K, 3)``,
    ``(H, W, K)`` and ``(H, W, 3)``. ``valid`` selects surface pixels.
    """
    m = np.moveaxis(np.asarray(masks, dtype=np.float64), 0, -1)
    w = np.asarray(sigma_hat_surface, dtype=np.float64) / sigma_max
    if m.shape != w.shape:
        raise DimMismatch(f"masks {m.shape} vs densities {w.shape}")
    pdf = gaussian_rgb_pdf(observed, colours, sigma_std)
    per_pixel = -(_log(np.sum(m * pdf * w, axis=-1)) + _log(np.sum(m * w, axis=-1)))
    if valid is not None:
        per_pixel = per_pixel[np.asarray(valid, dtype=bool)]
    return float(np.sum(per_pixel))


def scope_loss(remaining_scope) -> float:
    return float(np.sum(remaining_scope))


@dataclass(frozen=True)
class LossBreakdown:
    colour: float = 0.0
    depth: float = 0.0
    kl: float = 0.0
    where: float = 0.0
    att: float = 0.0
    scope: float = 0.0
    total: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def total_loss(colour=0.0, depth=0.0, kl=0.0, where=0.0, att=0.0, scope=0.0) -> LossBreakdown:
    parts = [float(v) for v in (colour, depth, kl, where, att, scope)]
    return LossBreakdown(*parts, total=float(sum(parts)))
