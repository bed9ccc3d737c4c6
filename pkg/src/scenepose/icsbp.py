"""Instance-colouring stick-breaking process over pixel embeddings.

Slots claim soft masks one after another. Each step picks a seed pixel from
the unexplained scope, turns embedding distance to the seed into an alpha
mask with a Gaussian kernel, and hands ``scope * alpha`` to the slot. For
video, seeds chosen on the first frame are reused on later frames so that a
slot keeps its identity.

All randomness is drawn from a :class:`RandomTape` so tests can script
exact draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CapacityExceeded, ShapeMismatch, TapeExhausted, ValidationError


class RandomTape:
    """Source of uniform draws in ``[0, 1)``.

    Either replays an explicit sequence (optionally cycling) or wraps a
    seeded numpy generator. Draws are consumed in row-major order.
    """

    def __init__(self, values=None, *, seed=None, cycle: bool = False):
        if (values is None) == (seed is None):
            raise ValueError("give exactly one of values or seed")
        self._values = None if values is None else np.asarray(values, dtype=np.float64).ravel()
        self._seed = seed
        self._cycle = cycle
        self.reset()

    @classmethod
    def from_seed(cls, seed) -> "RandomTape":
        return cls(seed=seed)

    @classmethod
    def constant(cls, value: float) -> "RandomTape":
        return cls([value], cycle=True)

    def reset(self) -> None:
        self.cursor = 0
        self._rng = None if self._seed is None else np.random.default_rng(self._seed)

    def uniform(self, shape=()) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64))
        if self._rng is not None:
            out = self._rng.random(n)
        elif self._cycle:
            out = self._values[(self.cursor + np.arange(n)) % len(self._values)]
        else:
            if self.cursor + n > len(self._values):
                raise TapeExhausted(f"needed {n} draws, {len(self._values) - self.cursor} left")
            out = self._values[self.cursor:self.cursor + n]
        self.cursor += n
        return np.array(out).reshape(shape)


@dataclass(frozen=True)
class EmbeddingGrid:
    data: np.ndarray
    features: np.ndarray | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or not np.all(np.isfinite(data)):
            raise ValidationError("embeddings must be a finite H x W x D array")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[:2]


def _grid(embeddings) -> EmbeddingGrid:
    return embeddings if isinstance(embeddings, EmbeddingGrid) else EmbeddingGrid(embeddings)


@dataclass(frozen=True)
class Seed:
    slot: int
    vector: np.ndarray
    pixel: tuple[int, int]


@dataclass(frozen=True)
class MaskState:
    """Masks claimed so far plus the running scope.

    ``scope`` is the unexplained remainder after ``step`` slots; once every
    slot has been processed it is the remaining scope flagged as unused.
    """

    masks: np.ndarray
    scope: np.ndarray
    pre_scope: np.ndarray
    seeds: tuple[Seed, ...] = ()
    idle: np.ndarray = field(default=None)
    step: int = 0

    def __post_init__(self):
        if self.idle is None:
            object.__setattr__(self, "idle", np.zeros(len(self.masks), dtype=bool))

    @property
    def capacity(self) -> int:
        return len(self.masks)

    @property
    def remaining_scope(self) -> np.ndarray:
        return self.scope

    @property
    def special_masks(self) -> np.ndarray:
        return self.pre_scope[:-1]

    @property
    def active_slots(self) -> list[int]:
        return [k for k in range(self.step) if not self.idle[k]]

    def seed_for(self, slot: int) -> Seed | None:
        return next((s for s in self.seeds if s.slot == slot), None)


def pre_scope(logits) -> tuple[np.ndarray, np.ndarray]:
    """Softmax over the last axis of ``H x W x K'`` logits.

    Returns the ``K'-1`` special masks (channel-first) and the scope ``s0``,
    which is the last channel.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 3 or logits.shape[-1] < 2:
        raise ValidationError("pre-scope logits must be H x W x K' with K' >= 2")
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = np.moveaxis(e / e.sum(axis=-1, keepdims=True), -1, 0)
    return p[:-1], p[-1]


def gaussian_alpha(embeddings, seed_vec, sigma_k: float) -> np.ndarray:
    if sigma_k <= 0:
        raise ValidationError("kernel bandwidth must be positive")
    data = _grid(embeddings).data
    d2 = np.sum((data - np.asarray(seed_vec, dtype=np.float64)) ** 2, axis=-1)
    return np.exp(-d2 / (2.0 * sigma_k**2))


def init_state(s0, capacity: int, special=None) -> MaskState:
    s0 = np.asarray(s0, dtype=np.float64)
    special = np.zeros((0,) + s0.shape) if special is None else np.asarray(special, dtype=np.float64)
    return MaskState(
        masks=np.zeros((capacity,) + s0.shape),
        scope=s0,
        pre_scope=np.concatenate([special, s0[None]], axis=0),
    )


def _check_capacity(state: MaskState) -> None:
    if state.step >= state.capacity:
        raise CapacityExceeded(f"all {state.capacity} slots already used")


def sbp_step(state: MaskState, alpha, seed: Seed | None = None) -> MaskState:
    _check_capacity(state)
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != state.scope.shape:
        raise ShapeMismatch(f"alpha {alpha.shape} vs scope {state.scope.shape}")
    masks = state.masks.copy()
    masks[state.step] = state.scope * alpha
    seeds = state.seeds if seed is None else state.seeds + (seed,)
    return replace(state, masks=masks, scope=state.scope * (1.0 - alpha), seeds=seeds, step=state.step + 1)


def mark_idle(state: MaskState) -> MaskState:
    """Skip the current slot: zero mask, scope untouched."""
    _check_capacity(state)
    idle = state.idle.copy()
    idle[state.step] = True
    return replace(state, idle=idle, step=state.step + 1)


def select_seed(state: MaskState, embeddings, tape: RandomTape) -> tuple[tuple[int, int], np.ndarray]:
    """Seed pixel at the argmax of ``scope * u`` (first in row-major order on ties)."""
    data = _grid(embeddings).data
    u = tape.uniform(state.scope.shape)
    flat = int(np.argmax(state.scope * u))
    i, j = np.unravel_index(flat, state.scope.shape)
    return (int(i), int(j)), data[i, j].copy()


def check_termination(state: MaskState, tape: RandomTape) -> bool:
    """True when per-pixel Bernoulli(scope) draws are all zero, i.e. the slot is idle."""
    u = tape.uniform(state.scope.shape)
    return not bool(np.any(u < state.scope))


def decompose_frame(
    embeddings,
    pre_scope_logits,
    K: int,
    tape: RandomTape,
    seeds_in=None,
    sigma_k: float = 1.0,
) -> MaskState:
    """Run all ``K`` slots on one frame.

    Without ``seeds_in`` (first frame) each slot first samples termination
    and, if active, samples a seed. With ``seeds_in`` (later frames) the
    stored seed vectors are reused in slot order and slots without a stored
    seed stay idle; the tape is not touched.
    """
    if K < 1:
        raise ValidationError("need at least one slot")
    grid = _grid(embeddings)
    if pre_scope_logits is None:
        special, s0 = None, np.ones(grid.shape)
    else:
        special, s0 = pre_scope(pre_scope_logits)
        if s0.shape != grid.shape:
            raise ShapeMismatch(f"pre-scope {s0.shape} vs embeddings {grid.shape}")
    state = init_state(s0, K, special)

    if seeds_in is not None:
        stored = {s.slot: s for s in seeds_in}
        for k in range(K):
            seed = stored.get(k)
            if seed is None:
                state = mark_idle(state)
            else:
                state = sbp_step(state, gaussian_alpha(grid, seed.vector, sigma_k), seed)
        return state

    for k in range(K):
        if check_termination(state, tape):
            state = mark_idle(state)
            continue
        pixel, vec = select_seed(state, grid, tape)
        state = sbp_step(state, gaussian_alpha(grid, vec, sigma_k), Seed(k, vec, pixel))
    return state


def label_map(state: MaskState) -> np.ndarray:
    """Per-pixel argmax labels: 0 for special masks and remaining scope, ``k+1`` for slot ``k``."""
    stack = np.concatenate([state.special_masks, state.scope[None], state.masks], axis=0)
    arg = np.argmax(stack, axis=0)
    n_bg = len(state.special_masks) + 1
    return np.where(arg < n_bg, 0, arg - n_bg + 1).astype(np.int64)
