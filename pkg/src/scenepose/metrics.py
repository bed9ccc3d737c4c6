"""Segmentation scores for unsupervised decomposition.

Label 0 is background; any positive id is an instance and ids need not be
contiguous.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np

from .errors import NoForeground, ShapeMismatch


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred).astype(np.int64)
    truth = np.asarray(truth).astype(np.int64)
    if pred.shape != truth.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs truth {truth.shape}")
    return pred.ravel(), truth.ravel()


def _foreground(pred, truth, ignore=None):
    pred, truth = _pair(pred, truth)
    keep = truth >= 1
    if ignore is not None:
        keep &= ~np.asarray(ignore, dtype=bool).ravel()
    if not keep.any():
        raise NoForeground("ground truth has no foreground pixels")
    return pred[keep], truth[keep]


def contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _comb2(x) -> int:
    x = np.asarray(x, dtype=object)
    return int(np.sum(x * (x - 1) // 2))


def adjusted_rand_index(a, b) -> float:
    """ARI from the contingency table, evaluated in exact rational arithmetic.

    When both partitions are a single cluster (or all singletons) the
    index is 0/0 and defined as 1.
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    table = contingency(a, b)
    n = len(a)
    index = _comb2(table.ravel())
    rows = _comb2(table.sum(axis=1))
    cols = _comb2(table.sum(axis=0))
    pairs = n * (n - 1) // 2
    if pairs == 0:
        return 1.0
    expected = Fraction(rows * cols, pairs)
    maximum = Fraction(rows + cols, 2)
    if maximum == expected:
        return 1.0
    return float((index - expected) / (maximum - expected))


def ari_fg(pred, truth, ignore=None) -> float:
    p, t = _foreground(pred, truth, ignore)
    return adjusted_rand_index(p, t)


def msc_fg(pred, truth, ignore=None) -> float:
    """Mean over true instances of the best IoU with any predicted non-background segment."""
    p, t = _foreground(pred, truth, ignore)
    scores = []
    for inst in np.unique(t):
        in_t = t == inst
        best = 0.0
        for seg in np.unique(p[in_t]):
            if seg == 0:
                continue
            in_p = p == seg
            best = max(best, np.sum(in_t & in_p) / np.sum(in_t | in_p))
        scores.append(best)
    return float(np.mean(scores))


def miou_bg(pred, truth) -> float:
    p, t = _pair(pred, truth)
    pb, tb = p == 0, t == 0
    union = np.sum(pb | tb)
    if union == 0:
        return 1.0
    return float(np.sum(pb & tb) / union)


@dataclass(frozen=True)
class SegScores:
    ari_fg: float
    msc_fg: float
    miou_bg: float

    def as_dict(self) -> dict:
        return asdict(self)


def score(pred, truth) -> SegScores:
    return SegScores(ari_fg(pred, truth), msc_fg(pred, truth), miou_bg(pred, truth))
