"""Confusion-statistics stand-in for the offline hole-quality classifier.

Instead of training an image model, each hole's predicted label is drawn
once from a two-class confusion model (low recall / high recall) using a
keyed hash of (seed, hole id).  Predictions are therefore a fixed function
of the world: repeated queries, episode order, and visitation never change
them, which keeps Q-learning's environment stationary.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .atlas import CTF_THRESHOLD, Dataset

PRESETS = {
    "gt": (1.0, 1.0),
    "r50": (0.839, 0.912),
    "r18": (0.910, 0.875),
    "m": (0.70, 0.70),
}


@dataclass(frozen=True)
class ClassifierModel:
    low_recall: float
    high_recall: float
    seed: int = 0
    name: str = "custom"

    def __post_init__(self) -> None:
        for r in (self.low_recall, self.high_recall):
            if not (0.0 <= r <= 1.0):
                raise ValueError(f"recall {r} outside [0, 1]")

    @staticmethod
    def from_preset(name: str, seed: int = 0) -> "ClassifierModel":
        key = name.lower()
        if key not in PRESETS:
            raise ValueError(f"unknown classifier preset {name!r}; known: {sorted(PRESETS)}")
        low, high = PRESETS[key]
        return ClassifierModel(low, high, seed=seed, name=key)


def _keyed_uniforms(seed: int, hole_id: str) -> tuple[float, float]:
    """Two uniforms in [0, 1) keyed by (seed, hole_id); stable across runs."""
    h = hashlib.blake2b(
        hole_id.encode("utf-8"), digest_size=16, key=struct.pack("<q", seed)
    ).digest()
    a, b = struct.unpack("<QQ", h)
    return a / 2.0**64, b / 2.0**64


class PredictionTable:
    """Immutable per-hole predicted labels and confidences for one dataset."""

    def __init__(self, ds: Dataset, pred_low: np.ndarray, confidence: np.ndarray, model: ClassifierModel):
        self.ds = ds
        self.pred_low = pred_low
        self.confidence = confidence
        self.model = model
        self.pred_low.setflags(write=False)
        self.confidence.setflags(write=False)

    def label(self, hole_id: str) -> str:
        return "low" if self.pred_low[self.ds.require_hole(hole_id)] else "high"

    def confidence_of(self, hole_id: str) -> float:
        return float(self.confidence[self.ds.require_hole(hole_id)])


def predict_all(ds: Dataset, model: ClassifierModel, threshold: float = CTF_THRESHOLD) -> PredictionTable:
    """Draw every hole's prediction once from the confusion model."""
    n = ds.n_holes
    truth_low = ds.is_low(threshold)
    pred_low = np.zeros(n, dtype=bool)
    confidence = np.zeros(n, dtype=np.float64)
    for i, hole in enumerate(ds.holes):
        u_label, u_jitter = _keyed_uniforms(model.seed, hole.id)
        if truth_low[i]:
            pred_low[i] = u_label < model.low_recall
        else:
            pred_low[i] = not (u_label < model.high_recall)
        base = model.low_recall if pred_low[i] else model.high_recall
        confidence[i] = min(1.0, max(0.5, base + (u_jitter * 0.1 - 0.05)))
    return PredictionTable(ds, pred_low, confidence, model)


def empirical_confusion(pt: PredictionTable, ds: Dataset, threshold: float = CTF_THRESHOLD) -> np.ndarray:
    """2x2 count matrix; rows = truth (low, high), columns = prediction."""
    truth_low = ds.is_low(threshold)
    m = np.zeros((2, 2), dtype=np.int64)
    m[0, 0] = int(np.sum(truth_low & pt.pred_low))
    m[0, 1] = int(np.sum(truth_low & ~pt.pred_low))
    m[1, 0] = int(np.sum(~truth_low & pt.pred_low))
    m[1, 1] = int(np.sum(~truth_low & ~pt.pred_low))
    return m


class QualityCounter:
    """Unvisited predicted-low hole counts per patch, square, and grid.

    Built once per episode and decremented as holes are visited; the counts
    drive both feature encoding and patch ranking.
    """

    def __init__(self, ds: Dataset, pt: PredictionTable, visited: np.ndarray | None = None):
        self.ds = ds
        self.pt = pt
        active = pt.pred_low if visited is None else (pt.pred_low & ~visited)
        self.patch_counts = np.bincount(
            ds.hole_patch[active], minlength=len(ds.patches)
        ).astype(np.int64)
        self.square_counts = np.bincount(
            ds.hole_square[active], minlength=len(ds.squares)
        ).astype(np.int64)
        self.grid_counts = np.bincount(
            ds.hole_grid[active], minlength=len(ds.grids)
        ).astype(np.int64)

    def visit(self, hole_idx: int) -> None:
        if self.pt.pred_low[hole_idx]:
            self.patch_counts[self.ds.hole_patch[hole_idx]] -= 1
            self.square_counts[self.ds.hole_square[hole_idx]] -= 1
            self.grid_counts[self.ds.hole_grid[hole_idx]] -= 1

    def counts_for_hole(self, hole_idx: int) -> tuple[int, int, int]:
        return (
            int(self.patch_counts[self.ds.hole_patch[hole_idx]]),
            int(self.square_counts[self.ds.hole_square[hole_idx]]),
            int(self.grid_counts[self.ds.hole_grid[hole_idx]]),
        )


def quality_counts(ds: Dataset, pt: PredictionTable, visited: np.ndarray) -> QualityCounter:
    """Counts of predicted-low unvisited holes, recomputed from scratch."""
    return QualityCounter(ds, pt, visited)
