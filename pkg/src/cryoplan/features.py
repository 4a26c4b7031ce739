"""Hierarchical state-action features for the Q-network.

Each hole contributes an 8-entry block: its predicted label, the
normalized unvisited predicted-low counts of its patch, square, and grid,
and a one-hot of the move class that reaches it (all zeros when there is
no previous hole).  A state-action input concatenates the blocks of the
last k-1 visited holes (zero-padded at episode start, oldest first) with
the block of the candidate hole relative to the current position.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atlas import Dataset, EpisodeState
from .classifier import PredictionTable, QualityCounter

BLOCK_SIZE = 8


@dataclass(frozen=True)
class FeatureConfig:
    k: int = 4
    max_patch_count: float = 1.0
    max_square_count: float = 1.0
    max_grid_count: float = 1.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("history length k must be >= 1")
        for v in (self.max_patch_count, self.max_square_count, self.max_grid_count):
            if v <= 0:
                raise ValueError("count normalizers must be positive")

    @property
    def vector_length(self) -> int:
        return self.k * BLOCK_SIZE

    @staticmethod
    def from_dataset(ds: Dataset, pt: PredictionTable, k: int = 4) -> "FeatureConfig":
        """Normalizers from dataset-wide maxima so features are comparable
        across episodes; clamped to 1 for degenerate (no predicted-low) data."""
        counter = QualityCounter(ds, pt)
        return FeatureConfig(
            k=k,
            max_patch_count=float(max(1, counter.patch_counts.max(initial=0))),
            max_square_count=float(max(1, counter.square_counts.max(initial=0))),
            max_grid_count=float(max(1, counter.grid_counts.max(initial=0))),
        )


def encode_step(
    ds: Dataset,
    pt: PredictionTable,
    counter: QualityCounter,
    cfg: FeatureConfig,
    hole_idx: int,
    prev_idx: int | None,
) -> np.ndarray:
    """8-entry feature block for one hole visit."""
    out = np.zeros(BLOCK_SIZE, dtype=np.float64)
    out[0] = 1.0 if pt.pred_low[hole_idx] else 0.0
    p, s, g = counter.counts_for_hole(hole_idx)
    out[1] = p / cfg.max_patch_count
    out[2] = s / cfg.max_square_count
    out[3] = g / cfg.max_grid_count
    if prev_idx is not None:
        mc = ds.move_class_idx(prev_idx, hole_idx)
        out[4 + int(mc)] = 1.0
    return out


def candidate_blocks(
    ds: Dataset,
    pt: PredictionTable,
    counter: QualityCounter,
    cfg: FeatureConfig,
    current_idx: int,
    candidate_idxs: np.ndarray,
) -> np.ndarray:
    """Vectorized 8-entry blocks for many candidates from one position."""
    m = len(candidate_idxs)
    out = np.zeros((m, BLOCK_SIZE), dtype=np.float64)
    out[:, 0] = pt.pred_low[candidate_idxs]
    out[:, 1] = counter.patch_counts[ds.hole_patch[candidate_idxs]] / cfg.max_patch_count
    out[:, 2] = counter.square_counts[ds.hole_square[candidate_idxs]] / cfg.max_square_count
    out[:, 3] = counter.grid_counts[ds.hole_grid[candidate_idxs]] / cfg.max_grid_count
    mcs = ds.move_classes_from(current_idx)[candidate_idxs]
    out[np.arange(m), 4 + mcs] = 1.0
    return out


def history_vector(
    st: EpisodeState,
    pt: PredictionTable,
    counter: QualityCounter,
    cfg: FeatureConfig,
) -> np.ndarray:
    """Concatenated blocks of the last k-1 visited holes, oldest first.

    Counts reflect the episode's current visitation, matching the quality
    the network would see if it re-inspected those images now.
    """
    n_hist = cfg.k - 1
    out = np.zeros(n_hist * BLOCK_SIZE, dtype=np.float64)
    order = st.visit_order
    recent = order[-n_hist:] if n_hist > 0 else []
    offset = n_hist - len(recent)
    for j, hole_idx in enumerate(recent):
        pos = len(order) - len(recent) + j
        prev = order[pos - 1] if pos > 0 else None
        out[(offset + j) * BLOCK_SIZE : (offset + j + 1) * BLOCK_SIZE] = encode_step(
            st.ds, pt, counter, cfg, hole_idx, prev
        )
    return out


def encode_state_action(
    st: EpisodeState,
    candidate_idx: int,
    pt: PredictionTable,
    counter: QualityCounter,
    cfg: FeatureConfig,
) -> np.ndarray:
    """Full k*8 input vector for (state, candidate hole)."""
    hist = history_vector(st, pt, counter, cfg)
    cand = encode_step(st.ds, pt, counter, cfg, candidate_idx, st.current)
    return np.concatenate([hist, cand])
