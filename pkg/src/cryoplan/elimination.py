"""Action-space reduction by patch ranking.

Before learning (and again at inference), patches are ranked by the
predicted quality of their grid and then of themselves.  A perfect-world
walk over this ranking bounds how many good holes the budget could ever
yield (``max_lctf``); the valid action set is every hole in the shortest
ranked-patch prefix whose predicted-low holes cover ``beta`` times that
bound.  Training uses a larger beta than testing so exploration still sees
a diverse slice of the atlas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .atlas import MOVE_COST_MINUTES, Dataset, MoveClass
from .classifier import PredictionTable, QualityCounter


@dataclass(frozen=True)
class ElimConfig:
    beta_train: float = 2.5
    beta_test: float = 1.5
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.beta_train <= 0 or self.beta_test <= 0:
            raise ValueError("elimination coefficients must be positive")


def rank_patch_indices(ds: Dataset, pt: PredictionTable) -> list[int]:
    counter = QualityCounter(ds, pt)
    grid_of_patch = ds.square_grid[ds.patch_square]
    return sorted(
        range(len(ds.patches)),
        key=lambda p: (
            -int(counter.grid_counts[grid_of_patch[p]]),
            -int(counter.patch_counts[p]),
            ds.patches[p].id,
        ),
    )


def rank_patches(ds: Dataset, pt: PredictionTable) -> list[str]:
    """Patch ids ordered by grid predicted-low total, then own predicted-low
    count (both descending), with ascending-id tie-breaks."""
    return [ds.patches[i].id for i in rank_patch_indices(ds, pt)]


def max_lctf(ds: Dataset, ranked_patches: list[str], budget: float) -> int:
    """Upper bound on holes collectable in the budget if every hole were good.

    Walks the ranked patches visiting all their holes, charging the usual
    move costs implied by the ordering; the very first hole is charged the
    cheapest (same-patch) move.
    """
    elapsed = 0.0
    count = 0
    prev_patch: int | None = None
    for pid in ranked_patches:
        p = ds.patch_index[pid]
        n = len(ds.patches[p].hole_ids)
        if n == 0:
            continue
        if prev_patch is None:
            entry = MoveClass.SAME_PATCH
        else:
            entry = ds.patch_move_class(prev_patch, p)
        for j in range(n):
            cost = MOVE_COST_MINUTES[entry if j == 0 else MoveClass.SAME_PATCH]
            if elapsed + cost > budget:
                return count
            elapsed += cost
            count += 1
        prev_patch = p
    return count


def eliminate(ds: Dataset, pt: PredictionTable, budget: float, beta: float) -> frozenset[int]:
    """Valid hole indices: all holes of the shortest ranked-patch prefix whose
    predicted-low total reaches beta * max_lctf.

    With no predicted-low holes anywhere (or when the requirement exceeds
    the total available) the full hole set is returned so episodes remain
    runnable.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    counter = QualityCounter(ds, pt)
    total_low = int(counter.patch_counts.sum())
    all_holes = frozenset(range(ds.n_holes))
    if total_low == 0:
        return all_holes
    ranked = rank_patch_indices(ds, pt)
    need = beta * max_lctf(ds, [ds.patches[i].id for i in ranked], budget)
    if need >= total_low:
        return all_holes
    chosen: list[int] = []
    acc = 0
    for p in ranked:
        chosen.append(p)
        acc += int(counter.patch_counts[p])
        if acc >= need:
            break
    patch_set = np.zeros(len(ds.patches), dtype=bool)
    patch_set[chosen] = True
    return frozenset(np.flatnonzero(patch_set[ds.hole_patch]).tolist())


def eliminate_ids(ds: Dataset, pt: PredictionTable, budget: float, beta: float) -> frozenset[str]:
    return frozenset(ds.holes[i].id for i in eliminate(ds, pt, budget, beta))
