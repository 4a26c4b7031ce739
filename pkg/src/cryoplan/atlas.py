"""Domain model for budgeted micrograph acquisition on a grid hierarchy.

An atlas is a forest of grid-level images, each containing squares, each
square containing patches, each patch containing holes.  A hole carries a
ground-truth CTF resolution (in Ångström, lower is better); a hole with
CTF <= 6.0 is a "low-CTF" (good) hole.  Moving the microscope between two
holes costs time that depends only on how far apart they sit in the
hierarchy, and collecting a good hole earns a reward that shrinks with
the same distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

CTF_THRESHOLD = 6.0


class IllegalAction(Exception):
    """Raised when stepping to a hole that is visited or unknown."""


class BudgetExceeded(Exception):
    """Raised when stepping to a hole whose move cost does not fit the budget."""


class DatasetFormatError(ValueError):
    """Raised when stored or constructed hierarchy data violates an invariant."""


class MoveClass(IntEnum):
    """Hierarchy relation between consecutive hole visits.

    The integer values define the one-hot encoding order used by the
    feature encoder, from the cheapest move to the most expensive one.
    """

    SAME_PATCH = 0
    SAME_SQUARE = 1
    SAME_GRID = 2
    DIFFERENT_GRID = 3


# Stage movement time in minutes, per move class.
MOVE_COST_MINUTES = {
    MoveClass.SAME_PATCH: 2.0,
    MoveClass.SAME_SQUARE: 3.0,
    MoveClass.SAME_GRID: 5.0,
    MoveClass.DIFFERENT_GRID: 10.0,
}

_MOVE_COST_ARRAY = np.array(
    [MOVE_COST_MINUTES[mc] for mc in MoveClass], dtype=np.float64
)


def move_cost(mc: MoveClass) -> float:
    """Minutes charged for a move of the given class."""
    return MOVE_COST_MINUTES[mc]


def cost_penalty(t: float, beta: float = 0.185, t0: float = 2.0) -> float:
    """Saturating time penalty 1 - exp(-beta * (t - t0)).

    Zero at the cheapest move (t == t0) and approaching 1 for very slow
    moves.  Used by the trajectory objective and the GA/SA fitness, not by
    Q-learning (which uses the discrete reward table).
    """
    if t < t0:
        raise ValueError(f"move time {t} is below the minimum move time {t0}")
    return 1.0 - math.exp(-beta * (t - t0))


@dataclass(frozen=True)
class Hole:
    id: str
    patch_id: str
    x: float
    y: float
    ctf: float

    def __post_init__(self) -> None:
        if not (self.ctf > 0.0 and math.isfinite(self.ctf)):
            raise DatasetFormatError(f"hole {self.id}: CTF must be a finite positive value, got {self.ctf}")


@dataclass(frozen=True)
class Patch:
    id: str
    square_id: str
    hole_ids: tuple[str, ...]


@dataclass(frozen=True)
class Square:
    id: str
    grid_id: str
    patch_ids: tuple[str, ...]


@dataclass(frozen=True)
class Grid:
    id: str
    square_ids: tuple[str, ...]


@dataclass(frozen=True)
class RewardTable:
    """Step rewards by outcome and move class.

    ``low_rewards`` applies when the visited hole is good (CTF <= threshold),
    indexed by MoveClass; ``high_reward`` applies otherwise.
    """

    low_rewards: tuple[float, float, float, float] = (1.0, 0.57, 0.23, 0.09)
    high_reward: float = 0.0
    threshold: float = CTF_THRESHOLD

    def __post_init__(self) -> None:
        if len(self.low_rewards) != len(MoveClass):
            raise ValueError("low_rewards must have one entry per move class")
        if any(self.high_reward > r for r in self.low_rewards):
            raise ValueError("high-CTF reward must not exceed any low-CTF reward")

    @property
    def is_monotone(self) -> bool:
        """Whether rewards shrink with move distance.  True for the default
        table; the doubled-reward ablation variants intentionally break it."""
        return all(a >= b for a, b in zip(self.low_rewards, self.low_rewards[1:]))

    def reward(self, ctf: float, mc: MoveClass) -> float:
        if ctf <= self.threshold:
            return self.low_rewards[mc]
        return self.high_reward

    def doubled(self, *classes: MoveClass) -> "RewardTable":
        """Variant with the low-CTF reward doubled for the given move classes."""
        lows = list(self.low_rewards)
        for mc in classes:
            lows[mc] = 2.0 * lows[mc]
        lows_t = (lows[0], lows[1], lows[2], lows[3])
        return RewardTable(lows_t, self.high_reward, self.threshold)


def step_reward(ctf: float, mc: MoveClass, table: RewardTable) -> float:
    """Reward for visiting a hole with the given CTF via a move of class mc."""
    return table.reward(ctf, mc)


class Dataset:
    """Immutable acquisition hierarchy with fast index-based lookups.

    Entities are stored in insertion order.  In addition to the id-keyed
    collections, the constructor builds dense integer indices and numpy
    lineage arrays so per-step computations over all holes stay vectorized.
    """

    def __init__(
        self,
        grids: list[Grid],
        squares: list[Square],
        patches: list[Patch],
        holes: list[Hole],
    ) -> None:
        self.grids = tuple(grids)
        self.squares = tuple(squares)
        self.patches = tuple(patches)
        self.holes = tuple(holes)

        self.grid_index = {g.id: i for i, g in enumerate(self.grids)}
        self.square_index = {s.id: i for i, s in enumerate(self.squares)}
        self.patch_index = {p.id: i for i, p in enumerate(self.patches)}
        self.hole_index = {h.id: i for i, h in enumerate(self.holes)}
        self._validate()

        n = len(self.holes)
        self.hole_patch = np.empty(n, dtype=np.int64)
        self.hole_square = np.empty(n, dtype=np.int64)
        self.hole_grid = np.empty(n, dtype=np.int64)
        self.hole_ctf = np.empty(n, dtype=np.float64)
        patch_square = {p.id: p.square_id for p in self.patches}
        square_grid = {s.id: s.grid_id for s in self.squares}
        for i, h in enumerate(self.holes):
            sq = patch_square[h.patch_id]
            self.hole_patch[i] = self.patch_index[h.patch_id]
            self.hole_square[i] = self.square_index[sq]
            self.hole_grid[i] = self.grid_index[square_grid[sq]]
            self.hole_ctf[i] = h.ctf
        self.patch_square = np.array(
            [self.square_index[p.square_id] for p in self.patches], dtype=np.int64
        )
        self.square_grid = np.array(
            [self.grid_index[s.grid_id] for s in self.squares], dtype=np.int64
        )
        # Rank of each hole in ascending-id order; used for id tie-breaking.
        order = sorted(range(n), key=lambda i: self.holes[i].id)
        self.hole_id_rank = np.empty(n, dtype=np.int64)
        self.hole_id_rank[order] = np.arange(n)

    def _validate(self) -> None:
        for name, entities, index in (
            ("grid", self.grids, self.grid_index),
            ("square", self.squares, self.square_index),
            ("patch", self.patches, self.patch_index),
            ("hole", self.holes, self.hole_index),
        ):
            if len(index) != len(entities):
                seen: set[str] = set()
                for e in entities:
                    if e.id in seen:
                        raise DatasetFormatError(f"duplicate {name} id {e.id!r}")
                    seen.add(e.id)
        for s in self.squares:
            if s.grid_id not in self.grid_index:
                raise DatasetFormatError(f"square {s.id}: unknown grid {s.grid_id!r}")
        for p in self.patches:
            if p.square_id not in self.square_index:
                raise DatasetFormatError(f"patch {p.id}: unknown square {p.square_id!r}")
        for h in self.holes:
            if h.patch_id not in self.patch_index:
                raise DatasetFormatError(f"hole {h.id}: unknown patch {h.patch_id!r}")
        # Child lists must agree with the parent pointers, with no duplicates.
        for g in self.grids:
            if len(set(g.square_ids)) != len(g.square_ids):
                raise DatasetFormatError(f"grid {g.id}: duplicate square children")
            for sid in g.square_ids:
                if sid not in self.square_index or self.squares[self.square_index[sid]].grid_id != g.id:
                    raise DatasetFormatError(f"grid {g.id}: inconsistent child {sid!r}")
        square_children = {s.id: set(s.patch_ids) for s in self.squares}
        for p in self.patches:
            if p.id not in square_children[p.square_id]:
                raise DatasetFormatError(f"patch {p.id} missing from square {p.square_id}'s children")
        patch_children = {p.id: set(p.hole_ids) for p in self.patches}
        for h in self.holes:
            if h.id not in patch_children[h.patch_id]:
                raise DatasetFormatError(f"hole {h.id} missing from patch {h.patch_id}'s children")
        claimed_squares = sum(len(g.square_ids) for g in self.grids)
        claimed_patches = sum(len(s.patch_ids) for s in self.squares)
        claimed_holes = sum(len(p.hole_ids) for p in self.patches)
        if claimed_squares != len(self.squares):
            raise DatasetFormatError("square not attached to exactly one grid")
        if claimed_patches != len(self.patches):
            raise DatasetFormatError("patch not attached to exactly one square")
        if claimed_holes != len(self.holes):
            raise DatasetFormatError("hole count does not match the sum over patches")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.grids == other.grids
            and self.squares == other.squares
            and self.patches == other.patches
            and self.holes == other.holes
        )

    def __repr__(self) -> str:
        return (
            f"Dataset({len(self.grids)} grids, {len(self.squares)} squares, "
            f"{len(self.patches)} patches, {len(self.holes)} holes)"
        )

    @property
    def n_holes(self) -> int:
        return len(self.holes)

    def hole(self, hole_id: str) -> Hole:
        try:
            return self.holes[self.hole_index[hole_id]]
        except KeyError:
            raise KeyError(f"unknown hole id {hole_id!r}") from None

    def lineage(self, hole_id: str) -> tuple[str, str, str]:
        """(patch_id, square_id, grid_id) of a hole."""
        i = self.require_hole(hole_id)
        return (
            self.patches[self.hole_patch[i]].id,
            self.squares[self.hole_square[i]].id,
            self.grids[self.hole_grid[i]].id,
        )

    def require_hole(self, hole_id: str) -> int:
        try:
            return self.hole_index[hole_id]
        except KeyError:
            raise KeyError(f"unknown hole id {hole_id!r}") from None

    def holes_of_patch(self, patch_id: str) -> list[int]:
        p = self.patches[self.patch_index[patch_id]]
        return [self.hole_index[h] for h in p.hole_ids]

    def is_low(self, threshold: float = CTF_THRESHOLD) -> np.ndarray:
        """Boolean ground-truth low-CTF mask over holes."""
        return self.hole_ctf <= threshold

    def move_class_idx(self, prev_idx: int, next_idx: int) -> MoveClass:
        if self.hole_patch[prev_idx] == self.hole_patch[next_idx]:
            return MoveClass.SAME_PATCH
        if self.hole_square[prev_idx] == self.hole_square[next_idx]:
            return MoveClass.SAME_SQUARE
        if self.hole_grid[prev_idx] == self.hole_grid[next_idx]:
            return MoveClass.SAME_GRID
        return MoveClass.DIFFERENT_GRID

    def move_classes_from(self, prev_idx: int) -> np.ndarray:
        """Vector of MoveClass values from one hole to every hole."""
        mc = np.full(self.n_holes, int(MoveClass.DIFFERENT_GRID), dtype=np.int64)
        mc[self.hole_grid == self.hole_grid[prev_idx]] = int(MoveClass.SAME_GRID)
        mc[self.hole_square == self.hole_square[prev_idx]] = int(MoveClass.SAME_SQUARE)
        mc[self.hole_patch == self.hole_patch[prev_idx]] = int(MoveClass.SAME_PATCH)
        return mc

    def move_costs_from(self, prev_idx: int) -> np.ndarray:
        """Vector of move costs (minutes) from one hole to every hole."""
        return _MOVE_COST_ARRAY[self.move_classes_from(prev_idx)]

    def patch_move_class(self, patch_a: int, patch_b: int) -> MoveClass:
        """Move class between any hole of patch_a and any hole of patch_b."""
        if patch_a == patch_b:
            return MoveClass.SAME_PATCH
        sa, sb = self.patch_square[patch_a], self.patch_square[patch_b]
        if sa == sb:
            return MoveClass.SAME_SQUARE
        if self.square_grid[sa] == self.square_grid[sb]:
            return MoveClass.SAME_GRID
        return MoveClass.DIFFERENT_GRID


def move_class(prev: Hole, next_hole: Hole, ds: Dataset) -> MoveClass:
    """Hierarchy relation of a move between two holes of the dataset."""
    return ds.move_class_idx(ds.require_hole(prev.id), ds.require_hole(next_hole.id))


@dataclass(frozen=True)
class TrajectoryStep:
    hole_id: str
    move_class: MoveClass
    cost: float
    reward: float
    is_low: bool


def objective_value(trajectory: list[TrajectoryStep]) -> float:
    """Budget-constrained collection objective of a trajectory.

    Sums, per visited hole, the low-CTF indicator minus the saturating
    time penalty of the move that reached it.
    """
    return sum(
        (1.0 if s.is_low else 0.0) - cost_penalty(s.cost) for s in trajectory
    )


class EpisodeState:
    """Mutable state of one collection session over an immutable Dataset.

    The start hole only seeds the microscope position: it is marked visited
    at zero elapsed time and contributes neither reward nor the low-CTF
    count (the session is scored on holes the policy chose, not on where it
    happened to start).
    """

    def __init__(self, ds: Dataset, start_hole: str, budget: float, table: RewardTable | None = None) -> None:
        if budget < 0:
            raise ValueError("budget must be non-negative")
        self.ds = ds
        self.table = table if table is not None else RewardTable()
        self.budget = float(budget)
        self.visited = np.zeros(ds.n_holes, dtype=bool)
        self.current = ds.require_hole(start_hole)
        self.visited[self.current] = True
        self.elapsed = 0.0
        self.total_reward = 0.0
        self.lctf_found = 0
        self.trajectory: list[TrajectoryStep] = []
        self.visit_order: list[int] = [self.current]

    @property
    def current_hole(self) -> str:
        return self.ds.holes[self.current].id

    def legal_action_indices(self) -> np.ndarray:
        """Indices of unvisited holes whose move cost fits the remaining budget."""
        costs = self.ds.move_costs_from(self.current)
        ok = (~self.visited) & (self.elapsed + costs <= self.budget)
        return np.flatnonzero(ok)

    def legal_actions(self) -> set[str]:
        return {self.ds.holes[i].id for i in self.legal_action_indices()}

    def step_index(self, hole_idx: int) -> TrajectoryStep:
        if self.visited[hole_idx]:
            raise IllegalAction(f"hole {self.ds.holes[hole_idx].id} already visited")
        mc = self.ds.move_class_idx(self.current, hole_idx)
        cost = MOVE_COST_MINUTES[mc]
        if self.elapsed + cost > self.budget:
            raise BudgetExceeded(
                f"move cost {cost} does not fit: elapsed {self.elapsed}, budget {self.budget}"
            )
        ctf = self.ds.hole_ctf[hole_idx]
        reward = self.table.reward(ctf, mc)
        is_low = bool(ctf <= self.table.threshold)
        step = TrajectoryStep(self.ds.holes[hole_idx].id, mc, cost, reward, is_low)
        self.visited[hole_idx] = True
        self.current = hole_idx
        self.elapsed += cost
        self.total_reward += reward
        if is_low:
            self.lctf_found += 1
        self.trajectory.append(step)
        self.visit_order.append(hole_idx)
        return step

    def step(self, hole_id: str) -> TrajectoryStep:
        return self.step_index(self.ds.require_hole(hole_id))

    def precision(self) -> float:
        """Fraction of visited (chosen) holes that were low-CTF."""
        if not self.trajectory:
            return 0.0
        return self.lctf_found / len(self.trajectory)


def new_episode(ds: Dataset, start_hole: str, budget: float, table: RewardTable | None = None) -> EpisodeState:
    return EpisodeState(ds, start_hole, budget, table)
