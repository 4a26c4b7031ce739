"""Plan-based and random baselines sharing the simulator's execution model.

Greedy scans patches in the same ranked order used for action elimination.
GA and SA search over patch orderings (not hole orderings) and score each
ordering by the trajectory objective of actually executing it, so all
planners compete under identical cost and budget rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .atlas import (
    MOVE_COST_MINUTES,
    Dataset,
    EpisodeState,
    RewardTable,
    new_episode,
    objective_value,
)
from .classifier import PredictionTable
from .elimination import rank_patches


def execute_plan(
    plan: list[str],
    ds: Dataset,
    pt: PredictionTable,
    budget: float,
    start_hole: str | None = None,
    reward_table: RewardTable | None = None,
) -> EpisodeState:
    """Scan patches in plan order, visiting only predicted-low holes.

    Holes within a patch are taken in ascending id order; patches with no
    predicted-low holes are skipped; execution stops at the first visit
    that would not fit the budget.  Without an explicit start hole the
    microscope is seeded on the first hole of the first productive patch.
    """
    if len(set(plan)) != len(plan):
        raise ValueError("plan contains duplicate patches")
    visits: list[int] = []
    for pid in plan:
        hole_idxs = ds.holes_of_patch(pid)
        lows = sorted(
            (i for i in hole_idxs if pt.pred_low[i]), key=lambda i: ds.holes[i].id
        )
        visits.extend(lows)

    if start_hole is None:
        # Seed on the first hole (by child order) of the first productive
        # patch; plans are start-agnostic so this mirrors the greedy scan.
        if visits:
            first_patch = ds.hole_patch[visits[0]]
            start_hole = ds.patches[first_patch].hole_ids[0]
        elif plan:
            start_hole = ds.patches[ds.patch_index[plan[0]]].hole_ids[0]
        else:
            raise ValueError("cannot execute an empty plan without a start hole")
    st = new_episode(ds, start_hole, budget, reward_table)
    for i in visits:
        if st.visited[i]:
            continue
        mc = ds.move_class_idx(st.current, i)
        if st.elapsed + MOVE_COST_MINUTES[mc] > budget:
            break
        st.step_index(i)
    return st


def greedy_plan(ds: Dataset, pt: PredictionTable) -> list[str]:
    """Grid-then-patch quality ordering; identical to the elimination ranking."""
    return rank_patches(ds, pt)


def random_rollout(
    ds: Dataset,
    start_hole: str,
    budget: float,
    rng: np.random.Generator,
    reward_table: RewardTable | None = None,
) -> EpisodeState:
    """Uniform choice among affordable unvisited holes until none remain."""
    st = new_episode(ds, start_hole, budget, reward_table)
    while True:
        cands = st.legal_action_indices()
        if len(cands) == 0:
            return st
        st.step_index(int(rng.choice(cands)))


def random_policy(ds: Dataset, budget: float, seed: int, start_hole: str | None = None) -> EpisodeState:
    rng = np.random.default_rng(seed)
    if start_hole is None:
        start_hole = ds.holes[int(rng.integers(ds.n_holes))].id
    return random_rollout(ds, start_hole, budget, rng)


@dataclass(frozen=True)
class GaConfig:
    generations: int = 40
    population: int = 10
    mutation_rate: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        if self.population < 2:
            raise ValueError("population must be at least 2")
        if not (0.0 <= self.mutation_rate <= 1.0):
            raise ValueError("mutation_rate must lie in [0, 1]")


@dataclass(frozen=True)
class SaConfig:
    t_min: float = 1e-8
    reduction: float = 0.995
    seed: int = 0
    # When None, the starting temperature is sqrt(number of patches); the
    # patch orderings are the samples the annealer draws from.
    t_max: float | None = None

    def __post_init__(self) -> None:
        if self.t_min <= 0:
            raise ValueError("t_min must be positive")
        if not (0.0 < self.reduction < 1.0):
            raise ValueError("reduction rate must lie in (0, 1)")
        if self.t_max is not None and self.t_max <= self.t_min:
            raise ValueError("t_max must exceed t_min")


@dataclass
class SearchResult:
    plan: list[str]
    fitness: float
    best_history: list[float]
    accepted_deltas: list[float] | None = None


def _plan_fitness(
    order: np.ndarray, patch_ids: list[str], ds: Dataset, pt: PredictionTable, budget: float
) -> float:
    plan = [patch_ids[i] for i in order]
    return objective_value(execute_plan(plan, ds, pt, budget).trajectory)


def _single_point_crossover(
    a: np.ndarray, b: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Parent-A prefix up to a random cut, then B's remaining genes in B's order."""
    n = len(a)
    if n < 2:
        return a.copy()
    cut = int(rng.integers(1, n))
    head = a[:cut]
    used = np.zeros(n, dtype=bool)
    used[head] = True
    tail = b[~used[b]]
    return np.concatenate([head, tail])


def _swap_mutation(order: np.ndarray, rate: float, rng: np.random.Generator) -> None:
    n = len(order)
    for i in range(n):
        if rng.random() < rate:
            j = int(rng.integers(n))
            order[i], order[j] = order[j], order[i]


def ga_optimize_detail(
    ds: Dataset, pt: PredictionTable, budget: float, cfg: GaConfig
) -> SearchResult:
    """Evolve patch orderings; keeps the best individual ever seen."""
    patch_ids = [p.id for p in ds.patches]
    n = len(patch_ids)
    if n < 2:
        return SearchResult(list(patch_ids), _plan_fitness(np.arange(n), patch_ids, ds, pt, budget), [])
    rng = np.random.default_rng(cfg.seed)
    pop = [rng.permutation(n) for _ in range(cfg.population)]
    fit = np.array([_plan_fitness(o, patch_ids, ds, pt, budget) for o in pop])
    best_order = pop[int(np.argmax(fit))].copy()
    best_fit = float(np.max(fit))
    history = [best_fit]

    def tournament() -> np.ndarray:
        i, j = rng.integers(cfg.population, size=2)
        return pop[int(i)] if fit[int(i)] >= fit[int(j)] else pop[int(j)]

    for _ in range(cfg.generations):
        elite = pop[int(np.argmax(fit))].copy()
        children = [elite]
        while len(children) < cfg.population:
            child = _single_point_crossover(tournament(), tournament(), rng)
            _swap_mutation(child, cfg.mutation_rate, rng)
            children.append(child)
        pop = children
        fit = np.array([_plan_fitness(o, patch_ids, ds, pt, budget) for o in pop])
        gen_best = int(np.argmax(fit))
        if float(fit[gen_best]) > best_fit:
            best_fit = float(fit[gen_best])
            best_order = pop[gen_best].copy()
        history.append(best_fit)
    return SearchResult([patch_ids[i] for i in best_order], best_fit, history)


def ga_optimize(ds: Dataset, pt: PredictionTable, budget: float, cfg: GaConfig) -> list[str]:
    return ga_optimize_detail(ds, pt, budget, cfg).plan


def sa_optimize_detail(
    ds: Dataset, pt: PredictionTable, budget: float, cfg: SaConfig
) -> SearchResult:
    """Anneal over patch orderings with pairwise-swap neighbors."""
    patch_ids = [p.id for p in ds.patches]
    n = len(patch_ids)
    if n < 2:
        return SearchResult(list(patch_ids), _plan_fitness(np.arange(n), patch_ids, ds, pt, budget), [])
    rng = np.random.default_rng(cfg.seed)
    t = cfg.t_max if cfg.t_max is not None else math.sqrt(n)
    cur = rng.permutation(n)
    cur_fit = _plan_fitness(cur, patch_ids, ds, pt, budget)
    best_order = cur.copy()
    best_fit = cur_fit
    history = [best_fit]
    accepted: list[float] = []

    while t > cfg.t_min:
        i, j = rng.integers(n, size=2)
        cand = cur.copy()
        cand[int(i)], cand[int(j)] = cand[int(j)], cand[int(i)]
        cand_fit = _plan_fitness(cand, patch_ids, ds, pt, budget)
        delta = cand_fit - cur_fit
        if delta >= 0.0 or rng.random() < math.exp(delta / t):
            cur = cand
            cur_fit = cand_fit
            accepted.append(float(delta))
            if cur_fit > best_fit:
                best_fit = cur_fit
                best_order = cur.copy()
        history.append(best_fit)
        t *= cfg.reduction
    return SearchResult([patch_ids[i] for i in best_order], best_fit, history, accepted)


def sa_optimize(ds: Dataset, pt: PredictionTable, budget: float, cfg: SaConfig) -> list[str]:
    return sa_optimize_detail(ds, pt, budget, cfg).plan
