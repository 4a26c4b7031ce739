"""Trial harness: paired-seed evaluation of planners across budgets.

Every policy in a comparison sees the same start hole in trial i of budget
b, so differences in collected low-CTF counts are policy differences, not
draw luck.  Wall-clock is measured around planning and rollouts only;
serialization happens outside the timed region.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .atlas import Dataset, EpisodeState, RewardTable
from .baselines import (
    GaConfig,
    SaConfig,
    execute_plan,
    ga_optimize,
    greedy_plan,
    random_rollout,
    sa_optimize,
)
from .classifier import PredictionTable
from .dqn import Policy, run_policy


class PolicyRunner:
    """One evaluable planning strategy."""

    name = "base"

    def prepare(self, ds: Dataset, pt: PredictionTable, budget: float) -> None:
        """Per-budget planning work; counted toward the runtime column."""

    def rollout(
        self,
        ds: Dataset,
        pt: PredictionTable,
        start_hole: str,
        budget: float,
        rng: np.random.Generator,
        table: RewardTable,
    ) -> EpisodeState:
        raise NotImplementedError


class RandomRunner(PolicyRunner):
    name = "random"

    def rollout(self, ds, pt, start_hole, budget, rng, table):
        return random_rollout(ds, start_hole, budget, rng, table)


class GreedyRunner(PolicyRunner):
    name = "greedy"

    def __init__(self) -> None:
        self._plan: list[str] | None = None

    def prepare(self, ds, pt, budget):
        if self._plan is None:
            self._plan = greedy_plan(ds, pt)

    def rollout(self, ds, pt, start_hole, budget, rng, table):
        return execute_plan(self._plan, ds, pt, budget, start_hole, table)


class GaRunner(PolicyRunner):
    name = "ga"

    def __init__(self, cfg: GaConfig | None = None) -> None:
        self.cfg = cfg if cfg is not None else GaConfig()
        self._plans: dict[float, list[str]] = {}

    def prepare(self, ds, pt, budget):
        if budget not in self._plans:
            self._plans[budget] = ga_optimize(ds, pt, budget, self.cfg)

    def rollout(self, ds, pt, start_hole, budget, rng, table):
        return execute_plan(self._plans[budget], ds, pt, budget, start_hole, table)


class SaRunner(PolicyRunner):
    name = "sa"

    def __init__(self, cfg: SaConfig | None = None) -> None:
        self.cfg = cfg if cfg is not None else SaConfig()
        self._plans: dict[float, list[str]] = {}

    def prepare(self, ds, pt, budget):
        if budget not in self._plans:
            self._plans[budget] = sa_optimize(ds, pt, budget, self.cfg)

    def rollout(self, ds, pt, start_hole, budget, rng, table):
        return execute_plan(self._plans[budget], ds, pt, budget, start_hole, table)


class DqnRunner(PolicyRunner):
    name = "dqn"

    def __init__(self, policy: Policy) -> None:
        self.policy = policy

    def rollout(self, ds, pt, start_hole, budget, rng, table):
        return run_policy(self.policy, ds, start_hole, budget, pt=pt, reward_table=table)


@dataclass
class BudgetResult:
    budget: float
    mean_lctf: float
    std_lctf: float
    mean_visited: float
    precision: float
    lctf_per_trial: list[int]
    visited_per_trial: list[int]
    runtime_seconds: float
    curve: list[tuple[int, float]]

    def to_dict(self) -> dict:
        return {
            "budget": self.budget,
            "mean_lctf": self.mean_lctf,
            "std_lctf": self.std_lctf,
            "mean_visited": self.mean_visited,
            "precision": self.precision,
            "lctf_per_trial": self.lctf_per_trial,
            "visited_per_trial": self.visited_per_trial,
            "runtime_seconds": self.runtime_seconds,
            "curve": [[m, f] for m, f in self.curve],
        }


@dataclass
class TrialReport:
    policy: str
    classifier: str
    trials: int
    seed: int
    budgets: list[BudgetResult] = field(default_factory=list)

    def result_at(self, budget: float) -> BudgetResult:
        for b in self.budgets:
            if b.budget == budget:
                return b
        raise KeyError(f"no result for budget {budget}")

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "classifier": self.classifier,
            "trials": self.trials,
            "seed": self.seed,
            "budgets": [b.to_dict() for b in self.budgets],
        }


@dataclass
class VisitGraph:
    """Undirected consecutive-patch visit frequencies plus patch quality."""

    edges: dict[tuple[str, str], int]
    node_low_counts: dict[str, int]

    def to_rows(self) -> list[tuple[str, str, int]]:
        return sorted((a, b, w) for (a, b), w in self.edges.items())


def export_visit_graph(states: list[EpisodeState]) -> VisitGraph:
    """Pair counts of consecutive patch visits over chosen (non-seed) holes."""
    edges: dict[tuple[str, str], int] = {}
    node_low: dict[str, int] = {}
    for st in states:
        ds = st.ds
        patches = [ds.patches[ds.hole_patch[ds.require_hole(s.hole_id)]].id for s in st.trajectory]
        for a, b in zip(patches, patches[1:]):
            if a == b:
                continue
            key = (a, b) if a <= b else (b, a)
            edges[key] = edges.get(key, 0) + 1
    if states:
        ds = states[0].ds
        low = ds.is_low()
        for p_idx, patch in enumerate(ds.patches):
            node_low[patch.id] = int(np.sum(low[ds.hole_patch == p_idx]))
    return VisitGraph(edges, node_low)


def _mean_curve(
    curves: list[list[tuple[float, float]]], budget: float
) -> list[tuple[int, float]]:
    """Average per-trial step curves onto an integer-minute grid."""
    minutes = np.arange(0, int(budget) + 1)
    acc = np.zeros(len(minutes), dtype=np.float64)
    for curve in curves:
        vals = np.zeros(len(minutes), dtype=np.float64)
        for elapsed, frac in curve:
            vals[minutes >= elapsed] = frac
        acc += vals
    if curves:
        acc /= len(curves)
    return [(int(m), float(v)) for m, v in zip(minutes, acc)]


def _trial_curve(st: EpisodeState) -> list[tuple[float, float]]:
    out = []
    lows = 0
    elapsed = 0.0
    for n, step in enumerate(st.trajectory, start=1):
        elapsed += step.cost
        if step.is_low:
            lows += 1
        out.append((elapsed, lows / n))
    return out


def run_trials(
    runner: PolicyRunner,
    ds: Dataset,
    pt: PredictionTable,
    budgets: list[float] | None = None,
    trials: int = 50,
    seed: int = 0,
    reward_table: RewardTable | None = None,
    collect_states_at: float | None = None,
    workers: int = 1,
) -> tuple[TrialReport, list[EpisodeState]]:
    """Evaluate one runner over seeded random start holes.

    Start holes and per-trial generators depend only on (seed, budget index,
    trial index), never on the runner, which is what makes comparisons
    paired.  With workers > 1 the independent trials fan out across a
    thread pool (runners are read-only during rollouts) and results merge
    in trial order, so the report is identical to a sequential run.
    """
    budgets = budgets if budgets is not None else [120.0, 240.0, 360.0, 480.0]
    table = reward_table if reward_table is not None else RewardTable()
    report = TrialReport(
        policy=runner.name, classifier=pt.model.name, trials=trials, seed=seed
    )
    collected: list[EpisodeState] = []
    for bi, budget in enumerate(budgets):
        starts = np.random.default_rng([seed, bi, 0]).integers(ds.n_holes, size=trials)
        t0 = time.perf_counter()
        runner.prepare(ds, pt, budget)

        def one_trial(j: int) -> EpisodeState:
            rng = np.random.default_rng([seed, bi, 1, j])
            return runner.rollout(ds, pt, ds.holes[int(starts[j])].id, budget, rng, table)

        if workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=workers) as pool:
                states = list(pool.map(one_trial, range(trials)))
        else:
            states = [one_trial(j) for j in range(trials)]
        lctf: list[int] = []
        visited: list[int] = []
        curves: list[list[tuple[float, float]]] = []
        for st in states:
            lctf.append(st.lctf_found)
            visited.append(len(st.trajectory))
            curves.append(_trial_curve(st))
            if collect_states_at is not None and budget == collect_states_at:
                collected.append(st)
        runtime = time.perf_counter() - t0
        total_visits = int(np.sum(visited))
        report.budgets.append(
            BudgetResult(
                budget=budget,
                mean_lctf=float(np.mean(lctf)),
                std_lctf=float(np.std(lctf)),
                mean_visited=float(np.mean(visited)),
                precision=(float(np.sum(lctf)) / total_visits) if total_visits else 0.0,
                lctf_per_trial=[int(x) for x in lctf],
                visited_per_trial=[int(x) for x in visited],
                runtime_seconds=runtime,
                curve=_mean_curve(curves, budget),
            )
        )
    return report, collected


@dataclass
class ComparisonResult:
    reports: list[TrialReport]
    visit_graphs: dict[str, VisitGraph]
    budgets: list[float]
    trials: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "budgets": self.budgets,
            "trials": self.trials,
            "seed": self.seed,
            "policies": [r.to_dict() for r in self.reports],
            "visit_graphs": {
                name: {
                    "edges": [[a, b, w] for a, b, w in g.to_rows()],
                    "node_low_counts": g.node_low_counts,
                }
                for name, g in self.visit_graphs.items()
            },
        }


def compare(
    runners: list[PolicyRunner],
    ds: Dataset,
    pt: PredictionTable,
    budgets: list[float] | None = None,
    trials: int = 50,
    seed: int = 0,
    reward_table: RewardTable | None = None,
    workers: int = 1,
) -> ComparisonResult:
    """Paired evaluation of several runners, sorted by final-budget yield."""
    if not runners:
        raise ValueError("need at least one policy to compare")
    budgets = budgets if budgets is not None else [120.0, 240.0, 360.0, 480.0]
    top_budget = max(budgets)
    reports: list[TrialReport] = []
    graphs: dict[str, VisitGraph] = {}
    for runner in runners:
        report, states = run_trials(
            runner,
            ds,
            pt,
            budgets,
            trials,
            seed,
            reward_table,
            collect_states_at=top_budget,
            workers=workers,
        )
        reports.append(report)
        graphs[runner.name] = export_visit_graph(states)
    reports.sort(key=lambda r: -r.result_at(top_budget).mean_lctf)
    return ComparisonResult(reports, graphs, budgets, trials, seed)


RUNTIME_KEYS = {"runtime_seconds"}


def write_report_json(result: ComparisonResult, path: str | Path) -> None:
    Path(path).write_text(json.dumps(result.to_dict(), indent=2), encoding="utf-8")


def write_report_csv(result: ComparisonResult, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "policy",
                "classifier",
                "budget",
                "trials",
                "mean_lctf",
                "std_lctf",
                "mean_visited",
                "precision",
                "runtime_seconds",
            ]
        )
        for r in result.reports:
            for b in r.budgets:
                w.writerow(
                    [
                        r.policy,
                        r.classifier,
                        b.budget,
                        r.trials,
                        b.mean_lctf,
                        b.std_lctf,
                        b.mean_visited,
                        b.precision,
                        b.runtime_seconds,
                    ]
                )


def write_curves_csv(result: ComparisonResult, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["policy", "budget", "elapsed_minute", "cumulative_low_fraction"])
        for r in result.reports:
            for b in r.budgets:
                for minute, frac in b.curve:
                    w.writerow([r.policy, b.budget, minute, frac])


def write_visits_csv(graph: VisitGraph, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["patch_a", "patch_b", "weight"])
        for a, b, weight in graph.to_rows():
            w.writerow([a, b, weight])


def _strip_runtime(obj):
    if isinstance(obj, dict):
        return {k: _strip_runtime(v) for k, v in obj.items() if k not in RUNTIME_KEYS}
    if isinstance(obj, list):
        return [_strip_runtime(v) for v in obj]
    return obj


def canonical_digest(result_dict: dict) -> str:
    """Digest of a report with volatile wall-clock fields removed; two runs of
    the same seeded evaluation agree on this even though timings differ."""
    canon = json.dumps(_strip_runtime(result_dict), sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
