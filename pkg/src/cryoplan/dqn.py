"""Deep Q-learning for hole selection: replay, target network, epsilon-greedy.

The network scores one (state, candidate hole) pair at a time, so acting
means batch-evaluating all candidates and taking the argmax.  Candidates
in the same patch with the same predicted label share an identical feature
vector; scoring collapses them to one representative per (patch, label)
group, which keeps acting cheap even with thousands of holes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .atlas import Dataset, EpisodeState, RewardTable, new_episode
from .classifier import ClassifierModel, PredictionTable, QualityCounter, predict_all
from .elimination import ElimConfig, eliminate
from .features import (
    FeatureConfig,
    candidate_blocks,
    encode_state_action,
    history_vector,
)
from .mlp import (
    AdamState,
    Mlp,
    ModelFormatError,
    adam_step,
    read_container,
    take_params,
    write_container,
)

POLICY_FORMAT_VERSION = 1
POLICY_MAGIC = b"CRYOPLAN-POLICY\n"


@dataclass(frozen=True)
class TrainConfig:
    budget: float = 240.0
    epochs: int = 20
    episodes_per_epoch: int = 50
    lr: float = 0.01
    # The features carry no remaining-budget signal, so long-horizon
    # bootstrapping is noisy; 0.95 trains stably where 0.99 oscillates.
    gamma: float = 0.95
    replay_capacity: int = 20000
    batch_size: int = 64
    target_sync_interval: int = 500
    eps_start: float = 1.0
    eps_end: float = 0.05
    # Exploration decay horizon in env steps; None derives it as half the
    # planned step count.  Set explicitly when comparing training budgets
    # so the schedule does not scale with the episode length.
    eps_decay_steps: int | None = None
    # Global gradient-norm ceiling; None disables.  Bootstrapped targets at
    # this learning rate diverge without it.
    grad_clip: float | None = 10.0
    k: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("discount must lie in [0, 1]")
        for e in (self.eps_start, self.eps_end):
            if not (0.0 <= e <= 1.0):
                raise ValueError("exploration rates must lie in [0, 1]")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive when set")

    def max_steps_per_episode(self) -> int:
        return int(self.budget // 2.0)

    def planned_steps(self) -> int:
        return self.epochs * self.episodes_per_epoch * self.max_steps_per_episode()

    def epsilon_at(self, step: int) -> float:
        """Linear decay over the first half of the planned env steps (or the
        explicit eps_decay_steps horizon)."""
        horizon = self.eps_decay_steps
        if horizon is None:
            horizon = self.planned_steps() // 2
        frac = min(1.0, step / max(1, horizon))
        return self.eps_start + (self.eps_end - self.eps_start) * frac


@dataclass
class Transition:
    sa: np.ndarray
    reward: float
    next_hist: np.ndarray | None
    next_blocks: np.ndarray | None
    terminal: bool

    @property
    def next_features(self) -> np.ndarray | None:
        """Materialized next-state candidate feature matrix (one row per
        distinct candidate group)."""
        if self.terminal:
            return None
        m = self.next_blocks.shape[0]
        return np.hstack([np.tile(self.next_hist, (m, 1)), self.next_blocks])


class ReplayBuffer:
    """FIFO experience store with a hard capacity."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0

    def push(self, t: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(t)
        else:
            self._items[self._next] = t
            self._next = (self._next + 1) % self.capacity

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> Transition:
        return self._items[i]


class ActionScorer:
    """Shared evaluation context: features, grouped scoring, action choice."""

    def __init__(self, ds: Dataset, pt: PredictionTable, cfg: FeatureConfig):
        self.ds = ds
        self.pt = pt
        self.cfg = cfg

    def group_representatives(self, cand_idxs: np.ndarray) -> np.ndarray:
        """One candidate per (patch, predicted label) group.

        The representative is the member with the smallest hole id, and the
        result is ordered by that id, so a greedy argmax over groups obeys
        the ascending-id tie-break over the full candidate set.
        """
        rank = self.ds.hole_id_rank[cand_idxs]
        by_rank = cand_idxs[np.argsort(rank, kind="stable")]
        keys = self.ds.hole_patch[by_rank] * 2 + self.pt.pred_low[by_rank]
        _, first = np.unique(keys, return_index=True)
        return by_rank[np.sort(first)]

    def state_rows(
        self, st: EpisodeState, counter: QualityCounter, cand_idxs: np.ndarray
    ) -> np.ndarray:
        hist = history_vector(st, self.pt, counter, self.cfg)
        blocks = candidate_blocks(self.ds, self.pt, counter, self.cfg, st.current, cand_idxs)
        return np.hstack([np.tile(hist, (len(cand_idxs), 1)), blocks])

    def q_values(
        self, net: Mlp, st: EpisodeState, counter: QualityCounter, cand_idxs: np.ndarray
    ) -> np.ndarray:
        """Q-value for every given candidate (no grouping)."""
        return net.forward(self.state_rows(st, counter, cand_idxs))

    def select(
        self,
        net: Mlp,
        st: EpisodeState,
        counter: QualityCounter,
        cand_idxs: np.ndarray,
        eps: float,
        rng: np.random.Generator,
    ) -> int:
        """Epsilon-greedy choice; greedy ties break toward the smallest id."""
        if len(cand_idxs) == 0:
            raise ValueError("no candidates to select from")
        if eps > 0.0 and rng.random() < eps:
            return int(rng.choice(cand_idxs))
        reps = self.group_representatives(cand_idxs)
        q = net.forward(self.state_rows(st, counter, reps))
        return int(reps[int(np.argmax(q))])


def select_action(
    net: Mlp,
    st: EpisodeState,
    candidates: np.ndarray,
    eps: float,
    rng: np.random.Generator,
    pt: PredictionTable,
    counter: QualityCounter,
    cfg: FeatureConfig,
) -> int:
    """Standalone epsilon-greedy action choice over candidate hole indices."""
    ordered = candidates[np.argsort(st.ds.hole_id_rank[candidates], kind="stable")]
    return ActionScorer(st.ds, pt, cfg).select(net, st, counter, ordered, eps, rng)


def td_target(t: Transition, target_net: Mlp, gamma: float) -> float:
    """Bootstrapped regression target for one stored transition."""
    if t.terminal:
        return float(t.reward)
    q_next = target_net.forward(t.next_features)
    return float(t.reward) + gamma * float(np.max(q_next))


@dataclass
class Policy:
    """Deployable bundle: value net plus everything needed to reproduce its
    inputs on a fresh dataset."""

    net: Mlp
    feature_config: FeatureConfig
    elim_config: ElimConfig
    classifier: ClassifierModel
    train_budget: float = 240.0

    def save(self, path: str | Path) -> None:
        meta = {
            "format_version": POLICY_FORMAT_VERSION,
            "layer_sizes": self.net.layer_sizes,
            "net_seed": self.net.seed,
            "dtype": self.net.dtype.name,
            "feature_config": {
                "k": self.feature_config.k,
                "max_patch_count": self.feature_config.max_patch_count,
                "max_square_count": self.feature_config.max_square_count,
                "max_grid_count": self.feature_config.max_grid_count,
            },
            "elim_config": {
                "beta_train": self.elim_config.beta_train,
                "beta_test": self.elim_config.beta_test,
                "enabled": self.elim_config.enabled,
            },
            "classifier": {
                "low_recall": self.classifier.low_recall,
                "high_recall": self.classifier.high_recall,
                "seed": self.classifier.seed,
                "name": self.classifier.name,
            },
            "train_budget": self.train_budget,
        }
        arrays: list[np.ndarray] = []
        for w, b in zip(self.net.weights, self.net.biases):
            arrays.extend([w, b])
        write_container(path, POLICY_MAGIC, meta, arrays)

    @staticmethod
    def load(path: str | Path) -> "Policy":
        meta, payload = read_container(path, POLICY_MAGIC)
        if meta.get("format_version") != POLICY_FORMAT_VERSION:
            raise ModelFormatError(
                f"unsupported policy format version {meta.get('format_version')!r}"
            )
        try:
            sizes = [int(s) for s in meta["layer_sizes"]]
            dtype = np.dtype(meta["dtype"])
            fc = meta["feature_config"]
            ec = meta["elim_config"]
            cl = meta["classifier"]
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFormatError(f"{path}: malformed policy header: {e}") from e
        weights, biases = take_params(payload, sizes, dtype, path)
        net = Mlp.__new__(Mlp)
        net.layer_sizes = sizes
        net.seed = int(meta["net_seed"])
        net.dtype = dtype
        net.weights = weights
        net.biases = biases
        return Policy(
            net=net,
            feature_config=FeatureConfig(
                k=int(fc["k"]),
                max_patch_count=float(fc["max_patch_count"]),
                max_square_count=float(fc["max_square_count"]),
                max_grid_count=float(fc["max_grid_count"]),
            ),
            elim_config=ElimConfig(
                beta_train=float(ec["beta_train"]),
                beta_test=float(ec["beta_test"]),
                enabled=bool(ec["enabled"]),
            ),
            classifier=ClassifierModel(
                low_recall=float(cl["low_recall"]),
                high_recall=float(cl["high_recall"]),
                seed=int(cl["seed"]),
                name=str(cl["name"]),
            ),
            train_budget=float(meta.get("train_budget", 240.0)),
        )


def _valid_mask(ds: Dataset, valid: frozenset[int] | None) -> np.ndarray | None:
    if valid is None:
        return None
    mask = np.zeros(ds.n_holes, dtype=bool)
    mask[list(valid)] = True
    return mask


def _restricted_candidates(
    st: EpisodeState, valid_mask: np.ndarray | None
) -> np.ndarray:
    costs = st.ds.move_costs_from(st.current)
    ok = (~st.visited) & (st.elapsed + costs <= st.budget)
    if valid_mask is not None:
        ok &= valid_mask
    return np.flatnonzero(ok)


@dataclass
class EpochMetrics:
    epoch: int
    mean_return: float
    mean_lctf: float
    loss: float
    epsilon: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "epoch": self.epoch,
                "mean_return": self.mean_return,
                "mean_lctf": self.mean_lctf,
                "loss": self.loss,
                "epsilon": self.epsilon,
            }
        )


def train(
    ds: Dataset,
    pt: PredictionTable,
    cfg: TrainConfig,
    elim_cfg: ElimConfig | None = None,
    reward_table: RewardTable | None = None,
    metrics_path: str | Path | None = None,
) -> Policy:
    """Train a Q-network on simulated collection episodes.

    Deterministic for a fixed (dataset, prediction table, config): all
    randomness flows from one seeded generator consumed in a fixed order.
    """
    if ds.n_holes == 0:
        raise ValueError("cannot train on an empty dataset")
    elim_cfg = elim_cfg if elim_cfg is not None else ElimConfig()
    table = reward_table if reward_table is not None else RewardTable()
    feat_cfg = FeatureConfig.from_dataset(ds, pt, k=cfg.k)
    rng = np.random.default_rng(cfg.seed)

    net = Mlp.for_input(feat_cfg.vector_length, seed=cfg.seed, dtype=np.float32)
    target = net.clone()
    adam = AdamState.for_net(net, lr=cfg.lr)
    replay = ReplayBuffer(cfg.replay_capacity)
    scorer = ActionScorer(ds, pt, feat_cfg)

    valid = eliminate(ds, pt, cfg.budget, elim_cfg.beta_train) if elim_cfg.enabled else None
    valid_mask = _valid_mask(ds, valid)

    env_steps = 0
    grad_steps = 0
    metrics_fh = open(metrics_path, "w", encoding="utf-8") if metrics_path else None
    try:
        for epoch in range(cfg.epochs):
            returns: list[float] = []
            lctfs: list[int] = []
            losses: list[float] = []
            for _ in range(cfg.episodes_per_epoch):
                start = int(rng.integers(ds.n_holes))
                st = new_episode(ds, ds.holes[start].id, cfg.budget, table)
                counter = QualityCounter(ds, pt)
                counter.visit(start)
                while True:
                    cands = _restricted_candidates(st, valid_mask)
                    if len(cands) == 0:
                        break
                    cands = cands[np.argsort(ds.hole_id_rank[cands], kind="stable")]
                    eps = cfg.epsilon_at(env_steps)
                    action = scorer.select(net, st, counter, cands, eps, rng)
                    sa = encode_state_action(st, action, pt, counter, feat_cfg).astype(np.float32)
                    step = st.step_index(action)
                    counter.visit(action)
                    env_steps += 1

                    next_cands = _restricted_candidates(st, valid_mask)
                    if len(next_cands) == 0:
                        replay.push(Transition(sa, step.reward, None, None, True))
                    else:
                        reps = scorer.group_representatives(next_cands)
                        nh = history_vector(st, pt, counter, feat_cfg).astype(np.float32)
                        nb = candidate_blocks(ds, pt, counter, feat_cfg, st.current, reps).astype(
                            np.float32
                        )
                        replay.push(Transition(sa, step.reward, nh, nb, False))

                    if len(replay) >= cfg.batch_size:
                        loss = _learn_step(net, target, adam, replay, cfg, rng)
                        losses.append(loss)
                        grad_steps += 1
                        if grad_steps % cfg.target_sync_interval == 0:
                            target.copy_from(net)
                returns.append(st.total_reward)
                lctfs.append(st.lctf_found)
            if metrics_fh is not None:
                m = EpochMetrics(
                    epoch=epoch,
                    mean_return=float(np.mean(returns)) if returns else 0.0,
                    mean_lctf=float(np.mean(lctfs)) if lctfs else 0.0,
                    loss=float(np.mean(losses)) if losses else 0.0,
                    epsilon=cfg.epsilon_at(env_steps),
                )
                metrics_fh.write(m.to_json() + "\n")
    finally:
        if metrics_fh is not None:
            metrics_fh.close()

    return Policy(
        net=net,
        feature_config=feat_cfg,
        elim_config=elim_cfg,
        classifier=pt.model,
        train_budget=cfg.budget,
    )


def _learn_step(
    net: Mlp,
    target: Mlp,
    adam: AdamState,
    replay: ReplayBuffer,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> float:
    idxs = rng.integers(0, len(replay), size=cfg.batch_size)
    batch = [replay[int(i)] for i in idxs]
    y = np.empty(len(batch), dtype=np.float64)

    rows: list[np.ndarray] = []
    spans: list[tuple[int, int, int]] = []  # (batch position, row start, row end)
    row_count = 0
    for j, t in enumerate(batch):
        if t.terminal:
            y[j] = t.reward
        else:
            m = t.next_blocks.shape[0]
            rows.append(np.hstack([np.tile(t.next_hist, (m, 1)), t.next_blocks]))
            spans.append((j, row_count, row_count + m))
            row_count += m
    if rows:
        q_next = target.forward(np.vstack(rows))
        for j, a, b in spans:
            y[j] = batch[j].reward + cfg.gamma * float(np.max(q_next[a:b]))

    sa = np.stack([t.sa for t in batch])
    q, acts = net.forward_cached(sa)
    err = q.astype(np.float64) - y
    grads = net.backward(acts, (2.0 / len(batch)) * err)
    if cfg.grad_clip is not None:
        norm = np.sqrt(sum(float(np.sum(gw * gw)) + float(np.sum(gb * gb)) for gw, gb in grads))
        if norm > cfg.grad_clip:
            scale = cfg.grad_clip / norm
            grads = [(gw * scale, gb * scale) for gw, gb in grads]
    adam_step(net, grads, adam)
    return float(np.mean(err**2))


def run_policy(
    policy: Policy,
    ds: Dataset,
    start_hole: str,
    budget: float,
    pt: PredictionTable | None = None,
    reward_table: RewardTable | None = None,
) -> EpisodeState:
    """Greedy rollout to budget exhaustion.

    Uses the policy's test-time action elimination; if the eliminated set
    leaves no affordable hole while unrestricted moves remain, it falls back
    to the full legal set rather than stopping early.
    """
    if pt is None:
        pt = predict_all(ds, policy.classifier)
    table = reward_table if reward_table is not None else RewardTable()
    st = new_episode(ds, start_hole, budget, table)
    counter = QualityCounter(ds, pt)
    counter.visit(st.current)
    scorer = ActionScorer(ds, pt, policy.feature_config)
    valid_mask = (
        _valid_mask(ds, eliminate(ds, pt, budget, policy.elim_config.beta_test))
        if policy.elim_config.enabled
        else None
    )
    while True:
        cands = _restricted_candidates(st, valid_mask)
        if len(cands) == 0 and valid_mask is not None:
            cands = _restricted_candidates(st, None)
        if len(cands) == 0:
            break
        reps = scorer.group_representatives(cands)
        q = policy.net.forward(scorer.state_rows(st, counter, reps))
        action = int(reps[int(np.argmax(q))])
        st.step_index(action)
        counter.visit(action)
    return st


def policy_with_beta(policy: Policy, beta_test: float) -> Policy:
    """Same policy with a different test-time elimination coefficient."""
    return replace(policy, elim_config=replace(policy.elim_config, beta_test=beta_test))
