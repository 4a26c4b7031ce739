# Train the Q-network planner on a small world and watch it work.
#
# The value network scores one (state, candidate hole) pair at a time:
# features are the predicted quality of the last few visited holes, the
# remaining predicted-low counts of their patch/square/grid, and the move
# class that reaches the candidate.  Action elimination keeps training on
# the promising patch prefix.

import json
import tempfile
from pathlib import Path

import numpy as np

from cryoplan import (
    ClassifierModel,
    ElimConfig,
    GenConfig,
    TrainConfig,
    generate,
    predict_all,
    run_policy,
    train,
)

ds = generate(
    GenConfig(
        seed=11,
        n_grids=2,
        squares_per_grid=(3, 3),
        patches_per_square=(3, 4),
        holes_per_patch=(12, 18),
        target_low_fraction=0.334,
        clustering_strength=1.2,
    )
)
pt = predict_all(ds, ClassifierModel.from_preset("gt"))
print(ds, f"low fraction {ds.is_low().mean():.3f}")

cfg = TrainConfig(budget=120.0, epochs=3, episodes_per_epoch=10, seed=0)
with tempfile.TemporaryDirectory() as tmp:
    metrics_path = Path(tmp) / "metrics.jsonl"
    policy = train(ds, pt, cfg, elim_cfg=ElimConfig(), metrics_path=metrics_path)
    print("\nper-epoch training metrics:")
    for line in metrics_path.read_text().splitlines():
        m = json.loads(line)
        print(
            f"  epoch {m['epoch']}: return {m['mean_return']:.1f}, "
            f"#lCTF {m['mean_lctf']:.1f}, loss {m['loss']:.3f}, eps {m['epsilon']:.2f}"
        )

# Greedy rollouts from a few random starts.
rng = np.random.default_rng(1)
print("\ngreedy rollouts at 120 minutes:")
for _ in range(3):
    start = ds.holes[int(rng.integers(ds.n_holes))].id
    st = run_policy(policy, ds, start, 120.0, pt=pt)
    print(
        f"  start {start}: visited {len(st.trajectory)}, "
        f"low-CTF {st.lctf_found}, precision {st.precision():.2f}"
    )

# The same policy's step-by-step behavior: it stays within a patch while
# it pays off and hops to the next-ranked patch when depleted.
st = run_policy(policy, ds, ds.holes[0].id, 60.0, pt=pt)
moves = [s.move_class.name for s in st.trajectory]
print("\nmove classes along one 60-minute trajectory:")
print(" ", " ".join(m.replace("SAME_", "").replace("DIFFERENT_", "x") for m in moves))
