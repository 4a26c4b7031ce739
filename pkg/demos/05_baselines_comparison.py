# Paired comparison of every planner on one synthetic world.
#
# All policies see the same start hole in trial i, so the table isolates
# planning quality.  GA and SA search over patch orderings scored by the
# trajectory objective; greedy scans the quality ranking; the Q-network
# plans hole by hole.

from cryoplan import (
    ClassifierModel,
    GaConfig,
    GenConfig,
    SaConfig,
    TrainConfig,
    generate,
    predict_all,
    train,
)
from cryoplan.harness import (
    DqnRunner,
    GaRunner,
    GreedyRunner,
    RandomRunner,
    SaRunner,
    compare,
)

ds = generate(
    GenConfig(
        seed=21,
        n_grids=2,
        squares_per_grid=(3, 3),
        patches_per_square=(3, 4),
        holes_per_patch=(12, 18),
        target_low_fraction=0.334,
        clustering_strength=1.2,
    )
)
pt = predict_all(ds, ClassifierModel.from_preset("r50", seed=3))
print(ds, f"base rate {ds.is_low().mean():.3f}\n")

policy = train(ds, pt, TrainConfig(budget=120.0, epochs=3, episodes_per_epoch=10, seed=0))

runners = [
    DqnRunner(policy),
    GreedyRunner(),
    GaRunner(GaConfig(seed=0)),
    SaRunner(SaConfig(seed=0)),
    RandomRunner(),
]
result = compare(runners, ds, pt, budgets=[60.0, 120.0], trials=15, seed=9)

print(f"{'policy':>8} | {'#lCTF @60':>12} | {'#lCTF @120':>12} | {'precision':>9} | {'runtime':>8}")
print("-" * 62)
for report in result.reports:
    r60 = report.result_at(60.0)
    r120 = report.result_at(120.0)
    print(
        f"{report.policy:>8} | {r60.mean_lctf:5.1f} ± {r60.std_lctf:4.1f} | "
        f"{r120.mean_lctf:5.1f} ± {r120.std_lctf:4.1f} | {r120.precision:9.3f} | "
        f"{r120.runtime_seconds:7.1f}s"
    )

graph = result.visit_graphs["dqn"]
top = sorted(graph.edges.items(), key=lambda kv: -kv[1])[:5]
print("\nmost-traveled patch pairs under the learned policy:")
for (a, b), w in top:
    print(f"  {a} <-> {b}: {w} moves")
