# The simulated hole classifier and the patch-ranking action elimination.
#
# Real deployments classify hole quality from patch images; here a
# confusion model reproduces the published recall levels.  Elimination
# then ranks patches by predicted quality and keeps only enough of them to
# cover beta times the best case achievable in the time budget.

from cryoplan import (
    ClassifierModel,
    eliminate,
    empirical_confusion,
    generate,
    max_lctf,
    predict_all,
    rank_patches,
    y1_config,
)

ds = generate(y1_config(seed=7))

print("confusion matrices (rows: truth low/high, cols: predicted low/high)")
for preset in ("gt", "r50", "r18", "m"):
    model = ClassifierModel.from_preset(preset, seed=3)
    pt = predict_all(ds, model)
    m = empirical_confusion(pt, ds)
    low_recall = m[0, 0] / m[0].sum()
    high_recall = m[1, 1] / m[1].sum()
    print(f"\n{preset}: low recall {low_recall:.3f}, high recall {high_recall:.3f}")
    print(m)

pt = predict_all(ds, ClassifierModel.from_preset("r50", seed=3))
ranked = rank_patches(ds, pt)
print(f"\ntop 5 ranked patches: {ranked[:5]}")

budget = 240.0
n_max = max_lctf(ds, ranked, budget)
print(f"perfect-world upper bound in {budget:.0f} min: {n_max} holes")

for beta in (1.0, 1.5, 2.5, 10.0):
    valid = eliminate(ds, pt, budget, beta)
    print(f"beta={beta:>4}: {len(valid):>5} of {ds.n_holes} holes remain valid")
