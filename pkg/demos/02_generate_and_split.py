# Generate a synthetic atlas with clustered quality, persist it, split it.
#
# The y1 preset mirrors the reference acquisition statistics: 31 squares,
# about 4000 holes, a third of them good, with quality clustered by square
# and patch.

import tempfile
from pathlib import Path

import numpy as np

from cryoplan import GenConfig, SplitSpec, generate, load, save, split, y1_config

ds = generate(y1_config(seed=7))
low = ds.is_low()
print(ds)
print(f"low-CTF fraction: {low.mean():.4f}")

# Per-square low fractions show the clustering the planner can exploit.
fracs = sorted(float(low[ds.hole_square == s].mean()) for s in range(len(ds.squares)))
print(f"square low-fractions: min {fracs[0]:.2f}, median {fracs[len(fracs)//2]:.2f}, max {fracs[-1]:.2f}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "y1.csv"
    save(ds, path)
    print(f"\nCSV is one row per hole: {path.read_text().splitlines()[0]}")
    assert load(path) == ds
    print("save -> load round-trips exactly")

train, val = split(ds, SplitSpec(ratio=(2, 1)), seed=0)
print(f"\n2:1 square-level split: {len(train.squares)} train / {len(val.squares)} val squares")
print(f"train holes {train.n_holes}, val holes {val.n_holes}, overlap 0")

# A flat, unclustered world for contrast: labels are i.i.d.
flat = generate(
    GenConfig(
        seed=1,
        n_grids=2,
        squares_per_grid=(4, 4),
        patches_per_square=(3, 3),
        holes_per_patch=(30, 30),
        target_low_fraction=0.334,
        clustering_strength=0.0,
    )
)
flat_fracs = [float(flat.is_low()[flat.hole_square == s].mean()) for s in range(len(flat.squares))]
print(f"\nunclustered control: square fractions all near the base rate: "
      f"std {np.std(flat_fracs):.3f} vs clustered {np.std(fracs):.3f}")
