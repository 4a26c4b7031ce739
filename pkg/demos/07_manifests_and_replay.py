# Reproducible runs: every CLI command records a manifest; replay re-runs
# it and verifies the outputs.
#
# Datasets and trained policies reproduce byte for byte.  Evaluation
# reports carry wall-clock columns, so their digests are computed with the
# runtime fields stripped.

import json
import tempfile
from pathlib import Path

from cryoplan.cli import main

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    dataset = root / "world.csv"
    policy = root / "policy.bin"

    assert main(["gen", "--preset", "y1", "--seed", "3", "--out", str(dataset)]) == 0
    assert main([
        "train",
        "--data", str(dataset),
        "--out", str(policy),
        "--duration", "60",
        "--epochs", "1",
        "--episodes", "3",
        "--seed", "9",
    ]) == 0

    manifest_path = root / "policy.bin.manifest.json"
    manifest = json.loads(manifest_path.read_text())
    print("train manifest records:")
    print(f"  command       {manifest['command']}")
    print(f"  tool version  {manifest['tool_version']}")
    print(f"  seeds         {manifest['seeds']}")
    print(f"  lr / epochs   {manifest['config']['lr']} / {manifest['config']['epochs']}")
    print(f"  policy digest {manifest['output_digests']['policy'][:24]}…")

    replay_dir = root / "replayed"
    assert main(["replay", str(manifest_path), "--out", str(replay_dir), "--check"]) == 0
    same = (replay_dir / "policy.bin").read_bytes() == policy.read_bytes()
    print(f"\nreplayed policy byte-identical: {same}")

    out = root / "results"
    assert main([
        "eval",
        "--data", str(dataset),
        "--policy", str(policy),
        "--policies", "dqn,greedy,random",
        "--budgets", "60",
        "--trials", "5",
        "--seed", "0",
        "--out", str(out),
    ]) == 0
    assert main(["replay", str(out / "manifest.json"), "--out", str(root / "results2"), "--check"]) == 0
    print("evaluation replay verified against canonical digests")
