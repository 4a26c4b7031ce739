# Drive the human-benchmark HTTP service end to end, in process.
#
# A session grants a fixed number of selection chances; the ground-truth
# CTF of a hole is revealed only after selecting it.  The /compare
# endpoint replays the loaded agent policy on the same dataset for a
# side-by-side cumulative-score chart.

import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from cryoplan import ClassifierModel, GenConfig, TrainConfig, generate, predict_all, train
from cryoplan.service import ServiceConfig, create_app

ds = generate(
    GenConfig(
        seed=5,
        n_grids=2,
        squares_per_grid=(2, 2),
        patches_per_square=(2, 3),
        holes_per_patch=(10, 14),
        target_low_fraction=0.334,
        clustering_strength=1.0,
    )
)
pt = predict_all(ds, ClassifierModel.from_preset("gt"))
policy = train(ds, pt, TrainConfig(budget=60.0, epochs=2, episodes_per_epoch=5, seed=0))

with tempfile.TemporaryDirectory() as tmp:
    app = create_app(
        {"demo": ds},
        ServiceConfig(store_dir=Path(tmp) / "sessions", any_budget=True),
        policy=policy,
    )
    client = TestClient(app)

    session = client.post("/v1/sessions", json={"dataset_id": "demo", "budget": 10}).json()
    sid = session["id"]
    print(f"session {sid[:8]}… budget {session['budget']} selections "
          f"(mapped to {session['budget_minutes']} simulated minutes)")

    atlas = client.get(f"/v1/sessions/{sid}/atlas").json()
    patches = [
        p["patch_id"]
        for g in atlas["grids"]
        for s in g["squares"]
        for p in s["patches"]
    ]
    print(f"{len(patches)} patches to browse")

    # A simple human strategy: walk patches, pick the first unknown hole.
    for patch in patches:
        if session.get("remaining", 10) == 0:
            break
        view = client.get(f"/v1/sessions/{sid}/view", params={"patch": patch}).json()
        for hole in view["holes"]:
            if hole["state"] != "unknown":
                continue
            r = client.post(f"/v1/sessions/{sid}/select", json={"hole_id": hole["hole_id"]})
            if r.status_code == 410:
                break
            body = r.json()
            session["remaining"] = body["remaining"]
            mark = "HIT " if body["is_low"] else "miss"
            print(f"  {mark} {body['hole_id']}: ctf {body['ctf']:.2f}, score {body['score']}")
            if body["remaining"] == 0:
                break

    summary = client.get(f"/v1/sessions/{sid}/summary").json()
    print(f"\nfinal score {summary['score']}/10; "
          f"recomputed {summary['recomputed_score']}; percentile {summary['percentile']:.0f}")

    agent = client.post("/v1/compare", json={"dataset_id": "demo", "budget": 10}).json()
    print(f"agent score over the same budget: {agent['score']}")
    print(f"agent cumulative series: {agent['cumulative_scores']}")
    print(f"human cumulative series: {summary['cumulative_scores']}")
