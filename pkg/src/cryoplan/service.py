"""HTTP service for the interactive human-benchmark study.

Humans get a fixed number of selection chances on a dataset they have
never seen; the ground-truth CTF of a hole is revealed only after that
hole is selected in that session, and never for anyone else's selections.
An optional loaded policy answers /compare requests with the agent's own
selection series on the same dataset for side-by-side charting.

Sessions persist as append-only JSON-lines event logs (one file per
session); state is a fold over events, so a restart replays to identical
state.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from . import __version__
from .atlas import CTF_THRESHOLD, Dataset
from .classifier import predict_all
from .dqn import Policy, run_policy

# Selection-count budgets map to the minute budgets used in simulation.
BUDGET_MINUTES = {50: 120.0, 100: 240.0}
MINUTES_PER_SELECTION = 2.4


def minutes_for_budget(budget: int) -> float:
    return BUDGET_MINUTES.get(budget, MINUTES_PER_SELECTION * budget)


@dataclass(frozen=True)
class ServiceConfig:
    store_dir: Path
    allowed_budgets: tuple[int, ...] = (50, 100)
    any_budget: bool = False
    patches_only: bool = False
    seed: int = 0


@dataclass
class Selection:
    hole_id: str
    ctf: float
    is_low: bool
    at: str


@dataclass
class Session:
    id: str
    dataset_id: str
    budget: int
    mode: str
    created_at: str
    updated_at: str
    selections: list[Selection] = field(default_factory=list)

    @property
    def score(self) -> int:
        return sum(1 for s in self.selections if s.is_low)

    @property
    def remaining(self) -> int:
        return self.budget - len(self.selections)

    @property
    def selected_ids(self) -> set[str]:
        return {s.hole_id for s in self.selections}

    def to_public(self) -> dict:
        return {
            "id": self.id,
            "dataset_id": self.dataset_id,
            "budget": self.budget,
            "budget_minutes": minutes_for_budget(self.budget),
            "mode": self.mode,
            "score": self.score,
            "remaining": self.remaining,
            "selections": [
                {"hole_id": s.hole_id, "ctf": s.ctf, "is_low": s.is_low, "at": s.at}
                for s in self.selections
            ],
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }


class SessionStore:
    """Event-sourced session persistence: one JSONL file per session."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self.sessions: dict[str, Session] = {}
        for path in sorted(self.root.glob("*.jsonl")):
            session = self._fold(path)
            if session is not None:
                self.sessions[session.id] = session

    @staticmethod
    def _fold(path: Path) -> Session | None:
        session: Session | None = None
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            if event["type"] == "create":
                session = Session(
                    id=event["session_id"],
                    dataset_id=event["dataset_id"],
                    budget=int(event["budget"]),
                    mode=event.get("mode", "human"),
                    created_at=event["at"],
                    updated_at=event["at"],
                )
            elif event["type"] == "select" and session is not None:
                session.selections.append(
                    Selection(event["hole_id"], float(event["ctf"]), bool(event["is_low"]), event["at"])
                )
                session.updated_at = event["at"]
        return session

    def _append(self, session_id: str, event: dict) -> None:
        with (self.root / f"{session_id}.jsonl").open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event) + "\n")

    def create(self, dataset_id: str, budget: int, mode: str) -> Session:
        now = datetime.now(timezone.utc).isoformat()
        session = Session(
            id=uuid.uuid4().hex,
            dataset_id=dataset_id,
            budget=budget,
            mode=mode,
            created_at=now,
            updated_at=now,
        )
        self.sessions[session.id] = session
        self._append(
            session.id,
            {
                "type": "create",
                "session_id": session.id,
                "dataset_id": dataset_id,
                "budget": budget,
                "mode": mode,
                "at": now,
            },
        )
        return session

    def record_selection(self, session: Session, hole_id: str, ctf: float, is_low: bool) -> Selection:
        now = datetime.now(timezone.utc).isoformat()
        sel = Selection(hole_id, ctf, is_low, now)
        session.selections.append(sel)
        session.updated_at = now
        self._append(
            session.id,
            {"type": "select", "hole_id": hole_id, "ctf": ctf, "is_low": is_low, "at": now},
        )
        return sel


class CreateSessionRequest(BaseModel):
    dataset_id: str
    budget: int
    mode: str = "human"


class SelectRequest(BaseModel):
    hole_id: str


class CompareRequest(BaseModel):
    dataset_id: str
    budget: int


def create_app(
    datasets: dict[str, Dataset],
    cfg: ServiceConfig,
    policy: Policy | None = None,
) -> FastAPI:
    app = FastAPI(title="cryoplan bench service", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(cfg.store_dir)
    lock = threading.Lock()
    prediction_cache: dict[str, object] = {}
    compare_cache: dict[tuple[str, int], dict] = {}

    def get_dataset(dataset_id: str) -> Dataset:
        ds = datasets.get(dataset_id)
        if ds is None:
            raise HTTPException(status_code=404, detail=f"unknown dataset {dataset_id!r}")
        return ds

    def get_session(session_id: str) -> Session:
        session = store.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    @app.get("/v1/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__, "agent_loaded": policy is not None}

    @app.get("/v1/datasets")
    def list_datasets() -> dict:
        return {
            "datasets": [
                {
                    "id": name,
                    "holes": ds.n_holes,
                    "patches": len(ds.patches),
                    "squares": len(ds.squares),
                    "grids": len(ds.grids),
                }
                for name, ds in datasets.items()
            ],
            "budgets": list(cfg.allowed_budgets),
            "any_budget": cfg.any_budget,
        }

    @app.post("/v1/sessions", status_code=201)
    def create_session(req: CreateSessionRequest) -> dict:
        get_dataset(req.dataset_id)
        if req.budget < 1:
            raise HTTPException(status_code=400, detail="budget must be positive")
        if not cfg.any_budget and req.budget not in cfg.allowed_budgets:
            raise HTTPException(
                status_code=400,
                detail=f"budget must be one of {list(cfg.allowed_budgets)} (run with --any-budget to lift)",
            )
        if req.mode not in ("human", "agent-replay"):
            raise HTTPException(status_code=400, detail="mode must be human or agent-replay")
        with lock:
            session = store.create(req.dataset_id, req.budget, req.mode)
        return session.to_public()

    @app.get("/v1/sessions/{session_id}")
    def session_state(session_id: str) -> dict:
        return get_session(session_id).to_public()

    @app.get("/v1/sessions/{session_id}/atlas")
    def atlas(session_id: str) -> dict:
        session = get_session(session_id)
        ds = get_dataset(session.dataset_id)
        patches = [
            {
                "patch_id": p.id,
                "square_id": p.square_id,
                "grid_id": ds.grids[ds.square_grid[ds.square_index[p.square_id]]].id,
                "holes": len(p.hole_ids),
            }
            for p in ds.patches
        ]
        if cfg.patches_only:
            for p in patches:
                p.pop("square_id")
                p.pop("grid_id")
            return {"patches": patches, "patches_only": True}
        return {
            "grids": [
                {
                    "grid_id": g.id,
                    "squares": [
                        {
                            "square_id": sid,
                            "patches": [
                                {"patch_id": pid, "holes": len(ds.patches[ds.patch_index[pid]].hole_ids)}
                                for pid in ds.squares[ds.square_index[sid]].patch_ids
                            ],
                        }
                        for sid in g.square_ids
                    ],
                }
                for g in ds.grids
            ],
            "patches_only": False,
        }

    @app.get("/v1/sessions/{session_id}/view")
    def view(session_id: str, patch: str = Query(...)) -> dict:
        session = get_session(session_id)
        ds = get_dataset(session.dataset_id)
        if patch not in ds.patch_index:
            raise HTTPException(status_code=404, detail=f"unknown patch {patch!r}")
        p = ds.patches[ds.patch_index[patch]]
        selected = session.selected_ids
        holes = []
        for hid in p.hole_ids:
            h = ds.holes[ds.hole_index[hid]]
            if hid in selected:
                holes.append(
                    {
                        "hole_id": hid,
                        "x": h.x,
                        "y": h.y,
                        "state": "revealed",
                        "ctf": h.ctf,
                        "is_low": h.ctf <= CTF_THRESHOLD,
                    }
                )
            else:
                holes.append({"hole_id": hid, "x": h.x, "y": h.y, "state": "unknown"})
        out = {"patch_id": p.id, "holes": holes}
        if not cfg.patches_only:
            sq = ds.squares[ds.square_index[p.square_id]]
            out["square_id"] = sq.id
            out["grid_id"] = sq.grid_id
        return out

    @app.post("/v1/sessions/{session_id}/select")
    def select(session_id: str, req: SelectRequest) -> dict:
        with lock:
            session = get_session(session_id)
            ds = get_dataset(session.dataset_id)
            if req.hole_id not in ds.hole_index:
                raise HTTPException(status_code=404, detail=f"unknown hole {req.hole_id!r}")
            if session.remaining <= 0:
                raise HTTPException(status_code=410, detail="selection budget exhausted")
            if req.hole_id in session.selected_ids:
                raise HTTPException(status_code=409, detail="hole already selected in this session")
            hole = ds.holes[ds.hole_index[req.hole_id]]
            is_low = hole.ctf <= CTF_THRESHOLD
            store.record_selection(session, req.hole_id, hole.ctf, is_low)
        return {
            "hole_id": req.hole_id,
            "ctf": hole.ctf,
            "is_low": is_low,
            "score": session.score,
            "remaining": session.remaining,
        }

    @app.get("/v1/sessions/{session_id}/summary")
    def summary(session_id: str) -> dict:
        session = get_session(session_id)
        recomputed = sum(1 for s in session.selections if s.is_low)
        cohort = [
            s.score
            for s in store.sessions.values()
            if s.dataset_id == session.dataset_id and s.budget == session.budget
        ]
        at_or_below = sum(1 for score in cohort if score <= session.score)
        series: list[int] = []
        running = 0
        for s in session.selections:
            running += 1 if s.is_low else 0
            series.append(running)
        return {
            "session_id": session.id,
            "score": session.score,
            "recomputed_score": recomputed,
            "budget": session.budget,
            "complete": session.remaining == 0,
            "selections": [
                {"hole_id": s.hole_id, "ctf": s.ctf, "is_low": s.is_low, "at": s.at}
                for s in session.selections
            ],
            "cumulative_scores": series,
            "percentile": 100.0 * at_or_below / len(cohort) if cohort else 100.0,
            "cohort_size": len(cohort),
        }

    @app.post("/v1/compare")
    def compare_agent(req: CompareRequest) -> dict:
        if policy is None:
            raise HTTPException(status_code=503, detail="no agent policy loaded")
        ds = get_dataset(req.dataset_id)
        if req.budget < 1:
            raise HTTPException(status_code=400, detail="budget must be positive")
        key = (req.dataset_id, req.budget)
        if key not in compare_cache:
            if req.dataset_id not in prediction_cache:
                prediction_cache[req.dataset_id] = predict_all(ds, policy.classifier)
            pt = prediction_cache[req.dataset_id]
            start_digest = hashlib.blake2b(
                req.dataset_id.encode("utf-8"), digest_size=8, key=cfg.seed.to_bytes(8, "little", signed=True)
            ).digest()
            start_idx = int.from_bytes(start_digest, "little") % ds.n_holes
            st = run_policy(
                policy, ds, ds.holes[start_idx].id, minutes_for_budget(req.budget), pt=pt
            )
            # Only the cumulative series leaves the server: per-hole results
            # would hand the human ground truth they have not paid a
            # selection for.
            steps = st.trajectory[: req.budget]
            series: list[int] = []
            running = 0
            for step in steps:
                running += 1 if step.is_low else 0
                series.append(running)
            compare_cache[key] = {
                "mode": "agent-replay",
                "dataset_id": req.dataset_id,
                "budget": req.budget,
                "budget_minutes": minutes_for_budget(req.budget),
                "score": running,
                "selections_used": len(steps),
                "cumulative_scores": series,
            }
        return compare_cache[key]

    return app
