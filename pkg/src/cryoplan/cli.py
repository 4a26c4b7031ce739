"""Command-line entry point: gen, train, eval, compare, serve, replay.

Every command resolves its configuration (flags over config file over
defaults), runs, and writes a JSON manifest recording the resolved config,
seeds, artifact paths, and content digests.  ``replay`` re-executes a
manifest; deterministic outputs (datasets, policies) reproduce byte for
byte, and reports reproduce up to their wall-clock columns, which the
manifest digests exclude.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .atlas import DatasetFormatError
from .baselines import GaConfig, SaConfig
from .classifier import ClassifierModel, predict_all
from .datagen import GenConfig, generate, load, save, y1_config
from .dqn import Policy, TrainConfig, train
from .elimination import ElimConfig
from .harness import (
    DqnRunner,
    GaRunner,
    GreedyRunner,
    PolicyRunner,
    RandomRunner,
    SaRunner,
    canonical_digest,
    compare,
    write_curves_csv,
    write_report_csv,
    write_report_json,
    write_visits_csv,
)
from .mlp import ModelFormatError

POLICY_NAMES = ("dqn", "greedy", "ga", "sa", "random")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat()


def _sha256(path: Path) -> str:
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def _classifier_from_spec(spec: str, seed: int) -> ClassifierModel:
    """gt|r50|r18|m, or custom recalls as custom(low,high) / custom:low,high."""
    if spec.startswith("custom"):
        inner = spec[len("custom") :].strip("():").rstrip(")")
        parts = inner.split(",")
        if len(parts) != 2:
            raise ValueError("custom classifier must be custom(<low_recall>,<high_recall>)")
        return ClassifierModel(float(parts[0]), float(parts[1]), seed=seed, name="custom")
    return ClassifierModel.from_preset(spec, seed=seed)


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return data


def _resolve(defaults: dict, file_cfg: dict, flags: dict) -> dict:
    """flags > config file > defaults; unknown file keys are rejected."""
    merged = dict(defaults)
    for key, val in file_cfg.items():
        if key not in defaults:
            raise ValueError(f"unknown config key {key!r}")
        merged[key] = val
    for key, val in flags.items():
        if val is not None:
            merged[key] = val
    return merged


class Manifest:
    def __init__(self, command: str, config: dict, seeds: dict):
        self.data = {
            "tool": "cryoplan",
            "tool_version": __version__,
            "command": command,
            "config": config,
            "seeds": seeds,
            "artifacts": {},
            "output_digests": {},
            "started_at": _utcnow(),
            "finished_at": None,
        }

    def add_artifact(self, name: str, path: Path, digest: str | None = None) -> None:
        self.data["artifacts"][name] = str(path)
        self.data["output_digests"][name] = digest if digest is not None else _sha256(path)

    def write(self, path: Path) -> None:
        self.data["finished_at"] = _utcnow()
        path.write_text(json.dumps(self.data, indent=2), encoding="utf-8")


GEN_DEFAULTS = {
    "preset": "y1",
    "seed": 0,
    "n_grids": 6,
    "squares_per_grid": [5, 6],
    "patches_per_square": [3, 5],
    "holes_per_patch": [24, 41],
    "target_low_fraction": 0.334,
    "clustering_strength": 1.2,
    "low_ctf_range": [3.0, 6.0],
    "high_ctf_range": [6.0, 25.0],
    "total_squares": None,
}


def _cmd_gen(args: argparse.Namespace) -> int:
    flags = {
        "preset": args.preset,
        "seed": args.seed,
        "n_grids": args.grids,
        "target_low_fraction": args.low_fraction,
        "clustering_strength": args.clustering,
        "total_squares": args.total_squares,
    }
    cfg = _resolve(GEN_DEFAULTS, _load_config_file(args.config), flags)
    if cfg["preset"] == "y1":
        gen_cfg = y1_config(int(cfg["seed"]))
        cfg = dict(cfg)
        for key, val in (
            ("n_grids", gen_cfg.n_grids),
            ("squares_per_grid", list(gen_cfg.squares_per_grid)),
            ("patches_per_square", list(gen_cfg.patches_per_square)),
            ("holes_per_patch", list(gen_cfg.holes_per_patch)),
            ("target_low_fraction", gen_cfg.target_low_fraction),
            ("clustering_strength", gen_cfg.clustering_strength),
            ("total_squares", gen_cfg.total_squares),
        ):
            cfg[key] = val
    else:
        gen_cfg = GenConfig(
            seed=int(cfg["seed"]),
            n_grids=int(cfg["n_grids"]),
            squares_per_grid=tuple(cfg["squares_per_grid"]),
            patches_per_square=tuple(cfg["patches_per_square"]),
            holes_per_patch=tuple(cfg["holes_per_patch"]),
            target_low_fraction=float(cfg["target_low_fraction"]),
            clustering_strength=float(cfg["clustering_strength"]),
            low_ctf_range=tuple(cfg["low_ctf_range"]),
            high_ctf_range=tuple(cfg["high_ctf_range"]),
            total_squares=None if cfg["total_squares"] is None else int(cfg["total_squares"]),
        )
    ds = generate(gen_cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save(ds, out)
    manifest = Manifest("gen", cfg, {"dataset": int(cfg["seed"])})
    manifest.add_artifact("dataset", out)
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    low = ds.is_low().mean()
    print(f"wrote {out}: {ds.n_holes} holes, {len(ds.squares)} squares, low fraction {low:.4f}")
    return EXIT_OK


TRAIN_DEFAULTS = {
    "classifier": "gt",
    "classifier_seed": 0,
    "duration": 240.0,
    "epochs": 20,
    "episodes_per_epoch": 50,
    "lr": 0.01,
    "gamma": 0.95,
    "replay_capacity": 20000,
    "batch_size": 64,
    "target_sync_interval": 500,
    "k": 4,
    "elim": "on",
    "beta_train": 2.5,
    "beta_test": 1.5,
    "seed": 0,
}


def _cmd_train(args: argparse.Namespace) -> int:
    flags = {
        "classifier": args.classifier,
        "classifier_seed": args.classifier_seed,
        "duration": args.duration,
        "epochs": args.epochs,
        "episodes_per_epoch": args.episodes,
        "lr": args.lr,
        "gamma": args.gamma,
        "batch_size": args.batch_size,
        "elim": args.elim,
        "beta_train": args.beta_train,
        "beta_test": args.beta_test,
        "seed": args.seed,
    }
    cfg = _resolve(TRAIN_DEFAULTS, _load_config_file(args.config), flags)
    ds = load(args.data)
    model = _classifier_from_spec(str(cfg["classifier"]), int(cfg["classifier_seed"]))
    pt = predict_all(ds, model)
    train_cfg = TrainConfig(
        budget=float(cfg["duration"]),
        epochs=int(cfg["epochs"]),
        episodes_per_epoch=int(cfg["episodes_per_epoch"]),
        lr=float(cfg["lr"]),
        gamma=float(cfg["gamma"]),
        replay_capacity=int(cfg["replay_capacity"]),
        batch_size=int(cfg["batch_size"]),
        target_sync_interval=int(cfg["target_sync_interval"]),
        k=int(cfg["k"]),
        seed=int(cfg["seed"]),
    )
    elim_cfg = ElimConfig(
        beta_train=float(cfg["beta_train"]),
        beta_test=float(cfg["beta_test"]),
        enabled=cfg["elim"] == "on",
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    metrics_path = Path(args.metrics) if args.metrics else out.with_suffix(".metrics.jsonl")
    policy = train(ds, pt, train_cfg, elim_cfg=elim_cfg, metrics_path=metrics_path)
    policy.save(out)
    manifest = Manifest(
        "train",
        cfg,
        {"train": train_cfg.seed, "classifier": model.seed},
    )
    manifest.data["inputs"] = {"data": str(args.data), "data_digest": _sha256(Path(args.data))}
    manifest.add_artifact("policy", out)
    manifest.add_artifact("metrics", metrics_path)
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    print(f"wrote {out} (elimination {'on' if elim_cfg.enabled else 'off'})")
    return EXIT_OK


EVAL_DEFAULTS = {
    "policies": ["dqn", "greedy", "ga", "sa", "random"],
    "classifier": None,
    "classifier_seed": 0,
    "budgets": [120.0, 240.0, 360.0, 480.0],
    "trials": 50,
    "seed": 0,
    "workers": 1,
    "ga_config": {},
    "sa_config": {},
}


def _build_runners(
    names: list[str], policy_path: str | None, ga_cfg: GaConfig, sa_cfg: SaConfig
) -> tuple[list[PolicyRunner], Policy | None]:
    runners: list[PolicyRunner] = []
    policy = None
    for name in names:
        if name == "dqn":
            if policy_path is None:
                raise ValueError("--policy is required when evaluating the dqn policy")
            policy = Policy.load(policy_path)
            runners.append(DqnRunner(policy))
        elif name == "greedy":
            runners.append(GreedyRunner())
        elif name == "ga":
            runners.append(GaRunner(ga_cfg))
        elif name == "sa":
            runners.append(SaRunner(sa_cfg))
        elif name == "random":
            runners.append(RandomRunner())
        else:
            raise ValueError(f"unknown policy {name!r}")
    return runners, policy


def _run_evaluation(args: argparse.Namespace, command: str, default_policies: list[str]) -> int:
    flags = {
        "policies": args.policies.split(",") if args.policies else None,
        "classifier": args.classifier,
        "classifier_seed": args.classifier_seed,
        "budgets": [float(b) for b in args.budgets.split(",")] if args.budgets else None,
        "trials": args.trials,
        "seed": args.seed,
        "workers": args.workers,
        "ga_config": json.loads(Path(args.ga_config).read_text()) if args.ga_config else None,
        "sa_config": json.loads(Path(args.sa_config).read_text()) if args.sa_config else None,
    }
    defaults = dict(EVAL_DEFAULTS)
    defaults["policies"] = default_policies
    cfg = _resolve(defaults, _load_config_file(args.config), flags)
    names = list(cfg["policies"])
    for name in names:
        if name not in POLICY_NAMES:
            raise UsageError(f"unknown policy {name!r}; choose from {','.join(POLICY_NAMES)}")
    ds = load(args.data)
    ga_cfg = GaConfig(**cfg["ga_config"]) if cfg["ga_config"] else GaConfig(seed=int(cfg["seed"]))
    sa_cfg = SaConfig(**cfg["sa_config"]) if cfg["sa_config"] else SaConfig(seed=int(cfg["seed"]))
    runners, policy = _build_runners(names, args.policy, ga_cfg, sa_cfg)

    if cfg["classifier"] is not None:
        model = _classifier_from_spec(str(cfg["classifier"]), int(cfg["classifier_seed"]))
    elif policy is not None:
        model = policy.classifier
    else:
        model = ClassifierModel.from_preset("gt", seed=int(cfg["classifier_seed"]))
    cfg = dict(cfg)
    cfg["classifier"] = model.name if model.name != "custom" else f"custom:{model.low_recall},{model.high_recall}"
    pt = predict_all(ds, model)

    result = compare(
        runners,
        ds,
        pt,
        budgets=list(cfg["budgets"]),
        trials=int(cfg["trials"]),
        seed=int(cfg["seed"]),
        workers=int(cfg["workers"]),
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_json = out_dir / "report.json"
    report_csv = out_dir / "report.csv"
    curves = out_dir / "curve.csv"
    write_report_json(result, report_json)
    write_report_csv(result, report_csv)
    write_curves_csv(result, curves)
    manifest = Manifest(command, cfg, {"eval": int(cfg["seed"]), "classifier": model.seed})
    manifest.data["inputs"] = {"data": str(args.data), "data_digest": _sha256(Path(args.data))}
    if args.policy:
        manifest.data["inputs"]["policy"] = str(args.policy)
        manifest.data["inputs"]["policy_digest"] = _sha256(Path(args.policy))
    manifest.add_artifact("report_json", report_json, "canonical:" + canonical_digest(result.to_dict()))
    manifest.add_artifact("report_csv", report_csv, _csv_runtime_free_digest(report_csv))
    manifest.add_artifact("curve_csv", curves)
    if len(runners) == 1:
        visits = out_dir / "visits.csv"
        write_visits_csv(result.visit_graphs[runners[0].name], visits)
        manifest.add_artifact("visits_csv", visits)
    else:
        for runner in runners:
            visits = out_dir / f"visits_{runner.name}.csv"
            write_visits_csv(result.visit_graphs[runner.name], visits)
            manifest.add_artifact(f"visits_{runner.name}_csv", visits)
    manifest.write(out_dir / "manifest.json")
    top = max(cfg["budgets"])
    for report in result.reports:
        res = report.result_at(top)
        print(
            f"{report.policy:>8}  budget {top:g}: mean #lCTF {res.mean_lctf:.1f} "
            f"± {res.std_lctf:.1f}, precision {res.precision:.3f}, runtime {res.runtime_seconds:.1f}s"
        )
    return EXIT_OK


def _csv_runtime_free_digest(path: Path) -> str:
    """Digest of a report CSV with the runtime column blanked."""
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    drop = [i for i, name in enumerate(header) if name == "runtime_seconds"]
    canon = []
    for line in lines:
        cells = line.split(",")
        for i in drop:
            if i < len(cells):
                cells[i] = ""
        canon.append(",".join(cells))
    return "canonical:" + hashlib.sha256("\n".join(canon).encode("utf-8")).hexdigest()


def _cmd_eval(args: argparse.Namespace) -> int:
    return _run_evaluation(args, "eval", ["dqn"])


def _cmd_compare(args: argparse.Namespace) -> int:
    return _run_evaluation(args, "compare", list(POLICY_NAMES))


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    datasets = {}
    for entry in args.data:
        if "=" in entry:
            name, path = entry.split("=", 1)
        else:
            name, path = Path(entry).stem, entry
        datasets[name] = load(path)
    policy = Policy.load(args.agent_policy) if args.agent_policy else None
    cfg = ServiceConfig(
        store_dir=Path(args.store),
        allowed_budgets=(50, 100),
        any_budget=args.any_budget,
        patches_only=args.patches_only,
        seed=args.seed if args.seed is not None else 0,
    )
    app = create_app(datasets, cfg, policy=policy)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except SystemExit as e:  # uvicorn raises on bind failure
        return EXIT_RUNTIME if e.code else EXIT_OK
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_replay(args: argparse.Namespace) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    command = manifest["command"]
    config = manifest["config"]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_path = out_dir / "replay-config.json"
    cfg_path.write_text(json.dumps(config), encoding="utf-8")

    argv: list[str]
    if command == "gen":
        argv = ["gen", "--config", str(cfg_path), "--out", str(out_dir / "dataset.csv")]
    elif command == "train":
        argv = [
            "train",
            "--config",
            str(cfg_path),
            "--data",
            manifest["inputs"]["data"],
            "--out",
            str(out_dir / "policy.bin"),
        ]
    elif command in ("eval", "compare"):
        argv = [
            command,
            "--config",
            str(cfg_path),
            "--data",
            manifest["inputs"]["data"],
            "--out",
            str(out_dir),
        ]
        if "policy" in manifest.get("inputs", {}):
            argv += ["--policy", manifest["inputs"]["policy"]]
    else:
        raise ValueError(f"manifest command {command!r} cannot be replayed")
    code = main(argv)
    if code != EXIT_OK:
        return code
    if args.check:
        new_manifest_path = {
            "gen": out_dir / "dataset.csv.manifest.json",
            "train": out_dir / "policy.bin.manifest.json",
            "eval": out_dir / "manifest.json",
            "compare": out_dir / "manifest.json",
        }[command]
        new_manifest = json.loads(new_manifest_path.read_text(encoding="utf-8"))
        old_digests = manifest["output_digests"]
        new_digests = new_manifest["output_digests"]
        mismatches = [
            name
            for name, digest in old_digests.items()
            if name in new_digests and new_digests[name] != digest
        ]
        if mismatches:
            print(f"replay mismatch in: {', '.join(mismatches)}", file=sys.stderr)
            return EXIT_RUNTIME
        print("replay verified: outputs match the manifest digests")
    return EXIT_OK


class UsageError(ValueError):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cryoplan",
        description="Budgeted acquisition planning: simulate, learn, benchmark.",
    )
    parser.add_argument("--version", action="version", version=f"cryoplan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset CSV")
    p.add_argument("--preset", choices=["y1", "custom"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--grids", type=int, default=None)
    p.add_argument("--total-squares", dest="total_squares", type=int, default=None)
    p.add_argument("--low-fraction", dest="low_fraction", type=float, default=None)
    p.add_argument("--clustering", type=float, default=None)
    p.add_argument("--config", default=None, help="JSON config file (flags win)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("train", help="train the Q-network planner")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--classifier", default=None, help="gt|r50|r18|m|custom:<low>,<high>")
    p.add_argument("--classifier-seed", dest="classifier_seed", type=int, default=None)
    p.add_argument("--duration", type=float, default=None, help="training budget in minutes")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--episodes", type=int, default=None, help="episodes per epoch")
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--elim", choices=["on", "off"], default=None)
    p.add_argument("--beta-train", dest="beta_train", type=float, default=None)
    p.add_argument("--beta-test", dest="beta_test", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--metrics", default=None, help="metrics JSONL path")
    p.add_argument("--config", default=None)
    p.set_defaults(func=_cmd_train)

    for name, helptext in (
        ("eval", "evaluate one or more policies on a dataset"),
        ("compare", "paired comparison of all policies"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--data", required=True)
        p.add_argument("--policy", default=None, help="trained policy file (for dqn)")
        p.add_argument("--policies", default=None, help="comma list: dqn,greedy,ga,sa,random")
        p.add_argument("--classifier", default=None)
        p.add_argument("--classifier-seed", dest="classifier_seed", type=int, default=None)
        p.add_argument("--budgets", default=None, help="comma list of minutes")
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None, help="trial-level parallelism")
        p.add_argument("--ga-config", dest="ga_config", default=None, help="GA settings JSON file")
        p.add_argument("--sa-config", dest="sa_config", default=None, help="SA settings JSON file")
        p.add_argument("--config", default=None)
        p.add_argument("--out", required=True, help="output directory")
        p.set_defaults(func=_cmd_eval if name == "eval" else _cmd_compare)

    p = sub.add_parser("serve", help="run the human-benchmark HTTP service")
    p.add_argument("--data", action="append", required=True, help="dataset CSV (name=path or path)")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--agent-policy", dest="agent_policy", default=None)
    p.add_argument("--store", default="bench-sessions")
    p.add_argument("--any-budget", dest="any_budget", action="store_true")
    p.add_argument("--patches-only", dest="patches_only", action="store_true")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="directory for the replayed outputs")
    p.add_argument("--check", action="store_true", help="verify output digests match")
    p.set_defaults(func=_cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DatasetFormatError, ModelFormatError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
