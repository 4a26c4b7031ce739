"""Synthetic atlas generation, CSV persistence, and train/validation splitting.

The generator produces hierarchies whose hole quality is spatially
correlated: each square draws a latent quality level, each patch perturbs
its square's latent, and each hole is low-CTF with a probability driven by
its patch latent.  A bias term is calibrated so the expected low fraction
matches the configured target regardless of clustering strength.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .atlas import Dataset, DatasetFormatError, Grid, Hole, Patch, Square


class GenerationError(ValueError):
    """Raised when a generation config cannot be realized."""


@dataclass(frozen=True)
class GenConfig:
    seed: int
    n_grids: int
    squares_per_grid: tuple[int, int]
    patches_per_square: tuple[int, int]
    holes_per_patch: tuple[int, int]
    target_low_fraction: float
    clustering_strength: float = 1.0
    low_ctf_range: tuple[float, float] = (3.0, 6.0)
    high_ctf_range: tuple[float, float] = (6.0, 25.0)
    # When set, overrides squares_per_grid and spreads exactly this many
    # squares across the grids as evenly as possible.
    total_squares: int | None = None

    def __post_init__(self) -> None:
        if not (0.0 < self.target_low_fraction < 1.0):
            raise GenerationError("target_low_fraction must lie in (0, 1)")
        if self.clustering_strength < 0.0:
            raise GenerationError("clustering_strength must be >= 0")
        if self.n_grids < 1:
            raise GenerationError("need at least one grid")
        for name, rng_ in (
            ("squares_per_grid", self.squares_per_grid),
            ("patches_per_square", self.patches_per_square),
            ("holes_per_patch", self.holes_per_patch),
        ):
            lo, hi = rng_
            if lo < 1 or hi < lo:
                raise GenerationError(f"{name} range {rng_} is invalid")
        if self.low_ctf_range[1] > self.high_ctf_range[0]:
            raise GenerationError("low and high CTF ranges must not overlap")
        if self.total_squares is not None and self.total_squares < self.n_grids:
            raise GenerationError("total_squares must cover every grid")


def y1_config(seed: int) -> GenConfig:
    """Preset sized like the reference acquisition dataset.

    31 squares over 6 grid-level images, roughly 4000 holes, and about a
    third of them low-CTF.
    """
    return GenConfig(
        seed=seed,
        n_grids=6,
        squares_per_grid=(5, 6),
        patches_per_square=(3, 5),
        holes_per_patch=(24, 41),
        target_low_fraction=0.334,
        clustering_strength=1.2,
        total_squares=31,
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _calibrate_bias(latents: np.ndarray, strength: float, target: float) -> float:
    """Bisection for b such that mean(sigmoid(strength*latent + b)) == target."""
    lo, hi = -60.0, 60.0
    f = lambda b: float(np.mean(_sigmoid(strength * latents + b))) - target
    if f(lo) > 0.0 or f(hi) < 0.0:
        raise GenerationError("low-fraction calibration is infeasible")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def generate(cfg: GenConfig) -> Dataset:
    """Deterministically generate a hierarchy for the given config."""
    rng = np.random.default_rng(cfg.seed)

    if cfg.total_squares is not None:
        base, rem = divmod(cfg.total_squares, cfg.n_grids)
        squares_per_grid = [base + (1 if g < rem else 0) for g in range(cfg.n_grids)]
    else:
        lo, hi = cfg.squares_per_grid
        squares_per_grid = [int(rng.integers(lo, hi + 1)) for _ in range(cfg.n_grids)]

    # Structure first, then quality, so id layout and labels draw from
    # disjoint stretches of the stream in a fixed order.
    plan: list[tuple[int, int, list[int]]] = []  # (grid, square, holes per patch)
    for g in range(cfg.n_grids):
        for s in range(squares_per_grid[g]):
            n_patches = int(rng.integers(cfg.patches_per_square[0], cfg.patches_per_square[1] + 1))
            holes = [
                int(rng.integers(cfg.holes_per_patch[0], cfg.holes_per_patch[1] + 1))
                for _ in range(n_patches)
            ]
            plan.append((g, s, holes))

    sq_w = max(2, len(str(max(squares_per_grid) - 1)))
    patch_w = max(1, len(str(cfg.patches_per_square[1] - 1)))
    hole_w = max(2, len(str(cfg.holes_per_patch[1] - 1)))

    square_latents = rng.normal(0.0, 1.0, size=len(plan))
    patch_latents: list[float] = []
    for i, (_, _, holes) in enumerate(plan):
        for _ in holes:
            patch_latents.append(square_latents[i] + rng.normal(0.0, 0.5))
    patch_latents_arr = np.array(patch_latents)

    hole_latents = np.concatenate(
        [
            np.full(n, patch_latents_arr[k])
            for k, n in enumerate(n for _, _, holes in plan for n in holes)
        ]
    )
    bias = _calibrate_bias(hole_latents, cfg.clustering_strength, cfg.target_low_fraction)
    p_low = _sigmoid(cfg.clustering_strength * hole_latents + bias)
    low = rng.random(len(hole_latents)) < p_low

    lo_a, lo_b = cfg.low_ctf_range
    hi_a, hi_b = cfg.high_ctf_range
    ctf = np.where(
        low,
        rng.uniform(lo_a, lo_b, size=len(low)),
        rng.uniform(np.nextafter(hi_a, hi_b), hi_b, size=len(low)),
    )

    grids: list[Grid] = []
    squares: list[Square] = []
    patches: list[Patch] = []
    holes_out: list[Hole] = []
    grid_squares: dict[str, list[str]] = {}
    hole_i = 0
    for g, s, per_patch in plan:
        gid = f"G{g}"
        sid = f"{gid}-S{s:0{sq_w}d}"
        grid_squares.setdefault(gid, []).append(sid)
        patch_ids: list[str] = []
        for p, n in enumerate(per_patch):
            pid = f"{sid}-P{p:0{patch_w}d}"
            cols = math.ceil(math.sqrt(n))
            hole_ids: list[str] = []
            for m in range(n):
                hid = f"{pid}-H{m:0{hole_w}d}"
                jx, jy = rng.uniform(-0.15, 0.15, size=2)
                holes_out.append(
                    Hole(
                        id=hid,
                        patch_id=pid,
                        x=float(m % cols + jx),
                        y=float(m // cols + jy),
                        ctf=float(ctf[hole_i]),
                    )
                )
                hole_ids.append(hid)
                hole_i += 1
            patches.append(Patch(pid, sid, tuple(hole_ids)))
            patch_ids.append(pid)
        squares.append(Square(sid, gid, tuple(patch_ids)))
    for g in range(cfg.n_grids):
        gid = f"G{g}"
        grids.append(Grid(gid, tuple(grid_squares.get(gid, ()))))
    return Dataset(grids, squares, patches, holes_out)


CSV_HEADER = ["hole_id", "grid_id", "square_id", "patch_id", "x", "y", "ctf"]


def save(ds: Dataset, path: str | Path) -> None:
    """Write one CSV row per hole with its full lineage."""
    path = Path(path)
    patch_square = {p.id: p.square_id for p in ds.patches}
    square_grid = {s.id: s.grid_id for s in ds.squares}
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_HEADER)
        for h in ds.holes:
            sid = patch_square[h.patch_id]
            w.writerow([h.id, square_grid[sid], sid, h.patch_id, repr(h.x), repr(h.y), repr(h.ctf)])


def load(path: str | Path) -> Dataset:
    """Rebuild a Dataset from the CSV written by save().

    Grids, squares, and patches are created in first-appearance order and
    their child lists follow row order, so save -> load round-trips.
    """
    path = Path(path)
    grids: dict[str, list[str]] = {}
    squares: dict[str, tuple[str, list[str]]] = {}
    patches: dict[str, tuple[str, list[str]]] = {}
    holes: list[Hole] = []
    seen_holes: set[str] = set()
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}:1: empty file, expected header {CSV_HEADER}")
        if header != CSV_HEADER:
            raise DatasetFormatError(f"{path}:1: bad header {header!r}, expected {CSV_HEADER}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise DatasetFormatError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            hid, gid, sid, pid, xs, ys, cs = row
            try:
                x, y, ctf = float(xs), float(ys), float(cs)
            except ValueError:
                raise DatasetFormatError(f"{path}:{lineno}: non-numeric x/y/ctf") from None
            if hid in seen_holes:
                raise DatasetFormatError(f"{path}:{lineno}: duplicate hole id {hid!r}")
            seen_holes.add(hid)
            if sid in squares and squares[sid][0] != gid:
                raise DatasetFormatError(f"{path}:{lineno}: square {sid!r} claimed by two grids")
            if pid in patches and patches[pid][0] != sid:
                raise DatasetFormatError(f"{path}:{lineno}: patch {pid!r} claimed by two squares")
            if gid not in grids:
                grids[gid] = []
            if sid not in squares:
                squares[sid] = (gid, [])
                grids[gid].append(sid)
            if pid not in patches:
                patches[pid] = (sid, [])
                squares[sid][1].append(pid)
            patches[pid][1].append(hid)
            try:
                holes.append(Hole(hid, pid, x, y, ctf))
            except DatasetFormatError as e:
                raise DatasetFormatError(f"{path}:{lineno}: {e}") from None
    try:
        return Dataset(
            [Grid(g, tuple(sids)) for g, sids in grids.items()],
            [Square(s, g, tuple(pids)) for s, (g, pids) in squares.items()],
            [Patch(p, s, tuple(hids)) for p, (s, hids) in patches.items()],
            holes,
        )
    except DatasetFormatError as e:
        raise DatasetFormatError(f"{path}: {e}") from None


@dataclass(frozen=True)
class SplitSpec:
    ratio: tuple[int, int] = (2, 1)
    unit: str = "square"

    def __post_init__(self) -> None:
        a, b = self.ratio
        if a < 0 or b < 0 or a + b == 0:
            raise ValueError(f"invalid split ratio {self.ratio}")
        if self.unit != "square":
            raise ValueError("only square-level splitting is supported")


def subset_by_squares(ds: Dataset, square_ids: set[str]) -> Dataset:
    """Dataset restricted to the given squares, preserving order."""
    squares = [s for s in ds.squares if s.id in square_ids]
    grids = []
    for g in ds.grids:
        kept = tuple(sid for sid in g.square_ids if sid in square_ids)
        if kept:
            grids.append(Grid(g.id, kept))
    patch_ids = {pid for s in squares for pid in s.patch_ids}
    patches = [p for p in ds.patches if p.id in patch_ids]
    hole_ids = {hid for p in patches for hid in p.hole_ids}
    holes = [h for h in ds.holes if h.id in hole_ids]
    return Dataset(grids, squares, patches, holes)


def split(ds: Dataset, spec: SplitSpec, seed: int) -> tuple[Dataset, Dataset]:
    """Random square-level partition at the configured ratio.

    Sizes are the floored proportional shares; leftover squares go to the
    part with the larger ratio value (the first part on ties).
    """
    n = len(ds.squares)
    if n < 2:
        raise ValueError("need at least 2 squares to split")
    a, b = spec.ratio
    total = a + b
    sizes = [n * a // total, n * b // total]
    order = [0, 1] if a >= b else [1, 0]
    leftover = n - sum(sizes)
    for i in range(leftover):
        sizes[order[i % 2]] += 1

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    first_ids = {ds.squares[i].id for i in perm[: sizes[0]]}
    second_ids = {ds.squares[i].id for i in perm[sizes[0] :]}
    return subset_by_squares(ds, first_ids), subset_by_squares(ds, second_ids)


def replace_seed(cfg: GenConfig, seed: int) -> GenConfig:
    return replace(cfg, seed=seed)
