import numpy as np
import pytest

from cryoplan.atlas import Dataset, Grid, Hole, Patch, Square


def build_dataset(spec: dict[str, dict[str, dict[str, list[float]]]]) -> Dataset:
    """Build a Dataset from {grid: {square: {patch: [ctf, ...]}}}.

    Ids follow the generator's convention; holes get lattice positions.
    """
    grids, squares, patches, holes = [], [], [], []
    for gid, sq_spec in spec.items():
        square_ids = []
        for sid_suffix, patch_spec in sq_spec.items():
            sid = f"{gid}-{sid_suffix}"
            patch_ids = []
            for pid_suffix, ctfs in patch_spec.items():
                pid = f"{sid}-{pid_suffix}"
                hole_ids = []
                for m, ctf in enumerate(ctfs):
                    hid = f"{pid}-H{m:02d}"
                    holes.append(Hole(hid, pid, float(m % 4), float(m // 4), ctf))
                    hole_ids.append(hid)
                patches.append(Patch(pid, sid, tuple(hole_ids)))
                patch_ids.append(pid)
            squares.append(Square(sid, gid, tuple(patch_ids)))
            square_ids.append(sid)
        grids.append(Grid(gid, tuple(square_ids)))
    return Dataset(grids, squares, patches, holes)


@pytest.fixture
def tiny_dataset() -> Dataset:
    """2 grids x 2 squares x 2 patches x 5 holes; quality varies by patch."""
    def ctfs(n_low: int, n_high: int) -> list[float]:
        return [4.0 + 0.2 * i for i in range(n_low)] + [8.0 + 0.5 * i for i in range(n_high)]

    return build_dataset(
        {
            "G0": {
                "S0": {"P0": ctfs(4, 1), "P1": ctfs(3, 2)},
                "S1": {"P0": ctfs(2, 3), "P1": ctfs(1, 4)},
            },
            "G1": {
                "S0": {"P0": ctfs(5, 0), "P1": ctfs(0, 5)},
                "S1": {"P0": ctfs(2, 3), "P1": ctfs(1, 4)},
            },
        }
    )


@pytest.fixture
def two_patch_dataset() -> Dataset:
    """Two patches in the same square, 3 low holes each."""
    return build_dataset(
        {"G0": {"S0": {"P0": [4.0, 4.5, 5.0], "P1": [4.1, 4.6, 5.1]}}}
    )


def random_dataset(rng: np.random.Generator, n_grids=2, squares=2, patches=2, holes=4) -> Dataset:
    spec: dict = {}
    for g in range(n_grids):
        gd = {}
        for s in range(squares):
            sd = {}
            for p in range(patches):
                sd[f"P{p}"] = [float(x) for x in rng.uniform(3.0, 12.0, size=holes)]
            gd[f"S{s}"] = sd
        spec[f"G{g}"] = gd
    return build_dataset(spec)
