"""IGD reference fronts: generation, CSV I/O and the shipped files.

DTLZ2/DTLZ4 fronts are the unit-sphere octant; WFG4-9 fronts are the same
directions scaled by ``(2, 4, ..., 2m)``. Directions come from the smallest
simplex lattice with at least ``min_points`` points, normalized to unit length.
"""

from __future__ import annotations

import functools
from importlib import resources
from pathlib import Path

import numpy as np

from .algorithm import lattice_size, simplex_lattice
from .problems import PROBLEMS, make_problem

MIN_POINTS = 500
SHIPPED_M = (2, 3)


def sphere_directions(m: int, min_points: int = MIN_POINTS) -> np.ndarray:
    H = 1
    while lattice_size(m, H) < min_points:
        H += 1
    L = simplex_lattice(m, H)
    return L / np.linalg.norm(L, axis=1, keepdims=True)


def generate_front(problem: str, m: int, min_points: int = MIN_POINTS) -> np.ndarray:
    scale = make_problem(problem, m, D=2 * (m - 1) + 1 if problem.startswith("WFG") else m).front_scale()
    return sphere_directions(m, min_points) * scale


def front_filename(problem: str, m: int) -> str:
    return f"{problem.upper()}_m{m}.csv"


def write_front(path, problem: str, m: int, points: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write(f"# problem={problem.upper()} m={m} points={len(points)}\n")
        fh.write(",".join(f"f{j + 1}" for j in range(m)) + "\n")
        for row in points:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_front(path) -> tuple[dict, np.ndarray]:
    """Parse a front file; returns the header fields and the ``(n, m)`` points."""
    text = path.read_text() if hasattr(path, "read_text") else Path(path).read_text()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing '# problem=... m=...' header")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    points = np.loadtxt(lines[2:], delimiter=",", ndmin=2)
    if points.shape[1] != int(meta["m"]):
        raise ValueError(f"{path}: header says m={meta['m']}, rows have {points.shape[1]} columns")
    return meta, points


@functools.lru_cache(maxsize=None)
def _reference_front(problem: str, m: int) -> np.ndarray:
    res = resources.files(__package__).joinpath("fronts", front_filename(problem, m))
    if res.is_file():
        _, points = read_front(res)
    else:
        points = generate_front(problem, m)
    points.setflags(write=False)
    return points


def reference_front(problem: str, m: int) -> np.ndarray:
    """Shipped front for ``(problem, m)``, generated on the fly for other ``m``."""
    return _reference_front(problem.upper(), int(m))


def write_shipped_fronts(directory) -> list[Path]:
    """Regenerate every shipped front file under ``directory``."""
    out = []
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name in PROBLEMS:
        for m in SHIPPED_M:
            path = directory / front_filename(name, m)
            write_front(path, name, m, generate_front(name, m))
            out.append(path)
    return out


if __name__ == "__main__":
    for p in write_shipped_fronts(Path(__file__).with_name("fronts")):
        print(p)
