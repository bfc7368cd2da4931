"""File formats and the synthetic instance generator.

Points: CSV with header ``id,x1,...,xD``.
Matrix: first line n, then n rows of n whitespace-separated reals.
Groups: JSON ``{"t": int, "groups": [[facility ids]], "r": [ints], "k": int}``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.datasets import make_blobs

from .core import MEDIAN, DivClustError, GroupSystem, MetricInstance, Requirements


@dataclass
class Problem:
    instance: MetricInstance
    groups: GroupSystem
    req: Requirements
    ids: list[int]


def read_points(path) -> tuple[list[int], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0].strip() != "id" or len(header) < 2:
            raise DivClustError("points file needs a header 'id,x1,...,xD'")
        ids, rows = [], []
        for line in reader:
            if not line:
                continue
            if len(line) != len(header):
                raise DivClustError(f"row {len(ids) + 1} has {len(line)} fields, expected {len(header)}")
            ids.append(int(line[0]))
            rows.append([float(x) for x in line[1:]])
    if len(set(ids)) != len(ids):
        raise DivClustError("duplicate point ids")
    return ids, np.asarray(rows, dtype=float).reshape(len(rows), len(header) - 1)


def write_points(path, points: np.ndarray, ids=None) -> None:
    points = np.asarray(points, dtype=float)
    ids = range(len(points)) if ids is None else ids
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id"] + [f"x{i + 1}" for i in range(points.shape[1])])
        for i, row in zip(ids, points):
            w.writerow([i] + [repr(float(x)) for x in row])


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        n = int(fh.readline())
        rows = [list(map(float, line.split())) for line in fh if line.strip()]
    M = np.asarray(rows, dtype=float)
    if M.shape != (n, n):
        raise DivClustError(f"expected a {n}x{n} matrix, got {M.shape}")
    return M


def read_groups(path) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("t", "groups", "r", "k"):
        if key not in doc:
            raise DivClustError(f"groups file lacks {key!r}")
    if len(doc["groups"]) != doc["t"] or len(doc["r"]) != doc["t"]:
        raise DivClustError("groups file: t disagrees with groups / r lengths")
    return doc


def write_groups(path, groups: list[list[int]], r, k: int) -> None:
    doc = {"t": len(groups), "groups": [sorted(int(f) for f in g) for g in groups],
            "r": [int(x) for x in r], "k": int(k)}
    with open(path, "w") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def normalize_columns(points: np.ndarray) -> np.ndarray:
    """Scale every column to unit Euclidean norm (all-zero columns are left alone)."""
    norms = np.linalg.norm(points, axis=0)
    norms[norms == 0] = 1.0
    return points / norms


def load_problem(groups_path, points_path=None, matrix_path=None, objective: str = MEDIAN,
                 normalize: str | None = None) -> Problem:
    """Clients and facilities are the same point set; group ids refer to file ids."""
    doc = read_groups(groups_path)
    if (points_path is None) == (matrix_path is None):
        raise DivClustError("give exactly one of a points file or a matrix file")
    if points_path is not None:
        ids, pts = read_points(points_path)
        if normalize == "unit-norm":
            pts = normalize_columns(pts)
        elif normalize not in (None, "none"):
            raise DivClustError(f"unknown normalization {normalize!r}")
        instance = MetricInstance.from_points(pts, objective=objective)
    else:
        M = read_matrix(matrix_path)
        ids = list(range(len(M)))
        instance = MetricInstance.from_matrix(M, objective=objective)
    index = {i: n for n, i in enumerate(ids)}
    try:
        groups = [[index[int(f)] for f in g] for g in doc["groups"]]
    except KeyError as exc:
        raise DivClustError(f"group references unknown point id {exc.args[0]}") from None
    gs = GroupSystem.from_lists(groups, instance.n_facilities)
    req = Requirements(tuple(doc["r"]), int(doc["k"]))
    req.check(gs, instance.n_facilities)
    return Problem(instance, gs, req, ids)


def synthetic_groups(n: int, t: int, rng: np.random.Generator) -> list[list[int]]:
    """Every point joins g groups, g uniform in [1, max(1, t // 2)], groups drawn without replacement."""
    hi = max(1, t // 2)
    groups: list[list[int]] = [[] for _ in range(t)]
    sizes = rng.integers(1, hi + 1, size=n)
    for p, g in enumerate(sizes):
        for gid in rng.choice(t, size=int(g), replace=False):
            groups[int(gid)].append(p)
    return groups


def generate_synthetic(n: int, D: int, blobs: int, t: int, k: int, seed: int, r=None,
                       sigma: float = 0.05) -> tuple[np.ndarray, list[list[int]], tuple[int, ...], int]:
    """Gaussian blobs in the unit box plus random overlapping groups.

    Returns (points, groups, r, k); ``r`` defaults to all ones.
    """
    if t < 2:
        raise DivClustError("t must be at least 2")
    if n < k or k < 1 or D < 1 or blobs < 1 or sigma <= 0:
        raise DivClustError("invalid generator parameters")
    r = (1,) * t if r is None else tuple(int(x) for x in r)
    if len(r) != t or any(x < 0 or x > k for x in r):
        raise DivClustError("r must have t entries in [0, k]")
    ss = np.random.SeedSequence(seed)
    s_centers, s_points, s_groups = ss.spawn(3)
    centers = np.random.default_rng(s_centers).random((blobs, D))
    points, _ = make_blobs(n_samples=n, centers=centers, cluster_std=sigma,
                           random_state=int(s_points.generate_state(1)[0]))
    groups = synthetic_groups(n, t, np.random.default_rng(s_groups))
    return points, groups, r, k


def synthetic_problem(n: int, D: int, blobs: int, t: int, k: int, seed: int, r=None, sigma: float = 0.05,
                      objective: str = MEDIAN) -> Problem:
    points, groups, r, k = generate_synthetic(n, D, blobs, t, k, seed, r=r, sigma=sigma)
    instance = MetricInstance.from_points(points, objective=objective)
    gs = GroupSystem.from_lists(groups, n)
    return Problem(instance, gs, Requirements(r, k), list(range(n)))


def write_synthetic(out_dir, n: int, D: int, blobs: int, t: int, k: int, seed: int, r=None,
                    sigma: float = 0.05) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    points, groups, r, k = generate_synthetic(n, D, blobs, t, k, seed, r=r, sigma=sigma)
    pp, gp = out / "points.csv", out / "groups.json"
    write_points(pp, points)
    write_groups(gp, groups, r, k)
    return pp, gp
