"""Tabulated data behind the norm-comparison and constants plots."""
from __future__ import annotations

import csv
import math
import os

import numpy as np

from .normkit import c1_const, c2_const, group_norm
from .seeding import rng

CONSTANTS_HEADER = ["pstar", "c1", "c2", "c2_lower", "c2_upper"]
NORM_HEADER = ["pstar", "matrix", "norm_xt_2_pstar", "norm_x_pstar_2"]


def pstar_grid(lo: float, hi: float, step: float = 0.25) -> list:
    count = int(round((hi - lo) / step))
    return [lo + k * step for k in range(count + 1)]


def constants_rows(grid=None) -> list:
    rows = []
    for q in grid or pstar_grid(2.0, 20.0):
        rows.append([q, c1_const(q), c2_const(q), math.exp(-0.5) * math.sqrt(q),
                     math.exp(-0.5) * math.sqrt(q + 1.0)])
    return rows


def comparison_matrices(seed: int = 0) -> dict:
    return {"identity": np.eye(4), "gaussian": rng(seed, "figure-gaussian").standard_normal((4, 4))}


def norm_comparison_rows(seed: int = 0, grid=None) -> list:
    """||X^T||_{2,p*} and ||X||_{p*,2} along a p* grid for each comparison matrix."""
    rows = []
    mats = comparison_matrices(seed)
    for q in grid or pstar_grid(1.0, 20.0):
        for name, X in mats.items():
            rows.append([q, name, group_norm(X.T, 2, q), group_norm(X, q, 2)])
    return rows


def write_csv(path: str, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])


def write_figures(which: str, out_dir: str, seed: int = 0) -> list:
    """Write the requested tables into out_dir and return the paths written."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if which in ("constants", "all"):
        path = os.path.join(out_dir, "constants.csv")
        write_csv(path, CONSTANTS_HEADER, constants_rows())
        written.append(path)
    if which in ("norm_comparison", "all"):
        path = os.path.join(out_dir, "norm_comparison.csv")
        write_csv(path, NORM_HEADER, norm_comparison_rows(seed))
        written.append(path)
    if not written:
        raise ValueError(f"unknown figure {which!r}")
    return written
