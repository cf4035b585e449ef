"""Synthetic samples and the CSV sample format (header ``label,f1,...,fd``)."""
from __future__ import annotations

import csv
import itertools
import math

import numpy as np

from .rademacher import Sample
from .seeding import rng

DISTRIBUTIONS = ("gaussian", "sphere", "grid")


class SampleFormatError(ValueError):
    """A sample file could not be parsed; the message carries path and line."""


def balanced_labels(m: int) -> np.ndarray:
    return np.where(np.arange(m) % 2 == 0, 1.0, -1.0)


def generate_sample(d: int, m: int, distribution: str = "gaussian", seed: int = 0) -> Sample:
    """Seeded synthetic sample with alternating labels +1, -1, ..."""
    if d < 1 or m < 1:
        raise ValueError("d and m must be >= 1")
    if distribution == "gaussian":
        X = rng(seed, "gen-gaussian").standard_normal((m, d))
    elif distribution == "sphere":
        X = rng(seed, "gen-sphere").standard_normal((m, d))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
    elif distribution == "grid":
        k = max(2, math.ceil(m ** (1.0 / d) - 1e-9))
        axis = np.linspace(-1.0, 1.0, k)
        X = np.array(list(itertools.islice(itertools.product(axis, repeat=d), m)))
    else:
        raise ValueError(f"distribution must be one of {DISTRIBUTIONS}, got {distribution!r}")
    return Sample(X.T, balanced_labels(m))


def write_sample(path: str, sample: Sample) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"f{k + 1}" for k in range(sample.d)])
        for i in range(sample.m):
            w.writerow([str(int(sample.y[i]))] + [format(v, ".17g") for v in sample.X[:, i]])


def read_sample(path: str) -> Sample:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SampleFormatError(f"{path}:1: empty file")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 1
    if d < 1 or header[0] != "label" or header[1:] != [f"f{k + 1}" for k in range(d)]:
        raise SampleFormatError(f"{path}:1: header must be label,f1,...,fd")
    ys, xs = [], []
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != d + 1:
            raise SampleFormatError(f"{path}:{line}: expected {d + 1} fields, got {len(row)}")
        try:
            label = float(row[0])
            feats = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise SampleFormatError(f"{path}:{line}: {exc}") from None
        if label not in (1.0, -1.0):
            raise SampleFormatError(f"{path}:{line}: label must be 1 or -1")
        if not all(math.isfinite(v) for v in feats):
            raise SampleFormatError(f"{path}:{line}: non-finite feature")
        ys.append(label)
        xs.append(feats)
    if not ys:
        raise SampleFormatError(f"{path}:2: no data rows")
    return Sample(np.array(xs).T, np.array(ys))
