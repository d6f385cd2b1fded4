"""Seeded collocation sampling and per-iteration mini-batch selection.

One `sample` call fixes the training data for a whole run; optimizer steps
then draw interior mini-batches from it without replacement. The generator is
numpy's default PCG64 stream, seeded explicitly everywhere, with a fixed draw
order (interior block, boundary sides, boundary times, initial positions) so
sets are reproducible across platforms and sessions.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = ["CollocationSet", "sample", "minibatch", "export_csv"]


@dataclass(frozen=True)
class CollocationSet:
    """Immutable (x, t) point sets for the three loss regions.

    interior: [N_d, 2] strictly inside (0,1)^2
    boundary: [N_b, 2] with x in {0, 1} exactly, t in [0, 1]
    initial:  [N_i, 2] with t = 0 exactly
    """

    interior: np.ndarray
    boundary: np.ndarray
    initial: np.ndarray
    seed: int

    def __post_init__(self):
        for name in ("interior", "boundary", "initial"):
            pts = getattr(self, name)
            if pts.ndim != 2 or pts.shape[1] != 2:
                raise ConfigurationError(f"{name} must be an [N, 2] array, got {pts.shape}")
            pts.setflags(write=False)
        xi, ti = self.interior[:, 0], self.interior[:, 1]
        if self.interior.size and not (
            np.all(xi > 0) and np.all(xi < 1) and np.all(ti > 0) and np.all(ti < 1)
        ):
            raise ConfigurationError("interior points must lie strictly inside (0,1)^2")
        xb = self.boundary[:, 0]
        if self.boundary.size and np.any(xb * (1 - xb) != 0):
            raise ConfigurationError("boundary points must have x in {0, 1} exactly")
        if self.initial.size and np.any(self.initial[:, 1] != 0):
            raise ConfigurationError("initial points must have t = 0 exactly")


def sample(
    n_interior: int = 20_000,
    n_boundary: int = 5_000,
    n_initial: int = 5_000,
    seed: int = 0,
) -> CollocationSet:
    """Draw the three regions: interior i.i.d. uniform on the open square,
    boundary x from {0,1} with equal probability and t uniform, initial x
    uniform with t pinned to 0. Deterministic per seed."""
    for name, n in (("n_interior", n_interior), ("n_boundary", n_boundary), ("n_initial", n_initial)):
        if n < 0:
            raise ConfigurationError(f"{name} must be >= 0, got {n}")
    rng = np.random.default_rng(seed)

    interior = rng.uniform(0.0, 1.0, size=(n_interior, 2))
    # uniform() includes its low endpoint; redraw the measure-zero exact hits
    # so the open-interval membership is structural, not probabilistic
    while True:
        on_edge = (interior == 0.0) | (interior == 1.0)
        if not on_edge.any():
            break
        interior[on_edge] = rng.uniform(0.0, 1.0, size=int(on_edge.sum()))

    sides = rng.integers(0, 2, size=n_boundary).astype(np.float64)
    t_b = rng.uniform(0.0, 1.0, size=n_boundary)
    boundary = np.stack([sides, t_b], axis=1) if n_boundary else np.zeros((0, 2))

    x_i = rng.uniform(0.0, 1.0, size=n_initial)
    initial = np.stack([x_i, np.zeros(n_initial)], axis=1) if n_initial else np.zeros((0, 2))

    return CollocationSet(interior=interior, boundary=boundary, initial=initial, seed=seed)


def minibatch(cset: CollocationSet, k: int, step_seed: int) -> np.ndarray:
    """k distinct interior points, uniform without replacement, deterministic
    per (set seed, step_seed). Boundary and initial sets are never batched."""
    n = len(cset.interior)
    if not 0 < k <= n:
        raise ConfigurationError(f"batch size {k} outside 1..{n}")
    rng = np.random.default_rng([cset.seed, step_seed])
    idx = rng.choice(n, size=k, replace=False)
    return cset.interior[idx]


def export_csv(cset: CollocationSet, path) -> None:
    """Debug dump, one row per point: region, x, t (full float precision)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["region", "x", "t"])
        for region, pts in (
            ("interior", cset.interior),
            ("boundary", cset.boundary),
            ("initial", cset.initial),
        ):
            for x, t in pts:
                w.writerow([region, repr(float(x)), repr(float(t))])
