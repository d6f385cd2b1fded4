"""Three-stage training schedule: Adam, then AdamW, then full-set L-BFGS.

Stage 1 and 2 are mini-batched first-order descent with patience-based early
stopping; stage 3 runs the quasi-Newton polish on the full interior set so the
line search sees a deterministic objective. The best-total-loss parameters
seen anywhere are returned, alongside a complete per-iteration history.

Reproducibility contract: the master seed is expanded through SeedSequence
into decorrelated integer sub-seeds for network initialization and data
sampling, and every mini-batch is drawn from a (data_seed, stage*10^9 + iter)
stream. Toggling one stage's budget therefore never perturbs another stage's
batch sequence. With `record_wall_clock=False` the seconds column is written
as 0.0 and the history CSV is byte-identical across identical 64-bit runs.

History rows for the Adam stages log the objective evaluated at the
parameters entering that step (the value the step acted on); L-BFGS rows log
the accepted iterate. Adam-stage totals are mini-batch values, stage-3 totals
are full-set values, and best-parameter tracking compares totals as logged.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, OptimizationError, TrainingAbortedError
from .loss import LossWeights, loss_value_and_grad
from .model import (
    NetworkParameters,
    flatten_parameters,
    init_parameters,
    save_checkpoint,
    unflatten_parameters,
)
from .optim import adam_init, adam_step, lbfgs_init, lbfgs_step
from .physics import MaterialParameters, derive_consistent_parameters
from .sampler import minibatch, sample

__all__ = [
    "Stage1Config",
    "Stage2Config",
    "Stage3Config",
    "TrainingConfig",
    "HistoryRecord",
    "TrainingHistory",
    "early_stop_check",
    "train",
    "write_history_csv",
    "read_history_csv",
]

_STAGE_SEED_STRIDE = 10**9


@dataclass(frozen=True)
class Stage1Config:
    epochs: int = 18_000
    lr: float = 2e-3
    patience: int = 2_000

    def __post_init__(self):
        _check_stage_counts(self.epochs, self.patience, "stage1")
        if self.lr <= 0:
            raise ConfigurationError(f"stage1 lr must be positive, got {self.lr}")


@dataclass(frozen=True)
class Stage2Config:
    epochs: int = 12_000
    lr: float = 8e-4
    weight_decay: float = 1.5e-5
    patience: int = 1_500

    def __post_init__(self):
        _check_stage_counts(self.epochs, self.patience, "stage2")
        if self.lr <= 0 or self.weight_decay < 0:
            raise ConfigurationError("stage2 lr must be positive and weight_decay >= 0")


@dataclass(frozen=True)
class Stage3Config:
    iterations: int = 600
    history: int = 80
    grad_tol: float = 1e-10
    loss_tol: float = 1e-10

    def __post_init__(self):
        if self.iterations < 1 or self.history < 1:
            raise ConfigurationError("stage3 iterations and history must be >= 1")
        if self.grad_tol <= 0 or self.loss_tol <= 0:
            raise ConfigurationError("stage3 tolerances must be positive")


def _check_stage_counts(epochs, patience, name):
    if epochs < 1:
        raise ConfigurationError(f"{name} epoch budget must be >= 1, got {epochs}")
    if patience < 1:
        raise ConfigurationError(f"{name} patience must be >= 1, got {patience}")
    if patience > epochs:
        raise ConfigurationError(
            f"{name} patience {patience} exceeds its epoch budget {epochs}"
        )


@dataclass(frozen=True)
class TrainingConfig:
    stage1: Stage1Config = Stage1Config()
    stage2: Stage2Config = Stage2Config()
    stage3: Stage3Config = Stage3Config()
    width: int = 180
    hidden_layers: int = 8
    n_interior: int = 20_000
    n_boundary: int = 5_000
    n_initial: int = 5_000
    batch_size: int = 3_000
    master_seed: int = 4
    precision: str = "float64"
    weights: LossWeights = LossWeights()
    material: MaterialParameters = derive_consistent_parameters()
    include_velocity_ic: bool = False
    parallel_chunks: int = 1
    record_wall_clock: bool = True

    def __post_init__(self):
        if self.precision not in ("float32", "float64"):
            raise ConfigurationError(f"precision must be float32/float64, got {self.precision}")
        for name in ("width", "hidden_layers", "batch_size", "parallel_chunks"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        for name in ("n_interior", "n_boundary", "n_initial"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.batch_size > self.n_interior:
            raise ConfigurationError(
                f"batch_size {self.batch_size} exceeds interior count {self.n_interior}"
            )

    @property
    def dtype(self):
        return np.float32 if self.precision == "float32" else np.float64


@dataclass(frozen=True)
class HistoryRecord:
    stage: int
    iteration: int
    pde: float
    bc: float
    ic: float
    total: float
    seconds: float


@dataclass(frozen=True)
class TrainingHistory:
    records: tuple

    def __post_init__(self):
        last = {}
        for r in self.records:
            prev = last.get(r.stage)
            if prev is not None and r.iteration <= prev:
                raise ConfigurationError(
                    f"history iterations must strictly increase within stage {r.stage}"
                )
            last[r.stage] = r.iteration

    def __len__(self):
        return len(self.records)

    def stage_records(self, stage: int):
        return [r for r in self.records if r.stage == stage]

    def best_total(self) -> float:
        return min(r.total for r in self.records)


def early_stop_check(totals: Sequence[float], patience: int) -> bool:
    """True when the running best has not strictly improved for `patience`
    entries, counting the entry that set the record as the first of the run.

    Equivalently: with e the index of the last strict new-best, stop once
    len(totals) - e >= patience."""
    if patience < 1:
        raise ConfigurationError(f"patience must be >= 1, got {patience}")
    if not totals:
        return False
    best = math.inf
    last_record = 0
    for i, t in enumerate(totals):
        if t < best:
            best = t
            last_record = i
    return len(totals) - last_record >= patience


def write_history_csv(history: TrainingHistory, path) -> None:
    """One row per iteration; floats via repr so identical runs produce
    byte-identical files."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["stage", "iter", "pde", "bc", "ic", "total", "seconds"])
        for r in history.records:
            w.writerow(
                [
                    r.stage,
                    r.iteration,
                    repr(r.pde),
                    repr(r.bc),
                    repr(r.ic),
                    repr(r.total),
                    repr(r.seconds),
                ]
            )


def read_history_csv(path) -> TrainingHistory:
    records = []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows)
        if header != ["stage", "iter", "pde", "bc", "ic", "total", "seconds"]:
            raise ConfigurationError(f"{path}: unexpected history header {header}")
        for row in rows:
            records.append(
                HistoryRecord(
                    stage=int(row[0]),
                    iteration=int(row[1]),
                    pde=float(row[2]),
                    bc=float(row[3]),
                    ic=float(row[4]),
                    total=float(row[5]),
                    seconds=float(row[6]),
                )
            )
    return TrainingHistory(records=tuple(records))


def _sub_seeds(master_seed: int) -> Tuple[int, int]:
    """Two decorrelated integer seeds (network init, data sampling)."""
    state = np.random.SeedSequence(master_seed).generate_state(2, dtype=np.uint64)
    return int(state[0]), int(state[1])


class _Run:
    """Mutable bookkeeping shared by the three stage loops."""

    def __init__(self, config: TrainingConfig, checkpoint_dir, on_record):
        self.config = config
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
        self.on_record = on_record
        self.records = []
        self.best_total = math.inf
        self.best_flat = None
        self.t0 = time.perf_counter()

        net_seed, data_seed = _sub_seeds(config.master_seed)
        self.template = init_parameters(
            config.width, config.hidden_layers, seed=net_seed, dtype=config.dtype
        )
        self.flat = flatten_parameters(self.template)
        self.cset = sample(
            config.n_interior, config.n_boundary, config.n_initial, seed=data_seed
        )

    def params(self) -> NetworkParameters:
        return unflatten_parameters(self.flat, self.template)

    def seconds(self) -> float:
        return time.perf_counter() - self.t0 if self.config.record_wall_clock else 0.0

    def record(self, stage, iteration, pde, bc, ic, total):
        rec = HistoryRecord(
            stage=stage,
            iteration=iteration,
            pde=pde,
            bc=bc,
            ic=ic,
            total=total,
            seconds=self.seconds(),
        )
        self.records.append(rec)
        if self.on_record is not None:
            self.on_record(rec)

    def consider_best(self, total: float, flat: np.ndarray):
        if total < self.best_total:
            self.best_total = total
            self.best_flat = flat.copy()

    def history(self) -> TrainingHistory:
        return TrainingHistory(records=tuple(self.records))

    def save(self, name: str):
        if self.checkpoint_dir is not None:
            self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
            save_checkpoint(self.params(), self.checkpoint_dir / name)
            write_history_csv(self.history(), self.checkpoint_dir / "history.csv")

    def abort(self, stage: int, iteration: int, why: str):
        self.save("abort.ckpt")
        err = TrainingAbortedError(f"stage {stage} iteration {iteration}: {why}")
        err.history = self.history()
        err.params = self.params()
        raise err

    def objective(self, params, batch):
        cfg = self.config
        return loss_value_and_grad(
            params,
            batch,
            self.cset.boundary,
            self.cset.initial,
            cfg.material,
            cfg.weights,
            include_velocity_ic=cfg.include_velocity_ic,
            parallel_chunks=cfg.parallel_chunks,
        )


def _adam_stage(run: _Run, stage: int, epochs: int, lr: float, weight_decay: float, patience: int):
    cfg = run.config
    state = adam_init(run.flat.size, lr=lr, weight_decay=weight_decay)
    totals = []
    for it in range(1, epochs + 1):
        batch = minibatch(run.cset, cfg.batch_size, step_seed=_STAGE_SEED_STRIDE * stage + it)
        bd, g = run.objective(run.params(), batch)
        total = float(bd.total)
        if not math.isfinite(total):
            run.abort(stage, it, f"non-finite loss {total}")
        run.record(stage, it, float(bd.pde), float(bd.bc), float(bd.ic), total)
        run.consider_best(total, run.flat)
        try:
            state, run.flat = adam_step(state, run.flat, g)
        except OptimizationError as exc:
            run.abort(stage, it, str(exc))
        totals.append(total)
        if early_stop_check(totals, patience):
            break
    run.save(f"stage{stage}.ckpt")


def _lbfgs_stage(run: _Run, stage3: Stage3Config):
    cfg = run.config
    components = {}

    def full_loss(theta):
        bd, g = run.objective(unflatten_parameters(theta, run.template), run.cset.interior)
        key = hash(theta.tobytes())
        components[key] = (float(bd.pde), float(bd.bc), float(bd.ic), float(bd.total))
        while len(components) > 64:
            components.pop(next(iter(components)))
        return float(bd.total), np.asarray(g, dtype=np.float64)

    state = lbfgs_init(
        run.flat.astype(np.float64),
        full_loss,
        capacity=stage3.history,
        gradient_tolerance=stage3.grad_tol,
        loss_change_tolerance=stage3.loss_tol,
    )
    if not math.isfinite(state.loss):
        run.abort(3, 0, f"non-finite loss {state.loss} entering the quasi-Newton stage")
    run.consider_best(state.loss, state.params)

    for it in range(1, stage3.iterations + 1):
        prev_iteration = state.iteration
        state, theta, converged = lbfgs_step(state, full_loss)
        if state.iteration > prev_iteration:
            run.flat = theta.astype(cfg.dtype)
            comp = components.get(hash(theta.tobytes()))
            if comp is None:
                bd, _ = run.objective(unflatten_parameters(theta, run.template), run.cset.interior)
                comp = (float(bd.pde), float(bd.bc), float(bd.ic), float(bd.total))
            pde, bc, ic, total = comp
            if not math.isfinite(total):
                run.abort(3, it, f"non-finite loss {total}")
            run.record(3, state.iteration, pde, bc, ic, total)
            run.consider_best(total, run.flat)
        if converged:
            break
    run.save("stage3.ckpt")
    return state.status


def train(
    config: TrainingConfig,
    checkpoint_dir=None,
    on_record: Optional[Callable[[HistoryRecord], None]] = None,
) -> Tuple[NetworkParameters, TrainingHistory]:
    """Run all three stages and return (best parameters, full history).

    With `checkpoint_dir` set, stage-boundary checkpoints, the best and final
    parameters, and the history CSV are written there; on a non-finite loss
    the run aborts with the current state preserved on disk and the partial
    history attached to the raised error.
    """
    run = _Run(config, checkpoint_dir, on_record)

    s1, s2 = config.stage1, config.stage2
    _adam_stage(run, 1, s1.epochs, s1.lr, 0.0, s1.patience)
    _adam_stage(run, 2, s2.epochs, s2.lr, s2.weight_decay, s2.patience)
    _lbfgs_stage(run, config.stage3)

    if run.best_flat is not None:
        run.flat = run.best_flat.astype(config.dtype)
    best_params = run.params()
    if run.checkpoint_dir is not None:
        run.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        save_checkpoint(best_params, run.checkpoint_dir / "best.ckpt")
        write_history_csv(run.history(), run.checkpoint_dir / "history.csv")
    return best_params, run.history()
