"""Run configuration: nested JSON blocks, presets, and resolution.

The defaults reproduce the full-scale training setup; the desk preset
shrinks only the network, sampling, and stage budgets so a complete run
fits on a laptop while exercising every code path. Resolution materializes
every field, so the snapshot written next to a run's outputs is itself a
valid config file that reproduces the run bit-for-bit in 64-bit mode
(presets keep wall-clock recording off for exactly that reason).

Environment overrides use the PPINN_ prefix (PPINN_SEED, PPINN_PRECISION,
PPINN_OUT, PPINN_PRESET, PPINN_CONFIG); explicit command-line flags win
over the environment, which wins over the config file, which wins over the
preset baseline.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigurationError
from .evaluator import DEFAULT_SLICE_TIMES
from .loss import LossWeights
from .physics import derive_consistent_parameters
from .trainer import Stage1Config, Stage2Config, Stage3Config, TrainingConfig

__all__ = [
    "ENV_PREFIX",
    "SCHEMA",
    "EvaluationConfig",
    "RunConfig",
    "paper_defaults",
    "desk_overrides",
    "preset_config",
    "merge_config",
    "validate_structure",
    "load_config_file",
    "resolve_config",
    "config_hash",
    "write_resolved",
]

ENV_PREFIX = "PPINN_"

_PAPER = {
    "material": {"c_E": 1.0, "eps0": 1.0, "eps_S": None},
    "network": {"width": 180, "hidden_layers": 8},
    "sampling": {
        "n_interior": 20_000,
        "n_boundary": 5_000,
        "n_initial": 5_000,
        "batch_size": 3_000,
    },
    "training": {
        "stage1": {"epochs": 18_000, "lr": 2e-3, "patience": 2_000},
        "stage2": {"epochs": 12_000, "lr": 8e-4, "weight_decay": 1.5e-5, "patience": 1_500},
        "stage3": {"iterations": 600, "history": 80, "grad_tol": 1e-10, "loss_tol": 1e-10},
        "weights": {"bc": 500.0, "ic": 300.0},
        "include_velocity_ic": False,
        "parallel_chunks": 1,
        "record_wall_clock": False,
    },
    "evaluation": {"nx": 450, "nt": 450, "slice_times": list(DEFAULT_SLICE_TIMES)},
    "output_dir": None,
    "master_seed": 4,
    "precision": "float64",
}

_DESK = {
    "network": {"width": 64, "hidden_layers": 4},
    "sampling": {"n_interior": 2_000, "n_boundary": 500, "n_initial": 500, "batch_size": 500},
    "training": {
        "stage1": {"epochs": 2_000, "patience": 2_000},
        "stage2": {"epochs": 1_000, "patience": 1_000},
        "stage3": {"iterations": 200},
    },
}

# structural schema: leaf entries are type tags; bounds and cross-field
# rules live in the dataclass constructors, which stay authoritative
SCHEMA = {
    "material": {"c_E": "number", "eps0": "number", "eps_S": "number-or-null"},
    "network": {"width": "integer", "hidden_layers": "integer"},
    "sampling": {
        "n_interior": "integer",
        "n_boundary": "integer",
        "n_initial": "integer",
        "batch_size": "integer",
    },
    "training": {
        "stage1": {"epochs": "integer", "lr": "number", "patience": "integer"},
        "stage2": {
            "epochs": "integer",
            "lr": "number",
            "weight_decay": "number",
            "patience": "integer",
        },
        "stage3": {
            "iterations": "integer",
            "history": "integer",
            "grad_tol": "number",
            "loss_tol": "number",
        },
        "weights": {"bc": "number", "ic": "number"},
        "include_velocity_ic": "boolean",
        "parallel_chunks": "integer",
        "record_wall_clock": "boolean",
    },
    "evaluation": {"nx": "integer", "nt": "integer", "slice_times": "number-array"},
    "output_dir": "string-or-null",
    "master_seed": "integer",
    "precision": "string",
}


def paper_defaults() -> dict:
    return copy.deepcopy(_PAPER)


def desk_overrides() -> dict:
    return copy.deepcopy(_DESK)


def preset_config(name: str) -> dict:
    if name == "paper":
        return paper_defaults()
    if name == "desk":
        return merge_config(paper_defaults(), desk_overrides())
    raise ConfigurationError(f"unknown preset {name!r}; choose 'paper' or 'desk'")


def merge_config(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge_config(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _type_ok(tag: str, value) -> bool:
    if tag == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if tag == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if tag == "number-or-null":
        return value is None or _type_ok("number", value)
    if tag == "boolean":
        return isinstance(value, bool)
    if tag == "string":
        return isinstance(value, str)
    if tag == "string-or-null":
        return value is None or isinstance(value, str)
    if tag == "number-array":
        return isinstance(value, list) and all(_type_ok("number", v) for v in value)
    raise ConfigurationError(f"schema bug: unknown type tag {tag!r}")


def validate_structure(cfg: dict, schema=None, path: str = "") -> None:
    """Check block shape and leaf types, reporting the offending field by
    its dotted path."""
    schema = SCHEMA if schema is None else schema
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"{path or 'config'}: expected a block, got {type(cfg).__name__}")
    for key in cfg:
        if key not in schema:
            where = f"{path}.{key}" if path else key
            raise ConfigurationError(f"{where}: unknown configuration key")
    for key, spec in schema.items():
        where = f"{path}.{key}" if path else key
        if key not in cfg:
            raise ConfigurationError(f"{where}: missing required key")
        if isinstance(spec, dict):
            validate_structure(cfg[key], spec, where)
        elif not _type_ok(spec, cfg[key]):
            raise ConfigurationError(
                f"{where}: expected {spec}, got {type(cfg[key]).__name__} {cfg[key]!r}"
            )


def load_config_file(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")


@dataclass(frozen=True)
class EvaluationConfig:
    nx: int = 450
    nt: int = 450
    slice_times: tuple = DEFAULT_SLICE_TIMES

    def __post_init__(self):
        if self.nx < 2 or self.nt < 2:
            raise ConfigurationError(f"evaluation grid must be at least 2x2, got {self.nx}x{self.nt}")


@dataclass(frozen=True)
class RunConfig:
    training: TrainingConfig
    evaluation: EvaluationConfig
    output_dir: Optional[str]
    resolved: dict


def _build_run_config(cfg: dict) -> RunConfig:
    m, net, samp, tr, ev = (
        cfg["material"],
        cfg["network"],
        cfg["sampling"],
        cfg["training"],
        cfg["evaluation"],
    )
    try:
        training = TrainingConfig(
            stage1=Stage1Config(**tr["stage1"]),
            stage2=Stage2Config(**tr["stage2"]),
            stage3=Stage3Config(
                iterations=tr["stage3"]["iterations"],
                history=tr["stage3"]["history"],
                grad_tol=tr["stage3"]["grad_tol"],
                loss_tol=tr["stage3"]["loss_tol"],
            ),
            width=net["width"],
            hidden_layers=net["hidden_layers"],
            n_interior=samp["n_interior"],
            n_boundary=samp["n_boundary"],
            n_initial=samp["n_initial"],
            batch_size=samp["batch_size"],
            master_seed=cfg["master_seed"],
            precision=cfg["precision"],
            weights=LossWeights(bc=tr["weights"]["bc"], ic=tr["weights"]["ic"]),
            material=derive_consistent_parameters(m["c_E"], m["eps0"], m["eps_S"]),
            include_velocity_ic=tr["include_velocity_ic"],
            parallel_chunks=tr["parallel_chunks"],
            record_wall_clock=tr["record_wall_clock"],
        )
        evaluation = EvaluationConfig(
            nx=ev["nx"], nt=ev["nt"], slice_times=tuple(float(v) for v in ev["slice_times"])
        )
    except TypeError as exc:
        raise ConfigurationError(f"malformed configuration block: {exc}")
    return RunConfig(
        training=training,
        evaluation=evaluation,
        output_dir=cfg["output_dir"],
        resolved=cfg,
    )


def resolve_config(
    config_path=None,
    preset: Optional[str] = None,
    seed: Optional[int] = None,
    precision: Optional[str] = None,
    out_dir: Optional[str] = None,
) -> RunConfig:
    """Materialize every field: preset baseline (default `paper`), then the
    config file, then explicit overrides."""
    cfg = preset_config(preset or "paper")
    if config_path is not None:
        cfg = merge_config(cfg, load_config_file(config_path))
    if seed is not None:
        cfg["master_seed"] = int(seed)
    if precision is not None:
        cfg["precision"] = precision
    if out_dir is not None:
        cfg["output_dir"] = str(out_dir)
    validate_structure(cfg)
    return _build_run_config(cfg)


def config_hash(resolved: dict) -> str:
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def write_resolved(run: RunConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(run.resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")
