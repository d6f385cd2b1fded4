"""Command-line driver: train, eval, verify, export-figures.

Exit codes: 0 success, 1 verification-check failure, 2 configuration or
I/O problem, 3 training aborted. All commands are non-interactive.

Figure generation is delegated to emitted standalone scripts so the core
package never links a plotting library; the scripts read the CSVs written
by `eval` and are the only place matplotlib is mentioned.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .config import (
    ENV_PREFIX,
    config_hash,
    load_config_file,
    resolve_config,
    write_resolved,
)
from .errors import (
    CheckpointError,
    ConfigurationError,
    OracleIntegrityError,
    TrainingAbortedError,
)
from .evaluator import (
    evaluate,
    export_errors_csv,
    export_slices_csv,
    export_summary,
)
from .fdm_oracle import convergence_study, solve_fdm
from .loss import field_derivatives
from .model import (
    init_parameters,
    lift_parameters,
    load_checkpoint,
    predict,
    unflatten_parameters,
    flatten_parameters,
)
from .physics import (
    MaterialParameters,
    coupling_matrix,
    derive_consistent_parameters,
    eigenstructure,
    exact_solution,
    exact_solution_derivatives,
    residuals,
)
from .trainer import train

__all__ = ["main"]


def _env(name: str):
    return os.environ.get(ENV_PREFIX + name)


def _fail(message: str, code: int = 2) -> int:
    print(f"piezopinn: {message}", file=sys.stderr)
    return code


def _precision_from_flag(value):
    if value is None:
        return None
    return {"32": "float32", "64": "float64"}[value]


# -- train ----------------------------------------------------------------


def cmd_train(args) -> int:
    config_path = args.config or _env("CONFIG")
    preset = args.preset or _env("PRESET")
    seed = args.seed if args.seed is not None else _env("SEED")
    precision = _precision_from_flag(args.precision) or _precision_from_flag(_env("PRECISION"))
    out = args.out or _env("OUT")
    try:
        run = resolve_config(
            config_path=config_path,
            preset=preset,
            seed=int(seed) if seed is not None else None,
            precision=precision,
            out_dir=out,
        )
    except (ConfigurationError, ValueError) as exc:
        return _fail(str(exc))

    if run.output_dir is None:
        return _fail("no output directory: pass --out, set PPINN_OUT, or set output_dir")
    out_dir = Path(run.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        return _fail(f"output directory not writable: {exc}")

    write_resolved(run, out_dir / "resolved.json")

    def progress(rec):
        if not args.quiet and rec.iteration % args.log_every == 0:
            print(
                f"stage {rec.stage} iter {rec.iteration} total {rec.total:.6e}",
                flush=True,
            )

    try:
        params, history = train(run.training, checkpoint_dir=out_dir, on_record=progress)
    except TrainingAbortedError as exc:
        return _fail(f"training aborted: {exc}; partial state kept in {out_dir}", code=3)

    print(f"best total loss {history.best_total():.6e} over {len(history)} iterations")
    print(f"wrote {out_dir / 'best.ckpt'}, {out_dir / 'history.csv'}, {out_dir / 'resolved.json'}")
    return 0


# -- eval -----------------------------------------------------------------


def _eval_provenance(checkpoint_path) -> str:
    """Hash identifying what was evaluated: the run's resolved config when
    it sits next to the checkpoint, else the checkpoint bytes."""
    sibling = Path(checkpoint_path).parent / "resolved.json"
    if sibling.exists():
        try:
            return config_hash(load_config_file(sibling))
        except ConfigurationError:
            pass
    return hashlib.sha256(Path(checkpoint_path).read_bytes()).hexdigest()


def cmd_eval(args) -> int:
    if args.exact_oracle:
        model = lambda x, t: exact_solution(x, t)  # noqa: E731
        out_dir = Path(args.out or _env("OUT") or ".")
        provenance = "exact-solution"
    else:
        if args.checkpoint is None:
            return _fail("a checkpoint path is required unless --exact-oracle is given")
        try:
            model = load_checkpoint(args.checkpoint)
        except (CheckpointError, OSError) as exc:
            return _fail(f"cannot load checkpoint: {exc}")
        out_dir = Path(args.out or _env("OUT") or Path(args.checkpoint).parent)
        provenance = _eval_provenance(args.checkpoint)

    try:
        slice_times = (
            tuple(float(v) for v in args.slice_times.split(","))
            if args.slice_times
            else None
        )
        report = evaluate(
            model,
            nx=args.nx,
            nt=args.nt,
            **({"slice_times": slice_times} if slice_times else {}),
            parallel_chunks=args.chunks,
        )
    except (ConfigurationError, ValueError) as exc:
        return _fail(str(exc))

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        export_errors_csv(report, out_dir / "errors.csv")
        export_slices_csv(report, out_dir / "slices.csv")
        export_summary(report, out_dir / "summary.json", config_hash=provenance)
    except OSError as exc:
        return _fail(f"cannot write evaluation outputs: {exc}")

    print(f"rel_l2_u={report.rel_l2_u!r} rel_l2_phi={report.rel_l2_phi!r}")
    print(f"wrote errors.csv, slices.csv, summary.json to {out_dir}")
    return 0


# -- verify ---------------------------------------------------------------


def _check_manufactured(mat: MaterialParameters):
    grid = np.linspace(0.05, 0.95, 50)
    X, T = np.meshgrid(grid, grid, indexing="ij")
    d = exact_solution_derivatives(X.ravel(), T.ravel())
    r = residuals(d.u_xx, d.u_tt, d.phi_xx, d.phi_tt, mat)
    worst = max(float(np.abs(r.r1).max()), float(np.abs(r.r2).max()))
    return worst < 1e-10, f"max residual {worst:.2e}"


def _check_eigenstructure(mat: MaterialParameters):
    try:
        lam, V = eigenstructure(mat)
    except ConfigurationError as exc:
        return False, str(exc)
    A = coupling_matrix(mat)
    recon = float(np.abs(A - V @ np.diag(lam) @ np.linalg.inv(V)).max())
    speed_off = abs(lam[0] - 1.0)
    ok = recon < 1e-12 and speed_off < 1e-12
    return ok, f"reconstruction {recon:.1e}, wave-speed eigenvalue {lam[0]:.6f}"


def _check_autodiff(seed: int):
    params = init_parameters(width=64, hidden_layers=4, seed=seed)
    rng = np.random.default_rng(seed)
    xs = rng.uniform(0.05, 0.95, size=100)
    ts = rng.uniform(0.05, 0.95, size=100)

    d = field_derivatives(params, xs, ts)
    u_x = np.asarray(d.u_x.value)
    u_xx = np.asarray(d.u_xx.value)

    h = 1e-6
    fd_x = (np.asarray(predict(params, xs + h, ts).u) - np.asarray(predict(params, xs - h, ts).u)) / (2 * h)
    h2 = 1e-4
    fd_xx = (
        np.asarray(predict(params, xs + h2, ts).u)
        - 2 * np.asarray(predict(params, xs, ts).u)
        + np.asarray(predict(params, xs - h2, ts).u)
    ) / (h2 * h2)
    rel_first = float(np.max(np.abs(u_x - fd_x) / np.maximum(np.abs(fd_x), 1.0)))
    rel_second = float(np.max(np.abs(u_xx - fd_xx) / np.maximum(np.abs(fd_xx), 1.0)))

    # depth-3: parameter gradient of the squared second derivative
    pairs, flat = lift_parameters(params, requires_grad=True)
    dd = field_derivatives(pairs, xs, ts)
    objective = (dd.u_xx * dd.u_xx).sum()
    grad = ad.gradient_vector(objective, flat).entries

    def objective_at(theta):
        shifted = unflatten_parameters(theta, params)
        val = field_derivatives(shifted, xs, ts).u_xx
        return float((np.asarray(val.value) ** 2).sum())

    theta0 = flatten_parameters(params)
    picks = rng.choice(theta0.size, size=20, replace=False)
    rel_param = 0.0
    hp = 1e-6
    for k in picks:
        up, down = theta0.copy(), theta0.copy()
        up[k] += hp
        down[k] -= hp
        fd = (objective_at(up) - objective_at(down)) / (2 * hp)
        rel_param = max(rel_param, abs(grad[k] - fd) / max(abs(fd), 1.0))

    ok = rel_first < 1e-5 and rel_second < 1e-5 and rel_param < 1e-4
    return ok, (
        f"first {rel_first:.1e}, second {rel_second:.1e}, depth-3 {rel_param:.1e}"
    )


def _check_fdm(mat: MaterialParameters, nx_list):
    if len(nx_list) < 2:
        return False, "need at least two grids for a ratio"
    grids = [(nx, 2 * (nx - 1) + 1) for nx in nx_list]
    try:
        errors = convergence_study(mat, grids=grids)
    except (ConfigurationError, OracleIntegrityError) as exc:
        return False, str(exc)
    ratios = [coarse / fine for coarse, fine in zip(errors, errors[1:])]
    ok = all(3.5 <= r <= 4.5 for r in ratios)
    return ok, "ratios " + ", ".join(f"{r:.2f}" for r in ratios)


def cmd_verify(args) -> int:
    if args.e33 is None:
        mat = derive_consistent_parameters()
    else:
        base = derive_consistent_parameters()
        try:
            mat = MaterialParameters(
                rho=base.rho, c_E=base.c_E, e33=args.e33, eps_S=base.eps_S, eps0=base.eps0
            )
        except ConfigurationError as exc:
            return _fail(str(exc))
    seed = int(args.seed if args.seed is not None else (_env("SEED") or 0))
    try:
        nx_list = [int(v) for v in args.fdm_nx.split(",")]
    except ValueError:
        return _fail(f"--fdm-nx expects comma-separated integers, got {args.fdm_nx!r}")

    checks = [
        ("manufactured-solution residual", *_check_manufactured(mat)),
        ("coupling eigenstructure", *_check_eigenstructure(mat)),
        ("autodiff vs finite differences", *_check_autodiff(seed)),
        ("fdm convergence order", *_check_fdm(mat, nx_list)),
    ]
    width = max(len(name) for name, _, _ in checks)
    all_ok = True
    for name, ok, detail in checks:
        all_ok &= ok
        print(f"{name:<{width}}  {'pass' if ok else 'FAIL'}  {detail}")
    return 0 if all_ok else 1


# -- export-figures -------------------------------------------------------

_SLICES_SCRIPT = '''#!/usr/bin/env python3
"""Slice curves: predicted vs exact fields at fixed times.

Reads slices.csv (written by `piezopinn eval`) from the directory this
script lives in; writes slices_u.png and slices_phi.png next to it.
"""
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
groups = defaultdict(list)
with open(here / "slices.csv") as fh:
    for row in csv.DictReader(fh):
        groups[float(row["t"])].append(row)

times = sorted(groups)
for field, png in (("u", "slices_u.png"), ("phi", "slices_phi.png")):
    cols = 3
    rows = (len(times) + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(4 * cols, 3 * rows), squeeze=False)
    for k, t in enumerate(times):
        ax = axes[k // cols][k % cols]
        data = groups[t]
        x = [float(r["x"]) for r in data]
        exact = [float(r[field + "_exact"]) for r in data]
        pred = [float(r[field + "_pred"]) for r in data]
        ax.plot(x, exact, "k-", linewidth=1.5, label="exact")
        ax.plot(x, pred, "r--", linewidth=1.2, label="predicted")
        ax.set_title(f"t = {t:g}")
        ax.set_xlabel("x")
        ax.set_ylabel(field)
        if k == 0:
            ax.legend(loc="best", fontsize=8)
    for k in range(len(times), rows * cols):
        axes[k // cols][k % cols].axis("off")
    fig.tight_layout()
    out = here / png
    fig.savefig(out, dpi=150)
    plt.close(fig)
    print("wrote", out)
'''

_ERRORS_SCRIPT = '''#!/usr/bin/env python3
"""Log-scale absolute-error fields over the space-time square.

Reads errors.csv (written by `piezopinn eval`) from the directory this
script lives in; writes error_fields.png next to it.
"""
import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = Path(__file__).resolve().parent
xs, ts, err_u, err_phi = [], [], [], []
with open(here / "errors.csv") as fh:
    for row in csv.DictReader(fh):
        xs.append(float(row["x"]))
        ts.append(float(row["t"]))
        err_u.append(float(row["abs_err_u"]))
        err_phi.append(float(row["abs_err_phi"]))

x_vals = sorted(set(xs))
t_vals = sorted(set(ts))
xi = {v: i for i, v in enumerate(x_vals)}
ti = {v: j for j, v in enumerate(t_vals)}
floor = 1e-16


def to_grid(vals):
    # rows indexed by t so time runs up the vertical axis
    grid = [[0.0] * len(x_vals) for _ in t_vals]
    for x, t, v in zip(xs, ts, vals):
        grid[ti[t]][xi[x]] = math.log10(max(v, floor))
    return grid


fig, axes = plt.subplots(1, 2, figsize=(11, 4))
panels = (
    (axes[0], err_u, "log10 |u - u_exact|"),
    (axes[1], err_phi, "log10 |phi - phi_exact|"),
)
for ax, vals, title in panels:
    img = ax.imshow(
        to_grid(vals), origin="lower", aspect="auto", extent=(0.0, 1.0, 0.0, 1.0)
    )
    ax.set_title(title)
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    fig.colorbar(img, ax=ax)
fig.tight_layout()
out = here / "error_fields.png"
fig.savefig(out, dpi=150)
plt.close(fig)
print("wrote", out)
'''


def cmd_export_figures(args) -> int:
    run_dir = Path(args.run_dir)
    for needed in ("errors.csv", "slices.csv"):
        if not (run_dir / needed).exists():
            return _fail(f"missing {run_dir / needed}; run `piezopinn eval` first")
    scripts = (
        ("fig_slices.py", _SLICES_SCRIPT),
        ("fig_error_fields.py", _ERRORS_SCRIPT),
    )
    try:
        for name, body in scripts:
            (run_dir / name).write_text(body)
    except OSError as exc:
        return _fail(f"cannot write figure scripts: {exc}")
    for name, _ in scripts:
        print(f"wrote {run_dir / name}")
    print("run them with any python that has matplotlib installed")
    return 0


# -- argument wiring ------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="piezopinn",
        description="Mesh-free coupled-field solver: train, evaluate, verify, export figure data.",
        epilog=(
            "Environment overrides: PPINN_CONFIG, PPINN_PRESET, PPINN_SEED, "
            "PPINN_PRECISION, PPINN_OUT. Exit codes: 0 ok, 1 failed checks, "
            "2 config/I-O error, 3 training aborted."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the three-stage schedule")
    p_train.add_argument("--config", help="JSON config file (merged over the preset)")
    p_train.add_argument("--preset", choices=("paper", "desk"), help="baseline configuration")
    p_train.add_argument("--out", help="output directory")
    p_train.add_argument("--seed", type=int, help="master seed override")
    p_train.add_argument("--precision", choices=("32", "64"), help="float width override")
    p_train.add_argument("--log-every", type=int, default=200, help="progress print period")
    p_train.add_argument("--quiet", action="store_true", help="suppress progress lines")
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="dense-grid comparison against the exact solution")
    p_eval.add_argument("checkpoint", nargs="?", help="checkpoint file to evaluate")
    p_eval.add_argument("--nx", type=int, default=450)
    p_eval.add_argument("--nt", type=int, default=450)
    p_eval.add_argument("--slice-times", help="comma-separated t values for slices.csv")
    p_eval.add_argument("--chunks", type=int, default=1, help="parallel evaluation chunks")
    p_eval.add_argument("--out", help="output directory (default: beside the checkpoint)")
    p_eval.add_argument(
        "--exact-oracle",
        action="store_true",
        help="evaluate the closed-form solution instead of a checkpoint (sanity path)",
    )
    p_eval.set_defaults(fn=cmd_eval)

    p_verify = sub.add_parser("verify", help="run the independent consistency checks")
    p_verify.add_argument("--e33", type=float, help="override the coupling coefficient")
    p_verify.add_argument(
        "--fdm-nx", default="51,101,201", help="comma-separated spatial grid sizes"
    )
    p_verify.add_argument("--seed", type=int, help="seed for the random spot checks")
    p_verify.set_defaults(fn=cmd_verify)

    p_fig = sub.add_parser("export-figures", help="emit standalone plot scripts for a run")
    p_fig.add_argument("run_dir", help="directory holding errors.csv and slices.csv")
    p_fig.set_defaults(fn=cmd_export_figures)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
