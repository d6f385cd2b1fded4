"""Train the desk-size model end to end and score it against the closed form.

Six minutes or so on one laptop core. Equivalent CLI:

    piezopinn train --preset desk --out runs/desk
    piezopinn eval runs/desk/best.ckpt
    piezopinn export-figures runs/desk
"""

import sys
import time
from pathlib import Path

import numpy as np

from piezopinn.config import resolve_config, write_resolved
from piezopinn.evaluator import (
    evaluate,
    export_errors_csv,
    export_slices_csv,
    export_summary,
)
from piezopinn.fdm_oracle import compare_fdm_pinn, solve_fdm, suggest_nt
from piezopinn.trainer import train, write_history_csv


def main(out_dir="runs/desk-demo"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = resolve_config(preset="desk", out_dir=str(out))
    write_resolved(run, out / "resolved.json")

    print(f"training: {run.training.width}x{run.training.hidden_layers} network, "
          f"{run.training.n_interior} interior points, "
          f"budgets {run.training.stage1.epochs}/{run.training.stage2.epochs}/"
          f"{run.training.stage3.iterations}")
    t0 = time.perf_counter()
    last_stage = [0]

    def progress(rec):
        if rec.stage != last_stage[0]:
            last_stage[0] = rec.stage
            print(f"  stage {rec.stage} starts at total {rec.total:.4e}")

    params, history = train(run.training, checkpoint_dir=out, on_record=progress)
    print(f"done in {time.perf_counter() - t0:.0f} s, best total {history.best_total():.4e}")
    write_history_csv(history, out / "history.csv")

    report = evaluate(params, nx=100, nt=100)
    print(f"\nagainst the closed form (100x100): "
          f"rel_l2_u {report.rel_l2_u:.4f}, rel_l2_phi {report.rel_l2_phi:.4f}")
    worst_edge = max(float(report.abs_error_u[0].max()), float(report.abs_error_u[-1].max()))
    print(f"boundary columns are built in: worst edge error {worst_edge:.1e}")

    # second opinion from the grid solver on its own mesh
    nx = 101
    sol = solve_fdm(run.training.material, nx, suggest_nt(nx))
    rel_u, rel_phi = compare_fdm_pinn(sol, params)
    print(f"against the grid solver ({nx} points): rel u {rel_u:.4f}, rel phi {rel_phi:.4f}")

    export_errors_csv(report, out / "errors.csv")
    export_slices_csv(report, out / "slices.csv")
    export_summary(report, out / "summary.json", config_hash="desk-demo")
    print(f"\nwrote history, checkpoints, and evaluation CSVs to {out}/")
    print("emit plot scripts with: piezopinn export-figures", out)


if __name__ == "__main__":
    main(*sys.argv[1:])
