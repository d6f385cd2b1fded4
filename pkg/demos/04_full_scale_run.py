"""Full-scale training at the default budgets. This is the long one.

The 8x180 network with 20k interior points and 30k+ optimizer steps takes
several days on a single core, which is why the test suite gates on the
desk preset instead. Expected outcome when it finishes:
rel_l2_u below 5e-2 and rel_l2_phi below 1e-1 on the 450x450 grid.

Progress lands in <out>/history.csv as it goes, so an interrupted run
still leaves its stage checkpoints and the loss trace behind.
"""

import sys
import time
from pathlib import Path

from piezopinn.config import resolve_config, write_resolved
from piezopinn.evaluator import (
    evaluate,
    export_errors_csv,
    export_slices_csv,
    export_summary,
)
from piezopinn.trainer import train, write_history_csv

TARGET_REL_U = 5e-2
TARGET_REL_PHI = 1e-1


def main(out_dir="runs/full-scale"):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run = resolve_config(preset="paper", out_dir=str(out))
    write_resolved(run, out / "resolved.json")

    t0 = time.perf_counter()

    def progress(rec):
        if rec.iteration % 500 == 0:
            print(f"stage {rec.stage} iter {rec.iteration:>6} total {rec.total:.4e} "
                  f"[{time.perf_counter() - t0:.0f} s]", flush=True)

    params, history = train(run.training, checkpoint_dir=out, on_record=progress)
    write_history_csv(history, out / "history.csv")
    print(f"trained in {(time.perf_counter() - t0) / 3600:.1f} h, "
          f"best total {history.best_total():.4e}")

    report = evaluate(params, nx=run.evaluation.nx, nt=run.evaluation.nt, parallel_chunks=4)
    export_errors_csv(report, out / "errors.csv")
    export_slices_csv(report, out / "slices.csv")
    export_summary(report, out / "summary.json", config_hash="full-scale")

    ok_u = report.rel_l2_u < TARGET_REL_U
    ok_phi = report.rel_l2_phi < TARGET_REL_PHI
    print(f"rel_l2_u   {report.rel_l2_u:.4e}  target {TARGET_REL_U:.0e}  {'ok' if ok_u else 'MISSED'}")
    print(f"rel_l2_phi {report.rel_l2_phi:.4e}  target {TARGET_REL_PHI:.0e}  {'ok' if ok_phi else 'MISSED'}")
    # the coupling-amplification ordering is a finding here, not a gate:
    # it holds for the default seed but individual seeds may flip it
    if report.rel_l2_phi > report.rel_l2_u:
        print("finding: potential error exceeds displacement error, as expected")
    else:
        print("finding: error ordering reversed for this seed "
              f"(phi {report.rel_l2_phi:.3e} <= u {report.rel_l2_u:.3e})")
    return 0 if ok_u and ok_phi else 1


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
