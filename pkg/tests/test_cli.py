"""Command-line surface, exercised in-process through main()."""

import ast
import csv
import json
import py_compile
from pathlib import Path

import pytest

from piezopinn.cli import main

MICRO = {
    "network": {"width": 4, "hidden_layers": 1},
    "sampling": {"n_interior": 40, "n_boundary": 12, "n_initial": 12, "batch_size": 8},
    "training": {
        "stage1": {"epochs": 3, "lr": 2e-3, "patience": 3},
        "stage2": {"epochs": 2, "lr": 8e-4, "patience": 2},
        "stage3": {"iterations": 2, "history": 8},
    },
}


@pytest.fixture
def micro_config(tmp_path):
    path = tmp_path / "micro.json"
    path.write_text(json.dumps(MICRO))
    return path


@pytest.fixture(scope="module")
def trained_run(tmp_path_factory):
    """One tiny training run shared by the read-only CLI tests."""
    out = tmp_path_factory.mktemp("run")
    cfg = out / "micro.json"
    cfg.write_text(json.dumps(MICRO))
    rc = main(["train", "--config", str(cfg), "--out", str(out), "--seed", "5", "--quiet"])
    assert rc == 0
    return out


# -- train ----------------------------------------------------------------


def test_train_writes_run_artifacts(trained_run):
    for name in ("best.ckpt", "history.csv", "resolved.json", "stage1.ckpt", "stage2.ckpt", "stage3.ckpt"):
        assert (trained_run / name).exists(), name


def test_train_requires_output_dir(micro_config, monkeypatch):
    monkeypatch.delenv("PPINN_OUT", raising=False)
    assert main(["train", "--config", str(micro_config)]) == 2


def test_train_missing_config_file(tmp_path):
    rc = main(["train", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)])
    assert rc == 2


def test_train_rejects_malformed_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"network": {"width": "wide"}}))
    assert main(["train", "--config", str(bad), "--out", str(tmp_path)]) == 2


def test_resolved_snapshot_reproduces_history(trained_run, tmp_path):
    rerun = tmp_path / "again"
    rc = main(["train", "--config", str(trained_run / "resolved.json"), "--out", str(rerun), "--quiet"])
    assert rc == 0
    assert (rerun / "history.csv").read_bytes() == (trained_run / "history.csv").read_bytes()
    assert (rerun / "best.ckpt").read_bytes() == (trained_run / "best.ckpt").read_bytes()


def test_env_seed_applies_and_flag_wins(micro_config, tmp_path, monkeypatch):
    monkeypatch.setenv("PPINN_SEED", "77")
    out_a = tmp_path / "env"
    assert main(["train", "--config", str(micro_config), "--out", str(out_a), "--quiet"]) == 0
    assert json.loads((out_a / "resolved.json").read_text())["master_seed"] == 77

    out_b = tmp_path / "flag"
    assert (
        main(["train", "--config", str(micro_config), "--out", str(out_b), "--seed", "5", "--quiet"])
        == 0
    )
    assert json.loads((out_b / "resolved.json").read_text())["master_seed"] == 5


def test_env_out_applies(micro_config, tmp_path, monkeypatch):
    out = tmp_path / "from-env"
    monkeypatch.setenv("PPINN_OUT", str(out))
    assert main(["train", "--config", str(micro_config), "--quiet"]) == 0
    assert (out / "best.ckpt").exists()


# -- eval -----------------------------------------------------------------


def test_eval_writes_reports_beside_checkpoint(trained_run, capsys):
    rc = main(["eval", str(trained_run / "best.ckpt"), "--nx", "3", "--nt", "3"])
    assert rc == 0
    line = capsys.readouterr().out.splitlines()[0]
    assert line.startswith("rel_l2_u=") and "rel_l2_phi=" in line
    with open(trained_run / "errors.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 9
    summary = json.loads((trained_run / "summary.json").read_text())
    assert summary["nx"] == 3 and summary["nt"] == 3
    # run sits next to resolved.json, so provenance is the config hash
    assert len(summary["config_hash"]) == 64


def test_eval_exact_oracle_is_error_free(tmp_path, capsys):
    rc = main(["eval", "--exact-oracle", "--nx", "5", "--nt", "5", "--out", str(tmp_path)])
    assert rc == 0
    assert "rel_l2_u=0.0 rel_l2_phi=0.0" in capsys.readouterr().out
    assert json.loads((tmp_path / "summary.json").read_text())["config_hash"] == "exact-solution"


def test_eval_requires_checkpoint_or_oracle():
    assert main(["eval"]) == 2


def test_eval_corrupt_checkpoint(tmp_path):
    junk = tmp_path / "junk.ckpt"
    junk.write_bytes(b"not a checkpoint")
    assert main(["eval", str(junk)]) == 2


def test_eval_custom_slice_times(trained_run, tmp_path):
    out = tmp_path / "slices"
    rc = main(
        [
            "eval",
            str(trained_run / "best.ckpt"),
            "--nx",
            "4",
            "--nt",
            "4",
            "--slice-times",
            "0.25,0.75",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    with open(out / "slices.csv") as fh:
        times = {row["t"] for row in csv.DictReader(fh)}
    assert times == {"0.25", "0.75"}


# -- verify ---------------------------------------------------------------


def test_verify_all_checks_pass(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert out.count("pass") == 4 and "FAIL" not in out


def test_verify_flags_inconsistent_coupling(capsys):
    assert main(["verify", "--e33", "-0.9", "--fdm-nx", "51,101"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out


def test_verify_bad_grid_list():
    assert main(["verify", "--fdm-nx", "51,many"]) == 2


def test_verify_single_grid_cannot_form_ratio(capsys):
    assert main(["verify", "--fdm-nx", "51"]) == 1
    assert "at least two grids" in capsys.readouterr().out


# -- export-figures -------------------------------------------------------


def test_export_figures_emits_compilable_scripts(trained_run, tmp_path):
    # evaluation artifacts must exist first
    assert main(["eval", str(trained_run / "best.ckpt"), "--nx", "3", "--nt", "3"]) == 0
    assert main(["export-figures", str(trained_run)]) == 0
    for name in ("fig_slices.py", "fig_error_fields.py"):
        script = trained_run / name
        assert script.exists()
        py_compile.compile(str(script), cfile=str(tmp_path / (name + "c")), doraise=True)


def test_export_figures_missing_csv(tmp_path):
    assert main(["export-figures", str(tmp_path)]) == 2


def test_package_never_imports_plotting():
    """The package itself stays free of plotting imports; matplotlib lives
    only inside the emitted standalone scripts (string data, not imports)."""
    pkg_dir = Path(__file__).resolve().parent.parent / "src" / "piezopinn"
    for source in pkg_dir.glob("*.py"):
        tree = ast.parse(source.read_text())
        for node in ast.walk(tree):
            if isinstance(node, ast.Import):
                names = [alias.name for alias in node.names]
            elif isinstance(node, ast.ImportFrom):
                names = [node.module or ""]
            else:
                continue
            for name in names:
                assert not name.startswith("matplotlib"), source
