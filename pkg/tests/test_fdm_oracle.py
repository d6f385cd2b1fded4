"""Reference-solver tests: accuracy against the closed form, second-order
convergence, characteristic hygiene, and the comparison interface."""

import numpy as np
import pytest

from piezopinn.errors import ConfigurationError, OracleIntegrityError
from piezopinn.fdm_oracle import (
    FdmSolution,
    characteristic_energy,
    compare_fdm_pinn,
    convergence_study,
    export_comparison_csv,
    max_error_vs_exact,
    solve_fdm,
    suggest_nt,
)
from piezopinn.model import FieldPair, init_parameters
from piezopinn.physics import MaterialParameters, derive_consistent_parameters, eigenstructure, exact_solution

MAT = derive_consistent_parameters()


def exact_model(x, t):
    return exact_solution(x, t)


@pytest.fixture(scope="module")
def reference():
    return solve_fdm(MAT, 101, 201)


# -- accuracy and convergence ---------------------------------------------


def test_default_grid_tracks_exact_solution(reference):
    assert max_error_vs_exact(reference) < 1e-3


def test_second_order_convergence():
    errors = convergence_study(MAT)
    assert len(errors) == 3
    for coarse, fine in zip(errors, errors[1:]):
        assert 3.5 <= coarse / fine <= 4.5


def test_taylor_start_second_level(reference):
    x = reference.x_grid
    ref = exact_solution(x, np.full_like(x, reference.dt))
    np.testing.assert_allclose(reference.u[:, 1], np.asarray(ref.u), atol=1e-6)


def test_zero_initial_data_stays_zero():
    def silent(x):
        return FieldPair(u=np.zeros_like(x), phi=np.zeros_like(x))

    sol = solve_fdm(MAT, 31, 61, initial=silent)
    assert np.all(sol.u == 0.0)
    assert np.all(sol.phi == 0.0)


# -- grid bookkeeping -----------------------------------------------------


def test_boundary_rows_identically_zero(reference):
    assert np.all(reference.u[0, :] == 0.0)
    assert np.all(reference.u[-1, :] == 0.0)
    assert np.all(reference.phi[0, :] == 0.0)
    assert np.all(reference.phi[-1, :] == 0.0)


def test_grid_metadata(reference):
    assert (reference.nx, reference.nt) == (101, 201)
    assert reference.dx == pytest.approx(0.01)
    assert reference.dt == pytest.approx(0.005)
    assert reference.cfl == pytest.approx(0.5)
    assert reference.x_grid[-1] == pytest.approx(1.0)
    assert reference.t_grid[-1] == pytest.approx(1.0)
    assert not reference.u.flags.writeable


def test_unstable_cfl_rejected():
    with pytest.raises(ConfigurationError, match="Courant"):
        solve_fdm(MAT, 101, 51)


def test_small_grids_rejected():
    with pytest.raises(ConfigurationError):
        solve_fdm(MAT, 2, 100)
    with pytest.raises(ConfigurationError):
        solve_fdm(MAT, 100, 2)


def test_unverified_parameters_rejected():
    loose = MaterialParameters(rho=1.5, c_E=1.0, e33=-1.0, eps_S=1.0, eps0=1.0)
    assert not loose.consistent
    with pytest.raises(ConfigurationError, match="consistency"):
        solve_fdm(loose, 31, 61)


def test_solution_invariants_enforced():
    good = np.zeros((4, 4))
    leaky = good.copy()
    leaky[0, 2] = 1e-9
    with pytest.raises(ConfigurationError, match="boundary"):
        FdmSolution(u=leaky, phi=good.copy(), dx=0.1, dt=0.1, cfl=0.5)
    with pytest.raises(ConfigurationError, match="cfl"):
        FdmSolution(u=good.copy(), phi=good.copy(), dx=0.1, dt=0.1, cfl=1.5)


def test_suggest_nt_hits_target():
    nt = suggest_nt(101)
    assert nt == 113
    sol = solve_fdm(MAT, 101, nt)
    assert sol.cfl <= 0.9
    # one fewer step would overshoot the target (though not stability)
    assert 1.0 / ((nt - 2) * (1.0 / 100)) > 0.9
    with pytest.raises(ConfigurationError):
        suggest_nt(101, cfl_target=0.0)


# -- characteristic hygiene -----------------------------------------------


def test_unstable_mode_stays_silent(reference):
    lam, V = eigenstructure(MAT)
    y = np.stack([reference.u, reference.phi]).reshape(2, -1)
    w = np.linalg.solve(V, y).reshape(2, reference.nx, reference.nt)
    assert lam[1] < 0
    assert np.abs(w[1]).max() < 1e-12


def test_contaminated_initial_data_detected():
    def mixed(x):
        base = np.sin(np.pi * x)
        # a 1e-3 admixture of the (1, -3) unstable eigenvector
        return FieldPair(u=base + 1e-3 * base, phi=0.5 * base - 3e-3 * base)

    with pytest.raises(OracleIntegrityError, match="unstable"):
        solve_fdm(MAT, 31, 61, initial=mixed)


def test_rounding_level_contamination_snapped():
    def noisy(x):
        base = np.sin(np.pi * x)
        return FieldPair(u=base + 1e-14 * base, phi=0.5 * base - 3e-14 * base)

    sol = solve_fdm(MAT, 31, 61, initial=noisy)
    assert max_error_vs_exact(sol) < 1e-2  # coarse grid, but finite and sane


def test_stable_mode_energy_conserved():
    nx = 201
    sol = solve_fdm(MAT, nx, suggest_nt(nx))
    times, energy = characteristic_energy(sol, MAT, mode=0)
    assert times[0] > 0.0 and times[-1] < 1.0
    assert energy.min() > 0.0
    drift = (energy.max() - energy.min()) / energy.mean()
    assert drift < 0.01


def test_energy_mode_validation(reference):
    with pytest.raises(ConfigurationError):
        characteristic_energy(reference, MAT, mode=2)


# -- model comparison -----------------------------------------------------


def test_fdm_vs_itself_is_zero(reference):
    rel_u, rel_phi = compare_fdm_pinn(reference, reference)
    assert rel_u == 0.0
    assert rel_phi == 0.0


def test_exact_oracle_close_to_fdm(reference):
    rel_u, rel_phi = compare_fdm_pinn(reference, exact_model)
    assert rel_u < 5e-3
    assert rel_phi < 5e-3


def test_network_comparison_runs(reference):
    params = init_parameters(width=5, hidden_layers=1, seed=2)
    rel_u, rel_phi = compare_fdm_pinn(reference, params)
    assert np.isfinite(rel_u) and rel_u >= 0.0
    assert np.isfinite(rel_phi) and rel_phi >= 0.0


def test_grid_mismatch_rejected(reference):
    other = solve_fdm(MAT, 51, 101)
    with pytest.raises(ConfigurationError, match="grid mismatch"):
        compare_fdm_pinn(reference, other)


def test_comparison_rejects_junk(reference):
    with pytest.raises(ConfigurationError):
        compare_fdm_pinn(reference, 42)


def test_export_comparison_csv(tmp_path):
    sol = solve_fdm(MAT, 5, 9)
    path = tmp_path / "fdm_errors.csv"
    export_comparison_csv(sol, exact_model, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,t,abs_err_u,abs_err_phi"
    assert len(lines) == 1 + 5 * 9
    x, t, eu, ephi = (float(v) for v in lines[1].split(","))
    assert (x, t) == (0.0, 0.0)
    assert eu == 0.0  # both vanish on the boundary row
    assert ephi == 0.0
