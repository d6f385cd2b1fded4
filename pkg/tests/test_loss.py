"""Composite loss: structure, oracles, gradients, batching algebra."""

import itertools
import math

import numpy as np
import pytest

from piezopinn import autodiff as ad
from piezopinn.errors import ConfigurationError
from piezopinn.loss import (
    LossBreakdown,
    LossWeights,
    compute_loss,
    field_derivatives,
    loss_value_and_grad,
)
from piezopinn.model import (
    FieldPair,
    flatten_parameters,
    init_parameters,
    unflatten_parameters,
)
from piezopinn.physics import derive_consistent_parameters, exact_solution
from piezopinn.sampler import sample

MAT = derive_consistent_parameters(1.0, 1.0, 1.0)


def small_sets(seed=0, n=(40, 16, 16)):
    s = sample(*n, seed=seed)
    return s.interior, s.boundary, s.initial


def exact_field_map(x, t):
    # closed-form standing wave expressed through the recorded op set
    pi = ad.constant(np.pi)
    u = ad.sin(pi * x) * ad.cos(pi * t)
    return FieldPair(u=u, phi=0.5 * u)


# -- weights and structure -----------------------------------------------


def test_default_weights():
    w = LossWeights()
    assert (w.bc, w.ic) == (500.0, 300.0)


def test_negative_weight_rejected():
    with pytest.raises(ConfigurationError):
        LossWeights(bc=-1.0)


def test_components_nonnegative_and_identity_exact():
    params = init_parameters(8, 2, seed=5)
    batch, bc_set, ic_set = small_sets()
    bd = compute_loss(params, batch, bc_set, ic_set, MAT)
    pde, bc, ic, total = (float(v) for v in (bd.pde, bd.bc, bd.ic, bd.total))
    assert pde >= 0 and bc >= 0 and ic >= 0
    # bitwise identity: total was assembled from exactly these component nodes
    assert total == (pde + 500.0 * bc) + 300.0 * ic


def test_bc_component_killed_by_hard_constraints():
    params = init_parameters(8, 2, seed=6)
    batch, bc_set, ic_set = small_sets(seed=2)
    bd = compute_loss(params, batch, bc_set, ic_set, MAT)
    assert float(bd.bc) < 1e-24


def test_exact_solution_field_map_zeroes_total():
    batch, bc_set, ic_set = small_sets(seed=3)
    bd = compute_loss(exact_field_map, batch, bc_set, ic_set, MAT)
    assert float(bd.total) < 1e-10


def test_empty_sets_rejected():
    batch, bc_set, ic_set = small_sets()
    params = init_parameters(4, 1, seed=0)
    empty = np.zeros((0, 2))
    with pytest.raises(ConfigurationError):
        compute_loss(params, empty, bc_set, ic_set, MAT)
    with pytest.raises(ConfigurationError):
        compute_loss(params, batch, empty, ic_set, MAT)
    with pytest.raises(ConfigurationError):
        compute_loss(params, batch, bc_set, empty, MAT)


def test_weight_scaling_is_linear_in_components():
    params = init_parameters(8, 2, seed=7)
    batch, bc_set, ic_set = small_sets(seed=4)
    lo = compute_loss(params, batch, bc_set, ic_set, MAT, LossWeights(bc=500.0, ic=300.0))
    hi = compute_loss(params, batch, bc_set, ic_set, MAT, LossWeights(bc=1000.0, ic=300.0))
    assert float(lo.bc) == float(hi.bc)
    assert float(lo.pde) == float(hi.pde)
    assert float(hi.total) - float(lo.total) == pytest.approx(500.0 * float(lo.bc), rel=1e-12, abs=1e-18)


# -- gradients -----------------------------------------------------------


def test_parameter_gradient_matches_finite_differences():
    params = init_parameters(width=8, hidden_layers=2, seed=11)
    batch, bc_set, ic_set = small_sets(seed=5, n=(20, 10, 10))
    bd, g = loss_value_and_grad(params, batch, bc_set, ic_set, MAT)
    assert g.shape == (params.parameter_count,)

    flat = flatten_parameters(params)
    rng = np.random.default_rng(23)
    picks = rng.choice(flat.size, size=20, replace=False)
    h = 1e-6
    for j in picks:
        bump = flat.copy()
        bump[j] += h
        up = float(
            compute_loss(unflatten_parameters(bump, params), batch, bc_set, ic_set, MAT).total
        )
        bump[j] -= 2 * h
        dn = float(
            compute_loss(unflatten_parameters(bump, params), batch, bc_set, ic_set, MAT).total
        )
        central = (up - dn) / (2 * h)
        assert g[j] == pytest.approx(central, rel=1e-4, abs=1e-8)


def test_gradient_nonzero_and_finite():
    params = init_parameters(8, 2, seed=1)
    batch, bc_set, ic_set = small_sets(seed=6)
    _, g = loss_value_and_grad(params, batch, bc_set, ic_set, MAT)
    assert np.all(np.isfinite(g))
    assert np.linalg.norm(g) > 0


# -- mini-batch algebra --------------------------------------------------


def test_pde_mean_over_all_batches_equals_full_set():
    params = init_parameters(4, 1, seed=9)
    rng = np.random.default_rng(31)
    interior = np.column_stack([rng.uniform(0.1, 0.9, 5), rng.uniform(0.1, 0.9, 5)])
    bc_set = np.array([[0.0, 0.3], [1.0, 0.7]])
    ic_set = np.array([[0.2, 0.0], [0.8, 0.0]])

    def pde_of(points):
        return float(compute_loss(params, points, bc_set, ic_set, MAT).pde)

    full = pde_of(interior)
    batches = [pde_of(interior[list(ix)]) for ix in itertools.combinations(range(5), 2)]
    assert len(batches) == 10
    assert np.mean(batches) == pytest.approx(full, rel=1e-12)


# -- chunked evaluation --------------------------------------------------


def test_chunked_pde_matches_unchunked():
    params = init_parameters(8, 2, seed=13)
    batch, bc_set, ic_set = small_sets(seed=7, n=(30, 8, 8))
    plain = compute_loss(params, batch, bc_set, ic_set, MAT, parallel_chunks=1)
    split = compute_loss(params, batch, bc_set, ic_set, MAT, parallel_chunks=3)
    assert float(split.pde) == pytest.approx(float(plain.pde), rel=1e-12)
    assert float(split.total) == pytest.approx(float(plain.total), rel=1e-12)


def test_chunked_evaluation_is_deterministic():
    params = init_parameters(8, 2, seed=13)
    batch, bc_set, ic_set = small_sets(seed=8, n=(30, 8, 8))
    a = compute_loss(params, batch, bc_set, ic_set, MAT, parallel_chunks=4)
    b = compute_loss(params, batch, bc_set, ic_set, MAT, parallel_chunks=4)
    assert float(a.total) == float(b.total)


def test_chunked_gradient_matches_unchunked():
    params = init_parameters(6, 2, seed=17)
    batch, bc_set, ic_set = small_sets(seed=9, n=(24, 8, 8))
    _, g1 = loss_value_and_grad(params, batch, bc_set, ic_set, MAT, parallel_chunks=1)
    _, g3 = loss_value_and_grad(params, batch, bc_set, ic_set, MAT, parallel_chunks=3)
    np.testing.assert_allclose(g3, g1, rtol=1e-10, atol=1e-14)


def test_bad_chunk_count_rejected():
    params = init_parameters(4, 1, seed=0)
    batch, bc_set, ic_set = small_sets()
    with pytest.raises(ConfigurationError):
        compute_loss(params, batch, bc_set, ic_set, MAT, parallel_chunks=0)


# -- optional velocity penalty -------------------------------------------


def test_velocity_penalty_off_by_default_and_grows_ic():
    params = init_parameters(8, 2, seed=19)
    batch, bc_set, ic_set = small_sets(seed=10)
    off = compute_loss(params, batch, bc_set, ic_set, MAT)
    on = compute_loss(params, batch, bc_set, ic_set, MAT, include_velocity_ic=True)
    # a generic network has nonzero initial velocity, so the penalty adds
    assert float(on.ic) > float(off.ic)


def test_velocity_penalty_still_zero_for_exact_solution():
    # the standing wave starts at rest: u_t(x, 0) = 0
    batch, bc_set, ic_set = small_sets(seed=11)
    bd = compute_loss(exact_field_map, batch, bc_set, ic_set, MAT, include_velocity_ic=True)
    assert float(bd.total) < 1e-10


def test_velocity_penalty_gradient_flows():
    params = init_parameters(4, 1, seed=2)
    batch, bc_set, ic_set = small_sets(seed=12, n=(10, 6, 6))
    _, g = loss_value_and_grad(
        params, batch, bc_set, ic_set, MAT, include_velocity_ic=True
    )
    assert np.all(np.isfinite(g))
    assert np.linalg.norm(g) > 0


# -- precision -----------------------------------------------------------


def test_float32_loss_path():
    params = init_parameters(8, 2, seed=3, dtype=np.float32)
    batch, bc_set, ic_set = small_sets(seed=13, n=(16, 8, 8))
    bd, g = loss_value_and_grad(params, batch, bc_set, ic_set, MAT)
    assert bd.total.value.dtype == np.float32
    assert g.dtype == np.float32
    assert np.all(np.isfinite(g))


# -- derivative plumbing -------------------------------------------------


def test_field_derivatives_match_exact_solution_oracle():
    x = np.linspace(0.1, 0.9, 9)
    t = np.linspace(0.05, 0.95, 9)
    d = field_derivatives(exact_field_map, x, t)
    pi = np.pi
    u = np.sin(pi * x) * np.cos(pi * t)
    np.testing.assert_allclose(d.u.value, u, rtol=1e-13)
    np.testing.assert_allclose(d.u_x.value, pi * np.cos(pi * x) * np.cos(pi * t), atol=1e-12)
    np.testing.assert_allclose(d.u_t.value, -pi * np.sin(pi * x) * np.sin(pi * t), atol=1e-12)
    np.testing.assert_allclose(d.u_xx.value, -pi * pi * u, atol=1e-11)
    np.testing.assert_allclose(d.u_tt.value, -pi * pi * u, atol=1e-11)
    np.testing.assert_allclose(d.phi_xx.value, -0.5 * pi * pi * u, atol=1e-11)
