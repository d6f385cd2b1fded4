"""Weighted composite training loss.

    total = pde + w_bc * bc + w_ic * ic

pde is the mean squared governing residual over an interior mini-batch and
needs second derivatives of the constrained fields; bc and ic are value
mismatches on the full boundary and initial sets. The whole expression stays
differentiable with respect to the network parameters, which is the depth-3
contract: parameter gradients of a quantity that already contains second
input derivatives.

The per-sample derivative trick: with independent samples, d(sum u)/dx_i is
the pointwise derivative at sample i, so one reverse sweep over the summed
output yields the whole derivative column.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigurationError
from .model import FieldPair, NetworkParameters, apply_hard_constraints, forward_raw, lift_parameters
from .physics import MaterialParameters, exact_solution, residuals

__all__ = [
    "LossWeights",
    "LossBreakdown",
    "FieldDerivatives",
    "field_derivatives",
    "compute_loss",
    "loss_value_and_grad",
]


@dataclass(frozen=True)
class LossWeights:
    bc: float = 500.0
    ic: float = 300.0

    def __post_init__(self):
        if self.bc < 0 or self.ic < 0:
            raise ConfigurationError(f"loss weights must be >= 0, got {self}")


@dataclass(frozen=True)
class LossBreakdown:
    """Components as recorded expressions; float(...) any field for reporting.
    `total` is built from the component nodes once, so the decomposition
    identity holds bitwise."""

    pde: object
    bc: object
    ic: object
    total: object
    weights: LossWeights


@dataclass(frozen=True)
class FieldDerivatives:
    """Constrained fields and their first/second partials on one point set,
    every entry a graph-retained expression."""

    u: object
    phi: object
    u_x: object
    u_t: object
    u_xx: object
    u_tt: object
    phi_x: object
    phi_t: object
    phi_xx: object
    phi_tt: object


def _field_map(params):
    """Normalize the three accepted parameter forms into a constrained field
    callable (x, t) -> FieldPair of expressions."""
    if isinstance(params, NetworkParameters):
        pairs = [(ad.constant(W), ad.constant(b)) for W, b in params.layers]
    elif callable(params):
        return params
    else:
        pairs = list(params)

    def fmap(x, t):
        return apply_hard_constraints(forward_raw(pairs, x, t), x, t)

    return fmap


def _param_dtype(params):
    if isinstance(params, NetworkParameters):
        return params.dtype
    if callable(params):
        return np.float64
    first = params[0][0]
    return first.value.dtype


def field_derivatives(params, x_arr, t_arr) -> FieldDerivatives:
    """Fields plus all partials the residuals need, at the given points."""
    fmap = _field_map(params)
    dtype = _param_dtype(params)
    x = ad.leaf(np.asarray(x_arr, dtype=dtype))
    t = ad.leaf(np.asarray(t_arr, dtype=dtype))
    f = fmap(x, t)
    u_x, u_t = ad.grad(f.u.sum(), [x, t], create_graph=True)
    phi_x, phi_t = ad.grad(f.phi.sum(), [x, t], create_graph=True)
    (u_xx,) = ad.grad(u_x.sum(), [x], create_graph=True)
    (u_tt,) = ad.grad(u_t.sum(), [t], create_graph=True)
    (phi_xx,) = ad.grad(phi_x.sum(), [x], create_graph=True)
    (phi_tt,) = ad.grad(phi_t.sum(), [t], create_graph=True)
    return FieldDerivatives(
        u=f.u,
        phi=f.phi,
        u_x=u_x,
        u_t=u_t,
        u_xx=u_xx,
        u_tt=u_tt,
        phi_x=phi_x,
        phi_t=phi_t,
        phi_xx=phi_xx,
        phi_tt=phi_tt,
    )


def _pde_chunk_sum(params, chunk, mat):
    d = field_derivatives(params, chunk[:, 0], chunk[:, 1])
    r = residuals(d.u_xx, d.u_tt, d.phi_xx, d.phi_tt, mat)
    return (r.r1 * r.r1 + r.r2 * r.r2).sum()


def compute_loss(
    params,
    batch: np.ndarray,
    boundary: np.ndarray,
    initial: np.ndarray,
    mat: MaterialParameters,
    weights: LossWeights = LossWeights(),
    include_velocity_ic: bool = False,
    parallel_chunks: int = 1,
) -> LossBreakdown:
    """Assemble the weighted loss as one differentiable expression.

    `params` may be a NetworkParameters (constants: evaluation only), the
    lifted pair list from lift_parameters (training), or a callable
    (x, t) -> FieldPair standing in for the constrained network.

    `parallel_chunks` > 1 splits the interior batch into that many disjoint
    chunks whose residual sums are built concurrently and reduced in chunk
    order, so the result is deterministic for a fixed chunk count.
    """
    batch = np.asarray(batch)
    boundary = np.asarray(boundary)
    initial = np.asarray(initial)
    for name, pts in (("batch", batch), ("boundary", boundary), ("initial", initial)):
        if len(pts) == 0:
            raise ConfigurationError(f"{name} set is empty")
    if parallel_chunks < 1:
        raise ConfigurationError(f"parallel_chunks must be >= 1, got {parallel_chunks}")

    n_chunks = min(parallel_chunks, len(batch))
    if n_chunks == 1:
        pde = _pde_chunk_sum(params, batch, mat) * (1.0 / len(batch))
    else:
        chunks = np.array_split(batch, n_chunks)
        with ThreadPoolExecutor(max_workers=n_chunks) as pool:
            sums = list(pool.map(lambda c: _pde_chunk_sum(params, c, mat), chunks))
        acc = sums[0]
        for s in sums[1:]:
            acc = acc + s
        pde = acc * (1.0 / len(batch))

    fmap = _field_map(params)
    dtype = _param_dtype(params)

    xb = ad.leaf(boundary[:, 0].astype(dtype), requires_grad=False)
    tb = ad.leaf(boundary[:, 1].astype(dtype), requires_grad=False)
    fb = fmap(xb, tb)
    bc = (fb.u * fb.u + fb.phi * fb.phi).mean()

    x0 = initial[:, 0]
    target = exact_solution(x0, 0.0)
    if include_velocity_ic:
        d0 = field_derivatives(params, x0, np.zeros_like(x0))
        du = d0.u - ad.constant(target.u.astype(dtype))
        dphi = d0.phi - ad.constant(target.phi.astype(dtype))
        ic = (du * du + dphi * dphi + d0.u_t * d0.u_t + d0.phi_t * d0.phi_t).mean()
    else:
        xi = ad.leaf(x0.astype(dtype), requires_grad=False)
        ti = ad.leaf(np.zeros_like(x0, dtype=dtype), requires_grad=False)
        fi = fmap(xi, ti)
        du = fi.u - ad.constant(target.u.astype(dtype))
        dphi = fi.phi - ad.constant(target.phi.astype(dtype))
        ic = (du * du + dphi * dphi).mean()

    total = pde + weights.bc * bc + weights.ic * ic
    return LossBreakdown(pde=pde, bc=bc, ic=ic, total=total, weights=weights)


def loss_value_and_grad(
    params: NetworkParameters,
    batch: np.ndarray,
    boundary: np.ndarray,
    initial: np.ndarray,
    mat: MaterialParameters,
    weights: LossWeights = LossWeights(),
    include_velocity_ic: bool = False,
    parallel_chunks: int = 1,
):
    """Objective callback for the optimizers: lifts the parameters, assembles
    the loss, and returns (breakdown, flat parameter gradient) with the
    gradient aligned to flatten_parameters ordering."""
    pairs, flat = lift_parameters(params, requires_grad=True)
    bd = compute_loss(
        pairs,
        batch,
        boundary,
        initial,
        mat,
        weights,
        include_velocity_ic=include_velocity_ic,
        parallel_chunks=parallel_chunks,
    )
    gv = ad.gradient_vector(bd.total, flat)
    return bd, gv.entries
