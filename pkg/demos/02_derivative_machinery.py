"""Nested differentiation on the network, checked against finite differences.

The training loss needs second derivatives of the network outputs with
respect to its inputs, and then a gradient of THOSE with respect to the
weights: three derivative levels stacked. This script builds each level
explicitly and cross-checks it numerically, which is the whole trust story
for the residual terms.
"""

import numpy as np

from piezopinn import autodiff as ad
from piezopinn.loss import field_derivatives
from piezopinn.model import (
    flatten_parameters,
    init_parameters,
    lift_parameters,
    predict,
    unflatten_parameters,
)


def main():
    params = init_parameters(width=32, hidden_layers=3, seed=11)
    rng = np.random.default_rng(11)
    xs = rng.uniform(0.1, 0.9, size=5)
    ts = rng.uniform(0.1, 0.9, size=5)

    d = field_derivatives(params, xs, ts)
    print("point values and machine derivatives at 5 sample points:")
    print("  u    ", np.asarray(d.u.value).round(5))
    print("  u_x  ", np.asarray(d.u_x.value).round(5))
    print("  u_xx ", np.asarray(d.u_xx.value).round(5))

    h = 1e-5
    fd_x = (np.asarray(predict(params, xs + h, ts).u) - np.asarray(predict(params, xs - h, ts).u)) / (2 * h)
    print("\nfirst derivative vs centered difference:")
    print("  max abs gap", np.abs(np.asarray(d.u_x.value) - fd_x).max())

    h = 1e-4
    fd_xx = (
        np.asarray(predict(params, xs + h, ts).u)
        - 2 * np.asarray(predict(params, xs, ts).u)
        + np.asarray(predict(params, xs - h, ts).u)
    ) / (h * h)
    print("second derivative vs centered difference:")
    print("  max abs gap", np.abs(np.asarray(d.u_xx.value) - fd_xx).max())

    # level three: gradient of sum(u_xx^2) with respect to every weight
    pairs, flat = lift_parameters(params, requires_grad=True)
    dd = field_derivatives(pairs, xs, ts)
    grad = ad.gradient_vector((dd.u_xx * dd.u_xx).sum(), flat).entries

    def objective(theta):
        val = field_derivatives(unflatten_parameters(theta, params), xs, ts).u_xx
        return float((np.asarray(val.value) ** 2).sum())

    theta0 = flatten_parameters(params)
    k = int(rng.integers(theta0.size))
    hp = 1e-6
    up, down = theta0.copy(), theta0.copy()
    up[k] += hp
    down[k] -= hp
    fd = (objective(up) - objective(down)) / (2 * hp)
    print(f"\nparameter-gradient spot check (weight {k} of {theta0.size}):")
    print(f"  machine {grad[k]:.8e}   numeric {fd:.8e}")


if __name__ == "__main__":
    main()
