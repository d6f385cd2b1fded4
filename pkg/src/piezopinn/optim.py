"""First-order and quasi-Newton optimizers over flat parameter vectors.

Everything here is hand-rolled on numpy: bias-corrected Adam, AdamW with the
weight decay decoupled from the gradient path, and L-BFGS (two-loop recursion,
bounded curvature-pair history) driven by a strong-Wolfe bracket-and-zoom line
search. The optimizers never see the network; they work against a callback
mapping a flat vector to (loss, flat gradient), which for the quasi-Newton
stage must be deterministic (full-set evaluation, no mini-batching) or the
Wolfe guarantees mean nothing.

States are immutable; each step returns a new state, which keeps training
loops trivially replayable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Tuple

import numpy as np

from .autodiff import GradientVector
from .errors import LineSearchError, OptimizationError

__all__ = [
    "AdamState",
    "adam_init",
    "adam_step",
    "LbfgsState",
    "lbfgs_init",
    "lbfgs_step",
    "wolfe_line_search",
]


# -- Adam / AdamW --------------------------------------------------------


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.m.shape != self.v.shape:
            raise OptimizationError("moment vectors must share one shape")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise OptimizationError(f"betas must lie in [0,1), got {self.beta1}, {self.beta2}")
        if self.lr <= 0 or self.epsilon <= 0 or self.weight_decay < 0:
            raise OptimizationError("lr and epsilon must be positive, weight_decay >= 0")


def adam_init(
    parameter_count: int,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
    weight_decay: float = 0.0,
) -> AdamState:
    zeros = np.zeros(parameter_count)
    return AdamState(
        m=zeros,
        v=zeros.copy(),
        step_count=0,
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
        weight_decay=weight_decay,
    )


def adam_step(state: AdamState, params: np.ndarray, grad) -> Tuple[AdamState, np.ndarray]:
    """One bias-corrected update; weight_decay > 0 adds the decoupled decay
    term -lr*wd*theta on top (AdamW), never feeding the decay through the
    moment estimates."""
    g = grad.entries if isinstance(grad, GradientVector) else np.asarray(grad)
    if g.shape != params.shape:
        raise OptimizationError(f"gradient shape {g.shape} vs parameters {params.shape}")
    if not np.all(np.isfinite(g)):
        raise OptimizationError(
            f"non-finite gradient entering Adam step {state.step_count + 1}"
        )
    t = state.step_count + 1
    m = state.beta1 * state.m + (1 - state.beta1) * g
    v = state.beta2 * state.v + (1 - state.beta2) * g * g
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    if state.weight_decay > 0:
        new_params = new_params - state.lr * state.weight_decay * params
    return replace(state, m=m, v=v, step_count=t), new_params


# -- strong-Wolfe line search --------------------------------------------


def wolfe_line_search(
    f_1d: Callable[[float], Tuple[float, float]],
    initial_step: float,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_evals: int = 25,
) -> Tuple[float, float, float]:
    """Bracket-then-zoom search for a step satisfying BOTH strong Wolfe
    conditions:

        f(a) <= f(0) + c1*a*f'(0)    and    |f'(a)| <= c2*|f'(0)|

    `f_1d` maps a step size to (value, directional derivative). Returns
    (alpha, value, derivative). Raises LineSearchError when the descent
    precondition fails or the evaluation budget runs out.
    """
    if initial_step <= 0:
        raise LineSearchError(f"initial step must be positive, got {initial_step}")
    f0, g0 = f_1d(0.0)
    if g0 >= 0:
        raise LineSearchError(f"not a descent direction (slope {g0:.3e} at 0)")
    evals = [0]

    def probe(a):
        if evals[0] >= max_evals:
            raise LineSearchError(f"no admissible step within {max_evals} evaluations")
        evals[0] += 1
        return f_1d(a)

    def zoom(a_lo, f_lo, a_hi):
        # invariant: a_lo satisfies Armijo and has the lowest such value seen;
        # the admissible interval is bracketed by a_lo and a_hi
        while True:
            a = 0.5 * (a_lo + a_hi)
            f_a, g_a = probe(a)
            if not np.isfinite(f_a) or f_a > f0 + c1 * a * g0 or f_a >= f_lo:
                a_hi = a
            else:
                if abs(g_a) <= -c2 * g0:
                    return a, f_a, g_a
                if g_a * (a_hi - a_lo) >= 0:
                    a_hi = a_lo
                a_lo, f_lo = a, f_a
            if a_hi == a_lo:
                raise LineSearchError("zoom interval collapsed without an admissible step")

    a_prev, f_prev = 0.0, f0
    a = initial_step
    first = True
    while True:
        f_a, g_a = probe(a)
        # a non-finite value means the trial overshot into garbage: shrink
        if not np.isfinite(f_a) or f_a > f0 + c1 * a * g0 or (not first and f_a >= f_prev):
            return zoom(a_prev, f_prev, a)
        if abs(g_a) <= -c2 * g0:
            return a, f_a, g_a
        if g_a >= 0:
            return zoom(a, f_a, a_prev)
        a_prev, f_prev = a, f_a
        a *= 2.0
        first = False


# -- L-BFGS --------------------------------------------------------------


@dataclass(frozen=True)
class LbfgsState:
    """Current iterate plus the bounded curvature history.

    `status` is one of "running", "grad-converged", "loss-converged",
    "line-search-failure"; anything but "running" means converged=True was
    already reported.
    """

    params: np.ndarray
    loss: float
    grad: np.ndarray
    history: tuple = ()
    capacity: int = 80
    gradient_tolerance: float = 1e-10
    loss_change_tolerance: float = 1e-10
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    iteration: int = 0
    status: str = "running"

    def __post_init__(self):
        if self.capacity < 1:
            raise OptimizationError(f"history capacity must be >= 1, got {self.capacity}")
        for s, y in self.history:
            if float(s @ y) <= 0:
                raise OptimizationError("stored curvature pair violates s.y > 0")


LossAndGrad = Callable[[np.ndarray], Tuple[float, np.ndarray]]


def lbfgs_init(params: np.ndarray, loss_fn: LossAndGrad, **overrides) -> LbfgsState:
    """Evaluate once and wrap into a fresh state; keyword overrides land in
    the corresponding LbfgsState fields."""
    params = np.asarray(params, dtype=np.float64)
    loss, grad = loss_fn(params)
    return LbfgsState(params=params, loss=float(loss), grad=np.asarray(grad), **overrides)


def _two_loop_direction(history, grad):
    q = grad.copy()
    alphas = []
    for s, y in reversed(history):
        rho = 1.0 / float(s @ y)
        a = rho * float(s @ q)
        alphas.append((a, rho))
        q -= a * y
    s_new, y_new = history[-1]
    gamma = float(s_new @ y_new) / float(y_new @ y_new)
    r = gamma * q
    for (a, rho), (s, y) in zip(reversed(alphas), history):
        b = rho * float(y @ r)
        r += (a - b) * s
    return -r


def lbfgs_step(state: LbfgsState, loss_fn: LossAndGrad) -> Tuple[LbfgsState, np.ndarray, bool]:
    """One quasi-Newton step.

    Returns (state, params, converged). A line-search failure rejects the
    step and reports converged with the matching status rather than raising:
    at the flat end of training there is nothing better to do.
    """
    if state.status != "running":
        return state, state.params, True
    gnorm = float(np.linalg.norm(state.grad))
    if gnorm < state.gradient_tolerance:
        done = replace(state, status="grad-converged")
        return done, done.params, True

    if state.history:
        d = _two_loop_direction(state.history, state.grad)
        initial_step = 1.0
    else:
        d = -state.grad
        initial_step = 1.0 / gnorm
    slope = float(state.grad @ d)
    if slope >= 0:
        # numerically broken curvature model; fall back to steepest descent
        d = -state.grad
        slope = float(state.grad @ d)
        initial_step = 1.0 / gnorm

    cache = {0.0: (state.loss, state.grad)}

    def f_1d(a):
        hit = cache.get(a)
        if hit is None:
            theta = state.params + a * d
            loss, grad = loss_fn(theta)
            hit = (float(loss), np.asarray(grad))
            cache[a] = hit
        loss, grad = hit
        return loss, float(grad @ d)

    try:
        alpha, f_alpha, g_alpha = wolfe_line_search(
            f_1d, initial_step, c1=state.wolfe_c1, c2=state.wolfe_c2
        )
    except LineSearchError:
        done = replace(state, status="line-search-failure")
        return done, done.params, True

    # both inequalities hold at the accepted step, by construction; guard
    # against regressions in the search itself
    assert f_alpha <= state.loss + state.wolfe_c1 * alpha * slope
    assert abs(g_alpha) <= state.wolfe_c2 * abs(slope)

    new_params = state.params + alpha * d
    new_loss, new_grad = cache[alpha]

    s = new_params - state.params
    y = new_grad - state.grad
    history = state.history
    if float(s @ y) > 0:
        history = (history + ((s, y),))[-state.capacity :]

    status = "running"
    if float(np.linalg.norm(new_grad)) < state.gradient_tolerance:
        status = "grad-converged"
    elif abs(new_loss - state.loss) < state.loss_change_tolerance:
        status = "loss-converged"

    new_state = replace(
        state,
        params=new_params,
        loss=new_loss,
        grad=new_grad,
        history=history,
        iteration=state.iteration + 1,
        status=status,
    )
    return new_state, new_params, status != "running"
