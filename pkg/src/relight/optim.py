"""First-order optimization shared by the light fit and the edit-parameter fit.

The optimizer is functional: ``adam_step`` returns a new state, ``minimize``
confines everything to one call, and objectives must be pure.  ``Objective``
callables map a parameter vector to ``(value, gradient)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]
Projection = Callable[[np.ndarray], np.ndarray]

__all__ = [
    "AdamState",
    "InsufficientDataError",
    "adam_step",
    "minimize",
    "numeric_gradient",
    "Objective",
]


class InsufficientDataError(ValueError):
    """Raised when a fit has too few usable samples to determine its unknowns."""


@dataclass(frozen=True)
class AdamState:
    """Parameters plus the running moment estimates of the Adam rule."""

    params: np.ndarray
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self) -> None:
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("beta1 and beta2 must lie in [0, 1)")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.first_moment.shape != self.params.shape:
            raise ValueError("first moment must be shaped like params")
        if self.second_moment.shape != self.params.shape:
            raise ValueError("second moment must be shaped like params")

    @classmethod
    def create(cls, params: np.ndarray, lr: float = 1e-2, **kwargs) -> "AdamState":
        p = np.asarray(params, dtype=np.float64)
        return cls(
            params=p,
            first_moment=np.zeros_like(p),
            second_moment=np.zeros_like(p),
            lr=lr,
            **kwargs,
        )


def adam_step(state: AdamState, gradient: np.ndarray) -> AdamState:
    """One bias-corrected Adam update; returns the new state."""
    g = np.asarray(gradient, dtype=np.float64)
    if g.shape != state.params.shape:
        raise ValueError(f"gradient shape {g.shape} != params shape {state.params.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient contains non-finite components")
    t = state.step_count + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * g
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    params = state.params - state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return replace(
        state, params=params, first_moment=m, second_moment=v, step_count=t
    )


def minimize(
    obj: Objective,
    init: np.ndarray,
    project: Projection | None = None,
    iters: int = 500,
    lr: float = 1e-2,
) -> tuple[np.ndarray, float]:
    """Projected Adam descent; returns the best feasible point seen.

    ``project`` is applied after every step, so all evaluated points (and the
    returned one) are feasible.  The result is never worse than ``init``.
    """
    x0 = np.asarray(init, dtype=np.float64)
    value, grad = obj(x0)
    if not np.isfinite(value):
        raise ValueError(f"objective is non-finite at the initial point: {value}")
    best_x, best_value = x0.copy(), float(value)
    state = AdamState.create(x0, lr=lr)
    for _ in range(iters):
        state = adam_step(state, grad)
        if project is not None:
            state = replace(state, params=project(state.params))
        value, grad = obj(state.params)
        if np.isfinite(value) and value < best_value:
            best_x, best_value = state.params.copy(), float(value)
    return best_x, best_value


def numeric_gradient(
    f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient; the verification oracle for analytic ones."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = h
        hi = float(f(x + step))
        lo = float(f(x - step))
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise ValueError(f"non-finite evaluation near coordinate {i}")
        grad.flat[i] = (hi - lo) / (2.0 * h)
    return grad
