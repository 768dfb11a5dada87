"""AdamW with decoupled weight decay and row-sparse updates for latent tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradientError(FloatingPointError):
    pass


def lr_at_epoch(lr0: float, decay: float, epoch: int) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return lr0 * decay ** epoch


@dataclass
class OptimizerState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    # int for dense parameters, per-row int array for row-sparse tables
    steps: dict[str, object] = field(default_factory=dict)


def _check_finite(name, grad):
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError(f"non-finite gradient for {name}")


def adamw_step(state: OptimizerState, params: dict[str, np.ndarray],
               grads: dict[str, np.ndarray], lr: float, weight_decay: float = 0.0):
    """One in-place AdamW update of every parameter that has a gradient."""
    b1, b2 = state.beta1, state.beta2
    for name, g in grads.items():
        _check_finite(name, g)
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
            state.steps[name] = 0
        state.steps[name] += 1
        t = state.steps[name]
        if weight_decay:
            p *= 1.0 - lr * weight_decay
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state


def adamw_rows_step(state: OptimizerState, name: str, table: np.ndarray, rows,
                    grad_rows: np.ndarray, lr: float):
    """AdamW on selected rows of ``table``; other rows and their moments are untouched.

    Each row keeps its own step counter so bias correction stays exact under
    sparse access. No weight decay: codes carry their own prior penalty.
    """
    _check_finite(name, grad_rows)
    rows = np.asarray(rows, dtype=np.intp)
    if np.unique(rows).size != rows.size:
        raise ValueError(f"{name}: duplicate rows in one update")
    if name not in state.m:
        state.m[name] = np.zeros_like(table)
        state.v[name] = np.zeros_like(table)
        state.steps[name] = np.zeros(table.shape[0], dtype=np.int64)
    b1, b2 = state.beta1, state.beta2
    steps = state.steps[name]
    steps[rows] += 1
    t = steps[rows][:, None].astype(np.float64)
    m = b1 * state.m[name][rows] + (1.0 - b1) * grad_rows
    v = b2 * state.v[name][rows] + (1.0 - b2) * grad_rows * grad_rows
    state.m[name][rows] = m
    state.v[name][rows] = v
    table[rows] -= lr * (m / (1.0 - b1 ** t)) / (np.sqrt(v / (1.0 - b2 ** t)) + state.eps)
    return table, state
