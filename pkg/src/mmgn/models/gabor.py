"""Gabor filter banks and their closed-form product expansion.

One filter unit is ``exp(-gamma/2 * ||x - mu||^2) * sin(w . x + b)`` with a
scalar inverse-variance ``gamma`` and a center ``mu`` in coordinate space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import autograd as ag

SIN, COS = "sin", "cos"


@dataclass
class GaborFilterBank:
    mu: np.ndarray  # (d_h, d_x)
    gamma: np.ndarray  # (d_h,)
    w: np.ndarray  # (d_h, d_x)
    b: np.ndarray  # (d_h,)

    @property
    def d_h(self) -> int:
        return self.w.shape[0]

    @property
    def d_x(self) -> int:
        return self.w.shape[1]


def gabor_apply(bank: GaborFilterBank, x) -> np.ndarray:
    """Filter responses for one coordinate (shape (d_h,)) or a batch (n, d_h)."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    if xb.shape[-1] != bank.d_x:
        raise ValueError(f"coordinate has {xb.shape[-1]} entries, bank expects {bank.d_x}")
    d2 = np.sum((xb[:, None, :] - bank.mu[None, :, :]) ** 2, axis=-1)
    out = np.exp(-0.5 * bank.gamma * d2) * np.sin(xb @ bank.w.T + bank.b)
    return out[0] if single else out


def gabor_graph(x: ag.Var, mu: ag.Var | None, gamma: ag.Var | None, w: ag.Var, b: ag.Var) -> ag.Var:
    """Graph version of :func:`gabor_apply` on an (n, d_x) batch.

    With ``mu``/``gamma`` omitted the envelope is dropped (pure sinusoid).
    """
    wave = ag.sin(ag.linear(x, w, b))
    if gamma is None:
        return wave
    # ||x - mu||^2 expanded so no (n, d_h, d_x) intermediate is formed
    xx = ag.sum(ag.square(x), axis=1, keepdims=True)
    mm = ag.sum(ag.square(mu), axis=1)
    d2 = xx - (x @ ag.transpose(mu)) * 2.0 + mm
    return ag.exp(d2 * gamma * -0.5) * wave


@dataclass(frozen=True)
class GaborTerm:
    """A single atom ``exp(-gamma/2 ||x - mu||^2) * trig(w . x + b)``."""

    gamma: float
    mu: np.ndarray
    w: np.ndarray
    b: float
    parity: str = SIN

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        env = np.exp(-0.5 * self.gamma * np.sum((x - self.mu) ** 2, axis=-1))
        arg = x @ self.w + self.b
        return env * (np.sin(arg) if self.parity == SIN else np.cos(arg))

    def sine_phase(self) -> float:
        # cos(a) == sin(a + pi/2)
        return self.b if self.parity == SIN else self.b + 0.5 * math.pi


def unit_term(bank: GaborFilterBank, j: int) -> GaborTerm:
    return GaborTerm(float(bank.gamma[j]), bank.mu[j].copy(), bank.w[j].copy(), float(bank.b[j]))


def gabor_product_expand(g1: GaborTerm, g2: GaborTerm) -> tuple[float, GaborTerm, GaborTerm]:
    """Rewrite ``g1(x) * g2(x)`` as ``C/2 * (term_a(x) - term_b(x))``.

    Both returned atoms share the merged envelope (gamma1 + gamma2, weighted
    center) and are cosines at the difference and sum frequencies.
    """
    mu1, mu2 = np.asarray(g1.mu, float), np.asarray(g2.mu, float)
    if mu1.shape != mu2.shape or np.shape(g1.w) != np.shape(g2.w) or np.shape(g1.w) != mu1.shape:
        raise ValueError(f"terms disagree on d_x: {mu1.shape} vs {mu2.shape}")
    gsum = g1.gamma + g2.gamma
    if gsum > 0:
        mu_bar = (g1.gamma * mu1 + g2.gamma * mu2) / gsum
        coef = math.exp(-0.5 * g1.gamma * g2.gamma / gsum * float(np.sum((mu1 - mu2) ** 2)))
    else:
        mu_bar, coef = np.zeros_like(mu1), 1.0
    p1, p2 = g1.sine_phase(), g2.sine_phase()
    w1, w2 = np.asarray(g1.w, float), np.asarray(g2.w, float)
    # sin a sin b = (cos(a - b) - cos(a + b)) / 2
    term_a = GaborTerm(gsum, mu_bar, w1 - w2, p1 - p2, COS)
    term_b = GaborTerm(gsum, mu_bar, w1 + w2, p1 + p2, COS)
    return coef, term_a, term_b
