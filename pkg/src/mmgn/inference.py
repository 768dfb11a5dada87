"""Frozen-decoder usage: latent MAP solves, dense field evaluation, latent interpolation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from . import autograd as ag
from .data.fields import GridField, ObservationSet, normalized_lattice
from .models import BaselineModel, LatentTable, MmgnModel, baseline_forward, mmgn_forward
from .optim import OptimizerState, adamw_step
from .training import build_loss, normalized_time

INFER_INITS = ("zeros", "nearest")


@dataclass
class InferConfig:
    steps: int = 300
    lr: float = 1e-2
    latent_reg: float = 1e-4
    init: str = "zeros"

    def validate(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.init not in INFER_INITS:
            raise ValueError(f"init must be one of {INFER_INITS}")


def infer_latent(model: MmgnModel, observations: ObservationSet, cfg: InferConfig,
                 table: LatentTable | None = None) -> np.ndarray:
    """MAP estimate of a code for new observations with every decoder weight frozen.

    ``init="nearest"`` starts from the trained code closest in time (needs ``table``).
    """
    cfg.validate()
    if len(observations) == 0:
        raise ValueError(f"observation set for time index {observations.time_index} is empty")
    if cfg.init == "nearest":
        if table is None:
            raise ValueError("nearest-in-time init needs the trained latent table")
        z = table.codes[int(np.argmin(np.abs(table.time_stamps - observations.time)))].copy()
    else:
        z = np.zeros(model.dims.d_z)

    params = {"z": z.reshape(1, -1)}
    state = OptimizerState()
    for _ in range(cfg.steps):
        g = ag.Graph()
        pv = {k: g.constant(v) for k, v in model.params.items()}
        zvar = g.leaf(params["z"], name="z")
        loss = build_loss(g, model, pv, zvar, [observations], cfg.latent_reg)
        if not np.isfinite(loss.value):
            raise FloatingPointError("latent inference loss became non-finite")
        grads = ag.backward(g, loss)
        adamw_step(state, params, {"z": grads[zvar.id]}, cfg.lr, 0.0)
    return params["z"].reshape(-1).copy()


def evaluate_field(model, z, grid, t=None) -> np.ndarray:
    """Predictions on a coordinate lattice ``grid`` of shape (..., d_x).

    ``z`` feeds an MMGN decoder; ``t`` (raw time) feeds a baseline.
    """
    grid = np.asarray(grid, dtype=np.float64)
    flat = grid.reshape(-1, grid.shape[-1])
    if isinstance(model, MmgnModel):
        out = mmgn_forward(model, z, flat)
    elif isinstance(model, BaselineModel):
        out = baseline_forward(model, flat, normalized_time(model, t))
    else:
        raise TypeError(f"cannot evaluate {type(model).__name__}")
    return out.reshape(grid.shape[:-1])


def interpolate_latent(table: LatentTable, t: float, kind: str = "linear") -> np.ndarray:
    """Code at time ``t`` by interpolating between trained codes (no extrapolation)."""
    if len(table) < 2:
        raise ValueError("interpolation needs at least two codes")
    order = np.argsort(table.time_stamps, kind="stable")
    ts, codes = table.time_stamps[order], table.codes[order]
    if not ts[0] <= t <= ts[-1]:
        raise ValueError(f"t={t} outside trained range [{ts[0]}, {ts[-1]}]; "
                         "extrapolating codes is forecasting")
    hit = np.flatnonzero(ts == t)
    if hit.size:
        return codes[hit[0]].copy()
    if kind == "spline":
        return CubicSpline(ts, codes, axis=0)(t)
    if kind != "linear":
        raise ValueError(f"unknown interpolation kind {kind!r}")
    j = int(np.searchsorted(ts, t))
    w = (t - ts[j - 1]) / (ts[j] - ts[j - 1])
    return (1.0 - w) * codes[j - 1] + w * codes[j]


def reconstruct(model, latents: LatentTable | None, n_h: int, n_w: int,
                times=None, coord_range=(0.0, 1.0, 0.0, 1.0)) -> GridField:
    """Dense cube on an ``n_h x n_w`` lattice at ``times`` (default: the trained times).

    MMGN codes for times between trained stamps are linearly interpolated.
    """
    grid = normalized_lattice(n_h, n_w)
    if times is None:
        if latents is None:
            raise ValueError("baseline reconstruction needs explicit times")
        times = latents.time_stamps
    times = np.asarray(times, dtype=np.float64)
    frames = []
    for t in times:
        if isinstance(model, MmgnModel):
            hit = np.flatnonzero(latents.time_stamps == t)
            z = latents.codes[hit[0]] if hit.size else interpolate_latent(latents, float(t))
            frames.append(evaluate_field(model, z, grid))
        else:
            frames.append(evaluate_field(model, None, grid, t))
    return GridField(np.stack(frames), coord_range, times)
