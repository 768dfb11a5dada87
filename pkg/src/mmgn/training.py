"""Joint auto-decoding of decoder weights and per-instance latent codes.

Objective over a batch of time instances k::

    sum_k [ mean_i (F(z_k, x_i) - u_i)^2 + latent_reg * ||z_k||^2 ]

Baselines take the normalized time as a third input and have no codes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import autograd as ag
from .data.fields import ObservationSet
from .models import (
    ARCHS,
    BaselineModel,
    LatentTable,
    MmgnDims,
    MmgnModel,
    baseline_graph,
    init_baseline,
    init_mmgn,
    mmgn_graph,
)
from .optim import OptimizerState, adamw_rows_step, adamw_step, lr_at_epoch

log = logging.getLogger(__name__)

LATENT_INITS = ("zeros", "gaussian", "uniform", "ones", "orthogonal")
MODEL_NAMES = ("mmgn",) + ARCHS


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 200
    lr0: float = 1e-3
    lr_decay: float = 0.99
    batch_size: int = 16
    latent_reg: float = 1e-4
    weight_decay: float = 1e-2
    seed: int = 0
    latent_init: str = "zeros"
    latent_init_scale: float = 0.01

    def validate(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must be in (0, 1]")
        if self.latent_reg < 0:
            raise ValueError("latent_reg must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.latent_init not in LATENT_INITS:
            raise ValueError(f"latent_init must be one of {LATENT_INITS}")


@dataclass
class ModelSpec:
    """Architecture choice plus the hyperparameters needed to build it.

    ``depth`` is the layer count L for MMGN, the residual block count for
    ResMLP and the linear layer count for SIREN/FFN. ``options`` carries
    arch-specific keys (w0, freq_const, n_freq, sigma, encode_size).
    """

    arch: str = "mmgn"
    width: int = 64
    depth: int = 3
    d_z: int = 16
    input_scale: float = 128.0
    filter_kind: str = "gabor"
    gamma_alpha: float = 6.0
    gamma_beta: float = 1.0
    seed: int = 0
    options: dict = field(default_factory=dict)

    def build(self, d_x: int = 2):
        if self.arch == "mmgn":
            dims = MmgnDims(d_x=d_x, d_z=self.d_z, d_h=self.width, n_layers=self.depth)
            return init_mmgn(dims, self.input_scale, self.seed, filter_kind=self.filter_kind,
                             gamma_alpha=self.gamma_alpha, gamma_beta=self.gamma_beta)
        if self.arch not in ARCHS:
            raise ValueError(f"unknown model {self.arch!r}; expected one of {MODEL_NAMES}")
        depth_key = "n_blocks" if self.arch == "resmlp" else "depth"
        opts = {"width": self.width, depth_key: self.depth, **self.options}
        return init_baseline(self.arch, d_x + 1, self.seed, **opts)


class TrainResult(NamedTuple):
    model: MmgnModel | BaselineModel
    latents: LatentTable | None
    history: list[tuple[int, float, float]]  # (epoch, mean_loss, lr)


class LossGraph(NamedTuple):
    graph: ag.Graph
    loss: ag.Var
    params: dict[str, ag.Var]
    latents: ag.Var | None
    stats: dict


def init_latents(n: int, d_z: int, kind: str, scale: float, rng) -> np.ndarray:
    if kind == "zeros":
        return np.zeros((n, d_z))
    if kind == "ones":
        return np.ones((n, d_z))
    if kind == "gaussian":
        return rng.normal(0.0, scale, size=(n, d_z))
    if kind == "uniform":
        return rng.uniform(-scale, scale, size=(n, d_z))
    if kind == "orthogonal":
        a = rng.normal(size=(max(n, d_z), min(n, d_z)))
        q, r = np.linalg.qr(a)
        q *= np.sign(np.diag(r))
        return scale * (q if n >= d_z else q.T)
    raise ValueError(f"unknown latent init {kind!r}")


def normalized_time(model: BaselineModel, t) -> np.ndarray:
    lo, hi = model.config.get("t_range", (0.0, 1.0))
    t = np.asarray(t, dtype=np.float64)
    return np.zeros_like(t) if hi == lo else 2.0 * (t - lo) / (hi - lo) - 1.0


def _stack_batch(batch: list[ObservationSet]):
    for obs in batch:
        if len(obs) == 0:
            raise ValueError(f"observation set for time index {obs.time_index} is empty")
    coords = np.concatenate([o.coords for o in batch])
    values = np.concatenate([o.values for o in batch])
    index = np.concatenate([np.full(len(o), k, dtype=np.intp) for k, o in enumerate(batch)])
    weights = np.concatenate([np.full(len(o), 1.0 / len(o)) for o in batch])
    return coords, values, index, weights


def build_loss(graph: ag.Graph, model, pv, zvar, batch: list[ObservationSet], latent_reg: float,
               training: bool = True, stats: dict | None = None) -> ag.Var:
    coords, values, index, weights = _stack_batch(batch)
    if isinstance(model, MmgnModel):
        pred = mmgn_graph(model, pv, graph.constant(coords), zvar, index)
    else:
        times = normalized_time(model, np.array([o.time for o in batch]))[index]
        xt = graph.constant(np.column_stack([coords, times]))
        pred = baseline_graph(model, pv, xt, training=training, stats=stats)
    resid = pred - values
    loss = ag.sum(ag.square(resid) * weights)
    if zvar is not None and latent_reg:
        loss = loss + ag.sum(ag.square(zvar)) * latent_reg
    return loss


def loss_objective(model, latents: LatentTable | None, batch: list[ObservationSet],
                   cfg: TrainConfig, rows=None) -> LossGraph:
    """Build the batch objective on a fresh graph.

    ``rows`` selects the latent rows matching ``batch`` (default: the first
    ``len(batch)`` rows).
    """
    g = ag.Graph()
    pv = {k: g.leaf(v, name=k) for k, v in model.params.items()}
    zvar = None
    if isinstance(model, MmgnModel):
        if latents is None:
            raise ValueError("MMGN needs a latent table")
        rows = np.arange(len(batch)) if rows is None else np.asarray(rows)
        zvar = g.leaf(latents.codes[rows], name="latents")
    stats: dict = {}
    loss = build_loss(g, model, pv, zvar, batch, cfg.latent_reg, True, stats)
    return LossGraph(g, loss, pv, zvar, stats)


def train_joint(dataset: list[ObservationSet], model_spec: ModelSpec | MmgnModel | BaselineModel,
                cfg: TrainConfig,
                on_epoch: Callable[[int, float, float], None] | None = None) -> TrainResult:
    """Optimize decoder and latent codes jointly; returns the trained pair and loss history."""
    cfg.validate()
    if not dataset:
        raise ValueError("dataset is empty")
    for obs in dataset:
        if len(obs) == 0:
            raise ValueError(f"observation set for time index {obs.time_index} is empty")

    if isinstance(model_spec, ModelSpec):
        model = model_spec.build(dataset[0].coords.shape[1])
    else:
        model = model_spec.copy()
    rng = np.random.default_rng(cfg.seed)

    latents = None
    if isinstance(model, MmgnModel):
        codes = init_latents(len(dataset), model.dims.d_z, cfg.latent_init,
                             cfg.latent_init_scale, rng)
        latents = LatentTable(codes, np.array([o.time for o in dataset]))
    else:
        times = [o.time for o in dataset]
        model.config["t_range"] = [float(min(times)), float(max(times))]

    state = OptimizerState()
    history = []
    n = len(dataset)
    for epoch in range(cfg.epochs):
        lr = lr_at_epoch(cfg.lr0, cfg.lr_decay, epoch)
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            rows = np.sort(order[start:start + cfg.batch_size])
            try:
                lg = loss_objective(model, latents, [dataset[r] for r in rows], cfg, rows)
                value = float(lg.loss.value)
                if not math.isfinite(value):
                    raise FloatingPointError("loss is non-finite")
                grads = ag.backward(lg.graph, lg.loss)
            except FloatingPointError as exc:
                raise TrainingDivergedError(
                    f"training diverged at epoch {epoch} (lr={lr:g}): {exc}") from exc
            adamw_step(state, model.params, {k: grads[v.id] for k, v in lg.params.items()},
                       lr, cfg.weight_decay)
            model.project()
            if lg.latents is not None:
                adamw_rows_step(state, "latents", latents.codes, rows, grads[lg.latents.id], lr)
            if lg.stats:
                model.update_buffers(lg.stats)
            total += value
        mean_loss = total / n
        if not math.isfinite(mean_loss):
            raise TrainingDivergedError(f"training diverged at epoch {epoch} (lr={lr:g})")
        history.append((epoch, mean_loss, lr))
        if on_epoch is not None:
            on_epoch(epoch, mean_loss, lr)
        log.debug("epoch %d loss %.6g lr %.3g", epoch, mean_loss, lr)
    return TrainResult(model, latents, history)

