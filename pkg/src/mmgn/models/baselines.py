"""Coordinate-network baselines fed with (x, y, t).

resmlp  stem linear, residual blocks of two BN+GELU layers, linear head
siren   sine-activated MLP
ffn_p   axis-aligned log-spaced Fourier features + GELU MLP
ffn_g   Gaussian random Fourier features + GELU MLP
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import autograd as ag

ARCHS = ("resmlp", "siren", "ffn_p", "ffn_g")

DEFAULTS = {
    "resmlp": dict(width=128, n_blocks=6, bn_momentum=0.1, bn_eps=1e-5),
    "siren": dict(width=128, depth=5, w0=30.0),
    "ffn_p": dict(width=128, depth=4, freq_const=30.0, n_freq=150),
    "ffn_g": dict(width=128, depth=4, sigma=10.0, encode_size=128),
}


@dataclass
class BaselineModel:
    arch: str
    d_in: int
    params: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    kind = "baseline"

    def n_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def copy(self) -> "BaselineModel":
        return BaselineModel(self.arch, self.d_in, {k: v.copy() for k, v in self.params.items()},
                             {k: v.copy() for k, v in self.buffers.items()}, dict(self.config))

    def project(self):
        pass

    def update_buffers(self, stats: dict[str, np.ndarray]):
        """Fold batch statistics from a training forward into running averages."""
        m = self.config.get("bn_momentum", 0.1)
        for key, val in stats.items():
            buf = self.buffers[key]
            buf *= 1.0 - m
            buf += m * val


def _linear_init(rng, p, name, fan_in, fan_out, bound=None):
    bound = 1.0 / math.sqrt(fan_in) if bound is None else bound
    p[f"{name}.w"] = rng.uniform(-bound, bound, size=(fan_out, fan_in))
    p[f"{name}.b"] = rng.uniform(-1.0 / math.sqrt(fan_in), 1.0 / math.sqrt(fan_in), size=fan_out)


def init_baseline(arch: str, d_in: int = 3, seed: int = 0, **overrides) -> BaselineModel:
    if arch not in ARCHS:
        raise ValueError(f"unknown baseline {arch!r}; expected one of {ARCHS}")
    unknown = set(overrides) - set(DEFAULTS[arch])
    if unknown:
        raise ValueError(f"unknown {arch} options: {sorted(unknown)}")
    cfg = {**DEFAULTS[arch], **overrides}
    if d_in < 1 or cfg["width"] < 1:
        raise ValueError("dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    p: dict[str, np.ndarray] = {}
    buffers: dict[str, np.ndarray] = {}
    w = cfg["width"]

    if arch == "resmlp":
        _linear_init(rng, p, "stem", d_in, w)
        for k in range(cfg["n_blocks"]):
            for j in (1, 2):
                _linear_init(rng, p, f"blocks.{k}.fc{j}", w, w)
                p[f"blocks.{k}.bn{j}.scale"] = np.ones(w)
                p[f"blocks.{k}.bn{j}.shift"] = np.zeros(w)
                buffers[f"blocks.{k}.bn{j}.mean"] = np.zeros(w)
                buffers[f"blocks.{k}.bn{j}.var"] = np.ones(w)
        _linear_init(rng, p, "out", w, 1)
    elif arch == "siren":
        w0 = cfg["w0"]
        fan = d_in
        for k in range(cfg["depth"] - 1):
            bound = 1.0 / fan if k == 0 else math.sqrt(6.0 / fan) / w0
            _linear_init(rng, p, f"layers.{k}", fan, w, bound)
            fan = w
        _linear_init(rng, p, "out", fan, 1, math.sqrt(6.0 / fan) / w0)
    else:
        if arch == "ffn_p":
            m = cfg["n_freq"]
            freqs = cfg["freq_const"] ** (np.arange(m) / m)
            basis = np.kron(np.eye(d_in), freqs[:, None])  # (d_in * m, d_in)
        else:
            basis = rng.normal(0.0, cfg["sigma"], size=(cfg["encode_size"], d_in))
        buffers["encoding"] = 2.0 * math.pi * basis
        fan = 2 * basis.shape[0]
        for k in range(cfg["depth"] - 1):
            _linear_init(rng, p, f"layers.{k}", fan, w)
            fan = w
        _linear_init(rng, p, "out", fan, 1)

    cfg["seed"] = int(seed)
    return BaselineModel(arch, d_in, p, buffers, cfg)


def fourier_encode(x: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """``[sin(B x), cos(B x)]`` for rows of ``x``; ``basis`` already holds the 2*pi."""
    proj = np.atleast_2d(x) @ basis.T
    return np.concatenate([np.sin(proj), np.cos(proj)], axis=-1)


def _batchnorm(model, pv, h: ag.Var, name: str, training: bool, stats) -> ag.Var:
    eps = model.config.get("bn_eps", 1e-5)
    if training:
        mu = ag.mean(h, axis=0)
        centered = h - mu
        var = ag.mean(ag.square(centered), axis=0)
        if stats is not None:
            n = h.shape[0]
            stats[f"{name}.mean"] = mu.value.copy()
            # running variance tracks the unbiased estimate
            stats[f"{name}.var"] = var.value * (n / max(n - 1, 1))
        normed = centered * ag.rsqrt(var + eps)
    else:
        mean = model.buffers[f"{name}.mean"]
        inv = 1.0 / np.sqrt(model.buffers[f"{name}.var"] + eps)
        normed = (h - mean) * inv
    return normed * pv[f"{name}.scale"] + pv[f"{name}.shift"]


def baseline_graph(model: BaselineModel, pv, xt: ag.Var, training: bool = False,
                   stats: dict | None = None) -> ag.Var:
    """Output (n,) for input rows ``xt`` of width ``d_in``."""
    n = xt.shape[0]
    if xt.shape[1] != model.d_in:
        raise ValueError(f"inputs have {xt.shape[1]} columns, {model.arch} expects {model.d_in}")
    arch, cfg = model.arch, model.config

    if arch == "resmlp":
        h = ag.linear(xt, pv["stem.w"], pv["stem.b"])
        for k in range(cfg["n_blocks"]):
            y = h
            for j in (1, 2):
                y = ag.linear(y, pv[f"blocks.{k}.fc{j}.w"], pv[f"blocks.{k}.fc{j}.b"])
                y = ag.gelu(_batchnorm(model, pv, y, f"blocks.{k}.bn{j}", training, stats))
            h = h + y
    elif arch == "siren":
        w0 = cfg["w0"]
        h = xt
        for k in range(cfg["depth"] - 1):
            h = ag.sin(ag.linear(h, pv[f"layers.{k}.w"], pv[f"layers.{k}.b"]) * w0)
    else:
        proj = xt @ xt.graph.constant(model.buffers["encoding"].T)
        h = ag.concat(ag.sin(proj), ag.cos(proj))
        for k in range(cfg["depth"] - 1):
            h = ag.gelu(ag.linear(h, pv[f"layers.{k}.w"], pv[f"layers.{k}.b"]))
    out = ag.linear(h, pv["out.w"], pv["out.b"])
    return ag.reshape(out, (n,))


def stack_inputs(x, t) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (x.shape[0],))
    return np.column_stack([x, t])


def baseline_forward(model: BaselineModel, x, t) -> np.ndarray:
    """Inference-mode predictions at coordinates ``x`` (n, 2) and time ``t``."""
    xt = stack_inputs(x, t)
    g = ag.Graph()
    pv = {k: g.constant(v) for k, v in model.params.items()}
    return baseline_graph(model, pv, g.constant(xt), training=False).value
