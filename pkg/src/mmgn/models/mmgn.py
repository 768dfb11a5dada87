"""Multiplicative modulated Gabor network decoder.

h1 = g1(x);  h{i+1} = g{i+1}(x) * (W_h h_i + W_z z + b_i);  out = W_out h_L + b_out

Parameters live in a flat ``{name: ndarray}`` dict so the training loop can
own the only mutable copy and the graph builder can wrap them as leaves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import autograd as ag
from .gabor import GaborFilterBank, GaborTerm, gabor_graph, gabor_product_expand, unit_term

FILTER_KINDS = ("gabor", "fourier", "none")
INPUT_SCALES = (128, 256, 512)
GAMMA_FLOOR = 1e-6


@dataclass
class MmgnDims:
    d_x: int = 2
    d_z: int = 16
    d_h: int = 64
    n_layers: int = 3

    def validate(self):
        for k in ("d_x", "d_z", "d_h", "n_layers"):
            if getattr(self, k) < 1:
                raise ValueError(f"{k} must be >= 1, got {getattr(self, k)}")


@dataclass
class MmgnModel:
    dims: MmgnDims
    params: dict[str, np.ndarray]
    filter_kind: str = "gabor"
    config: dict = field(default_factory=dict)

    kind = "mmgn"

    @property
    def L(self) -> int:
        return self.dims.n_layers

    def bank(self, i: int) -> GaborFilterBank:
        """Filter bank ``i`` (0-based); fourier banks report gamma 0 and mu 0."""
        p = self.params
        w, b = p[f"filters.{i}.w"], p[f"filters.{i}.b"]
        if self.filter_kind == "gabor":
            return GaborFilterBank(p[f"filters.{i}.mu"], p[f"filters.{i}.gamma"], w, b)
        return GaborFilterBank(np.zeros_like(w), np.zeros(w.shape[0]), w, b)

    def n_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def copy(self) -> "MmgnModel":
        return MmgnModel(self.dims, {k: v.copy() for k, v in self.params.items()},
                         self.filter_kind, dict(self.config))

    def project(self):
        """Keep envelope scales strictly positive after an optimizer step."""
        for i in range(self.L):
            key = f"filters.{i}.gamma"
            if key in self.params:
                np.maximum(self.params[key], GAMMA_FLOOR, out=self.params[key])


def _gaussian_scale_for_mean_norm(target: float, d: int) -> float:
    # E||w|| for w ~ N(0, s^2 I_d) is s * sqrt(2) * Gamma((d+1)/2) / Gamma(d/2)
    chi_mean = math.sqrt(2.0) * math.exp(math.lgamma((d + 1) / 2) - math.lgamma(d / 2))
    return target / chi_mean


def init_mmgn(dims: MmgnDims, input_scale: float = 128.0, seed: int = 0, *,
              filter_kind: str = "gabor", gamma_alpha: float = 6.0, gamma_beta: float = 1.0,
              coord_min: float = -1.0, coord_max: float = 1.0) -> MmgnModel:
    dims.validate()
    if not input_scale > 0:
        raise ValueError(f"input_scale must be positive, got {input_scale}")
    if filter_kind not in FILTER_KINDS:
        raise ValueError(f"filter_kind must be one of {FILTER_KINDS}, got {filter_kind!r}")
    if gamma_alpha <= 0 or gamma_beta <= 0:
        raise ValueError("gamma prior parameters must be positive")

    rng = np.random.default_rng(seed)
    d_x, d_z, d_h, L = dims.d_x, dims.d_z, dims.d_h, dims.n_layers
    p: dict[str, np.ndarray] = {}
    freq_sd = _gaussian_scale_for_mean_norm(input_scale / L, d_x)

    def uniform(shape, bound):
        return rng.uniform(-bound, bound, size=shape)

    for i in range(L):
        if filter_kind == "gabor":
            p[f"filters.{i}.mu"] = rng.uniform(coord_min, coord_max, size=(d_h, d_x))
            # numpy's gamma takes (shape, scale); beta is a rate
            p[f"filters.{i}.gamma"] = rng.gamma(gamma_alpha, 1.0 / gamma_beta, size=d_h)
        if filter_kind != "none":
            p[f"filters.{i}.w"] = rng.normal(0.0, freq_sd, size=(d_h, d_x))
            p[f"filters.{i}.b"] = rng.uniform(-math.pi, math.pi, size=d_h)
    for i in range(L - 1):
        p[f"layers.{i}.w_h"] = uniform((d_h, d_h), math.sqrt(6.0 / d_h))
        p[f"layers.{i}.w_z"] = uniform((d_h, d_z), math.sqrt(6.0 / d_z))
        p[f"layers.{i}.b"] = uniform((d_h,), 1.0 / math.sqrt(d_h))
    p["out.w"] = uniform((1, d_h), math.sqrt(6.0 / d_h))
    p["out.b"] = np.zeros(1)

    cfg = dict(input_scale=float(input_scale), seed=int(seed), gamma_alpha=float(gamma_alpha),
               gamma_beta=float(gamma_beta))
    return MmgnModel(dims, p, filter_kind, cfg)


def _filter(model: MmgnModel, pv, x: ag.Var, i: int) -> ag.Var | None:
    if model.filter_kind == "none":
        return None
    w, b = pv[f"filters.{i}.w"], pv[f"filters.{i}.b"]
    if model.filter_kind == "fourier":
        return gabor_graph(x, None, None, w, b)
    return gabor_graph(x, pv[f"filters.{i}.mu"], pv[f"filters.{i}.gamma"], w, b)


def mmgn_graph(model: MmgnModel, pv, x: ag.Var, z: ag.Var, z_index=None) -> ag.Var:
    """Decoder output (n,) for coordinates ``x`` (n, d_x).

    ``z`` is (k, d_z). With ``z_index`` given, point ``r`` uses latent row
    ``z_index[r]``; otherwise ``k`` must be 1 or n.
    """
    g = x.graph
    n = x.shape[0]
    if x.shape[1] != model.dims.d_x:
        raise ValueError(f"coordinates have {x.shape[1]} columns, model expects {model.dims.d_x}")
    if z.shape[-1] != model.dims.d_z:
        raise ValueError(f"latent has {z.shape[-1]} entries, model expects {model.dims.d_z}")

    h = _filter(model, pv, x, 0)
    if h is None:
        h = g.constant(np.ones((n, model.dims.d_h)))
    for i in range(model.L - 1):
        zc = ag.linear(z, pv[f"layers.{i}.w_z"], pv[f"layers.{i}.b"])
        if z_index is not None:
            zc = ag.take(zc, z_index)
        pre = ag.linear(h, pv[f"layers.{i}.w_h"]) + zc
        f = _filter(model, pv, x, i + 1)
        h = pre if f is None else f * pre
    out = ag.linear(h, pv["out.w"], pv["out.b"])
    return ag.reshape(out, (n,))


def mmgn_forward(model: MmgnModel, z, x) -> np.ndarray:
    """Predictions for coordinate rows ``x`` under latent ``z`` (d_z,) or (n, d_z)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    z = np.asarray(z, dtype=np.float64)
    g = ag.Graph()
    pv = {k: g.constant(v) for k, v in model.params.items()}
    zv = g.constant(z.reshape(1, -1) if z.ndim == 1 else z)
    return mmgn_graph(model, pv, g.constant(x), zv).value


def linear_expansion(model: MmgnModel, z) -> tuple[list[tuple[float, GaborTerm]], float]:
    """Write the decoder output under fixed ``z`` as a weighted sum of Gabor atoms.

    Returns ``(atoms, bias)`` with ``out(x) == sum(c * atom(x)) + bias``.
    The atom count grows roughly as (2 d_h)^L, so keep models tiny.
    """
    if model.filter_kind == "none":
        raise ValueError("a filter-free network has no Gabor expansion")
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    p = model.params
    banks = [model.bank(i) for i in range(model.L)]
    h = [[(1.0, unit_term(banks[0], j))] for j in range(model.dims.d_h)]
    for i in range(model.L - 1):
        offset = p[f"layers.{i}.w_z"] @ z + p[f"layers.{i}.b"]
        w_h = p[f"layers.{i}.w_h"]
        nxt = []
        for j in range(model.dims.d_h):
            gj = unit_term(banks[i + 1], j)
            atoms: list[tuple[float, GaborTerm]] = [(float(offset[j]), gj)]
            for k, hk in enumerate(h):
                for c, term in hk:
                    coef, ta, tb = gabor_product_expand(gj, term)
                    scale = 0.5 * coef * c * w_h[j, k]
                    atoms.append((scale, ta))
                    atoms.append((-scale, tb))
            nxt.append(atoms)
        h = nxt
    w_out = p["out.w"][0]
    flat = [(float(w_out[j]) * c, t) for j, atoms in enumerate(h) for c, t in atoms]
    return flat, float(p["out.b"][0])
