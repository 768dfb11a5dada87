"""Heatmaps and report figures.

``render_heatmap`` writes a binary 8-bit PGM (P5) by hand so golden-byte
tests need nothing beyond numpy. The remaining helpers draw matplotlib
figures through an Agg canvas; they never touch pyplot's global state.
The output format follows the file suffix (png, pdf, svg).
"""

from __future__ import annotations

import io
import os
from typing import Mapping, Sequence

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .atomic import atomic_write_bytes

HEATMAP_MODES = ("value", "abs-error")
CONSTANT_GRAY = 128


def heatmap_pixels(slice2d, mode: str = "value") -> np.ndarray:
    """Map a 2-D slice to uint8 gray levels.

    ``value`` stretches min..max onto 0..255. ``abs-error`` takes |e| and
    stretches 0..max onto 0..255, so zero error is black. A constant slice
    becomes uniform gray, except that an all-zero error slice is black.
    """
    if mode not in HEATMAP_MODES:
        raise ValueError(f"mode must be one of {HEATMAP_MODES}, got {mode!r}")
    a = np.asarray(slice2d, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"heatmap needs a non-empty 2-D slice, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("heatmap slice contains non-finite values")
    if mode == "abs-error":
        a = np.abs(a)
        lo, hi = 0.0, float(a.max())
        if hi == 0.0:
            return np.zeros(a.shape, dtype=np.uint8)
        if float(a.min()) == hi:
            return np.full(a.shape, CONSTANT_GRAY, dtype=np.uint8)
    else:
        lo, hi = float(a.min()), float(a.max())
        if hi == lo:
            return np.full(a.shape, CONSTANT_GRAY, dtype=np.uint8)
    scaled = np.rint((a - lo) / (hi - lo) * 255.0)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def encode_pgm(pixels: np.ndarray) -> bytes:
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(pixels, np.uint8).tobytes()


def render_heatmap(slice2d, path, mode: str = "value") -> bytes:
    """Write ``slice2d`` (rows = lattice rows, first row on top) as a PGM file.

    Returns the bytes written.
    """
    blob = encode_pgm(heatmap_pixels(slice2d, mode))
    atomic_write_bytes(path, blob)
    return blob


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    fmt = os.path.splitext(os.fspath(path))[1].lstrip(".").lower() or "png"
    buf = io.BytesIO()
    # fixed metadata keeps repeated renders byte-stable
    meta = {"Software": None} if fmt == "png" else None
    fig.savefig(buf, format=fmt, dpi=120, bbox_inches="tight", metadata=meta)
    atomic_write_bytes(path, buf.getvalue())


def plot_loss_history(history: Sequence[tuple[int, float, float]], path) -> None:
    epochs = [h[0] for h in history]
    fig = Figure(figsize=(5, 3))
    ax = fig.add_subplot()
    ax.semilogy(epochs, [h[1] for h in history], color="k", lw=1)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean training loss")
    lr_ax = ax.twinx()
    lr_ax.plot(epochs, [h[2] for h in history], color="tab:gray", lw=0.8, ls="--")
    lr_ax.set_ylabel("learning rate", color="tab:gray")
    _save(fig, path)


def plot_pod_energy(pod, path, thresholds: Sequence[float] = (0.9, 0.99)) -> None:
    k = np.arange(1, len(pod.cumulative_energy) + 1)
    fig = Figure(figsize=(5, 3))
    ax = fig.add_subplot()
    ax.plot(k, pod.cumulative_energy, marker=".", color="k", lw=1)
    for tau in thresholds:
        m = pod.modes_for(tau)
        ax.axhline(tau, color="tab:gray", lw=0.5, ls=":")
        ax.annotate(f"{m} modes for {tau:.0%}", (m, tau), textcoords="offset points",
                    xytext=(6, -12), fontsize=8)
    ax.set_xlabel("number of modes")
    ax.set_ylabel("cumulative energy")
    ax.set_ylim(0, 1.02)
    _save(fig, path)


def plot_metric_frames(reports: Mapping[str, object], path) -> None:
    """Per-frame MSE and SSIM for one or more models side by side."""
    fig = Figure(figsize=(8, 3))
    ax_mse, ax_ssim = fig.subplots(1, 2)
    for name, rep in reports.items():
        ax_mse.semilogy(rep.mse_t, lw=1, label=name)
        ax_ssim.plot(rep.ssim_t, lw=1, label=name)
    ax_mse.set_xlabel("time index")
    ax_mse.set_ylabel("MSE")
    ax_ssim.set_xlabel("time index")
    ax_ssim.set_ylabel("SSIM")
    ax_mse.legend(fontsize=8, frameon=False)
    _save(fig, path)


def plot_nmse(nmse: Sequence[float], path, title: str | None = None) -> None:
    nmse = np.asarray(nmse, dtype=np.float64)
    fig = Figure(figsize=(5, 3))
    ax = fig.add_subplot()
    ax.bar(np.arange(len(nmse)), nmse, color="0.35")
    ax.axhline(float(nmse.mean()), color="k", lw=0.8, ls="--")
    ax.set_xlabel("latent variable")
    ax.set_ylabel("NMSE (%)")
    if title:
        ax.set_title(title, fontsize=9)
    _save(fig, path)


def plot_reconstruction(truth2d, pred2d, path) -> None:
    """Truth, prediction and absolute error for one frame (darker error = lower)."""
    truth2d, pred2d = np.asarray(truth2d), np.asarray(pred2d)
    lo, hi = float(truth2d.min()), float(truth2d.max())
    fig = Figure(figsize=(9, 3))
    axes = fig.subplots(1, 3)
    panels = [(truth2d, "truth", "viridis", lo, hi), (pred2d, "prediction", "viridis", lo, hi),
              (np.abs(pred2d - truth2d), "|error|", "gray", 0.0, None)]
    for ax, (img, label, cmap, vmin, vmax) in zip(axes, panels):
        im = ax.imshow(img, origin="lower", cmap=cmap, vmin=vmin, vmax=vmax)
        ax.set_title(label, fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
        fig.colorbar(im, ax=ax, fraction=0.046, pad=0.04)
    _save(fig, path)
