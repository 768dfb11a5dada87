"""Latent-code diagnostics and snapshot POD.

Pearson correlations against a zero-variance vector are defined as 0; the
functions return how many such degenerate pairs they met.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .data.fields import GridField, normalized_lattice
from .models import LatentTable, MmgnModel
from .inference import evaluate_field


class CorrelationSummary(NamedTuple):
    value: float
    degenerate_pairs: int


def pearson_matrix(rows) -> tuple[np.ndarray, int]:
    """Pairwise Pearson correlation between the rows of a 2-D array."""
    x = np.asarray(rows, dtype=np.float64)
    xc = x - x.mean(axis=1, keepdims=True)
    norm = np.sqrt(np.sum(xc * xc, axis=1))
    bad = norm == 0
    safe = np.where(bad, 1.0, norm)
    u = xc / safe[:, None]
    corr = np.clip(u @ u.T, -1.0, 1.0)
    corr[bad, :] = 0.0
    corr[:, bad] = 0.0
    n, k = x.shape[0], int(bad.sum())
    degenerate = k * (n - k) + k * (k - 1) // 2
    return corr, degenerate


def _codes(latents) -> np.ndarray:
    return np.asarray(getattr(latents, "codes", latents), dtype=np.float64)


def latent_dissimilarity(latents: LatentTable | np.ndarray) -> CorrelationSummary:
    """Standard deviation of the correlations over all unordered pairs of codes."""
    codes = _codes(latents)
    if codes.ndim != 2 or codes.shape[0] < 2 or codes.shape[1] < 1:
        raise ValueError("need at least two codes of dimension >= 1")
    corr, degenerate = pearson_matrix(codes)
    iu = np.triu_indices(codes.shape[0], k=1)
    return CorrelationSummary(float(np.std(corr[iu])), degenerate)


def assemble_latent_matrix(tables: Sequence[LatentTable | np.ndarray]) -> np.ndarray:
    """Stack codes from several runs column-wise: (n_t, sum of latent sizes)."""
    mats = [_codes(t) for t in tables]
    if len({m.shape[0] for m in mats}) != 1:
        raise ValueError("all tables must cover the same time instances")
    return np.concatenate(mats, axis=1)


def _reconstruct_codes(model: MmgnModel, codes: np.ndarray, n_h: int, n_w: int) -> np.ndarray:
    grid = normalized_lattice(n_h, n_w)
    return np.stack([evaluate_field(model, z, grid) for z in codes])


def ablation_nmse(model: MmgnModel, latents: LatentTable, truth: GridField) -> np.ndarray:
    """Percent MSE increase after zeroing each latent coordinate in every code."""
    codes = _codes(latents)
    if codes.shape[0] != truth.n_t:
        raise ValueError(f"{codes.shape[0]} codes for {truth.n_t} frames")
    full = float(np.mean((_reconstruct_codes(model, codes, truth.n_h, truth.n_w)
                          - truth.values) ** 2))
    if full == 0:
        raise ValueError("reference reconstruction is exact; NMSE is undefined")
    out = np.empty(codes.shape[1])
    for j in range(codes.shape[1]):
        ablated = codes.copy()
        ablated[:, j] = 0.0
        mse = float(np.mean((_reconstruct_codes(model, ablated, truth.n_h, truth.n_w)
                             - truth.values) ** 2))
        out[j] = (mse - full) / full * 100.0
    return out


def autodecoder_diagnosis(latents: LatentTable | np.ndarray, truth) -> CorrelationSummary:
    """MSE between the time-by-time correlation structure of codes and of true frames."""
    codes = _codes(latents)
    frames = np.asarray(getattr(truth, "values", truth), dtype=np.float64)
    frames = frames.reshape(frames.shape[0], -1)
    if codes.shape[0] != frames.shape[0] or codes.shape[0] < 2:
        raise ValueError("need matching time counts >= 2")
    cz, dz = pearson_matrix(codes)
    cu, du = pearson_matrix(frames)
    return CorrelationSummary(float(np.mean((cz - cu) ** 2)), dz + du)


@dataclass
class PodResult:
    eigenvalues: np.ndarray  # descending, squared singular values of the centered snapshots
    cumulative_energy: np.ndarray  # entry k-1 is the energy share of the first k modes

    def modes_for(self, threshold: float) -> int:
        """Smallest mode count whose cumulative energy reaches ``threshold``."""
        if not 0 < threshold <= 1:
            raise ValueError("threshold must be in (0, 1]")
        return int(np.searchsorted(self.cumulative_energy, threshold, side="left")) + 1

    def rank(self, rel_tol: float = 1e-10) -> int:
        return int(np.sum(self.eigenvalues > rel_tol * self.eigenvalues[0]))

    def to_csv(self) -> str:
        lines = ["k,eigenvalue,cumulative_energy"]
        lines += [f"{k},{lam:.17g},{c:.17g}" for k, (lam, c)
                  in enumerate(zip(self.eigenvalues, self.cumulative_energy), start=1)]
        return "\n".join(lines) + "\n"


def snapshot_pod(field: GridField | np.ndarray) -> PodResult:
    """Energy spectrum from the time-snapshot Gram matrix of the mean-removed cube."""
    cube = np.asarray(getattr(field, "values", field), dtype=np.float64)
    if cube.shape[0] < 2:
        raise ValueError("snapshot POD needs at least two snapshots")
    snaps = cube.reshape(cube.shape[0], -1)
    snaps = snaps - snaps.mean(axis=0)
    gram = snaps @ snaps.T
    lam = np.linalg.eigvalsh(0.5 * (gram + gram.T))[::-1]
    lam_max = max(lam[0], 0.0)
    if lam[-1] < -1e-10 * lam_max:
        raise ValueError(f"Gram matrix has a negative eigenvalue {lam[-1]:.3e}")
    lam = np.maximum(lam, 0.0)
    cum = np.cumsum(lam)
    if cum[-1] == 0:
        raise ValueError("snapshots carry no energy after mean removal")
    return PodResult(lam, cum / cum[-1])
