"""Reconstruction metrics: MSE, PSNR, global SSIM, and the relative-gain "promotion".

SSIM here uses whole-frame statistics (no sliding window):

    ((2 mu_a mu_b + C1)(2 cov_ab + C2)) / ((mu_a^2 + mu_b^2 + C1)(var_a + var_b + C2))

with C1 = (0.01 R)^2, C2 = (0.03 R)^2 and population (ddof=0) moments.
PSNR and SSIM share one data range R = max - min of the ground-truth cube.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

PSNR_CAP = 1e9
K1, K2 = 0.01, 0.03


@dataclass
class MetricReport:
    mse_t: np.ndarray
    psnr_t: np.ndarray
    ssim_t: np.ndarray
    mse: float
    psnr: float
    ssim: float
    data_range: float

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t_index,mse,psnr,ssim\n")
        for t, (m, p, s) in enumerate(zip(self.mse_t, self.psnr_t, self.ssim_t)):
            buf.write(f"{t},{m:.17g},{p:.17g},{s:.17g}\n")
        buf.write(f"all,{self.mse:.17g},{self.psnr:.17g},{self.ssim:.17g}\n")
        return buf.getvalue()


def psnr(mse: float, data_range: float) -> float:
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(data_range ** 2 / mse))


def ssim_global(a, b, data_range: float) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    c1, c2 = (K1 * data_range) ** 2, (K2 * data_range) ** 2
    ma, mb = a.mean(), b.mean()
    va, vb = np.mean((a - ma) ** 2), np.mean((b - mb) ** 2)
    cov = np.mean((a - ma) * (b - mb))
    num = (2 * ma * mb + c1) * (2 * cov + c2)
    den = (ma * ma + mb * mb + c1) * (va + vb + c2)
    if den == 0:
        return 1.0
    return float(num / den)


def _cube(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=np.float64)


def compute_metrics(truth, pred, data_range: float | None = None) -> MetricReport:
    """Per-frame and whole-cube metrics; accepts GridFields or (t, h, w) arrays."""
    a, b = _cube(truth), _cube(pred)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: truth {a.shape} vs prediction {b.shape}")
    if data_range is None:
        data_range = float(a.max() - a.min())
    # degenerate constant truth: fall back to unit range so SSIM constants stay positive
    if data_range <= 0:
        data_range = 1.0
    sq = (a - b) ** 2
    mse_t = sq.reshape(a.shape[0], -1).mean(axis=1)
    psnr_t = np.array([psnr(m, data_range) for m in mse_t])
    ssim_t = np.array([ssim_global(a[t], b[t], data_range) for t in range(a.shape[0])])
    mse = float(sq.mean())
    return MetricReport(mse_t, psnr_t, ssim_t, mse, psnr(mse, data_range),
                        float(ssim_t.mean()), data_range)


class Promotion(NamedTuple):
    best: str
    second: str
    promotion_pct: float


def promotion(errors: Mapping[str, float] | Sequence[tuple[str, float]]) -> Promotion:
    """Relative error reduction of the best model against the runner-up, in percent."""
    items = list(errors.items()) if isinstance(errors, Mapping) else list(errors)
    if len(items) < 2:
        raise ValueError("promotion needs at least two models")
    ranked = sorted(items, key=lambda kv: kv[1])
    (best, e1), (second, e2) = ranked[0], ranked[1]
    pct = 0.0 if e2 == e1 else (e2 - e1) / e2 * 100.0
    return Promotion(best, second, pct)
