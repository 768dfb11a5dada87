"""Desk-scale synthetic fields standing in for climate reanalysis cubes.

Both generators return cubes normalized to zero mean and unit variance.
"""

from __future__ import annotations

import numpy as np

from .fields import GridField, normalized_lattice

KINDS = ("traveling-blobs", "spectral-grf")


def _unit_normalize(v: np.ndarray) -> np.ndarray:
    v = v - v.mean()
    v = v / v.std()
    return v - v.mean()


def traveling_blobs(n_t: int, n_h: int, n_w: int, seed: int = 0, *, n_blobs: int = 6,
                    drift: float = 1.0) -> np.ndarray:
    """Gaussian bumps with drifting centers on top of a slowly travelling plane wave.

    ``drift = 0`` freezes both motions, making every frame identical.
    """
    rng = np.random.default_rng(seed)
    grid = normalized_lattice(n_h, n_w)
    tau = np.linspace(0.0, 1.0, n_t) if n_t > 1 else np.zeros(1)

    centers = rng.uniform(-0.7, 0.7, size=(n_blobs, 2))
    angle = rng.uniform(0.0, 2.0 * np.pi, size=n_blobs)
    speed = rng.uniform(1.0, 2.0, size=n_blobs)
    velocity = speed[:, None] * np.column_stack([np.cos(angle), np.sin(angle)])
    width = rng.uniform(0.25, 0.5, size=n_blobs)
    amp = rng.uniform(0.6, 1.5, size=n_blobs) * rng.choice([-1.0, 1.0], size=n_blobs)

    k_dir = rng.uniform(0.0, 2.0 * np.pi)
    k_mag = rng.uniform(2.0, 3.5)
    wavevec = k_mag * np.array([np.cos(k_dir), np.sin(k_dir)])
    omega = rng.uniform(2.0, 4.0) * np.pi
    phase = rng.uniform(0.0, 2.0 * np.pi)

    out = np.empty((n_t, n_h, n_w))
    for ti, t in enumerate(tau):
        c = centers + drift * velocity * t
        d2 = np.sum((grid[None] - c[:, None, None, :]) ** 2, axis=-1)
        bumps = np.sum(amp[:, None, None] * np.exp(-0.5 * d2 / width[:, None, None] ** 2), axis=0)
        wave = 0.5 * np.sin(grid @ wavevec - drift * omega * t + phase)
        out[ti] = bumps + wave
    return out


def spectral_grf(n_t: int, n_h: int, n_w: int, seed: int = 0, *, slope: float = 3.0,
                 correlation: float = 0.95) -> np.ndarray:
    """Power-law Gaussian random field per frame with AR(1)-correlated Fourier phases."""
    rng = np.random.default_rng(seed)
    ky = np.fft.fftfreq(n_h)[:, None]
    kx = np.fft.fftfreq(n_w)[None, :]
    k = np.sqrt(kx ** 2 + ky ** 2)
    amp = np.zeros_like(k)
    amp[k > 0] = k[k > 0] ** (-slope / 2.0)

    def noise():
        return rng.standard_normal((n_h, n_w)) + 1j * rng.standard_normal((n_h, n_w))

    xi = noise()
    innovation = np.sqrt(1.0 - correlation ** 2)
    out = np.empty((n_t, n_h, n_w))
    for ti in range(n_t):
        if ti:
            xi = correlation * xi + innovation * noise()
        out[ti] = np.real(np.fft.ifft2(amp * xi))
    return out


def generate_synthetic(kind: str, dims, seed: int = 0,
                       coord_range=(0.0, 1.0, 0.0, 1.0), **options) -> GridField:
    n_t, n_h, n_w = (int(d) for d in dims)
    if min(n_t, n_h, n_w) < 1:
        raise ValueError(f"dims must be positive, got {dims}")
    if kind == "traveling-blobs":
        raw = traveling_blobs(n_t, n_h, n_w, seed, **options)
    elif kind == "spectral-grf":
        raw = spectral_grf(n_t, n_h, n_w, seed, **options)
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}; expected one of {KINDS}")
    values = _unit_normalize(raw) if raw.std() > 0 else raw - raw.mean()
    return GridField(values, coord_range, np.arange(n_t, dtype=np.float64))
