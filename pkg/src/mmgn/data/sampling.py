"""Sensor layouts for the four reconstruction tasks, plus observation noise.

Task 1  fixed count, fixed sites
Task 2  varying count drawn from a fixed base grid
Task 3  fixed count, fresh sites every step
Task 4  varying count, fresh sites every step

Varying counts use ``floor(s * k_t * N)`` with ``k_t ~ U[1, min(m_max, 1/s)]``,
so the per-step ratio stays within ``[s, min(m_max * s, 1)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fields import GridField, ObservationSet, normalize_coords


@dataclass
class SamplingSpec:
    task: int = 1
    ratio: float = 0.05
    seed: int = 0
    count_multiplier_max: float = 5.0

    def validate(self):
        if self.task not in (1, 2, 3, 4):
            raise ValueError(f"task must be 1, 2, 3 or 4; got {self.task}")
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError(f"sampling ratio must be in (0, 1]; got {self.ratio}")
        if self.count_multiplier_max < 1.0:
            raise ValueError("count_multiplier_max must be >= 1")


@dataclass
class NoiseSpec:
    ratio: float = 0.0
    seed: int = 0

    def validate(self):
        if not self.ratio >= 0:
            raise ValueError(f"noise ratio must be >= 0; got {self.ratio}")


def count_bounds(ratio: float, n_sites: int, m_max: float = 5.0) -> tuple[int, int]:
    """Smallest and largest per-step site counts the sampler can emit."""
    return math.floor(ratio * n_sites), math.floor(min(1.0, ratio * m_max) * n_sites)


def _varying_count(rng, ratio, n_sites, m_max, lo, hi) -> int:
    k = rng.uniform(1.0, min(m_max, 1.0 / ratio))
    return int(min(max(math.floor(ratio * k * n_sites), lo), hi))


def sample_task(field: GridField, spec: SamplingSpec) -> list[ObservationSet]:
    spec.validate()
    n_sites = field.n_sites
    lo, hi = count_bounds(spec.ratio, n_sites, spec.count_multiplier_max)
    if lo < 1:
        raise ValueError(
            f"ratio {spec.ratio} keeps floor({spec.ratio} * {n_sites}) = 0 sites; need >= 1 point")
    rng = np.random.default_rng(spec.seed)
    lattice = normalize_coords(field).reshape(-1, 2)

    fixed = base = None
    if spec.task == 1:
        fixed = np.sort(rng.choice(n_sites, lo, replace=False))
    elif spec.task == 2:
        base = rng.choice(n_sites, hi, replace=False)

    out = []
    for t in range(field.n_t):
        if spec.task == 1:
            sites = fixed
        elif spec.task == 2:
            n = _varying_count(rng, spec.ratio, n_sites, spec.count_multiplier_max, lo, hi)
            sites = np.sort(rng.choice(base, n, replace=False))
        elif spec.task == 3:
            sites = np.sort(rng.choice(n_sites, lo, replace=False))
        else:
            n = _varying_count(rng, spec.ratio, n_sites, spec.count_multiplier_max, lo, hi)
            sites = np.sort(rng.choice(n_sites, n, replace=False))
        frame = field.values[t].reshape(-1)
        out.append(ObservationSet(t, lattice[sites], frame[sites], sites.copy(),
                                  float(field.time_stamps[t])))
    return out


def add_noise(observations: list[ObservationSet], field_std: float,
              spec: NoiseSpec) -> list[ObservationSet]:
    """Add i.i.d. Gaussian noise with std ``spec.ratio * field_std``.

    The standard-normal draws depend only on the seed, so different ratios
    scale the same noise pattern.
    """
    spec.validate()
    if not field_std > 0:
        raise ValueError(f"field_std must be positive; got {field_std}")
    if spec.ratio == 0:
        return [obs.with_values(obs.values.copy()) for obs in observations]
    rng = np.random.default_rng(spec.seed)
    sd = spec.ratio * field_std
    return [obs.with_values(obs.values + sd * rng.standard_normal(len(obs)))
            for obs in observations]
