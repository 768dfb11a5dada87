from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class GridField:
    """Scalar field sampled on a (time, height, width) lattice.

    ``coord_range`` is ``(x_min, x_max, y_min, y_max)``; x runs along the
    width axis and y along the height axis.
    """

    values: np.ndarray
    coord_range: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)
    time_stamps: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ValueError(f"field values must be (t, h, w); got shape {self.values.shape}")
        self.coord_range = tuple(float(c) for c in self.coord_range)
        if len(self.coord_range) != 4:
            raise ValueError("coord_range needs four entries")
        if self.time_stamps is None:
            self.time_stamps = np.arange(self.n_t, dtype=np.float64)
        self.time_stamps = np.asarray(self.time_stamps, dtype=np.float64)
        if self.time_stamps.shape != (self.n_t,):
            raise ValueError(f"expected {self.n_t} time stamps, got {self.time_stamps.shape}")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def n_t(self) -> int:
        return self.values.shape[0]

    @property
    def n_h(self) -> int:
        return self.values.shape[1]

    @property
    def n_w(self) -> int:
        return self.values.shape[2]

    @property
    def n_sites(self) -> int:
        return self.n_h * self.n_w

    def std(self) -> float:
        return float(np.std(self.values))

    def check(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")
        x0, x1, y0, y1 = self.coord_range
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"degenerate coordinate range {self.coord_range}")


def _axis(n: int) -> np.ndarray:
    if n == 1:
        return np.zeros(1)
    out = np.linspace(-1.0, 1.0, n)
    out[0], out[-1] = -1.0, 1.0
    return out


def normalized_lattice(n_h: int, n_w: int) -> np.ndarray:
    """(n_h, n_w, 2) array of ``[x, y]`` in [-1, 1], corners exact."""
    ys, xs = _axis(n_h), _axis(n_w)
    grid = np.empty((n_h, n_w, 2))
    grid[..., 0] = xs[None, :]
    grid[..., 1] = ys[:, None]
    return grid


def normalize_coords(field: GridField) -> np.ndarray:
    x0, x1, y0, y1 = field.coord_range
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate coordinate range {field.coord_range}")
    return normalized_lattice(field.n_h, field.n_w)


def denormalize_coords(coords, coord_range) -> np.ndarray:
    """Map normalized ``[x, y]`` back to physical coordinates."""
    x0, x1, y0, y1 = coord_range
    c = np.asarray(coords, dtype=np.float64)
    out = np.empty_like(c)
    out[..., 0] = x0 + (c[..., 0] + 1.0) * 0.5 * (x1 - x0)
    out[..., 1] = y0 + (c[..., 1] + 1.0) * 0.5 * (y1 - y0)
    return out


def physical_lattice(field: GridField) -> np.ndarray:
    x0, x1, y0, y1 = field.coord_range
    grid = np.empty((field.n_h, field.n_w, 2))
    grid[..., 0] = np.linspace(x0, x1, field.n_w)[None, :]
    grid[..., 1] = np.linspace(y0, y1, field.n_h)[:, None]
    return grid


@dataclass
class ObservationSet:
    """Sparse samples of one time instance.

    ``sites`` holds flat lattice indices when the samples came from a grid,
    and is ``None`` for free-form observations (e.g. read from CSV).
    """

    time_index: int
    coords: np.ndarray  # (n, 2) normalized
    values: np.ndarray  # (n,)
    sites: np.ndarray | None = None
    time: float | None = None

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(-1, 2)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.coords.shape[0] != self.values.shape[0]:
            raise ValueError("coords and values disagree on the number of points")
        if self.time is None:
            self.time = float(self.time_index)
        if self.sites is not None:
            self.sites = np.asarray(self.sites, dtype=np.int64)

    def __len__(self):
        return self.values.shape[0]

    def validate(self):
        if np.any(np.abs(self.coords) > 1.0):
            raise ValueError(f"t={self.time_index}: coordinates outside [-1, 1]^2")
        if self.sites is not None and np.unique(self.sites).size != self.sites.size:
            raise ValueError(f"t={self.time_index}: duplicate lattice sites")

    def with_values(self, values) -> "ObservationSet":
        return ObservationSet(self.time_index, self.coords.copy(), values,
                              None if self.sites is None else self.sites.copy(), self.time)
