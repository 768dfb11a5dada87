from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LatentTable:
    """One trainable code per training time instance."""

    codes: np.ndarray  # (n_t, d_z)
    time_stamps: np.ndarray  # (n_t,)

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.float64)
        self.time_stamps = np.asarray(self.time_stamps, dtype=np.float64)
        if self.codes.ndim != 2 or self.codes.shape[0] != self.time_stamps.shape[0]:
            raise ValueError(
                f"codes {self.codes.shape} do not match {self.time_stamps.shape[0]} time stamps")

    def __len__(self):
        return self.codes.shape[0]

    @property
    def d_z(self) -> int:
        return self.codes.shape[1]

    def row(self, index: int) -> np.ndarray:
        return self.codes[index]

    def copy(self) -> "LatentTable":
        return LatentTable(self.codes.copy(), self.time_stamps.copy())
