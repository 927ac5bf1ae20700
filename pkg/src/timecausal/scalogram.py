"""Time x scale response matrices with their analysis metadata."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class Scalogram:
    """A ``T x K`` matrix of responses, one column per scale level.

    ``scales`` holds the variances ``tau_k`` in user time units squared.
    ``history`` optionally carries the two channel rows preceding the first
    row (oldest first); temporal differences use it instead of discarding
    the first rows.  Rows before ``valid_from`` are warm-up rows and hold NaN.
    """

    data: np.ndarray
    scales: np.ndarray
    c: float
    tau0: float
    dt: float = 1.0
    order: int = 0
    gamma: float = 1.0
    normalization: str = "none"
    t0: float = 0.0
    valid_from: int = 0
    delays: Optional[np.ndarray] = None
    history: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        scales = np.asarray(self.scales, dtype=float)
        if data.ndim != 2:
            data = data.reshape(-1, scales.size) if scales.size else data.reshape(0, 0)
        if data.shape[1] != scales.size:
            raise ValueError(f"data has {data.shape[1]} columns but {scales.size} scales")
        if np.any(np.diff(scales) <= 0):
            raise ValueError("scales must be strictly increasing")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "scales", scales)
        if self.delays is not None:
            object.__setattr__(self, "delays", np.asarray(self.delays, dtype=float))
        if self.history is not None:
            hist = np.asarray(self.history, dtype=float).reshape(-1, scales.size)
            object.__setattr__(self, "history", hist)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(self.scales)

    @property
    def effective_scales(self) -> np.ndarray:
        """log2 of the standard deviation of each level."""
        return np.log2(self.sigmas)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.data.shape[0])

    def replace(self, **changes) -> "Scalogram":
        return dataclasses.replace(self, **changes)

    def select(self, columns) -> "Scalogram":
        """Sub-scalogram restricted to the given column indices or slice."""
        idx = np.arange(self.scales.size)[columns]
        return self.replace(
            data=self.data[:, idx],
            scales=self.scales[idx],
            delays=None if self.delays is None else self.delays[idx],
            history=None if self.history is None else self.history[:, idx],
        )
