from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class FamilyResult:
    """Named values produced by one feature family, plus degeneracy flags."""

    names: list
    values: np.ndarray
    flags: set = field(default_factory=set)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if len(self.names) != self.values.size:
            raise ValueError("feature names and values differ in length")


def is_constant(arr) -> bool:
    arr = np.asarray(arr)
    return bool(arr.max() == arr.min())


def reflect_pad(arr, pad_y: int, pad_x: int):
    """Symmetric (half-sample) reflection, repeated for pads wider than the image."""
    return np.pad(arr, ((pad_y, pad_y), (pad_x, pad_x)), mode="symmetric")
