"""Sampled curves F_t(u) and E0(u), u = |P|^2."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class HeatCurve:
    t: float
    u: np.ndarray
    F: np.ndarray
    std_error: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.F = np.asarray(self.F, dtype=float)
        self.std_error = np.asarray(self.std_error, dtype=float)


@dataclass
class EnergyCurve:
    u: np.ndarray
    E0: np.ndarray
    fit_residual: np.ndarray
    std_error: np.ndarray = field(default=None)
    # std error of E0_{i-1} - 2 E0_i + E0_{i+1}; correlations included when known
    second_difference_error: np.ndarray = field(default=None)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.E0 = np.asarray(self.E0, dtype=float)
        self.fit_residual = np.asarray(self.fit_residual, dtype=float)
        if self.std_error is None:
            self.std_error = np.zeros_like(self.E0)
        self.std_error = np.asarray(self.std_error, dtype=float)
        if self.second_difference_error is not None:
            self.second_difference_error = np.asarray(self.second_difference_error, dtype=float)
