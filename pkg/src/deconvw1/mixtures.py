"""Gaussian mixtures on the line: exact densities, CDFs and transforms.

Used as analytic truths by the verifiers and the benchmark harness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .grids import GridFunction1D


@dataclass(frozen=True)
class GaussianMixture1D:
    weights: tuple[float, ...]
    means: tuple[float, ...]
    sds: tuple[float, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.weights) != len(self.means) or len(self.means) != len(self.sds):
            raise ValueError("weights, means and sds must have equal length")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to one")
        if any(s <= 0 for s in self.sds):
            raise ValueError("component sds must be positive")

    @classmethod
    def single(cls, mean: float = 0.0, sd: float = 1.0) -> "GaussianMixture1D":
        return cls((1.0,), (float(mean),), (float(sd),))

    def _arrays(self):
        return (np.asarray(self.weights), np.asarray(self.means), np.asarray(self.sds))

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        w, m, s = self._arrays()
        z = (x[..., None] - m) / s
        return (np.exp(-0.5 * z**2) / (s * np.sqrt(2 * np.pi))) @ w

    def cdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        w, m, s = self._arrays()
        return ndtr((x[..., None] - m) / s) @ w

    def cf(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        w, m, s = self._arrays()
        return np.exp(1j * t[..., None] * m - 0.5 * (t[..., None] * s) ** 2) @ w

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        w, m, s = self._arrays()
        comp = rng.choice(len(w), size=n, p=w)
        return m[comp] + s[comp] * rng.normal(size=n)

    def pdf_grid(self, grid: GridFunction1D) -> GridFunction1D:
        return grid.with_values(self.pdf(grid.x), "density")

    def cdf_grid(self, grid: GridFunction1D) -> GridFunction1D:
        return grid.with_values(self.cdf(grid.x), "cdf")

    @property
    def min_sd(self) -> float:
        return float(min(self.sds))
