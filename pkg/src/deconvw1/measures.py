"""Weighted empirical measures on R^d: the common currency for samples,
discrete estimates and transport oracles."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NotUnitVector


@dataclass
class EmpiricalMeasure:
    """Finitely supported probability measure given by atoms and weights.

    ``atoms`` is an ``n x d`` matrix; ``weights`` a length-``n`` vector of
    nonnegative reals summing to one.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if a.shape[0] != w.shape[0]:
            raise ValueError("atoms and weights must have matching length")
        if a.shape[0] < 1:
            raise ValueError("need at least one atom")
        if not np.all(np.isfinite(a)):
            raise ValueError("atoms must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        self.atoms = a
        self.weights = w

    @property
    def n(self) -> int:
        return self.atoms.shape[0]

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    @classmethod
    def from_samples(cls, samples) -> "EmpiricalMeasure":
        """Uniform weights on the given sample points."""
        a = np.asarray(samples, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        n = a.shape[0]
        return cls(a, np.full(n, 1.0 / n))

    @classmethod
    def dirac(cls, point) -> "EmpiricalMeasure":
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), np.array([1.0]))

    def mean(self) -> np.ndarray:
        return self.weights @ self.atoms

    def translate(self, c) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.atoms + np.asarray(c, dtype=float), self.weights.copy())

    # -- CSV wire format: one row per atom, columns x1..xd,weight -----------

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{j + 1}" for j in range(self.d)] + ["weight"])
            for row, wt in zip(self.atoms, self.weights):
                w.writerow([repr(float(v)) for v in row] + [repr(float(wt))])

    @classmethod
    def read_csv(cls, path) -> "EmpiricalMeasure":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        body = rows[1:]
        data = np.array([[float(v) for v in r] for r in body])
        return cls(data[:, :-1], data[:, -1])


def project_measure(P: EmpiricalMeasure, v) -> EmpiricalMeasure:
    """Image of ``P`` under the linear form ``x -> v . x`` for unit ``v``."""
    v = np.asarray(v, dtype=float).ravel()
    if v.shape[0] != P.d:
        raise DimensionError(f"direction has dimension {v.shape[0]}, measure {P.d}")
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise NotUnitVector(f"|v| = {np.linalg.norm(v)!r}")
    return EmpiricalMeasure(P.atoms @ v, P.weights.copy())
