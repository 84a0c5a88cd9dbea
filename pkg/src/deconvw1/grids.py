"""Uniform-grid tabulations of densities, CDFs and spectra, with FFT helpers.

The Fourier convention everywhere is the analytic one,

    fhat(t) = integral exp(+i t x) f(x) dx,
    f(x)    = (2 pi)^{-1} integral exp(-i t x) fhat(t) dt,

with the grid step multiplied in, so transformed values approximate the
continuous integrals rather than raw DFT sums.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GridMismatch

#: recognised kind tags
KINDS = ("density", "cdf", "spectrum", "signed")


@dataclass
class GridFunction1D:
    """Values of a function tabulated on a uniform one-dimensional grid.

    Parameters
    ----------
    origin : float
        Coordinate of the first grid point.
    step : float
        Grid spacing, strictly positive.
    values : ndarray
        Real or complex values, one per grid point.
    kind : str
        One of ``density``, ``cdf``, ``spectrum``, ``signed``.
    """

    origin: float
    step: float
    values: np.ndarray
    kind: str = "signed"

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.step <= 0:
            raise ValueError("grid step must be positive")
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind tag {self.kind!r}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def x(self) -> np.ndarray:
        """Grid coordinates."""
        return self.origin + self.step * np.arange(len(self.values))

    def same_grid(self, other: "GridFunction1D", tol: float = 1e-9) -> bool:
        return (
            len(self) == len(other)
            and abs(self.origin - other.origin) <= tol
            and abs(self.step - other.step) <= tol
        )

    def require_same_grid(self, other: "GridFunction1D") -> None:
        if not self.same_grid(other):
            raise GridMismatch(
                f"grids differ: ({self.origin}, {self.step}, {len(self)}) "
                f"vs ({other.origin}, {other.step}, {len(other)})"
            )

    def integral(self) -> float:
        """Trapezoidal integral over the grid."""
        return float(np.trapezoid(np.real(self.values), dx=self.step))

    def with_values(self, values: np.ndarray, kind: str | None = None) -> "GridFunction1D":
        return replace(self, values=np.asarray(values), kind=kind or self.kind)

    def interp(self, x: np.ndarray) -> np.ndarray:
        """Linear interpolation, constant extrapolation at the edges."""
        return np.interp(x, self.x, np.real(self.values))

    # -- persistence -------------------------------------------------------

    def write_csv(self, path) -> None:
        """Write as ``x,value`` (real) or ``t,re,im`` (spectrum)."""
        xs = self.x
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if np.iscomplexobj(self.values):
                w.writerow(["t", "re", "im"])
                for t, v in zip(xs, self.values):
                    w.writerow([repr(float(t)), repr(float(v.real)), repr(float(v.imag))])
            else:
                w.writerow(["x", "value"])
                for x, v in zip(xs, self.values):
                    w.writerow([repr(float(x)), repr(float(v))])

    @classmethod
    def read_csv(cls, path, kind: str | None = None) -> "GridFunction1D":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        xs = np.array([float(r[0]) for r in body])
        if len(xs) < 2:
            raise ValueError("need at least two grid points")
        steps = np.diff(xs)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12):
            raise ValueError("grid must be uniform")
        if header[:3] == ["t", "re", "im"]:
            vals = np.array([complex(float(r[1]), float(r[2])) for r in body])
            return cls(float(xs[0]), float(steps[0]), vals, kind or "spectrum")
        vals = np.array([float(r[1]) for r in body])
        return cls(float(xs[0]), float(steps[0]), vals, kind or "signed")


@dataclass(frozen=True)
class GridSpec:
    """Origin/step/length triple describing a uniform grid."""

    origin: float = -20.0
    step: float = 40.0 / 4096
    length: int = 4096

    def x(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.length)

    def template(self, kind: str = "signed") -> GridFunction1D:
        return GridFunction1D(self.origin, self.step, np.zeros(self.length), kind)

    @property
    def nyquist(self) -> float:
        """Largest resolvable angular frequency, pi / step."""
        return np.pi / self.step


def dual_grid(f: GridFunction1D) -> tuple[float, float]:
    """Origin and step of the frequency grid paired with ``f``'s grid."""
    n = len(f)
    dt = 2 * np.pi / (n * f.step)
    return -dt * (n // 2), dt


def grid_fft(f: GridFunction1D) -> GridFunction1D:
    """Forward transform of a spatial grid function onto its dual grid.

    Returns the spectrum sampled at ``t_j = (j - n/2) * 2 pi / (n step)``.
    """
    n = len(f)
    t0, dt = dual_grid(f)
    t = t0 + dt * np.arange(n)
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    core = np.fft.ifft(np.asarray(f.values, dtype=complex) * signs) * n
    spec = f.step * np.exp(1j * t * f.origin) * core
    return GridFunction1D(t0, dt, spec, "spectrum")


def grid_ifft(spec: GridFunction1D, origin: float, step: float) -> GridFunction1D:
    """Exact algebraic inverse of :func:`grid_fft`.

    ``origin`` and ``step`` must describe the spatial grid the spectrum was
    (or would have been) computed from; the round trip is an identity up to
    floating-point rounding.
    """
    n = len(spec)
    t = spec.x
    core = np.asarray(spec.values, dtype=complex) / (step * np.exp(1j * t * origin))
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    vals = np.fft.fft(core) / n * signs
    return GridFunction1D(origin, step, vals, "signed")


def real_part(f: GridFunction1D, tol: float | None = None, kind: str = "signed") -> GridFunction1D:
    """Drop a numerically negligible imaginary part.

    If ``tol`` is given, raises ``ValueError`` when max |imag| exceeds it.
    """
    vals = np.asarray(f.values)
    if np.iscomplexobj(vals):
        im = float(np.max(np.abs(vals.imag))) if len(vals) else 0.0
        if tol is not None and im > tol:
            raise ValueError(f"imaginary part {im:.3e} exceeds tolerance {tol:.3e}")
        vals = vals.real
    return f.with_values(np.ascontiguousarray(vals), kind)


def cumulative_cdf(density: GridFunction1D) -> GridFunction1D:
    """CDF by cumulative trapezoid, anchored at zero on the left edge."""
    vals = np.real(density.values)
    inc = 0.5 * (vals[1:] + vals[:-1]) * density.step
    cdf = np.concatenate([[0.0], np.cumsum(inc)])
    return density.with_values(cdf, "cdf")
