"""Flat-top kernels, smooth bumps, and spectral utilities.

All kernel spectra are even, take the value one on a flat central band and
vanish beyond a slightly larger band, with a fixed C-infinity taper in
between so every tabulated quantity is reproducible bit for bit:

* ``flat_top``     : 1 on [-1, 1], 0 outside [-2, 2]
* ``tau_flat_top`` : 1 on (-1, 1), 0 outside [-17/15, 17/15]
* ``higher_order`` : 1 on [-1/2, 1/2], 0 outside [-1, 1]; the flat plateau
  makes every moment of positive order vanish, so the kernel has order ell
  for any requested ell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridTooNarrow, SpectralDivergence
from .grids import GridFunction1D, dual_grid, grid_fft, grid_ifft, real_part

TAU_SUPPORT = 17.0 / 15.0

_SUPPORTS = {
    "flat_top": (1.0, 2.0),
    "tau_flat_top": (1.0, TAU_SUPPORT),
    "higher_order": (0.5, 1.0),
}


@dataclass(frozen=True)
class KernelSpec:
    """Choice of kernel family plus the nominal order for ``higher_order``."""

    kind: str = "flat_top"
    order: int = 2

    def __post_init__(self):
        if self.kind not in _SUPPORTS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "higher_order" and self.order < 1:
            raise ValueError("kernel order must be a positive integer")

    @property
    def flat_end(self) -> float:
        return _SUPPORTS[self.kind][0]

    @property
    def support_end(self) -> float:
        return _SUPPORTS[self.kind][1]


def _bump(u: np.ndarray) -> np.ndarray:
    """exp(-1/u) for u > 0, zero otherwise; flat to all orders at 0."""
    out = np.zeros_like(u, dtype=float)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def smoothstep(u) -> np.ndarray:
    """Canonical C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    a = _bump(u)
    b = _bump(1.0 - u)
    return a / (a + b + np.finfo(float).tiny)


def spectrum(spec: KernelSpec, t) -> np.ndarray | float:
    """Kernel Fourier transform: flat at one, tapered, then zero."""
    t = np.asarray(t, dtype=float)
    a, b = spec.flat_end, spec.support_end
    out = smoothstep((b - np.abs(t)) / (b - a))
    out = np.where(np.abs(t) <= a, 1.0, out)
    out = np.where(np.abs(t) >= b, 0.0, out)
    return out if out.ndim else float(out)


def spatial_kernel(spec: KernelSpec, grid: GridFunction1D) -> GridFunction1D:
    """Tabulate the kernel in space by inverse transform of its spectrum.

    ``grid`` supplies origin/step/length only.  Raises ``GridTooNarrow``
    when the kernel has not decayed below 1e-8 at the grid edges.
    """
    t0, dt = dual_grid(grid)
    if -t0 <= spec.support_end:
        raise GridTooNarrow(
            f"grid step {grid.step:g} resolves frequencies up to {-t0:g} only; "
            f"the kernel spectrum extends to {spec.support_end:g}")
    tvals = t0 + dt * np.arange(len(grid))
    spec_fn = GridFunction1D(t0, dt, spectrum(spec, tvals) + 0j, "spectrum")
    k = real_part(grid_ifft(spec_fn, grid.origin, grid.step), tol=1e-10)
    edge = max(abs(float(k.values[0])), abs(float(k.values[-1])))
    if edge > 1e-8:
        raise GridTooNarrow(f"kernel magnitude {edge:.2e} at grid edge exceeds 1e-8")
    return k.with_values(k.values, "signed")


def bump_chi(t) -> np.ndarray | float:
    """Continuously differentiable bump: 1 on [-1, 1], 0 outside [-2, 2],
    and e * exp(-1 / (1 - (|t| - 1)^2)) on the transition annulus."""
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    out = np.zeros_like(a)
    out[a <= 1.0] = 1.0
    mid = (a > 1.0) & (a < 2.0)
    out[mid] = np.e * np.exp(-1.0 / (1.0 - (a[mid] - 1.0) ** 2))
    return out if out.ndim else float(out)


def fractional_derivative(f: GridFunction1D, alpha: float,
                          divergence_tol: float = 1e-6) -> GridFunction1D:
    """Fractional derivative of real order via the spectral multiplier
    ``(-i t)^alpha`` with the principal branch.

    Requires the weighted spectrum ``|t|^alpha |fhat(t)|`` to have decayed
    at the edge of the frequency grid; otherwise the discrete integral does
    not approximate a convergent one and ``SpectralDivergence`` is raised.
    """
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if alpha == 0:
        return f.with_values(np.array(f.values, copy=True))
    fhat = grid_fft(f)
    t = fhat.x
    weighted = np.abs(t) ** alpha * np.abs(fhat.values)
    peak = float(np.max(weighted))
    edge = float(max(weighted[0], weighted[-1]))
    if peak > 0 and edge > divergence_tol * peak:
        raise SpectralDivergence(
            f"|t|^alpha-weighted spectrum at grid edge is {edge / peak:.2e} "
            f"of its peak (tolerance {divergence_tol:.1e})")
    mult = np.zeros_like(t, dtype=complex)
    nz = t != 0
    # principal branch of (-i t)^alpha = |t|^alpha exp(-i alpha pi/2 sign t)
    mult[nz] = np.abs(t[nz]) ** alpha * np.exp(-1j * alpha * np.pi / 2 * np.sign(t[nz]))
    deriv = grid_ifft(fhat.with_values(fhat.values * mult), f.origin, f.step)
    return real_part(deriv) if not np.iscomplexobj(f.values) else deriv
