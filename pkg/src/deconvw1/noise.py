"""Known error distributions: densities, characteristic functions and their
reciprocals, sampling, and empirical checks of polynomial CF decay.

Supported kinds and their CFs at unit scale:

* ``laplace``     : 1 / (1 + t^2)          (decay exponent beta = 2)
* ``exponential`` : 1 / (1 - i t)          (beta = 1)
* ``gamma``       : (1 - i t)^(-shape)     (beta = shape)
* ``linnik``      : 1 / (1 + |t|^shape)    (beta = shape, 0 < shape <= 2)

A scale parameter s is folded into the CF as ``cf(s * t)``; the error law is
always fully known.  Linnik supports CF/reciprocal evaluation only: its
density has no elementary form and no sampler is provided.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, UnsupportedModel

_KINDS = ("laplace", "gamma", "exponential", "linnik")


@dataclass(frozen=True)
class NoiseModel:
    """A known ordinary-smooth error law for one coordinate.

    Parameters
    ----------
    kind : str
        One of ``laplace``, ``gamma``, ``exponential``, ``linnik``.
    scale : float
        Positive scale; the CF is evaluated at ``scale * t``.
    shape : float or None
        Decay index for ``gamma``/``linnik``; unused otherwise.
    """

    kind: str
    scale: float = 1.0
    shape: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.kind in ("gamma", "linnik"):
            if self.shape is None or self.shape <= 0:
                raise ValueError(f"{self.kind} requires a positive shape")
            if self.kind == "linnik" and self.shape > 2:
                raise ValueError("linnik index must lie in (0, 2]")

    @property
    def beta(self) -> float:
        """Polynomial decay exponent of |cf|."""
        if self.kind == "laplace":
            return 2.0
        if self.kind == "exponential":
            return 1.0
        return float(self.shape)

    # -- JSON wire format ---------------------------------------------------

    def to_json(self) -> dict:
        return {"kind": self.kind, "scale": self.scale, "shape": self.shape}

    @classmethod
    def from_json(cls, obj: dict | str) -> "NoiseModel":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(kind=obj["kind"], scale=float(obj.get("scale", 1.0)),
                   shape=None if obj.get("shape") is None else float(obj["shape"]))


def cf(model: NoiseModel, t) -> np.ndarray | complex:
    """Characteristic function, vectorized over ``t``."""
    u = np.asarray(t, dtype=float) * model.scale
    if model.kind == "laplace":
        out = 1.0 / (1.0 + u * u) + 0j
    elif model.kind in ("gamma", "exponential"):
        b = 1.0 if model.kind == "exponential" else model.shape
        out = (1.0 - 1j * u) ** (-b)
    else:  # linnik
        out = 1.0 / (1.0 + np.abs(u) ** model.shape) + 0j
    return out if np.ndim(t) else complex(out)


def reciprocal_cf(model: NoiseModel, t, order: int = 0) -> np.ndarray | complex:
    """Reciprocal CF ``1 / cf`` (order 0) or its first t-derivative (order 1).

    Closed forms per kind; for Linnik with ``order=1`` the derivative of
    ``1 + |t|^shape`` is used away from the origin and is undefined at
    ``t = 0`` when ``shape < 1``.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    s = model.scale
    u = np.asarray(t, dtype=float) * s
    if model.kind == "laplace":
        out = (1.0 + u * u if order == 0 else 2.0 * s * u) + 0j
    elif model.kind in ("gamma", "exponential"):
        b = 1.0 if model.kind == "exponential" else model.shape
        if order == 0:
            out = (1.0 - 1j * u) ** b
        else:
            out = -1j * s * b * (1.0 - 1j * u) ** (b - 1.0)
    else:  # linnik
        b = model.shape
        if order == 0:
            out = 1.0 + np.abs(u) ** b + 0j
        else:
            if b < 1 and np.any(np.asarray(t) == 0):
                raise DomainError("linnik reciprocal CF derivative undefined at t=0 for index < 1")
            with np.errstate(invalid="ignore"):
                out = s * b * np.sign(u) * np.abs(u) ** (b - 1.0) + 0j
            out = np.where(np.asarray(t) == 0, 0.0, out)
    return out if np.ndim(t) else complex(out)


def density(model: NoiseModel, u) -> np.ndarray | float:
    """Error density; not available for Linnik."""
    if model.kind == "linnik":
        raise UnsupportedModel("linnik density evaluation is not supported")
    x = np.asarray(u, dtype=float)
    s = model.scale
    if model.kind == "laplace":
        out = np.exp(-np.abs(x) / s) / (2.0 * s)
    elif model.kind == "exponential":
        out = np.where(x > 0, np.exp(-np.clip(x, 0, None) / s) / s, 0.0)
    else:  # gamma
        b = model.shape
        with np.errstate(divide="ignore", invalid="ignore"):
            logpdf = (b - 1.0) * np.log(np.where(x > 0, x, 1.0)) - x / s \
                - gammaln(b) - b * math.log(s)
        out = np.where(x > 0, np.exp(logpdf), 0.0)
    return out if np.ndim(u) else float(out)


def sample_noise(model: NoiseModel, n: int, d: int, seed) -> np.ndarray:
    """Draw an ``n x d`` matrix of i.i.d. error coordinates.

    ``seed`` may be an integer or a ``numpy.random.Generator``.  The Laplace
    is drawn as the difference of two unit exponentials.
    """
    if model.kind == "linnik":
        raise UnsupportedModel("linnik sampling is not supported")
    if n < 1 or d < 1:
        raise ValueError("n and d must be at least 1")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    if model.kind == "laplace":
        out = rng.exponential(size=(n, d)) - rng.exponential(size=(n, d))
    elif model.kind == "exponential":
        out = rng.exponential(size=(n, d))
    else:
        out = rng.gamma(model.shape, 1.0, size=(n, d))
    return model.scale * out


@dataclass(frozen=True)
class OrdinarySmoothReport:
    """Empirical polynomial-decay constants of a noise CF on a grid.

    ``cf_floor``: inf of |cf(t)| (1+|t|)^beta (lower-bound constant for the
    CF decay); ``d0_hat``/``d1_hat``: sup of |r^(l)(t)| / (1+|t|)^(beta-l)
    for l = 0, 1 (growth constants of the reciprocal CF and its derivative).
    """

    cf_floor: float
    d0_hat: float
    d1_hat: float
    ok: bool

    @property
    def passed(self) -> bool:
        return self.ok


def verify_ordinary_smooth(model: NoiseModel, t_grid) -> OrdinarySmoothReport:
    """Check polynomial CF decay empirically on ``t_grid``.

    Returns the report with ``ok=False`` on an empty grid rather than
    raising; all three constants must be finite and positive to pass.
    """
    t = np.asarray(t_grid, dtype=float).ravel()
    if t.size == 0:
        return OrdinarySmoothReport(math.nan, math.nan, math.nan, False)
    beta = model.beta
    w = (1.0 + np.abs(t)) ** beta
    cf_floor = float(np.min(np.abs(cf(model, t)) * w))
    d0_hat = float(np.max(np.abs(reciprocal_cf(model, t, 0)) / w))
    try:
        r1 = np.abs(reciprocal_cf(model, t, 1))
    except DomainError:
        t = t[t != 0]
        r1 = np.abs(reciprocal_cf(model, t, 1))
    d1_hat = float(np.max(r1 / (1.0 + np.abs(t)) ** (beta - 1.0)))
    vals = (cf_floor, d0_hat, d1_hat)
    ok = all(np.isfinite(v) and v > 0 for v in vals)
    return OrdinarySmoothReport(cf_floor, d0_hat, d1_hat, ok)
