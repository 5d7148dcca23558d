"""Demographic rates, resource functionals and competition kernels.

Plants and pollinators follow the Holling-type family::

    b_P(R) = alpha_P R / (beta_P + gamma_P R)     d_P(R) = d_P + delta_P R
    b_A(R) = alpha_A R / (beta_A + gamma_A R)     d_A(R) = d_A

with growth rates ``g = b - d``.  Closed forms for the zeros and the maximum of
``g_P`` are provided because the equilibrium analyses downstream rely on them.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, DomainError, NoViableWindow
from .network import bilinear

__all__ = [
    "RateParams",
    "Kernel",
    "gp_zeros",
    "gp_max",
    "viability_check",
    "resources_plants",
    "resources_pollinators",
    "competition",
    "kernel_from_dict",
]

_FIELDS = ("alphaP", "betaP", "gammaP", "dP", "deltaP", "alphaA", "betaA", "gammaA", "dA")
RATE_FIELDS = _FIELDS


def _nonneg(R):
    R = np.asarray(R, dtype=float)
    if np.any(R < 0):
        raise DomainError("resources must be nonnegative")
    return R


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


@dataclass(frozen=True)
class RateParams:
    alphaP: float
    betaP: float
    gammaP: float
    dP: float
    deltaP: float
    alphaA: float
    betaA: float
    gammaA: float
    dA: float

    def __post_init__(self):
        for name in _FIELDS:
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"rate parameter {name} must be a positive real, got {v!r}")

    @classmethod
    def from_dict(cls, d):
        missing = [f for f in _FIELDS if f not in d]
        if missing:
            raise ConfigError(f"missing rate parameter(s): {', '.join(missing)}")
        return cls(**{f: float(d[f]) for f in _FIELDS})

    def to_dict(self):
        return asdict(self)

    def replace(self, **kw):
        d = self.to_dict()
        d.update(kw)
        return RateParams(**d)

    # plants
    def birth_p(self, R):
        R = _nonneg(R)
        return _out(self.alphaP * R / (self.betaP + self.gammaP * R))

    def death_p(self, R):
        R = _nonneg(R)
        return _out(self.dP + self.deltaP * R)

    def g_p(self, R):
        R = _nonneg(R)
        return _out(self.alphaP * R / (self.betaP + self.gammaP * R) - self.dP - self.deltaP * R)

    def dg_p(self, R):
        R = _nonneg(R)
        return _out(self.alphaP * self.betaP / (self.betaP + self.gammaP * R) ** 2 - self.deltaP)

    # pollinators
    def birth_a(self, R):
        R = _nonneg(R)
        return _out(self.alphaA * R / (self.betaA + self.gammaA * R))

    def death_a(self, R):
        R = _nonneg(R)
        return _out(np.full(R.shape, self.dA))

    def g_a(self, R):
        R = _nonneg(R)
        return _out(self.alphaA * R / (self.betaA + self.gammaA * R) - self.dA)

    def dg_a(self, R):
        R = _nonneg(R)
        return _out(self.alphaA * self.betaA / (self.betaA + self.gammaA * R) ** 2)

    @property
    def max_birth_p(self):
        return self.alphaP / self.gammaP

    @property
    def max_birth_a(self):
        return self.alphaA / self.gammaA


def _bisect(f, lo, hi, tol=1e-12):
    flo = f(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def gp_zeros(params: RateParams):
    """The two positive zeros of ``g_P``; ``g_P > 0`` exactly between them."""
    a = params.deltaP * params.gammaP
    b = params.dP * params.gammaP + params.deltaP * params.betaP - params.alphaP
    c = params.dP * params.betaP
    disc = b * b - 4 * a * c
    if disc <= 0 or b >= 0:
        raise NoViableWindow("g_P is never positive")
    sq = math.sqrt(disc)
    q = -0.5 * (b - sq)  # b < 0, so this sum has no cancellation
    lo, hi = c / q, q / a
    if disc < 1e-8 * b * b:
        # near-double root: the closed form loses digits, polish on each side of the vertex
        vertex = -b / (2 * a)
        poly = lambda r: (a * r + b) * r + c  # noqa: E731
        span = max(hi - lo, 1e-6)
        lo = _bisect(poly, max(vertex - 2 * span, 0.0), vertex)
        hi = _bisect(poly, vertex, vertex + 2 * span)
    return lo, hi


def gp_max(params: RateParams):
    """Location and value of the maximum of ``g_P`` over ``R >= 0``."""
    rstar = (math.sqrt(params.alphaP * params.betaP / params.deltaP) - params.betaP) / params.gammaP
    if rstar <= 0:
        raise NoViableWindow("g_P is decreasing on [0, inf); its maximum g_P(0) < 0")
    return rstar, params.g_p(rstar)


def viability_check(params: RateParams):
    try:
        gp_zeros(params)
        plant = True
    except NoViableWindow:
        plant = False
    return {"plantViable": plant, "pollViable": params.alphaA / params.gammaA > params.dA}


# --------------------------------------------------------------------------
# resources


def resources_plants(community, poll_abund, scale=1.0):
    """Resource received by each plant, ``sum_j G_ij C_ij A_j / scale``."""
    A = np.asarray(poll_abund, dtype=float)
    if A.shape != (community.m,):
        raise ValueError(f"expected {community.m} pollinator abundances, got shape {A.shape}")
    if np.any(A < 0):
        raise DomainError("abundances must be nonnegative")
    return community.weights @ A / scale


def resources_pollinators(community, plant_abund, scale=1.0):
    """Resource received by each pollinator, ``sum_i G_ij C_ij P_i / scale``."""
    P = np.asarray(plant_abund, dtype=float)
    if P.shape != (community.n,):
        raise ValueError(f"expected {community.n} plant abundances, got shape {P.shape}")
    if np.any(P < 0):
        raise DomainError("abundances must be nonnegative")
    return community.weights.T @ P / scale


# --------------------------------------------------------------------------
# competition kernels


class Kernel:
    """Competition kernel ``k(u, v)`` on [0,1]^2: pressure exerted by trait ``v`` on ``u``."""

    def __init__(self, value=0.0, grid=None):
        if grid is None:
            if value < 0:
                raise ConfigError("competition constant must be nonnegative")
            self.value = float(value)
            self.grid = None
            self._f = None
        else:
            g = np.asarray(grid, float)
            if np.any(g < 0):
                raise ConfigError("tabulated competition kernel must be nonnegative")
            self.value = None
            self.grid = g
            self._f = bilinear(g)

    @property
    def is_constant(self):
        return self.grid is None

    def __call__(self, u, v):
        if self.is_constant:
            u, v = np.broadcast_arrays(u, v)
            return np.full(u.shape, self.value)
        return self._f(u, v)

    def matrix(self, traits):
        t = np.asarray(traits, float)
        return self(t[:, None], t[None, :])

    def to_dict(self):
        if self.is_constant:
            return {"kind": "constant", "value": self.value}
        return {"kind": "tabulated", "grid": self.grid.tolist()}

    def __repr__(self):
        return f"Kernel({self.to_dict()})"


def kernel_from_dict(d):
    if isinstance(d, (int, float)):
        return Kernel(float(d))
    kind = d.get("kind", "constant")
    if kind == "constant":
        return Kernel(float(d["value"]))
    if kind == "tabulated":
        return Kernel(grid=d["grid"])
    raise ConfigError(f"unknown kernel kind {kind!r}")


def competition(kernel: Kernel, traits, abund):
    """``(1/n) sum_l k(t_i, t_l) abund_l`` for each species ``i``."""
    abund = np.asarray(abund, dtype=float)
    traits = np.asarray(traits, dtype=float)
    if abund.shape != traits.shape:
        raise ValueError("traits and abundances must have the same length")
    if kernel.is_constant:
        return np.full(traits.shape, kernel.value * abund.mean())
    return kernel.matrix(traits) @ abund / traits.size
