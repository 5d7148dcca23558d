"""One plant species and one pollinator species that interact.

    dP/dt = (g_P(c A) - k P) P
    dA/dt = (g_A(c P) - h A) A

Positive equilibria are the zeros of
``f(x) = g_A((c/k) g_P(c x)) / h - x`` on the window where ``g_P(c x) > 0``;
``f`` increases then decreases there, so it has zero, one or two roots.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import ode
from .errors import DomainError, NoViableWindow, PollinetError
from .network import Community
from .rates import Kernel, RateParams, gp_zeros, viability_check

__all__ = [
    "PairParams",
    "Equilibrium",
    "EquilibriumReport",
    "f_aux",
    "window",
    "count_and_solve",
    "jacobian",
    "nullclines",
    "phase_portrait",
    "pair_rhs",
    "as_community",
]

TANGENCY_TOL = 1e-12
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class PairParams:
    rates: RateParams
    c: float = 1.0
    k: float = 1.0
    h: float = 1.0

    def __post_init__(self):
        for name in ("c", "k", "h"):
            v = getattr(self, name)
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v!r}")

    def to_dict(self):
        return {"rates": self.rates.to_dict(), "c": self.c, "k": self.k, "h": self.h}


@dataclass
class Equilibrium:
    P: float
    A: float
    stability: str  # "stable" | "unstable" | "nonHyperbolic"
    trace: float = float("nan")
    det: float = float("nan")


@dataclass
class EquilibriumReport:
    positive_count: int
    equilibria: list = field(default_factory=list)  # null equilibrium first
    fmax: float = float("nan")
    window: tuple = (float("nan"), float("nan"))

    def to_dict(self):
        return {
            "positiveCount": self.positive_count,
            "equilibria": [asdict(e) for e in self.equilibria],
            "fmax": self.fmax,
            "window": list(self.window),
        }


def window(pp: PairParams):
    """Open interval of pollinator abundances where ``g_P(c A) > 0``."""
    lo, hi = gp_zeros(pp.rates)
    return lo / pp.c, hi / pp.c


def f_aux(x, pp: PairParams):
    lo, hi = window(pp)
    x = np.asarray(x, dtype=float)
    if np.any(x <= lo) or np.any(x >= hi):
        raise DomainError(f"x outside the window ({lo}, {hi})")
    r = pp.rates
    gp = np.maximum(r.g_p(pp.c * x), 0.0)
    val = r.g_a(pp.c / pp.k * gp) / pp.h - x
    return float(val) if val.ndim == 0 else val


def _f_edge(x, pp):
    # f extended continuously to the closed window (g_P = 0 at the edges)
    r = pp.rates
    return r.g_a(pp.c / pp.k * max(r.g_p(pp.c * x), 0.0)) / pp.h - x


def _golden_max(f, a, b, tol=1e-13):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _bisect_root(f, a, b):
    fa = f(a)
    fb = f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if (fa > 0) == (fb > 0):
        raise PollinetError("bracketing failed: no sign change")
    for _ in range(300):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if fm == 0 or b - a < 1e-15 * max(1.0, abs(mid)):
            return mid
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
    return 0.5 * (a + b)


def jacobian(P, A, pp: PairParams):
    r = pp.rates
    return np.array([
        [r.g_p(pp.c * A) - 2 * pp.k * P, pp.c * P * r.dg_p(pp.c * A)],
        [pp.c * A * r.dg_a(pp.c * P), r.g_a(pp.c * P) - 2 * pp.h * A],
    ])


def _classify(P, A, pp):
    J = jacobian(P, A, pp)
    tr, det = float(np.trace(J)), float(np.linalg.det(J))
    stable = det > 0 and tr < 0
    return Equilibrium(P, A, "stable" if stable else "unstable", tr, det)


def count_and_solve(pp: PairParams):
    r = pp.rates
    null_stable = max(r.g_p(0.0), r.g_a(0.0)) < 0
    null = Equilibrium(0.0, 0.0, "stable" if null_stable else "unstable",
                       r.g_p(0.0) + r.g_a(0.0), r.g_p(0.0) * r.g_a(0.0))
    v = viability_check(r)
    if not (v["plantViable"] and v["pollViable"]):
        return EquilibriumReport(0, [null])
    lo, hi = window(pp)
    f = lambda x: _f_edge(x, pp)  # noqa: E731
    xmax, fmax = _golden_max(f, lo, hi)
    rep = EquilibriumReport(0, [null], fmax, (lo, hi))
    if abs(fmax) <= TANGENCY_TOL:
        P = r.g_p(pp.c * xmax) / pp.k
        eq = _classify(P, xmax, pp)
        eq.stability = "nonHyperbolic"
        rep.positive_count = 1
        rep.equilibria.append(eq)
        return rep
    if fmax < 0:
        return rep
    for a, b in ((lo, xmax), (xmax, hi)):
        A = _bisect_root(f, a, b)
        P = r.g_p(pp.c * A) / pp.k
        rep.equilibria.append(_classify(P, A, pp))
    # det J = -P A h k f'(A): f rises through the left root (saddle) and falls through the right one
    left, right = rep.equilibria[1], rep.equilibria[2]
    if not (left.det < 0 < right.det and right.trace < 0):
        raise PollinetError("Jacobian classification disagrees with the shape of f")
    rep.positive_count = 2
    return rep


def equilibrium_residual(eq: Equilibrium, pp: PairParams):
    """Residual of the two positive-equilibrium equations at ``eq``."""
    r = pp.rates
    e1 = abs(eq.P - r.g_p(pp.c * eq.A) / pp.k)
    e2 = abs(eq.A - r.g_a(pp.c / pp.k * r.g_p(pp.c * eq.A)) / pp.h)
    return max(e1, e2)


def nullclines(pp: PairParams, resolution=200, p_max=None):
    """Nonzero nullclines as ``(plant, pollinator)`` arrays of ``(P, A)`` points.

    The plant nullcline ``P = g_P(c A) / k`` is sampled over the closed
    window; the pollinator nullcline ``A = g_A(c P) / h`` starts where
    ``g_A(c P) = 0`` and runs to ``p_max``.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    r = pp.rates
    try:
        lo, hi = window(pp)
        A = np.linspace(lo, hi, resolution)
        plant = np.column_stack([np.maximum(r.g_p(pp.c * A), 0.0) / pp.k, A])
    except NoViableWindow:
        plant = np.empty((0, 2))
    if r.alphaA / r.gammaA > r.dA:
        p0 = r.dA * r.betaA / (pp.c * (r.alphaA - r.dA * r.gammaA))
        if p_max is None:
            p_max = max(2.0 * p0, 2.0 * (plant[:, 0].max() if plant.size else 1.0))
        P = np.linspace(p0, max(p_max, p0), resolution)
        poll = np.column_stack([P, np.maximum(r.g_a(pp.c * P), 0.0) / pp.h])
    else:
        poll = np.empty((0, 2))
    return plant, poll


def pair_rhs(state, pp: PairParams):
    """Vector field of the pair system; ``state[..., 0] = P``, ``state[..., 1] = A``.

    Vectorised over leading axes so a whole grid of initial points can be
    integrated as one system.
    """
    r = pp.rates
    P = state[..., 0]
    A = state[..., 1]
    dP = (r.g_p(pp.c * A) - pp.k * P) * P
    dA = (r.g_a(pp.c * P) - pp.h * A) * A
    return np.stack([dP, dA], axis=-1)


def as_community(pp: PairParams):
    """The pair as a 1x1 community with constant kernels, for the general modules."""
    com = Community(np.array([1.0]), np.array([1.0]), np.ones((1, 1)), np.array([[pp.c]]))
    return com, (Kernel(pp.k), Kernel(pp.h))


def phase_portrait(pp: PairParams, initial_points, t_end=200.0, tol=1e-3, rtol=1e-8, atol=1e-10):
    """Label each initial point by the equilibrium its trajectory reaches.

    Returns ``(labels, finals, report)``; ``labels[k]`` is the index of the
    equilibrium in ``report.equilibria`` (0 is the null one) or -1 when the
    end point is farther than ``tol`` from every equilibrium.
    """
    pts = np.asarray(initial_points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or np.any(pts < 0):
        raise ValueError("initial points must be an (k, 2) array of nonnegative values")
    report = count_and_solve(pp)
    _, states = ode.integrate(lambda t, y: pair_rhs(y.reshape(-1, 2), pp).ravel(), pts.ravel(), t_end,
                              rtol=rtol, atol=atol)
    finals = states[-1].reshape(-1, 2)
    eqs = np.array([[e.P, e.A] for e in report.equilibria])
    dist = np.linalg.norm(finals[:, None, :] - eqs[None, :, :], axis=-1)
    labels = np.where(dist.min(axis=1) < tol, dist.argmin(axis=1), -1)
    return labels, finals, report
