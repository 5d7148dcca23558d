"""Trait-continuum limit on a uniform grid.

Densities ``p(x)`` and ``a(y)`` live on ``x_i = i / N``, ``i = 0..N``, and the
integrals are replaced by the rectangular rule ``(1/N) sum_{i=0}^{N}``::

    dp_i/dt = [g_P((1/N) sum_j psi_ij a_j) - (1/N) sum_j k_ij p_j] p_i
    da_j/dt = [g_A((1/N) sum_i psi_ij p_i) - (1/N) sum_l h_jl a_l] a_j

with ``psi(x, y) = c(x, y) phi(x, y)``.  This is exactly the species-level ODE
for ``N + 1`` plants and pollinators sitting on the gridpoints, see
:func:`grid_community`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import _rng, ode
from .errors import AmbiguousRoot
from .mean_field import MeanFieldModel
from .network import sample_community
from .rates import Kernel, gp_max

__all__ = [
    "DensityField",
    "StableStatePrediction",
    "KineticModel",
    "psi",
    "psi_grid",
    "grid_rhs",
    "integrate_kinetic",
    "concentration_metrics",
    "predicted_stable_state",
    "stationarity_residual",
    "wasserstein1",
    "grid_community",
    "convergence_study",
    "random_field",
    "is_collapsed",
]

SUPPORT_MASS = 1e-9
COLLAPSE_FRACTION = 0.99
COLLAPSE_RESIDUAL = 1e-4


@dataclass
class DensityField:
    N: int
    p: np.ndarray
    a: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float)
        self.a = np.asarray(self.a, dtype=float)
        if self.p.shape != (self.N + 1,) or self.a.shape != (self.N + 1,):
            raise ValueError(f"densities must have N + 1 = {self.N + 1} values")
        if np.any(self.p < 0) or np.any(self.a < 0):
            raise ValueError("densities must be nonnegative")

    @property
    def grid(self):
        return np.arange(self.N + 1) / self.N

    @property
    def plant_mass(self):
        return float(self.p.sum() / self.N)

    @property
    def poll_mass(self):
        return float(self.a.sum() / self.N)

    def plant_measure(self):
        return self.grid, self.p / self.N

    def poll_measure(self):
        return self.grid, self.a / self.N

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("x,p,a\n")
            for x, p, a in zip(self.grid, self.p, self.a):
                fh.write(f"{x!r},{p!r},{a!r}\n")


def random_field(N, seed=0, low=0.5, high=1.5):
    """Positive random initial densities, uniform in ``[low, high)`` per cell."""
    rng = _rng.stream(seed, _rng.TRAITS, N)
    return DensityField(N, rng.uniform(low, high, N + 1), rng.uniform(low, high, N + 1))


def psi(x, y, graphon, harvest):
    """Continuum interaction strength ``c(x, y) phi(x, y)``.

    Sampled weights have mean ``harvest(x, y) / (n + m)``; with ``m = n`` the
    limit of ``n`` times the weight is ``harvest(x, y) / 2``, which is the
    continuum harvesting function ``c``.
    """
    x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
    return 0.5 * harvest(x, y) * graphon(x, y)


def psi_grid(N, psi_fn):
    g = np.arange(N + 1) / N
    return np.asarray(psi_fn(g[:, None], g[None, :]), dtype=float)


class KineticModel:
    def __init__(self, N, psi_values, params, k: Kernel, h: Kernel):
        self.N = int(N)
        self.psi = np.asarray(psi_values, dtype=float)
        if self.psi.shape != (self.N + 1, self.N + 1):
            raise ValueError("psi must be evaluated on the (N+1) x (N+1) grid")
        self.params = params
        self.k, self.h = k, h
        g = np.arange(self.N + 1) / self.N
        self.Kg = k.matrix(g) / self.N
        self.Hg = h.matrix(g) / self.N

    def terms(self, p, a):
        rp = self.psi @ a / self.N
        ra = self.psi.T @ p / self.N
        return rp, ra, self.Kg @ p, self.Hg @ a

    def rhs(self, p, a):
        rp, ra, cp, ca = self.terms(p, a)
        return (self.params.g_p(rp) - cp) * p, (self.params.g_a(ra) - ca) * a

    def flat_rhs(self, y):
        n1 = self.N + 1
        dp, da = self.rhs(y[:n1], y[n1:])
        return np.concatenate([dp, da])


def grid_rhs(field: DensityField, psi_values, params, k, h):
    return KineticModel(field.N, psi_values, params, k, h).rhs(field.p, field.a)


def integrate_kinetic(field0: DensityField, psi_values, params, k, h, t_end, snapshot_times=None,
                      tol=1e-8):
    """Snapshots of the grid solution at ``snapshot_times`` (default ``[0, t_end]``)."""
    model = KineticModel(field0.N, psi_values, params, k, h)
    times, states = ode.integrate(lambda t, y: model.flat_rhs(y), np.concatenate([field0.p, field0.a]),
                                  t_end, snapshot_times, rtol=tol, atol=tol)
    n1 = field0.N + 1
    return [DensityField(field0.N, s[:n1], s[n1:], float(t)) for t, s in zip(times, states)]


def concentration_metrics(field: DensityField):
    """Share of mass in the heaviest cell per side; ties go to the lower index."""
    out = {"zeroMass": False}
    for side, dens in (("plant", field.p), ("poll", field.a)):
        mass = float(dens.sum() / field.N)
        out[f"{side}Mass"] = mass
        if mass <= 0:
            out[f"{side}MaxFraction"] = 0.0
            out[f"{side}Argmax"] = 0.0
            out["zeroMass"] = True
        else:
            i = int(np.argmax(dens))  # first occurrence on ties
            out[f"{side}MaxFraction"] = float(dens[i] / dens.sum())
            out[f"{side}Argmax"] = float(i / field.N)
            out[f"{side}ArgmaxIndex"] = i
    return out


def stationarity_residual(field: DensityField, psi_values, params, k, h):
    """Largest ``|growth - competition|`` over cells holding mass above ``1e-9``."""
    model = KineticModel(field.N, psi_values, params, k, h)
    rp, ra, cp, ca = model.terms(field.p, field.a)
    sp = field.p / field.N > SUPPORT_MASS
    sa = field.a / field.N > SUPPORT_MASS
    res = np.concatenate([np.abs(params.g_p(rp) - cp)[sp], np.abs(params.g_a(ra) - ca)[sa]])
    return float(res.max()) if res.size else 0.0


def is_collapsed(field, psi_values, params, k, h):
    m = concentration_metrics(field)
    return (m["plantMaxFraction"] > COLLAPSE_FRACTION and m["pollMaxFraction"] > COLLAPSE_FRACTION
            and stationarity_residual(field, psi_values, params, k, h) < COLLAPSE_RESIDUAL)


@dataclass
class StableStatePrediction:
    x0: float
    plant_mass: float
    poll_mass: float
    exists: bool

    def to_dict(self):
        return asdict(self)


def predicted_stable_state(params, k, h, psi_fn, scan=4001):
    """Single-atom stable state for constant competition ``k``, ``h``.

    Plants sit at ``x0`` with mass ``max g_P / k``; pollinators sit at ``y = 1``
    with mass ``argmax g_P / psi(x0, 1)``, where ``x0`` solves
    ``g_A(max g_P / k * psi(x, 1)) psi(x, 1) = h argmax g_P``.
    """
    k = k.value if isinstance(k, Kernel) else float(k)
    h = h.value if isinstance(h, Kernel) else float(h)
    rstar, gmax = gp_max(params)
    plant_mass = gmax / k

    def F(x):
        s = np.asarray(psi_fn(x, 1.0), dtype=float)
        return params.g_a(plant_mass * s) * s - h * rstar

    xs = np.linspace(0.0, 1.0, scan)
    fs = F(xs)
    sign = np.sign(fs)
    changes = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    exact = np.nonzero(fs == 0)[0]
    roots = len(changes) + len(exact)
    if roots == 0:
        return StableStatePrediction(float("nan"), float(plant_mass), float("nan"), False)
    if roots > 1:
        raise AmbiguousRoot(f"F changes sign {roots} times on [0, 1]")
    if len(exact):
        x0 = float(xs[exact[0]])
    else:
        lo, hi = xs[changes[0]], xs[changes[0] + 1]
        flo = float(F(lo))
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            fm = float(F(mid))
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        x0 = 0.5 * (lo + hi)
    s0 = float(psi_fn(x0, 1.0))
    return StableStatePrediction(float(x0), float(plant_mass), float(rstar / s0), True)


# --------------------------------------------------------------------------
# distances


def _normalise(pos, w):
    pos = np.asarray(pos, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if pos.shape != w.shape:
        raise ValueError("positions and weights must have the same length")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    return pos, w, float(w.sum())


def wasserstein1(measure_a, measure_b, return_flag=False):
    """Kantorovich-Rubinstein distance between finite weighted point sets on [0,1].

    Equal masses: ``int_0^1 |F_a - F_b|`` computed exactly from the atoms.
    Unequal masses: ``|mass_a - mass_b|`` plus the distance between the
    normalised measures (the result is flagged composite).  An empty measure
    against a nonempty one gives the nonempty mass.
    """
    pa, wa, ma = _normalise(*measure_a)
    pb, wb, mb = _normalise(*measure_b)
    composite = not np.isclose(ma, mb, rtol=1e-12, atol=1e-300)
    if ma == 0 or mb == 0:
        d = abs(ma - mb)
        return (d, composite) if return_flag else d
    if composite:
        wa, wb = wa / ma, wb / mb
        scale, gap = 1.0, abs(ma - mb)
    else:
        scale, gap = 1.0, 0.0
    pts = np.concatenate([pa, pb])
    diff = np.concatenate([wa, -wb])
    order = np.argsort(pts, kind="mergesort")
    pts, diff = pts[order], diff[order]
    cum = np.cumsum(diff)
    d = gap + scale * float(np.sum(np.abs(cum[:-1]) * np.diff(pts)))
    return (d, composite) if return_flag else d


# --------------------------------------------------------------------------
# grid / species identification and the large-community study


def grid_community(N, psi_fn, k: Kernel, h: Kernel):
    """A species-level community whose ODE coincides with the grid scheme.

    Species sit on the gridpoints, every pair interacts and
    ``C_ij = psi(x_i, y_j) / N``.  The ODE averages competition over
    ``n = N + 1`` species while the grid scheme divides by ``N``, so the
    kernels are rescaled by ``(N + 1) / N``.
    """
    from .network import Community

    g = np.arange(N + 1) / N
    C = psi_grid(N, psi_fn) / N
    com = Community(g.copy(), g.copy(), np.ones((N + 1, N + 1), dtype=np.int8), C, 0,
                    {"grid": N})
    s = (N + 1) / N

    def scaled(kern):
        return Kernel(kern.value * s) if kern.is_constant else Kernel(grid=kern.grid * s)

    return com, (scaled(k), scaled(h))


def _study_cell(args):
    n, seed, graphon, harvest, params, kernels, p0, a0, record, times, rtol, atol = args
    com = sample_community(n, n, graphon, harvest, seed)
    model = MeanFieldModel(com, params, kernels)
    traj = model.integrate(np.concatenate([p0(com.x), a0(com.y)]), record[-1], record, rtol, atol)
    out = []
    for t in times:
        state = traj.values[int(np.searchsorted(traj.times, t))]
        out.append(((com.x, state[:n] / n), (com.y, state[n:] / n)))
    return out


def convergence_study(n_values, graphon, harvest, params, kernels, N, times, seeds, p0, a0,
                      rtol=1e-8, atol=1e-10, jobs=1):
    """Distance between the ``n``-species ODE and the grid solution.

    For every ``n`` (with ``m = n``) and seed, a community is sampled, the
    ODE is started from ``P_i = p0(x_i)``, ``A_j = a0(y_j)`` and compared at
    ``times`` with the grid densities through :func:`wasserstein1` applied to
    ``(1/n) sum_i P_i delta_{x_i}`` and ``(1/N) sum_i p_i delta_{i/N}``.
    Returns one row per ``(n, t)`` with seed means and standard errors.

    With ``jobs > 1`` the ``(n, seed)`` cells run in worker processes, which
    requires ``p0`` and ``a0`` to be picklable; rows do not depend on ``jobs``.
    """
    k, h = kernels
    times = np.atleast_1d(np.asarray(times, dtype=float))
    record = np.unique(np.concatenate([[0.0], times]))
    g = np.arange(N + 1) / N
    field0 = DensityField(N, p0(g), a0(g))
    ref = integrate_kinetic(field0, psi_grid(N, lambda x, y: psi(x, y, graphon, harvest)), params, k, h,
                            record[-1], record)
    ref_at = {float(f.t): f for f in ref}
    cells = [(int(n), int(s), graphon, harvest, params, kernels, p0, a0, record, times, rtol, atol)
             for n in n_values for s in seeds]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_study_cell, cells))
    else:
        results = [_study_cell(c) for c in cells]

    def se(v):
        return float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0

    rows = []
    for a, n in enumerate(n_values):
        block = results[a * len(seeds):(a + 1) * len(seeds)]
        for b, t in enumerate(times):
            f = ref_at[float(t)]
            dp = np.array([wasserstein1(cell[b][0], f.plant_measure()) for cell in block])
            da = np.array([wasserstein1(cell[b][1], f.poll_measure()) for cell in block])
            rows.append({"n": int(n), "t": float(t), "seeds": len(seeds),
                         "w1Plants": float(dp.mean()), "w1PlantsSE": se(dp),
                         "w1Pollinators": float(da.mean()), "w1PollinatorsSE": se(da)})
    return rows


def collapse_report(field, psi_fn, psi_values, params, k, h):
    """JSON-ready summary of a long-time grid solution against the predicted atom."""
    m = concentration_metrics(field)
    pred = predicted_stable_state(params, k, h, psi_fn)
    return {
        "t": field.t,
        "plantArgmax": m["plantArgmax"],
        "pollArgmax": m["pollArgmax"],
        "plantMaxFraction": m["plantMaxFraction"],
        "pollMaxFraction": m["pollMaxFraction"],
        "masses": {"plant": m["plantMass"], "pollinator": m["pollMass"]},
        "predictedX0": pred.x0 if pred.exists else None,
        "predictedMasses": {"plant": pred.plant_mass, "pollinator": pred.poll_mass if pred.exists else None},
        "stationarityResidual": stationarity_residual(field, psi_values, params, k, h),
        "collapsed": is_collapsed(field, psi_values, params, k, h),
    }

