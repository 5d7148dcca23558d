"""Cross-scale comparisons built only from the public operations of the other modules."""

from __future__ import annotations

import numpy as np

from . import fluctuations, gillespie
from .mean_field import MeanFieldModel


def initial_counts(K, P0, A0):
    """Integer counts closest to ``K * density``."""
    return np.rint(K * np.asarray(P0, float)).astype(np.int64), np.rint(K * np.asarray(A0, float)).astype(np.int64)


def lln_study(community, params, kernels, K_values, P0, A0, t_end, replicas, seed=0, dt_record=0.01,
              jobs=1):
    """IBM versus ODE over a ladder of carrying capacities.

    For each ``K`` the IBM starts from the counts nearest ``K * (P0, A0)`` and
    the ODE from exactly ``counts / K``, so the initial error is zero.  The
    error of a replica is the largest coordinate deviation over the record
    grid; the table reports its root mean square over replicas.
    """
    record = np.round(np.arange(0.0, t_end + dt_record / 2, dt_record), 12)
    model = MeanFieldModel(community, params, kernels)
    rows = []
    for K in K_values:
        Pc, Ac = initial_counts(K, P0, A0)
        ode_traj = model.integrate(np.concatenate([Pc, Ac]) / K, t_end, record)
        reps = gillespie.simulate_replicas(community, params, kernels, K, (Pc, Ac), t_end, record, replicas,
                                           seed=seed + int(K), jobs=jobs)
        errs = np.array([np.abs(r.values - ode_traj.values).max() for r in reps])
        rows.append({
            "K": int(K),
            "replicas": int(replicas),
            "rmsSupError": float(np.sqrt(np.mean(errs ** 2))),
            "meanSupError": float(errs.mean()),
            "scaledRms": float(np.sqrt(K) * np.sqrt(np.mean(errs ** 2))),
        })
    return rows


def clt_study(community, params, kernels, K, P0, A0, t, replicas, ou_paths, seed=0, dt=1e-3, jobs=1):
    """Moments of ``sqrt(K) (IBM - ODE)`` at time ``t`` against the fluctuation SDE.

    Returns a dict with the empirical mean, its standard error, the empirical
    variance and the Monte-Carlo variance of the limiting SDE, per coordinate.
    """
    Pc, Ac = initial_counts(K, P0, A0)
    model = MeanFieldModel(community, params, kernels)
    grid = np.round(np.linspace(0.0, t, int(round(t / 0.01)) + 1), 12)
    ode_traj = model.integrate(np.concatenate([Pc, Ac]) / K, t, grid)
    reps = gillespie.simulate_replicas(community, params, kernels, K, (Pc, Ac), t, [0.0, t], replicas,
                                       seed=seed, jobs=jobs)
    ode_ends = ode_traj.values[[0, -1]]
    from .trajectory import Trajectory

    ode_coarse = Trajectory("ODE", [0.0, t], ode_ends, community.n, community.m)
    eta = fluctuations.empirical_fluctuations(reps, ode_coarse, K)[:, -1, :]
    _, paths = fluctuations.simulate_ou_ensemble(ode_traj, community, params, kernels, None, dt, ou_paths,
                                                 seed=seed, record_every=int(round(t / dt)))
    ou_end = paths[:, -1, :]
    return {
        "K": int(K),
        "t": float(t),
        "replicas": int(replicas),
        "ouPaths": int(ou_paths),
        "empiricalMean": eta.mean(axis=0).tolist(),
        "empiricalMeanSE": (eta.std(axis=0, ddof=1) / np.sqrt(replicas)).tolist(),
        "empiricalVar": eta.var(axis=0, ddof=1).tolist(),
        "ouVar": ou_end.var(axis=0, ddof=1).tolist(),
        "ouMean": ou_end.mean(axis=0).tolist(),
    }
