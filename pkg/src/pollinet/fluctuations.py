"""Gaussian fluctuations of the individual-based model around its ODE limit.

The rescaled deviation ``eta = sqrt(K) (counts / K - ODE)`` is approximated by
the linear SDE

    d eta = J(t) eta dt + sigma(t) dW

where ``J`` is the Jacobian of the ODE vector field along the deterministic
path and ``sigma_i^2`` is the total event rate per unit of ``K`` for species
``i`` (birth + death + competition, times abundance).
"""

from __future__ import annotations

import numpy as np

from . import _rng
from .errors import AlignmentError, PollinetError
from .mean_field import MeanFieldModel
from .trajectory import Trajectory

__all__ = ["diffusion_coefficients", "simulate_ou", "simulate_ou_ensemble", "empirical_fluctuations",
           "stationary_covariance"]


def _radicand(model: MeanFieldModel, state):
    p = model.params
    P, A = model.split(state)
    rp, ra, cp, ca = model.terms(state)
    return np.concatenate([
        (p.birth_p(rp) + p.death_p(rp) + cp) * P,
        (p.birth_a(ra) + p.death_a(ra) + ca) * A,
    ])


def diffusion_coefficients(state, community, params, kernels, model=None):
    """Noise amplitudes ``(sigma_P, sigma_A)`` at a mean-field state."""
    model = model or MeanFieldModel(community, params, kernels)
    state = np.concatenate(state) if isinstance(state, tuple) else np.asarray(state, float)
    rad = _radicand(model, state)
    if np.any(rad < 0):
        raise PollinetError("negative variance rate; the mean-field state must be nonnegative")
    s = np.sqrt(rad)
    return s[: model.n], s[model.n:]


def simulate_ou_ensemble(ode_trajectory: Trajectory, community, params, kernels, eta0=None, dt=1e-3,
                         n_paths=1, seed=0, t_end=None, increments=None, record_every=1):
    """Euler-Maruyama paths of the fluctuation SDE.

    The drift and noise are evaluated on the ODE path interpolated linearly
    between its samples, at the left end of each step.  ``increments`` may
    supply the Brownian increments (shape ``(steps, n_paths, n + m)``);
    otherwise they are drawn from the fluctuation stream of ``seed``.
    Returns ``(times, paths)`` with ``paths`` of shape
    ``(n_paths, len(times), n + m)``.
    """
    model = MeanFieldModel(community, params, kernels)
    d = model.n + model.m
    t0 = ode_trajectory.times[0]
    t_end = ode_trajectory.times[-1] if t_end is None else t_end
    steps = int(round((t_end - t0) / dt))
    if steps <= 0 or not np.isclose(steps * dt, t_end - t0, rtol=1e-9, atol=1e-12):
        raise ValueError("the time span must be a whole number of steps")
    eta = np.zeros((n_paths, d))
    if eta0 is not None:
        eta = eta + np.asarray(eta0, dtype=float)
    if increments is None:
        rng = _rng.stream(seed, _rng.FLUCTUATIONS)
        increments = rng.standard_normal((steps, n_paths, d)) * np.sqrt(dt)
    elif increments.shape != (steps, n_paths, d):
        raise ValueError(f"increments must have shape {(steps, n_paths, d)}")
    times = [t0]
    out = [eta.copy()]
    for s in range(steps):
        t = t0 + s * dt
        state = ode_trajectory.at(t)
        J = model.jacobian(state)
        sigma = np.sqrt(np.maximum(_radicand(model, state), 0.0))
        eta = eta + dt * eta @ J.T + increments[s] * sigma
        if (s + 1) % record_every == 0 or s + 1 == steps:
            times.append(t0 + (s + 1) * dt)
            out.append(eta.copy())
    return np.array(times), np.stack(out, axis=1)


def simulate_ou(ode_trajectory, community, params, kernels, eta0=None, dt=1e-3, seed=0, t_end=None,
                increments=None, record_every=1):
    """A single fluctuation path as a Trajectory with scale ``OU``."""
    if increments is not None and increments.ndim == 2:
        increments = increments[:, None, :]
    times, paths = simulate_ou_ensemble(ode_trajectory, community, params, kernels, eta0, dt, 1, seed,
                                        t_end, increments, record_every)
    return Trajectory("OU", times, paths[0], community.n, community.m,
                      {"seed": int(seed), "dt": dt})


def empirical_fluctuations(ibm_trajectories, ode_trajectory: Trajectory, K):
    """``sqrt(K) (IBM - ODE)`` for each replica; shape ``(replicas, times, n + m)``."""
    out = []
    for tr in ibm_trajectories:
        if tr.times.shape != ode_trajectory.times.shape or not np.allclose(tr.times, ode_trajectory.times,
                                                                          rtol=0, atol=1e-12):
            raise AlignmentError("IBM and ODE trajectories are sampled at different times")
        if tr.values.shape[1] != ode_trajectory.values.shape[1]:
            raise AlignmentError("IBM and ODE trajectories describe different communities")
        out.append(np.sqrt(K) * (tr.values - ode_trajectory.values))
    return np.array(out)


def stationary_covariance(J, sigma):
    """Solution ``S`` of ``J S + S J^T + diag(sigma^2) = 0``."""
    from scipy.linalg import solve_continuous_lyapunov

    return solve_continuous_lyapunov(np.asarray(J, float), -np.diag(np.asarray(sigma, float) ** 2))
