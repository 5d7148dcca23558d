"""Large-population ODE limit of the individual-based model.

For plant ``i`` and pollinator ``j``::

    dP_i/dt = [g_P(sum_j W_ij A_j) - (1/n) sum_l k(x_i, x_l) P_l] P_i
    dA_j/dt = [g_A(sum_i W_ij P_i) - (1/m) sum_l h(y_j, y_l) A_l] A_j

with ``W = G * C``.  States are flat vectors ``(P_1..P_n, A_1..A_m)``.
"""

from __future__ import annotations

import numpy as np

from . import ode
from .trajectory import Trajectory, params_digest

__all__ = ["MeanFieldModel", "ode_rhs", "integrate", "equilibrium_residual", "jacobian"]


class MeanFieldModel:
    """Vector field with the community-dependent matrices precomputed."""

    def __init__(self, community, params, kernels):
        k, h = kernels
        self.community = community
        self.params = params
        self.kernels = kernels
        self.n, self.m = community.n, community.m
        self.W = community.weights
        self.Kp = k.matrix(community.x) / self.n
        self.Ha = h.matrix(community.y) / self.m

    def split(self, state):
        state = np.asarray(state, dtype=float)
        return state[..., : self.n], state[..., self.n:]

    def terms(self, state):
        """Resources and competition pressures ``(R_P, R_A, comp_P, comp_A)``.

        ``R_P`` is the resource received by plants (from pollinators).
        """
        P, A = self.split(state)
        return self.W @ A, self.W.T @ P, self.Kp @ P, self.Ha @ A

    def rhs(self, state):
        P, A = self.split(state)
        rp, ra, cp, ca = self.terms(state)
        return np.concatenate([(self.params.g_p(rp) - cp) * P, (self.params.g_a(ra) - ca) * A])

    def residual(self, state):
        P, A = self.split(state)
        rp, ra, cp, ca = self.terms(state)
        res = np.concatenate([
            np.where(P > 0, np.abs(self.params.g_p(rp) - cp), 0.0),
            np.where(A > 0, np.abs(self.params.g_a(ra) - ca), 0.0),
        ])
        return float(res.max()) if res.size else 0.0

    def jacobian(self, state):
        P, A = self.split(state)
        rp, ra, cp, ca = self.terms(state)
        n, m = self.n, self.m
        J = np.zeros((n + m, n + m))
        J[:n, :n] = -self.Kp * P[:, None] + np.diag(self.params.g_p(rp) - cp)
        J[:n, n:] = (self.params.dg_p(rp) * P)[:, None] * self.W
        J[n:, :n] = (self.params.dg_a(ra) * A)[:, None] * self.W.T
        J[n:, n:] = -self.Ha * A[:, None] + np.diag(self.params.g_a(ra) - ca)
        return J

    def integrate(self, init, t_end, record_times=None, rtol=1e-8, atol=1e-8, metadata=None):
        times, states = ode.integrate(lambda t, y: self.rhs(y), init, t_end, record_times, rtol, atol)
        meta = {
            "params_digest": params_digest({
                "params": self.params.to_dict(),
                "kernels": [k.to_dict() for k in self.kernels],
                "community_seed": int(self.community.seed),
            }),
            "rtol": rtol,
            "atol": atol,
            **(metadata or {}),
        }
        return Trajectory("ODE", times, states, self.n, self.m, meta)


def _state(P, A):
    return np.concatenate([np.asarray(P, float), np.asarray(A, float)])


def ode_rhs(state, community, params, kernels):
    """Time derivative at ``state = (P, A)``; returned as the pair ``(dP, dA)``."""
    model = MeanFieldModel(community, params, kernels)
    d = model.rhs(_state(*state) if isinstance(state, tuple) else state)
    return d[: model.n], d[model.n:]


def integrate(init, community, params, kernels, t_end, record_times=None, rtol=1e-8, atol=1e-8):
    model = MeanFieldModel(community, params, kernels)
    init = _state(*init) if isinstance(init, tuple) else np.asarray(init, float)
    return model.integrate(init, t_end, record_times, rtol, atol)


def equilibrium_residual(state, community, params, kernels):
    """Largest violation of the stationarity conditions among present species."""
    model = MeanFieldModel(community, params, kernels)
    return model.residual(_state(*state) if isinstance(state, tuple) else state)


def jacobian(state, community, params, kernels):
    model = MeanFieldModel(community, params, kernels)
    return model.jacobian(_state(*state) if isinstance(state, tuple) else state)
