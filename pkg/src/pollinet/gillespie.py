"""Exact event-driven simulation of the plant-pollinator birth-death process.

The direct method is used: the waiting time is exponential with the total
rate and the event is drawn with probability proportional to its rate, first
among the four classes (plant birth, plant death, pollinator birth,
pollinator death) and then among species inside the class.

Resources and competition pressures are cached and updated incrementally.  A
pollinator event changes the resource of every adjacent plant, which costs
O(degree); a plant event changes every plant's competition pressure, which
costs O(n) unless the kernel vanishes.  The caches are rebuilt from scratch
every ``RESYNC_EVERY`` events to bound floating-point drift.

Random numbers come from a PCG64 stream and are handed to the compiled kernel
in blocks, so a run is reproducible from ``(seed, replica)`` alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _rng
from .errors import AbsorbedAtZero, RuntimeBudgetExceeded
from .trajectory import Trajectory, params_digest

__all__ = [
    "IbmModel",
    "IbmState",
    "EventRates",
    "event_rates",
    "step",
    "simulate",
    "simulate_replicas",
    "PLANT_BIRTH",
    "PLANT_DEATH",
    "POLL_BIRTH",
    "POLL_DEATH",
]

PLANT_BIRTH, PLANT_DEATH, POLL_BIRTH, POLL_DEATH = 0, 1, 2, 3
EVENT_NAMES = ("plant_birth", "plant_death", "pollinator_birth", "pollinator_death")

RESYNC_EVERY = 10_000
DEFAULT_MAX_EVENTS = 10**8
_BLOCK = 1 << 15

_DONE, _NEED_UNIFORMS, _ABSORBED, _CAPPED = 0, 1, 2, 3


class IbmModel:
    """Community-dependent arrays in the layout the compiled kernel expects."""

    def __init__(self, community, params, kernels, K):
        k, h = kernels
        self.community = community
        self.params = params
        self.kernels = kernels
        self.K = int(K)
        if self.K <= 0:
            raise ValueError("carrying capacity K must be a positive integer")
        self.n, self.m = community.n, community.m
        self.prm = np.array([params.alphaP, params.betaP, params.gammaP, params.dP, params.deltaP,
                             params.alphaA, params.betaA, params.gammaA, params.dA])
        self.p_ptr, self.p_idx, self.p_w = (np.ascontiguousarray(a) for a in community.plant_neighbours())
        self.a_ptr, self.a_idx, self.a_w = (np.ascontiguousarray(a) for a in community.pollinator_neighbours())
        self.p_idx = self.p_idx.astype(np.int64)
        self.a_idx = self.a_idx.astype(np.int64)
        self.p_ptr = self.p_ptr.astype(np.int64)
        self.a_ptr = self.a_ptr.astype(np.int64)
        self.Kp = np.ascontiguousarray(k.matrix(community.x) / self.n)
        self.Ha = np.ascontiguousarray(h.matrix(community.y) / self.m)


@dataclass
class IbmState:
    """Integer abundances plus cached resources, pressures and per-species rates."""

    t: float
    K: int
    P: np.ndarray
    A: np.ndarray
    SP: np.ndarray  # sum_j W_ij A_j   (plant resource times K)
    SA: np.ndarray  # sum_i W_ij P_i
    CP: np.ndarray  # sum_l k(x_i,x_l) P_l / n   (plant competition times K)
    CA: np.ndarray
    rates: np.ndarray  # shape (4, max(n, m)); row = event class
    totals: np.ndarray  # shape (4,)
    events: int = 0

    @classmethod
    def initial(cls, model: IbmModel, P0, A0, t0=0.0):
        P = np.array(P0, dtype=np.int64)
        A = np.array(A0, dtype=np.int64)
        if P.shape != (model.n,) or A.shape != (model.m,):
            raise ValueError("initial counts have the wrong length")
        if np.any(P < 0) or np.any(A < 0):
            raise ValueError("initial counts must be nonnegative")
        w = max(model.n, model.m)
        st = cls(float(t0), model.K, P, A, np.zeros(model.n), np.zeros(model.m), np.zeros(model.n),
                 np.zeros(model.m), np.zeros((4, w)), np.zeros(4))
        _resync(st.P, st.A, model.K, model.p_ptr, model.p_idx, model.p_w, model.Kp, model.Ha,
                model.prm, st.SP, st.SA, st.CP, st.CA, st.rates, st.totals)
        return st

    @property
    def total_rate(self):
        return float(self.totals.sum())


# --------------------------------------------------------------------------
# compiled kernel


@njit(cache=True)
def _plant_rates(i, P, SP, CP, K, prm, rates):
    R = SP[i] / K
    p = P[i]
    rates[0, i] = prm[0] * R / (prm[1] + prm[2] * R) * p
    rates[1, i] = (prm[3] + prm[4] * R + CP[i] / K) * p


@njit(cache=True)
def _poll_rates(j, A, SA, CA, K, prm, rates):
    R = SA[j] / K
    a = A[j]
    rates[2, j] = prm[5] * R / (prm[6] + prm[7] * R) * a
    rates[3, j] = (prm[8] + CA[j] / K) * a


@njit(cache=True)
def _totals(n, m, rates, totals):
    s0 = 0.0
    s1 = 0.0
    for i in range(n):
        s0 += rates[0, i]
        s1 += rates[1, i]
    s2 = 0.0
    s3 = 0.0
    for j in range(m):
        s2 += rates[2, j]
        s3 += rates[3, j]
    totals[0] = s0
    totals[1] = s1
    totals[2] = s2
    totals[3] = s3


@njit(cache=True)
def _resync(P, A, K, p_ptr, p_idx, p_w, Kp, Ha, prm, SP, SA, CP, CA, rates, totals):
    n = P.shape[0]
    m = A.shape[0]
    for j in range(m):
        SA[j] = 0.0
    for i in range(n):
        s = 0.0
        for q in range(p_ptr[i], p_ptr[i + 1]):
            j = p_idx[q]
            s += p_w[q] * A[j]
            SA[j] += p_w[q] * P[i]
        SP[i] = s
    for i in range(n):
        s = 0.0
        for l in range(n):
            s += Kp[i, l] * P[l]
        CP[i] = s
    for j in range(m):
        s = 0.0
        for l in range(m):
            s += Ha[j, l] * A[l]
        CA[j] = s
    for i in range(n):
        _plant_rates(i, P, SP, CP, K, prm, rates)
    for j in range(m):
        _poll_rates(j, A, SA, CA, K, prm, rates)
    _totals(n, m, rates, totals)


@njit(cache=True)
def _run(P, A, K, p_ptr, p_idx, p_w, a_ptr, a_idx, a_w, Kp, Ha, prm,
         SP, SA, CP, CA, rates, totals, t_arr, ev_arr,
         uniforms, pos, t_stop, rec_times, rec_pos, rec_out, max_events, last):
    """Advance until ``t_stop``, uniform exhaustion, absorption or the event cap.

    ``t_arr[0]`` is the clock, ``ev_arr[0]`` the event counter and ``pos[0]``
    the read position in ``uniforms``; ``rec_pos[0]`` counts recorded rows.
    ``last`` receives ``(class, species, dt)`` codes of the final event.
    """
    n = P.shape[0]
    m = A.shape[0]
    nrec = rec_times.shape[0]
    t = t_arr[0]
    while True:
        lam = totals[0] + totals[1] + totals[2] + totals[3]
        if lam <= 0.0:
            while rec_pos[0] < nrec and rec_times[rec_pos[0]] <= t_stop:
                r = rec_pos[0]
                for i in range(n):
                    rec_out[r, i] = P[i]
                for j in range(m):
                    rec_out[r, n + j] = A[j]
                rec_pos[0] += 1
            t_arr[0] = t
            return _ABSORBED
        if ev_arr[0] >= max_events:
            t_arr[0] = t
            return _CAPPED
        if pos[0] + 2 > uniforms.shape[0]:
            t_arr[0] = t
            return _NEED_UNIFORMS
        u1 = uniforms[pos[0]]
        u2 = uniforms[pos[0] + 1]
        pos[0] += 2
        dt = -np.log(1.0 - u1) / lam
        t_new = t + dt
        # record every requested time strictly before the jump
        while rec_pos[0] < nrec and rec_times[rec_pos[0]] < t_new and rec_times[rec_pos[0]] <= t_stop:
            r = rec_pos[0]
            for i in range(n):
                rec_out[r, i] = P[i]
            for j in range(m):
                rec_out[r, n + j] = A[j]
            rec_pos[0] += 1
        if t_new > t_stop:
            t_arr[0] = t_stop
            return _DONE
        t = t_new

        # pick the event class, then the species
        target = u2 * lam
        cls = -1
        base = 0.0
        acc = 0.0
        for c in range(4):
            if totals[c] > 0.0:
                cls = c
                base = acc
                acc += totals[c]
                if target < acc:
                    break
        # on round-off overshoot the last nonempty class and species are used
        target -= base
        size = n if cls < 2 else m
        idx = -1
        acc = 0.0
        for s in range(size):
            r_s = rates[cls, s]
            if r_s > 0.0:
                idx = s
                acc += r_s
                if target < acc:
                    break
        delta = 1 if (cls == 0 or cls == 2) else -1

        if cls < 2:
            i = idx
            P[i] += delta
            for q in range(p_ptr[i], p_ptr[i + 1]):
                j = p_idx[q]
                SA[j] += delta * p_w[q]
                _poll_rates(j, A, SA, CA, K, prm, rates)
            for l in range(n):
                if Kp[l, i] != 0.0:
                    CP[l] += delta * Kp[l, i]
                    _plant_rates(l, P, SP, CP, K, prm, rates)
            _plant_rates(i, P, SP, CP, K, prm, rates)
        else:
            j = idx
            A[j] += delta
            for q in range(a_ptr[j], a_ptr[j + 1]):
                i = a_idx[q]
                SP[i] += delta * a_w[q]
                _plant_rates(i, P, SP, CP, K, prm, rates)
            for l in range(m):
                if Ha[l, j] != 0.0:
                    CA[l] += delta * Ha[l, j]
                    _poll_rates(l, A, SA, CA, K, prm, rates)
            _poll_rates(j, A, SA, CA, K, prm, rates)
        ev_arr[0] += 1
        last[0] = cls
        last[1] = idx
        last[2] = dt
        if ev_arr[0] % 10000 == 0:
            _resync(P, A, K, p_ptr, p_idx, p_w, Kp, Ha, prm, SP, SA, CP, CA, rates, totals)
        else:
            _totals(n, m, rates, totals)


def _advance(model, state, uniforms, t_stop, rec_times, rec_pos, rec_out, max_events):
    t_arr = np.array([state.t])
    ev_arr = np.array([state.events], dtype=np.int64)
    pos = np.zeros(1, dtype=np.int64)
    last = np.full(3, -1.0)
    status = _run(state.P, state.A, model.K, model.p_ptr, model.p_idx, model.p_w, model.a_ptr,
                  model.a_idx, model.a_w, model.Kp, model.Ha, model.prm, state.SP, state.SA, state.CP,
                  state.CA, state.rates, state.totals, t_arr, ev_arr, uniforms, pos, float(t_stop),
                  rec_times, rec_pos, rec_out, int(max_events), last)
    state.t = float(t_arr[0])
    state.events = int(ev_arr[0])
    return status, int(pos[0]), last


# --------------------------------------------------------------------------
# public operations


@dataclass
class EventRates:
    plant_birth: np.ndarray
    plant_death: np.ndarray
    poll_birth: np.ndarray
    poll_death: np.ndarray

    @property
    def total(self):
        return float(self.plant_birth.sum() + self.plant_death.sum() + self.poll_birth.sum()
                     + self.poll_death.sum())


def event_rates(state, community, params, kernels):
    """Per-species event rates recomputed from the counts alone."""
    k, h = kernels
    P = np.asarray(state.P, float)
    A = np.asarray(state.A, float)
    K = state.K
    W = community.weights
    RP = W @ A / K
    RA = W.T @ P / K
    compP = k.matrix(community.x) @ P / (community.n * K)
    compA = h.matrix(community.y) @ A / (community.m * K)
    return EventRates(
        params.birth_p(RP) * P,
        (params.death_p(RP) + compP) * P,
        params.birth_a(RA) * A,
        (params.death_a(RA) + compA) * A,
    )


def _model_for(state, community, params, kernels):
    model = getattr(state, "_model", None)
    if model is None or model.community is not community or model.params != params \
            or model.kernels is not kernels:
        model = IbmModel(community, params, kernels, state.K)
        state._model = model
    return model


def step(state, community, params, kernels, rng):
    """Apply one event in place; return ``(event name, species index, dt)``."""
    model = _model_for(state, community, params, kernels)
    if state.total_rate <= 0:
        raise AbsorbedAtZero("all event rates are zero")
    uniforms = rng.random(2)
    status, _, last = _advance(model, state, uniforms, np.inf, np.empty(0), np.zeros(1, np.int64),
                               np.empty((0, model.n + model.m)), state.events + 1)
    return EVENT_NAMES[int(last[0])], int(last[1]), float(last[2])


def simulate(community, params, kernels, K, init_counts, t_end, record_times=None, seed=0, replica=0,
             max_events=DEFAULT_MAX_EVENTS, model=None):
    """One exact sample path, recorded at ``record_times`` and normalised by ``K``.

    ``init_counts`` is ``(P0, A0)``.  The state between events is held
    constant (right-continuous paths); record times are not interpolated.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    model = model or IbmModel(community, params, kernels, K)
    P0, A0 = init_counts
    state = IbmState.initial(model, P0, A0)
    rec_times = np.asarray(record_times if record_times is not None else [0.0, t_end], dtype=float)
    rec_out = np.zeros((rec_times.size, model.n + model.m))
    rec_pos = np.zeros(1, dtype=np.int64)
    rng = _rng.stream(seed, _rng.DYNAMICS, replica)
    meta = {
        "seed": int(seed),
        "replica": int(replica),
        "K": model.K,
        "params_digest": params_digest({"params": params.to_dict(), "kernels": [k.to_dict() for k in kernels],
                                        "community_seed": int(community.seed)}),
    }
    while True:
        uniforms = rng.random(_BLOCK)
        status, used, _ = _advance(model, state, uniforms, t_end, rec_times, rec_pos, rec_out, max_events)
        if status == _NEED_UNIFORMS:
            continue
        break
    meta["events"] = state.events
    meta["absorbed"] = status == _ABSORBED
    if status == _CAPPED:
        k = int(rec_pos[0])
        partial = None
        if k > 0:
            partial = Trajectory("IBM", rec_times[:k], rec_out[:k] / model.K, model.n, model.m,
                                 {**meta, "partial": True})
        raise RuntimeBudgetExceeded(f"event cap {max_events} reached at t={state.t}", partial)
    return Trajectory("IBM", rec_times, rec_out / model.K, model.n, model.m, meta)


def _replica_worker(args):
    community, params, kernels, K, init_counts, t_end, record_times, seed, replica, max_events = args
    return simulate(community, params, kernels, K, init_counts, t_end, record_times, seed, replica, max_events)


def simulate_replicas(community, params, kernels, K, init_counts, t_end, record_times, replicas, seed=0,
                      jobs=1, max_events=DEFAULT_MAX_EVENTS):
    """Independent replicas, replica ``r`` using dynamics stream ``(seed, r)``.

    Results come back in replica order whatever ``jobs`` is.
    """
    if jobs <= 1:
        model = IbmModel(community, params, kernels, K)
        return [simulate(community, params, kernels, K, init_counts, t_end, record_times, seed, r, max_events,
                         model=model) for r in range(replicas)]
    from concurrent.futures import ProcessPoolExecutor

    args = [(community, params, kernels, K, init_counts, t_end, record_times, seed, r, max_events)
            for r in range(replicas)]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_replica_worker, args))
