import numpy as np
import pytest
from scipy import stats

from pollinet import _rng, gillespie
from pollinet.errors import AbsorbedAtZero, RuntimeBudgetExceeded
from pollinet.gillespie import IbmModel, IbmState, event_rates, simulate, simulate_replicas, step
from pollinet.network import Community, ConstantGraphon, HarvestSpec, sample_community
from pollinet.rates import Kernel
from pollinet.single_pair import PairParams, as_community, count_and_solve


def _oracle_rates(com, p, kernels, P, A, K):
    k, h = kernels
    n, m = com.n, com.m
    out = np.zeros((4, max(n, m)))
    for i in range(n):
        R = sum(com.G[i, j] * com.C[i, j] * A[j] for j in range(m)) / K
        comp = sum(float(k(com.x[i], com.x[l])) * P[l] for l in range(n)) / (n * K)
        out[0, i] = p.alphaP * R / (p.betaP + p.gammaP * R) * P[i]
        out[1, i] = (p.dP + p.deltaP * R + comp) * P[i]
    for j in range(m):
        R = sum(com.G[i, j] * com.C[i, j] * P[i] for i in range(n)) / K
        comp = sum(float(h(com.y[j], com.y[l])) * A[l] for l in range(m)) / (m * K)
        out[2, j] = p.alphaA * R / (p.betaA + p.gammaA * R) * A[j]
        out[3, j] = (p.dA + comp) * A[j]
    return out


def test_rates_match_brute_force(moderate, tab_kernels):
    com = sample_community(3, 3, ConstantGraphon(0.7), HarvestSpec("constant", c0=2.0, noise_half_width=0.5),
                           seed=3)
    rng = np.random.default_rng(1)
    for _ in range(5):
        P, A = rng.integers(0, 6, 3), rng.integers(0, 6, 3)
        K = 4
        st = IbmState.initial(IbmModel(com, moderate, tab_kernels, K), P, A)
        oracle = _oracle_rates(com, moderate, tab_kernels, P, A, K)
        er = event_rates(st, com, moderate, tab_kernels)
        assert np.allclose(np.vstack([er.plant_birth, er.plant_death, er.poll_birth, er.poll_death]), oracle,
                           rtol=1e-12, atol=0)
        assert np.allclose(st.rates, oracle, rtol=1e-12, atol=0)
        assert st.total_rate == pytest.approx(oracle.sum(), rel=1e-12)


def test_zero_state_has_zero_rate(moderate, small_community):
    kern = (Kernel(1.0), Kernel(1.0))
    st = IbmState.initial(IbmModel(small_community, moderate, kern, 10), [0, 0, 0], [0, 0, 0])
    assert st.total_rate == 0.0
    with pytest.raises(AbsorbedAtZero):
        step(st, small_community, moderate, kern, _rng.stream(0, _rng.DYNAMICS))


def test_no_pollinators_means_no_plant_births(bistable):
    com = Community([0.5], [0.5], [[1]], [[1.0]])
    kern = (Kernel(1.0), Kernel(1.0))
    st = IbmState.initial(IbmModel(com, bistable, kern, 100), [20], [0])
    er = event_rates(st, com, bistable, kern)
    assert er.plant_birth[0] == 0.0 and er.plant_death[0] > 0
    rng = _rng.stream(4, _rng.DYNAMICS)
    for _ in range(5):
        name, idx, dt = step(st, com, bistable, kern, rng)
        assert (name, idx) == ("plant_death", 0) and dt > 0
    assert st.P[0] == 15


def test_same_seed_same_path(moderate, small_community):
    kern = (Kernel(2.0), Kernel(2.0))
    rt = np.linspace(0, 2, 21)
    a = simulate(small_community, moderate, kern, 200, ([200] * 3, [200] * 3), 2.0, rt, seed=9)
    b = simulate(small_community, moderate, kern, 200, ([200] * 3, [200] * 3), 2.0, rt, seed=9)
    c = simulate(small_community, moderate, kern, 200, ([200] * 3, [200] * 3), 2.0, rt, seed=10)
    assert np.array_equal(a.values, b.values) and a.metadata["events"] == b.metadata["events"]
    assert not np.array_equal(a.values, c.values)


def test_step_sequence_deterministic(moderate, small_community):
    kern = (Kernel(2.0), Kernel(2.0))

    def run():
        model = IbmModel(small_community, moderate, kern, 50)
        st = IbmState.initial(model, [40, 50, 60], [30, 30, 30])
        rng = _rng.stream(5, _rng.DYNAMICS)
        return [step(st, small_community, moderate, kern, rng) for _ in range(200)]

    assert run() == run()


def test_holding_times_exponential(moderate):
    # stable state near (2.13, 1.52), far from the saddle, so no extinction within the run
    pp = PairParams(moderate, c=2.0, k=2.0, h=2.0)
    com, kern = as_community(pp)
    st = IbmState.initial(IbmModel(com, moderate, kern, 100), [213], [152])
    rng = _rng.stream(12, _rng.DYNAMICS)
    u = np.empty(100_000)
    for e in range(u.size):
        lam = st.total_rate
        _, _, dt = step(st, com, moderate, kern, rng)
        u[e] = -np.expm1(-lam * dt)  # Exp(lam) holding time mapped to U(0,1)
    assert stats.kstest(u, "uniform").pvalue > 0.01


def test_zero_initial_state_stays_zero(moderate, small_community):
    traj = simulate(small_community, moderate, (Kernel(1.0), Kernel(1.0)), 100, ([0] * 3, [0] * 3), 3.0,
                    np.linspace(0, 3, 7))
    assert np.all(traj.values == 0) and traj.metadata["absorbed"]


def test_linear_death_process_mean(moderate):
    com = Community([0.2, 0.8], [0.5], [[0], [0]], [[1.0], [1.0]])
    kern = (Kernel(0.0), Kernel(0.0))
    K, A0, t = 50, 50, 1.0
    reps = simulate_replicas(com, moderate, kern, K, ([10, 10], [A0]), t, [0.0, t], 1000, seed=2)
    A_end = np.array([r.values[-1, 2] * K for r in reps])
    se = A_end.std(ddof=1) / np.sqrt(A_end.size)
    assert abs(A_end.mean() - A0 * np.exp(-moderate.dA * t)) < 3 * se
    P_end = np.array([r.values[-1, :2].sum() * K for r in reps])
    se = P_end.std(ddof=1) / np.sqrt(P_end.size)
    assert abs(P_end.mean() - 20 * np.exp(-moderate.dP * t)) < 3 * se


def test_counts_nonnegative_integers(moderate, small_community):
    K = 37
    traj = simulate(small_community, moderate, (Kernel(2.0), Kernel(2.0)), K, ([10, 40, 5], [0, 60, 20]), 5.0,
                    np.linspace(0, 5, 501), seed=1)
    counts = traj.values * K
    assert np.all(counts >= 0)
    assert np.allclose(counts, np.round(counts), atol=1e-9)


def test_mass_bound(moderate, small_community):
    K, t = 20, 0.5
    P0 = np.array([20, 20, 20])
    reps = simulate_replicas(small_community, moderate, (Kernel(2.0), Kernel(2.0)), K, (P0, [20, 20, 20]), t,
                             [0.0, t], 500, seed=6)
    mass = np.array([r.values[-1, :3].sum() for r in reps])
    bound = P0.sum() / K * np.exp(moderate.max_birth_p * t)
    assert mass.mean() <= bound * (1 + 3 * mass.std(ddof=1) / np.sqrt(mass.size) / mass.mean())


def test_cache_equals_recomputation_after_resync_interval(moderate, tab_kernels):
    com = sample_community(4, 5, ConstantGraphon(0.8), HarvestSpec("constant", c0=2.0, noise_half_width=0.5),
                           seed=2)
    K = 100
    model = IbmModel(com, moderate, tab_kernels, K)
    st = IbmState.initial(model, [100] * 4, [100] * 5)
    rng = _rng.stream(3, _rng.DYNAMICS)
    for _ in range(gillespie.RESYNC_EVERY - 1):
        step(st, com, moderate, tab_kernels, rng)
    fresh = event_rates(st, com, moderate, tab_kernels)
    cached = st.rates
    for c, arr in enumerate((fresh.plant_birth, fresh.plant_death, fresh.poll_birth, fresh.poll_death)):
        assert np.allclose(cached[c, :arr.size], arr, rtol=1e-9, atol=1e-12)
    step(st, com, moderate, tab_kernels, rng)  # triggers the exact rebuild
    fresh = event_rates(st, com, moderate, tab_kernels)
    assert np.array_equal(st.rates[1, :4], fresh.plant_death) or np.allclose(st.rates[1, :4], fresh.plant_death,
                                                                            rtol=1e-15)


def test_event_cap_returns_partial(moderate, small_community):
    with pytest.raises(RuntimeBudgetExceeded) as info:
        simulate(small_community, moderate, (Kernel(2.0), Kernel(2.0)), 1000, ([1000] * 3, [1000] * 3), 10.0,
                 np.linspace(0, 10, 101), max_events=2000)
    part = info.value.partial
    assert part is not None and part.metadata["partial"]
    assert 0 < part.times.size < 101


def test_replicas_independent_of_jobs(moderate, small_community):
    args = (small_community, moderate, (Kernel(2.0), Kernel(2.0)), 100, ([100] * 3, [100] * 3), 1.0, [0.0, 0.5, 1.0])
    serial = simulate_replicas(*args, 4, seed=3, jobs=1)
    parallel = simulate_replicas(*args, 4, seed=3, jobs=2)
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.values, b.values)
    assert not np.array_equal(serial[0].values, serial[1].values)


@pytest.mark.slow
def test_stays_near_stable_equilibrium(bistable):
    pp = PairParams(bistable)
    eq = count_and_solve(pp).equilibria[-1]
    assert eq.stability == "stable"
    com, kern = as_community(pp)
    # the stationary standard deviation of A is about 8 / sqrt(K); the radius 0.2
    # is four of them only once K exceeds roughly 2.6e4
    K = 30_000
    start = (np.array([round(K * eq.P)]), np.array([round(K * eq.A)]))
    reps = simulate_replicas(com, bistable, kern, K, start, 20.0, np.linspace(0, 20, 201), 100, seed=8)
    inside = [np.all(np.hypot(r.values[:, 0] - eq.P, r.values[:, 1] - eq.A) < 0.2) for r in reps]
    assert np.mean(inside) >= 0.95


def test_trajectory_csv_roundtrip(tmp_path, moderate, small_community):
    traj = simulate(small_community, moderate, (Kernel(2.0), Kernel(2.0)), 100, ([100] * 3, [100] * 3), 1.0,
                    np.linspace(0, 1, 11), seed=4)
    traj.write_csv(tmp_path / "t.csv")
    traj.write_sidecar(tmp_path / "t.json")
    head = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert head == "t,P_1,P_2,P_3,A_1,A_2,A_3"
    back = type(traj).read_csv(tmp_path / "t.csv", "IBM")
    assert np.array_equal(back.values, traj.values) and np.array_equal(back.times, traj.times)
