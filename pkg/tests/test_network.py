import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from pollinet.errors import ConfigError
from pollinet.network import (
    BlockGraphon,
    Community,
    ConstantGraphon,
    HarvestSpec,
    ProductGraphon,
    TabulatedGraphon,
    degree_stats,
    graphon_from_dict,
    sample_community,
    sample_graph,
    sample_traits,
    sample_weights,
)


def test_traits_sorted_in_unit_interval():
    for seed in range(5):
        x, y = sample_traits(3, 4, seed=seed)
        assert x.shape == (3,) and y.shape == (4,)
        assert np.all(np.diff(x) >= 0) and np.all(np.diff(y) >= 0)
        assert np.all((x >= 0) & (x <= 1)) and np.all((y >= 0) & (y <= 1))


def test_degenerate_inverse_cdf():
    x, y = sample_traits(5, 2, lambda u: np.full_like(u, 0.5), lambda u: np.full_like(u, 0.5), seed=3)
    assert np.all(x == 0.5) and np.all(y == 0.5)


def test_non_monotone_inverse_cdf_rejected():
    with pytest.raises(ConfigError):
        sample_traits(3, 3, lambda u: 1.0 - u, seed=0)


def test_traits_uniform_ks():
    x, _ = sample_traits(10_000, 1, seed=123)
    assert stats.kstest(x, "uniform").pvalue > 0.01


def test_constant_graphons_extreme():
    x, y = sample_traits(6, 4, seed=1)
    G = sample_graph(x, y, ConstantGraphon(1.0), seed=1)
    assert G.sum() == 24
    ds = degree_stats(G)
    assert np.all(ds.plant_degrees == 4) and np.all(ds.pollinator_degrees == 6)
    assert sample_graph(x, y, ConstantGraphon(0.0), seed=1).sum() == 0


def test_graphon_out_of_range_rejected():
    with pytest.raises(ConfigError):
        ConstantGraphon(1.5)
    with pytest.raises(ConfigError):
        TabulatedGraphon(((0.0, 2.0), (0.1, 0.2)))


def test_product_graphon_edge_count_monte_carlo():
    x, y = sample_traits(200, 200, seed=5)
    counts = np.array([sample_graph(x, y, ProductGraphon(), seed=s).sum() for s in range(500)])
    expected = np.sum(np.outer(x, y))
    se = counts.std(ddof=1) / np.sqrt(counts.size)
    assert abs(counts.mean() - expected) < 3 * se


def test_degree_chi_square_binomial():
    n, m, phi = 50, 40, 0.3
    x, y = sample_traits(n, m, seed=0)
    hist = np.zeros(m + 1)
    for s in range(1000):
        hist += degree_stats(sample_graph(x, y, ConstantGraphon(phi), seed=s)).plant_histogram
    probs = stats.binom.pmf(np.arange(m + 1), m, phi)
    expected = probs * hist.sum()
    # pool sparse tails so every cell expects at least 5
    keep = expected >= 5
    lo, hi = np.argmax(keep), len(keep) - np.argmax(keep[::-1]) - 1
    obs = np.concatenate([[hist[:lo].sum()], hist[lo:hi + 1], [hist[hi + 1:].sum()]])
    exp = np.concatenate([[expected[:lo].sum()], expected[lo:hi + 1], [expected[hi + 1:].sum()]])
    assert stats.chisquare(obs, exp).pvalue > 0.01


def test_degree_stats_small_cases():
    ds = degree_stats(np.ones((2, 3), dtype=np.int8))
    assert ds.plant_degrees.tolist() == [3, 3] and ds.edges == 6
    ds0 = degree_stats(np.zeros((2, 3), dtype=np.int8))
    assert ds0.edges == 0 and np.all(ds0.plant_degrees == 0) and np.all(ds0.pollinator_degrees == 0)


def test_weights_deterministic_formula():
    C = sample_weights([0.3], [0.8], HarvestSpec("constant", c0=1.0), seed=0)
    assert C[0, 0] == 0.5


def test_product_xy_zero_row():
    C = sample_weights([0.0, 0.5, 1.0], [0.2, 0.9], HarvestSpec("product_xy", noise_half_width=0.3), seed=2)
    assert np.all(C[0] == 0)
    assert np.all(C[1:] > 0)


def test_weight_moments():
    x, y = np.linspace(0, 1, 100), np.linspace(0, 1, 100)
    samples = np.array([sample_weights(x, y, HarvestSpec("constant", c0=1.0, noise_half_width=0.5),
                                       seed=s)[17, 42] for s in range(10_000)])
    se = samples.std(ddof=1) / np.sqrt(samples.size)
    assert abs(samples.mean() - 1 / 200) < 3 * se
    # Var of mean*(1+U), U ~ U(-1/2, 1/2), scaled by (n+m)^2 is 1/12
    assert 200 ** 2 * samples.var(ddof=1) <= 1 / 12 * 1.05


def test_noise_half_width_bounds():
    with pytest.raises(ConfigError):
        HarvestSpec("constant", noise_half_width=1.2)


def test_single_block_matches_constant():
    x, y = sample_traits(30, 20, seed=9)
    blk = BlockGraphon((0.0, 1.0), (0.0, 1.0), ((0.35,),))
    assert np.array_equal(sample_graph(x, y, blk, seed=4), sample_graph(x, y, ConstantGraphon(0.35), seed=4))


def test_block_graphon_cut_points():
    blk = BlockGraphon((0.0, 0.5, 1.0), (0.0, 1.0), ((0.1,), (0.9,)))
    assert blk(0.25, 0.3) == pytest.approx(0.1)
    assert blk(0.5, 0.3) == pytest.approx(0.9)  # cut point belongs to the upper block
    assert blk(1.0, 1.0) == pytest.approx(0.9)


def test_block_graphon_validation():
    with pytest.raises(ConfigError):
        BlockGraphon((0.0, 0.6, 0.5, 1.0), (0.0, 1.0), ((0.1,), (0.2,), (0.3,)))
    with pytest.raises(ConfigError):
        BlockGraphon((0.0, 1.0), (0.0, 1.0), ((0.1, 0.2),))


def test_tabulated_bilinear_and_clamped():
    tg = TabulatedGraphon(((0.0, 1.0), (1.0, 1.0)))
    assert tg(0.5, 0.5) == pytest.approx(0.75)
    assert tg(0.0, 0.0) == pytest.approx(0.0)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 12), m=st.integers(1, 12), seed=st.integers(0, 2**32),
       phi=st.floats(0.0, 1.0), noise=st.floats(0.0, 1.0))
def test_community_invariants(n, m, seed, phi, noise):
    com = sample_community(n, m, ConstantGraphon(phi), HarvestSpec("constant", c0=2.0, noise_half_width=noise),
                           seed=seed)
    assert set(np.unique(com.G)) <= {0, 1}
    assert np.all(com.C >= 0)
    assert np.all(np.diff(com.x) >= 0) and np.all(np.diff(com.y) >= 0)
    again = sample_community(n, m, ConstantGraphon(phi), HarvestSpec("constant", c0=2.0, noise_half_width=noise),
                             seed=seed)
    for a, b in ((com.x, again.x), (com.y, again.y), (com.G, again.G), (com.C, again.C)):
        assert np.array_equal(a, b)


def test_json_and_edge_csv_roundtrip(tmp_path):
    com = sample_community(5, 4, ConstantGraphon(0.5), HarvestSpec("product_xy"), seed=21)
    com.write_json(tmp_path / "c.json")
    doc = json.loads((tmp_path / "c.json").read_text())
    assert set(doc) == {"n", "m", "x", "y", "edges", "seed", "spec"}
    back = Community.from_json(doc)
    assert np.array_equal(back.weights, com.weights)
    com.write_edge_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "i,j,weight" and len(lines) == com.G.sum() + 1


def test_graphon_from_dict_kinds():
    assert graphon_from_dict({"kind": "constant", "phi0": 0.2})(0.1, 0.9) == pytest.approx(0.2)
    assert graphon_from_dict({"kind": "product"})(0.5, 0.4) == pytest.approx(0.2)
    with pytest.raises(ConfigError):
        graphon_from_dict({"kind": "smooth"})


def test_neighbour_lists_match_dense():
    com = sample_community(6, 7, ConstantGraphon(0.5), HarvestSpec("constant", c0=1.0, noise_half_width=0.5),
                           seed=8)
    ptr, idx, w = com.plant_neighbours()
    dense = np.zeros((6, 7))
    for i in range(6):
        dense[i, idx[ptr[i]:ptr[i + 1]]] = w[ptr[i]:ptr[i + 1]]
    assert np.array_equal(dense, com.weights)
