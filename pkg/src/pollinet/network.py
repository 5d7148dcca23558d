"""Trait-structured bipartite random communities.

A community is ``n`` plant species with traits ``x`` and ``m`` pollinator
species with traits ``y`` (both in ``[0, 1]``), a Bernoulli adjacency matrix
``G`` whose edge probabilities come from a graphon ``phi(x, y)``, and a matrix
of interaction weights ``C`` whose means are ``c(x, y) / (n + m)``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator

from . import _rng
from .errors import ConfigError

__all__ = [
    "Graphon",
    "ConstantGraphon",
    "ProductGraphon",
    "BlockGraphon",
    "TabulatedGraphon",
    "HarvestSpec",
    "Community",
    "DegreeStats",
    "sample_traits",
    "sample_graph",
    "sample_weights",
    "sample_community",
    "degree_stats",
    "graphon_from_dict",
    "harvest_from_dict",
]


def bilinear(table):
    """Bilinear interpolant of ``table`` sampled on a uniform grid of [0,1]^2."""
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or min(table.shape) < 2:
        raise ConfigError("tabulated grid must be 2-D with at least 2 points per axis")
    interp = RegularGridInterpolator(
        (np.linspace(0.0, 1.0, table.shape[0]), np.linspace(0.0, 1.0, table.shape[1])),
        table,
        method="linear",
    )

    def evaluate(x, y):
        x, y = np.broadcast_arrays(np.clip(x, 0.0, 1.0), np.clip(y, 0.0, 1.0))
        pts = np.stack([x.ravel(), y.ravel()], axis=-1)
        return interp(pts).reshape(x.shape)

    return evaluate


# --------------------------------------------------------------------------
# graphons


class Graphon:
    """Edge probability ``phi(x, y)`` between a plant and a pollinator trait."""

    def __call__(self, x, y):
        raise NotImplementedError

    def matrix(self, x, y):
        """``phi(x_i, y_j)`` for all pairs, shape ``(len(x), len(y))``."""
        return np.asarray(self(np.asarray(x, float)[:, None], np.asarray(y, float)[None, :]), dtype=float)

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantGraphon(Graphon):
    phi0: float

    def __post_init__(self):
        if not 0.0 <= self.phi0 <= 1.0:
            raise ConfigError(f"constant graphon probability {self.phi0} outside [0, 1]")

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(x, y)
        return np.full(x.shape, float(self.phi0))

    def to_dict(self):
        return {"kind": "constant", "phi0": self.phi0}


@dataclass(frozen=True)
class ProductGraphon(Graphon):
    """``phi(x, y) = x * y``; produces nested networks."""

    def __call__(self, x, y):
        return np.asarray(x, float) * np.asarray(y, float)

    def to_dict(self):
        return {"kind": "product"}


@dataclass(frozen=True)
class BlockGraphon(Graphon):
    """Stochastic block model: piecewise-constant probabilities on a grid of blocks.

    ``row_bounds`` and ``col_bounds`` are cut points ``0 = b_0 < ... < b_r = 1``.
    A trait equal to an interior cut point belongs to the upper block.
    """

    row_bounds: tuple
    col_bounds: tuple
    probs: tuple

    def __post_init__(self):
        rb = np.asarray(self.row_bounds, float)
        cb = np.asarray(self.col_bounds, float)
        pr = np.asarray(self.probs, float)
        for name, b in (("row", rb), ("col", cb)):
            if b.ndim != 1 or b.size < 2 or b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0):
                raise ConfigError(f"block graphon {name} boundaries must increase strictly from 0 to 1")
        if pr.shape != (rb.size - 1, cb.size - 1):
            raise ConfigError(
                f"block probabilities have shape {pr.shape}, expected {(rb.size - 1, cb.size - 1)}"
            )
        if np.any(pr < 0) or np.any(pr > 1):
            raise ConfigError("block probabilities must lie in [0, 1]")
        object.__setattr__(self, "row_bounds", tuple(rb))
        object.__setattr__(self, "col_bounds", tuple(cb))
        object.__setattr__(self, "probs", tuple(map(tuple, pr)))

    def __call__(self, x, y):
        rb = np.asarray(self.row_bounds)
        cb = np.asarray(self.col_bounds)
        pr = np.asarray(self.probs)
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        bi = np.clip(np.searchsorted(rb, x, side="right") - 1, 0, pr.shape[0] - 1)
        bj = np.clip(np.searchsorted(cb, y, side="right") - 1, 0, pr.shape[1] - 1)
        return pr[bi, bj]

    def to_dict(self):
        return {
            "kind": "block",
            "row_bounds": list(self.row_bounds),
            "col_bounds": list(self.col_bounds),
            "probs": [list(r) for r in self.probs],
        }


@dataclass(frozen=True)
class TabulatedGraphon(Graphon):
    """Probabilities on a uniform grid over [0,1]^2, bilinear in between, clamped to [0,1]."""

    grid: tuple

    def __post_init__(self):
        g = np.asarray(self.grid, float)
        if np.any(g < 0) or np.any(g > 1):
            raise ConfigError("tabulated graphon values must lie in [0, 1]")
        object.__setattr__(self, "grid", tuple(map(tuple, g)))
        object.__setattr__(self, "_f", bilinear(g))

    def __call__(self, x, y):
        return np.clip(self._f(x, y), 0.0, 1.0)

    def to_dict(self):
        return {"kind": "tabulated", "grid": [list(r) for r in self.grid]}


def graphon_from_dict(d):
    kind = d.get("kind")
    if kind == "constant":
        return ConstantGraphon(float(d["phi0"]))
    if kind == "product":
        return ProductGraphon()
    if kind == "block":
        return BlockGraphon(tuple(d["row_bounds"]), tuple(d["col_bounds"]), tuple(map(tuple, d["probs"])))
    if kind == "tabulated":
        return TabulatedGraphon(tuple(map(tuple, d["grid"])))
    raise ConfigError(f"unknown graphon kind {kind!r}")


# --------------------------------------------------------------------------
# harvesting weights


_HARVEST_KINDS = ("constant", "product_xy", "product_x_one_minus_y", "tabulated")


@dataclass(frozen=True)
class HarvestSpec:
    """Harvesting function ``c(x, y) >= 0`` plus the multiplicative noise level.

    Sampled weights are ``c(x_i, y_j) / (n + m) * (1 + U_ij)`` with
    ``U_ij ~ Uniform(-noise_half_width, noise_half_width)``.
    """

    kind: str = "constant"
    c0: float = 1.0
    grid: tuple | None = None
    noise_half_width: float = 0.0

    def __post_init__(self):
        if self.kind not in _HARVEST_KINDS:
            raise ConfigError(f"unknown harvest kind {self.kind!r}")
        if not 0.0 <= self.noise_half_width <= 1.0:
            raise ConfigError("noise_half_width must lie in [0, 1]")
        if self.c0 < 0:
            raise ConfigError("harvest constant c0 must be nonnegative")
        if self.kind == "tabulated":
            g = np.asarray(self.grid, float)
            if np.any(g < 0):
                raise ConfigError("tabulated harvest values must be nonnegative")
            object.__setattr__(self, "grid", tuple(map(tuple, g)))
            object.__setattr__(self, "_f", bilinear(g))

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        if self.kind == "constant":
            return np.full(x.shape, float(self.c0))
        if self.kind == "product_xy":
            return x * y
        if self.kind == "product_x_one_minus_y":
            return x * (1.0 - y)
        return np.maximum(self._f(x, y), 0.0)

    def matrix(self, x, y):
        return self(np.asarray(x, float)[:, None], np.asarray(y, float)[None, :])

    def to_dict(self):
        d = {"kind": self.kind, "noise_half_width": self.noise_half_width}
        if self.kind == "constant":
            d["c0"] = self.c0
        if self.kind == "tabulated":
            d["grid"] = [list(r) for r in self.grid]
        return d


def harvest_from_dict(d):
    kind = d.get("kind", "constant")
    grid = d.get("grid")
    return HarvestSpec(
        kind=kind,
        c0=float(d.get("c0", 1.0)),
        grid=tuple(map(tuple, grid)) if grid is not None else None,
        noise_half_width=float(d.get("noise_half_width", 0.0)),
    )


# --------------------------------------------------------------------------
# community


@dataclass
class Community:
    """Sampled random environment shared by every scale of the model."""

    x: np.ndarray
    y: np.ndarray
    G: np.ndarray
    C: np.ndarray
    seed: int = 0
    spec: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.G = np.asarray(self.G, dtype=np.int8)
        self.C = np.asarray(self.C, dtype=float)
        if self.G.shape != (self.n, self.m) or self.C.shape != (self.n, self.m):
            raise ConfigError("adjacency and weight matrices must have shape (n, m)")

    @property
    def n(self):
        return self.x.size

    @property
    def m(self):
        return self.y.size

    @property
    def weights(self):
        """Effective interaction matrix ``G * C``; only this enters the dynamics."""
        return self.G * self.C

    def plant_neighbours(self):
        """CSR arrays ``(indptr, indices, data)`` of pollinators adjacent to each plant."""
        W = sparse.csr_matrix(self.weights)
        W.eliminate_zeros()
        return W.indptr, W.indices, W.data

    def pollinator_neighbours(self):
        """CSR arrays of plants adjacent to each pollinator."""
        W = sparse.csr_matrix(self.weights.T)
        W.eliminate_zeros()
        return W.indptr, W.indices, W.data

    def edges(self):
        i, j = np.nonzero(self.G)
        return [(int(a) + 1, int(b) + 1, float(self.C[a, b])) for a, b in zip(i, j)]

    def write_edge_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "weight"])
            for row in self.edges():
                w.writerow([row[0], row[1], repr(row[2])])

    def to_json(self):
        return {
            "n": self.n,
            "m": self.m,
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "edges": [list(e) for e in self.edges()],
            "seed": int(self.seed),
            "spec": self.spec,
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def from_json(cls, doc):
        n, m = doc["n"], doc["m"]
        G = np.zeros((n, m), dtype=np.int8)
        C = np.zeros((n, m))
        for i, j, w in doc["edges"]:
            G[i - 1, j - 1] = 1
            C[i - 1, j - 1] = w
        return cls(np.array(doc["x"]), np.array(doc["y"]), G, C, doc.get("seed", 0), doc.get("spec", {}))


def _check_inverse_cdf(f: Callable, name):
    probe = np.linspace(0.0, 1.0, 1001)
    vals = np.asarray(f(probe), dtype=float)
    if vals.shape != probe.shape:
        vals = np.array([float(f(u)) for u in probe])
    if np.any(np.diff(vals) < 0):
        raise ConfigError(f"{name} inverse CDF is not monotone nondecreasing")
    if np.any(vals < 0) or np.any(vals > 1):
        raise ConfigError(f"{name} inverse CDF leaves [0, 1]")


def _apply(f, u):
    vals = np.asarray(f(u), dtype=float)
    if vals.shape != u.shape:
        vals = np.array([float(f(v)) for v in u])
    return vals


def identity(u):
    return np.asarray(u, dtype=float)


def sample_traits(n, m, plant_inv_cdf=identity, poll_inv_cdf=identity, seed=0):
    """Sorted plant and pollinator traits, ``F^{-1}`` applied to sorted uniforms."""
    if n < 1 or m < 1:
        raise ConfigError("need at least one plant and one pollinator species")
    _check_inverse_cdf(plant_inv_cdf, "plant")
    _check_inverse_cdf(poll_inv_cdf, "pollinator")
    rng = _rng.stream(seed, _rng.TRAITS)
    u = np.sort(rng.random(n))
    v = np.sort(rng.random(m))
    return _apply(plant_inv_cdf, u), _apply(poll_inv_cdf, v)


def sample_graph(x, y, graphon: Graphon, seed=0):
    """Adjacency with independent ``Bernoulli(phi(x_i, y_j))`` entries."""
    phi = graphon.matrix(x, y)
    if np.any(~np.isfinite(phi)) or np.any(phi < 0) or np.any(phi > 1):
        raise ConfigError("graphon evaluates outside [0, 1]")
    rng = _rng.stream(seed, _rng.GRAPH)
    return (rng.random(phi.shape) < phi).astype(np.int8)


def sample_weights(x, y, harvest: HarvestSpec, seed=0):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n, m = x.size, y.size
    mean = harvest.matrix(x, y) / (n + m)
    rng = _rng.stream(seed, _rng.WEIGHTS)
    u = harvest.noise_half_width * (2.0 * rng.random((n, m)) - 1.0)
    return mean * (1.0 + u)


def sample_community(n, m, graphon, harvest, seed=0, plant_inv_cdf=identity, poll_inv_cdf=identity):
    x, y = sample_traits(n, m, plant_inv_cdf, poll_inv_cdf, seed)
    G = sample_graph(x, y, graphon, seed)
    C = sample_weights(x, y, harvest, seed)
    spec = {"graphon": graphon.to_dict(), "harvest": harvest.to_dict()}
    return Community(x, y, G, C, seed, spec)


@dataclass
class DegreeStats:
    plant_degrees: np.ndarray
    pollinator_degrees: np.ndarray
    plant_histogram: np.ndarray  # entry d counts plants of degree d, d = 0..m
    pollinator_histogram: np.ndarray
    edges: int


def degree_stats(G):
    G = np.asarray(G)
    n, m = G.shape
    dp = G.sum(axis=1).astype(int)
    da = G.sum(axis=0).astype(int)
    return DegreeStats(dp, da, np.bincount(dp, minlength=m + 1), np.bincount(da, minlength=n + 1), int(G.sum()))
