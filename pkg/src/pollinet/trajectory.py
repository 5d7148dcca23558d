"""Time-stamped abundance snapshots shared by every scale."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SCALES = ("IBM", "ODE", "OU", "KINETIC")


def params_digest(obj):
    """Short stable hash of a JSON-serialisable parameter description."""
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Trajectory:
    scale: str
    times: np.ndarray
    values: np.ndarray  # shape (len(times), n + m); plants first
    n: int
    m: int
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scale not in SCALES:
            raise ValueError(f"unknown scale {self.scale!r}")
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.times.size, self.n + self.m):
            raise ValueError(f"values shape {self.values.shape} != {(self.times.size, self.n + self.m)}")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must increase strictly")

    @property
    def plants(self):
        return self.values[:, : self.n]

    @property
    def pollinators(self):
        return self.values[:, self.n:]

    def at(self, t):
        """State at time ``t``, linear in time between stored samples."""
        t = float(t)
        if t <= self.times[0]:
            return self.values[0].copy()
        if t >= self.times[-1]:
            return self.values[-1].copy()
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        t0, t1 = self.times[k], self.times[k + 1]
        w = (t - t0) / (t1 - t0)
        return (1 - w) * self.values[k] + w * self.values[k + 1]

    def header(self):
        return ["t"] + [f"P_{i + 1}" for i in range(self.n)] + [f"A_{j + 1}" for j in range(self.m)]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for t, row in zip(self.times, self.values):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    def write_sidecar(self, path):
        meta = {"scale": self.scale, "n": self.n, "m": self.m, **self.metadata}
        Path(path).write_text(json.dumps(meta, indent=1, sort_keys=True, default=str))

    @classmethod
    def read_csv(cls, path, scale="ODE", metadata=None):
        with open(path) as fh:
            rows = list(csv.reader(fh))
        head = rows[0]
        n = sum(1 for h in head if h.startswith("P_"))
        m = sum(1 for h in head if h.startswith("A_"))
        data = np.array([[float(v) for v in r] for r in rows[1:]])
        return cls(scale, data[:, 0], data[:, 1:], n, m, metadata or {})
