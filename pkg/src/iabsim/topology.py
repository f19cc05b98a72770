"""Node placement and nearest-neighbour distance analytics.

SBS layouts are drawn from a homogeneous Poisson point process on a disc
with the ABS at the disc centre. Random numbers come from numpy's
``PCG64`` bit generator (``numpy.random.default_rng(seed)``), whose output
sequence is fixed by the PCG-XSL-RR 128/64 definition and is identical
across platforms for a given integer seed.

No edge correction is applied: SBSs near the boundary have truncated
neighbourhoods, which biases nearest-neighbour distances upward when the
disc holds only a handful of points.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import integrate, spatial

from .errors import ParameterError

ABS_ID = 0


@dataclass(frozen=True)
class Region:
    """Circular cell. ``center`` in metres, ``radius`` in metres."""

    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 100.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ParameterError(f"region radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def enclosed_area(self) -> float:
        return math.pi * self.radius**2

    def contains(self, points, atol: float = 1e-9) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1])
        return d <= self.radius * (1 + atol)


@dataclass(frozen=True, eq=False)
class Topology:
    """ABS position plus ordered SBS positions.

    Node ids follow the CSV convention: id 0 is the ABS, SBS ``i`` (1-based)
    sits at row ``i - 1`` of ``sbs_positions``. ``distances`` is indexed the
    same way, so ``distances[0, i]`` is the ABS to SBS ``i`` distance.
    """

    abs_position: tuple[float, float]
    sbs_positions: np.ndarray

    def __post_init__(self):
        sbs = np.asarray(self.sbs_positions, dtype=float).reshape(-1, 2)
        sbs.setflags(write=False)
        object.__setattr__(self, "sbs_positions", sbs)
        object.__setattr__(self, "abs_position", (float(self.abs_position[0]), float(self.abs_position[1])))

    @cached_property
    def distances(self) -> np.ndarray:
        """Read-only (N+1, N+1) Euclidean distance matrix, built on first use."""
        pts = self.all_positions()
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff**2).sum(axis=-1))
        dist.setflags(write=False)
        return dist

    @property
    def n_sbs(self) -> int:
        return len(self.sbs_positions)

    def all_positions(self) -> np.ndarray:
        """(N+1, 2) array, row 0 = ABS."""
        return np.vstack([np.asarray(self.abs_position)[None, :], self.sbs_positions])

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return self.abs_position == other.abs_position and np.array_equal(
            self.sbs_positions, other.sbs_positions
        )

    def __hash__(self):
        return hash((self.abs_position, self.sbs_positions.tobytes()))

    def nearest_neighbor_distances(self) -> np.ndarray:
        """Distance from each SBS to its nearest other SBS (inf if alone)."""
        if self.n_sbs < 2:
            return np.full(self.n_sbs, np.inf)
        d, _ = spatial.cKDTree(self.sbs_positions).query(self.sbs_positions, k=2)
        return d[:, 1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "x", "y"])
            for node, (x, y) in enumerate(self.all_positions()):
                writer.writerow([node, repr(float(x)), repr(float(y))])

    @classmethod
    def from_csv(cls, path: str | Path) -> "Topology":
        rows = {}
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["id", "x", "y"]:
                raise ParameterError(f"{path}: expected header 'id,x,y'")
            for row in reader:
                node = int(row["id"])
                if node in rows:
                    raise ParameterError(f"{path}: duplicate id {node}")
                rows[node] = (float(row["x"]), float(row["y"]))
        if ABS_ID not in rows:
            raise ParameterError(f"{path}: missing ABS row (id 0)")
        n = len(rows) - 1
        if sorted(rows) != list(range(n + 1)):
            raise ParameterError(f"{path}: ids must be contiguous 0..{n}")
        sbs = np.array([rows[i] for i in range(1, n + 1)], dtype=float).reshape(-1, 2)
        return cls(abs_position=rows[ABS_ID], sbs_positions=sbs)


def sample_ppp(region: Region, lam: float, seed: int) -> Topology:
    """Draw a homogeneous PPP of intensity ``lam`` (per m^2) inside ``region``.

    The count is Poisson(lam * area); points are placed with radius
    ``R*sqrt(u)`` and angle ``2*pi*v`` so they are uniform on the disc.
    """
    if lam < 0 or not math.isfinite(lam):
        raise ParameterError(f"intensity must be non-negative, got {lam}")
    rng = np.random.default_rng(seed)
    n = int(rng.poisson(lam * region.enclosed_area()))
    u = rng.random(n)
    v = rng.random(n)
    rad = region.radius * np.sqrt(u)
    ang = 2.0 * math.pi * v
    pts = np.column_stack([region.center[0] + rad * np.cos(ang), region.center[1] + rad * np.sin(ang)])
    return Topology(abs_position=region.center, sbs_positions=pts)


def count_in_disc(topology: Topology, center, radius: float) -> int:
    if radius < 0:
        raise ParameterError(f"radius must be non-negative, got {radius}")
    if topology.n_sbs == 0:
        return 0
    p = topology.sbs_positions
    d = np.hypot(p[:, 0] - center[0], p[:, 1] - center[1])
    return int(np.count_nonzero(d <= radius))


def disc_count_pmf(n: int, lam: float, r: float) -> float:
    """P(a disc of radius r holds exactly n points)."""
    if n < 0:
        raise ParameterError("n must be non-negative")
    mu = lam * math.pi * r * r
    return math.exp(n * math.log(mu) - mu - math.lgamma(n + 1)) if mu > 0 else float(n == 0)


def prob_at_least(n: int, lam: float, r: float) -> float:
    """P(a disc of radius r holds at least n points)."""
    return 1.0 - sum(disc_count_pmf(j, lam, r) for j in range(n))


def _check_nn_args(n: int, lam: float) -> None:
    if int(n) != n or n < 1:
        raise ParameterError(f"neighbour rank must be a positive integer, got {n}")
    if not lam > 0:
        raise ParameterError(f"intensity must be positive, got {lam}")


def nn_distance_pdf(n: int, lam: float, r: float) -> float:
    """Density of the distance to the n-th nearest point of a planar PPP."""
    _check_nn_args(n, lam)
    if r < 0:
        raise ParameterError(f"distance must be non-negative, got {r}")
    if r == 0:
        return 0.0
    a = lam * math.pi
    log_val = math.log(2.0) + n * math.log(a) - math.lgamma(n) + (2 * n - 1) * math.log(r) - a * r * r
    return math.exp(log_val)


def expected_nn_distance(n: int, lam: float) -> float:
    """Mean distance to the n-th nearest point, by adaptive quadrature on [0, 10/sqrt(lam)].

    For n >= 2 the upper limit is widened so the truncated tail stays negligible.
    """
    _check_nn_args(n, lam)
    upper = 10.0 / math.sqrt(lam) * max(1.0, math.sqrt(n))
    val, _ = integrate.quad(lambda r: r * nn_distance_pdf(n, lam, r), 0.0, upper, epsabs=1e-13, epsrel=1e-11, limit=200)
    return val
