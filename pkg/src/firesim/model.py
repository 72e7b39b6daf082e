"""Rate profiles, model configuration and the shared Poisson noise field.

The noise field is the single source of randomness: every process (green,
fire, blue) is a deterministic functional of it, which is what makes the
pathwise coupling experiments possible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import rng


class CapExceeded(Exception):
    """A resource guard (site window, spatial window or time cap) was hit.

    Signals the cap, not a model error: callers may enlarge the cap and
    retry, or flag the replication as censored.
    """


@dataclass(frozen=True)
class RateProfile:
    """Occupation-rate sequence {lambda_x}, uniformly bounded in [c1, c2]."""

    kind: str                      # constant | explicit | periodic | iid-uniform
    c1: float
    c2: float
    values: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.c1 <= self.c2):
            raise ValueError(f"need 0 < c1 <= c2, got c1={self.c1}, c2={self.c2}")
        if self.kind in ("explicit", "periodic"):
            if not self.values:
                raise ValueError(f"{self.kind} profile needs a nonempty value list")
            vals = np.asarray(self.values, dtype=float)
            if np.any(vals < self.c1) or np.any(vals > self.c2):
                raise ValueError("profile values must lie in [c1, c2]")
        elif self.kind == "constant":
            if len(self.values) != 1:
                raise ValueError("constant profile needs exactly one value")
            v = self.values[0]
            if not (self.c1 <= v <= self.c2):
                raise ValueError("constant rate must lie in [c1, c2]")
        elif self.kind != "iid-uniform":
            raise ValueError(f"unknown profile kind {self.kind!r}")

    # -- constructors -------------------------------------------------------
    @staticmethod
    def constant(lam: float) -> "RateProfile":
        return RateProfile("constant", c1=lam, c2=lam, values=(lam,))

    @staticmethod
    def explicit(values: Sequence[float], c1: float, c2: float) -> "RateProfile":
        return RateProfile("explicit", c1=c1, c2=c2, values=tuple(values))

    @staticmethod
    def periodic(values: Sequence[float], c1: float, c2: float) -> "RateProfile":
        return RateProfile("periodic", c1=c1, c2=c2, values=tuple(values))

    @staticmethod
    def iid_uniform(c1: float, c2: float, seed: int) -> "RateProfile":
        return RateProfile("iid-uniform", c1=c1, c2=c2, seed=seed)

    # -- queries ------------------------------------------------------------
    def rate_at(self, x: int) -> float:
        """lambda_x; pure in (profile, x)."""
        return float(self.rates(x, x + 1)[0])

    def rates(self, start: int, stop: int) -> np.ndarray:
        """Vector of lambda_x for x in [start, stop)."""
        if start < 0 or stop < start:
            raise ValueError("need 0 <= start <= stop")
        n = stop - start
        if self.kind == "constant":
            return np.full(n, self.values[0], dtype=float)
        if self.kind == "explicit":
            if stop > len(self.values):
                raise ValueError(
                    f"explicit profile has {len(self.values)} values, site {stop - 1} requested")
            return np.asarray(self.values[start:stop], dtype=float)
        if self.kind == "periodic":
            idx = np.arange(start, stop) % len(self.values)
            return np.asarray(self.values, dtype=float)[idx]
        # iid-uniform: recomputed, never memoized; deterministic in (seed, x)
        u = rng.counter_uniform(self.seed, rng.profile_stream(np.arange(start, stop)), 0)
        return self.c1 + (self.c2 - self.c1) * np.atleast_1d(u)


@dataclass(frozen=True)
class ModelConfig:
    """Process configuration for either the lattice or the continuous model."""

    space: str = "discrete"               # discrete | continuous
    r: int = 1                            # fire range (discrete)
    profile: Optional[RateProfile] = None  # discrete rates; default constant 1
    intensity: float = 1.0                # continuous: rate per unit length-time
    connect_distance: float = 1.0
    ignite_distance: float = 1.0

    def __post_init__(self):
        if self.space not in ("discrete", "continuous"):
            raise ValueError(f"unknown space {self.space!r}")
        if self.space == "discrete":
            if self.r < 1:
                raise ValueError("range r must be >= 1")
            if self.profile is None:
                object.__setattr__(self, "profile", RateProfile.constant(1.0))
        else:
            if self.intensity <= 0 or self.connect_distance <= 0 or self.ignite_distance <= 0:
                raise ValueError("continuous parameters must be positive")


# Poisson sampling by counter-based inversion; cell means are O(1) so the
# sequential search terminates quickly.
def _cell_poisson_count(seed: int, stream, mean: float) -> int:
    u = rng.counter_uniform(seed, stream, 0)
    p = np.exp(-mean)
    acc = p
    k = 0
    while u > acc:
        k += 1
        p *= mean / k
        acc += p
        if k > 1000:   # mean is O(1); unreachable in practice
            break
    return k


class NoiseField:
    """Reproducible Poisson randomness shared by every coupled process.

    Discrete: per-site ordered arrival times, lazily extendable in both the
    site index and the time horizon.  Site x's arrivals are the partial sums
    of unit-rate exponentials divided by lambda_x, drawn from the counter
    stream of (master_seed, x).  Consequently scaling every rate by c > 0
    divides every arrival time by c pathwise.

    Continuous: a unit-intensity space-time Poisson point set, generated per
    unit cell from (master_seed, cell), so window growth never reshuffles
    previously exposed points.
    """

    def __init__(self, master_seed: int, config: ModelConfig):
        self.master_seed = int(master_seed)
        self.config = config
        self._unit_sums: dict[int, np.ndarray] = {}   # site -> cumsum of unit exps
        self._cells: dict[tuple[int, int], np.ndarray] = {}

    # ----- discrete -------------------------------------------------------
    def _unit_arrivals(self, x: int, unit_horizon: float) -> np.ndarray:
        """Unit-rate arrival times of site x's stream covering unit_horizon."""
        cur = self._unit_sums.get(x)
        have = 0 if cur is None else len(cur)
        last = 0.0 if have == 0 else float(cur[-1])
        while last <= unit_horizon:
            chunk = max(16, int(unit_horizon - last) + 8)
            gaps = rng.counter_exponential(
                self.master_seed, rng.site_stream(x), np.arange(have, have + chunk))
            new = last + np.cumsum(np.atleast_1d(gaps))
            cur = new if cur is None else np.concatenate([cur, new])
            have = len(cur)
            last = float(cur[-1])
        self._unit_sums[x] = cur
        return cur

    def arrivals_before(self, x: int, t: float) -> np.ndarray:
        """All arrival times of site x in [0, t], strictly increasing."""
        if t < 0:
            raise ValueError("t must be >= 0")
        lam = self.config.profile.rate_at(x)
        unit = self._unit_arrivals(x, t * lam)
        times = unit / lam
        return times[times <= t]

    def next_arrival_after(self, x: int, t: float) -> float:
        """First arrival of site x strictly after t."""
        lam = self.config.profile.rate_at(x)
        unit = self._unit_arrivals(x, t * lam)
        times = unit / lam
        i = np.searchsorted(times, t, side="right")
        while i >= len(times):
            unit = self._unit_arrivals(x, float(unit[-1]) + 16.0)
            times = unit / lam
            i = np.searchsorted(times, t, side="right")
        return float(times[i])

    def first_arrivals(self, start: int, stop: int) -> np.ndarray:
        """Vector of first arrival times for sites [start, stop).

        Fast path equal by construction to arrivals_before(x, ...)[0].
        """
        xs = np.arange(start, stop)
        lam = self.config.profile.rates(start, stop)
        gaps = np.atleast_1d(rng.counter_exponential(self.master_seed, rng.site_stream(xs), 0))
        return gaps / lam

    def next_arrivals_after(self, start: int, stop: int, t: float) -> np.ndarray:
        """First arrival strictly after t for each site in [start, stop).

        Batch counterpart of next_arrival_after; identical values.  Sites
        already materialized in the per-site cache are answered from it so
        the two code paths never disagree.
        """
        n = stop - start
        if n <= 0:
            return np.empty(0)
        lam = self.config.profile.rates(start, stop)
        out = np.empty(n)
        todo = []
        for k, x in enumerate(range(start, stop)):
            if x in self._unit_sums:
                out[k] = self.next_arrival_after(x, t)
            else:
                todo.append(k)
        if todo:
            todo = np.asarray(todo)
            xs = start + todo
            lam_t = lam[todo]
            m = max(4, int(np.ceil(t * self.config.profile.c2 + 8 * np.sqrt(t * self.config.profile.c2 + 1) + 8)))
            streams = rng.site_stream(xs)
            gaps = rng.counter_uniform(self.master_seed, streams[:, None], np.arange(m)[None, :])
            unit = np.cumsum(-np.log(gaps), axis=1)
            times = unit / lam_t[:, None]
            idx = np.argmax(times > t, axis=1)
            found = times[np.arange(len(xs)), idx] > t
            out[todo[found]] = times[np.arange(len(xs))[found], idx[found]]
            for k in todo[~found]:
                out[k] = self.next_arrival_after(start + int(k), t)
        return out

    # ----- continuous -----------------------------------------------------
    def _cell_points(self, i: int, j: int) -> np.ndarray:
        """(n, 2) array of (position, time) points of unit cell (i, j)."""
        key = (i, j)
        pts = self._cells.get(key)
        if pts is None:
            stream = rng.cell_stream(i, j)
            n = _cell_poisson_count(self.master_seed, stream, self.config.intensity)
            if n == 0:
                pts = np.empty((0, 2))
            else:
                c = np.arange(1, 2 * n + 1)
                u = np.atleast_1d(rng.counter_uniform(self.master_seed, stream, c))
                pts = np.column_stack([i + u[:n], j + u[n:]])
            self._cells[key] = pts
        return pts

    def points_in(self, a: float, b: float, s: float, t: float) -> np.ndarray:
        """Points of the space-time Poisson process in [a,b] x [s,t].

        Returned as an (n, 2) array ordered by position; counts over
        disjoint regions are independent and window extension preserves
        previously returned points.
        """
        if a > b or s > t:
            raise ValueError("need a <= b and s <= t")
        if a == b or s == t:
            return np.empty((0, 2))
        blocks = []
        for i in range(int(np.floor(a)), int(np.floor(b)) + 1):
            for j in range(int(np.floor(s)), int(np.floor(t)) + 1):
                pts = self._cell_points(i, j)
                if len(pts):
                    blocks.append(pts)
        if not blocks:
            return np.empty((0, 2))
        pts = np.concatenate(blocks)
        keep = (pts[:, 0] >= a) & (pts[:, 0] <= b) & (pts[:, 1] >= s) & (pts[:, 1] <= t)
        pts = pts[keep]
        return pts[np.lexsort((pts[:, 1], pts[:, 0]))]
