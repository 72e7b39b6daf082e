"""Counter-based random number streams.

Every random quantity in the simulator is a pure function of
(master_seed, stream, counter).  Streams identify logical sources of
randomness (a lattice site, a space-time cell, a replication) and the
counter indexes draws within a stream, so values never depend on query
order, window growth, or worker scheduling.

The generator is the splitmix64 finalizer applied twice to an odd-affine
combination of the three inputs; statistical independence of disjoint
streams is checked empirically in the test suite.
"""

from __future__ import annotations

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_A = np.uint64(0x9E3779B97F4A7C15)   # golden-ratio increment
_B = np.uint64(0xBF58476D1CE4E5B9)
_C = np.uint64(0x94D049BB133111EB)
_D = np.uint64(0xD6E8FEB86659FD93)

# stream-id salts keeping the logical sources disjoint
SALT_SITE = 0x100000000
SALT_CELL = 0x200000000
SALT_PROFILE = 0x300000000
SALT_REP = 0x400000000


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _B
    z = (z ^ (z >> np.uint64(27))) * _C
    return z ^ (z >> np.uint64(31))


def counter_uniform(seed, stream, counter):
    """Uniform(0,1) draw(s) for (seed, stream, counter); broadcasts."""
    old = np.seterr(over="ignore")
    try:
        s = np.asarray(seed, dtype=np.uint64)
        st = np.asarray(stream, dtype=np.uint64)
        c = np.asarray(counter, dtype=np.uint64)
        z = s * _A + st * _C + c * _D + _B
        z = _mix(_mix(z))
    finally:
        np.seterr(**old)
    # 53 significant bits, strictly inside (0, 1)
    u = ((z >> np.uint64(11)).astype(np.float64) + 0.5) / 9007199254740992.0
    return u if u.shape else float(u)


def counter_exponential(seed, stream, counter):
    """Unit-rate exponential draw(s), same determinism contract."""
    return -np.log(counter_uniform(seed, stream, counter))


def site_stream(x) -> np.ndarray:
    """Stream id for lattice site x (discrete model)."""
    old = np.seterr(over="ignore")
    try:
        return (np.asarray(x, dtype=np.uint64) + np.uint64(SALT_SITE)) * _A
    finally:
        np.seterr(**old)


def cell_stream(i, j):
    """Stream id for the unit space-time cell [i,i+1)x[j,j+1)."""
    old = np.seterr(over="ignore")
    try:
        i = np.asarray(i, dtype=np.uint64)
        j = np.asarray(j, dtype=np.uint64)
        return (i * _B + j * _C + np.uint64(SALT_CELL)) * _A
    finally:
        np.seterr(**old)


def profile_stream(x):
    """Stream id for sampling the rate of site x (iid-uniform profiles)."""
    old = np.seterr(over="ignore")
    try:
        return (np.asarray(x, dtype=np.uint64) + np.uint64(SALT_PROFILE)) * _C
    finally:
        np.seterr(**old)


def replication_seed(master_seed: int, index: int) -> int:
    """Derived master seed for replication `index`; independent across indices."""
    old = np.seterr(over="ignore")
    try:
        z = (np.uint64(master_seed) * _A
             + np.uint64(index) * _C
             + np.uint64(SALT_REP))
        return int(_mix(_mix(z)))
    finally:
        np.seterr(**old)


def rep_rng(master_seed: int, index: int) -> np.random.Generator:
    """numpy Generator for replication-local bulk sampling."""
    return np.random.Generator(np.random.Philox(key=replication_seed(master_seed, index)))
