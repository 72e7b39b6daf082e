"""Closed-form reach probabilities, their numerical oracles and the
geometric time ladder.

Everything here is exact (up to floating point) and serves as the oracle
side of the Monte Carlo validators: the union-bound sum f_n, its inverse
t_*, the no-vacant-run probability p_n via four independent routes
(recursion, closed form for r=2, dynamic programming, brute force), the
characteristic root governing the decay of p_n, and the continuous-model
Laplace transform and moments.

Boundary convention: p_n = 1 for 0 <= n < r (sites 1..n cannot hold a
vacant run of length r), under which the recursion yields p_r = 1 - e^{-rt}
and matches both the brute-force event count and the r=2 closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .model import RateProfile


@dataclass(frozen=True)
class ScheduleEntry:
    """One level of the geometric time ladder."""

    k: int
    gamma_k: float    # gamma**k
    n_k: int          # min{n: f_n(gamma^k) >= 1/2}
    T_k: float        # t_*(n_k, 1/2)


# ---------------------------------------------------------------------------
# f_n and friends
# ---------------------------------------------------------------------------

def _window_rate_sums(profile: RateProfile, r: int, n: int) -> np.ndarray:
    """lambda_{i+1} + ... + lambda_{i+r} for i = 0..n-r."""
    lam = profile.rates(1, n + 1)
    c = np.concatenate([[0.0], np.cumsum(lam)])
    return c[r:] - c[:-r]


def f_n(profile: RateProfile, r: int, n: int, t: float) -> float:
    """Union-bound sum over vacant-run windows: an upper bound on
    P(N_green(t) < n); equals n - r + 1 at t = 0."""
    if n < r:
        raise ValueError("need n >= r")
    if t < 0:
        raise ValueError("need t >= 0")
    return float(np.sum(np.exp(-_window_rate_sums(profile, r, n) * t)))


def f_nj(profile: RateProfile, r: int, n: int, j: int, t: float) -> float:
    """The j-th residue-class part of f_n (window starts i = j mod r)."""
    if not 0 <= j <= r - 1:
        raise ValueError("need 0 <= j <= r-1")
    sums = _window_rate_sums(profile, r, n)
    return float(np.sum(np.exp(-sums[j::r] * t)))


def sandwich_bounds(profile: RateProfile, r: int, n: int, t: float) -> tuple[float, float]:
    """(lower, upper) bracket of P(N_green(t) < n)."""
    f = f_n(profile, r, n, t)
    return 1.0 - np.exp(-f / r), min(1.0, f)


def t_star(profile: RateProfile, r: int, n: int, alpha_target: float) -> float:
    """The unique t with f_n(t) = alpha_target; bisection on the monotone
    bracket [0, log((n-r+1)/alpha)/(r c1)]."""
    if not 0 < alpha_target < 1:
        raise ValueError("alpha_target must lie in (0,1)")
    if n < r:
        raise ValueError("need n >= r")
    sums = _window_rate_sums(profile, r, n)
    hi = np.log((n - r + 1) / alpha_target) / (r * profile.c1) + 1.0

    def g(t):
        return float(np.sum(np.exp(-sums * t))) - alpha_target

    return float(brentq(g, 0.0, hi, xtol=1e-13, rtol=1e-15, maxiter=200))


def schedule(profile: RateProfile, r: int, gamma: float, k_max: int,
             n_cap: int = 4_000_000) -> list[ScheduleEntry]:
    """Ladder entries (k, gamma^k, n_k, T_k) for k = 1..k_max."""
    if not 1.0 < gamma < 2.0:
        raise ValueError("gamma must lie in (1, 2)")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    entries = []
    for k in range(1, k_max + 1):
        t = gamma ** k
        # exponential search on the monotone-in-n sum
        n = max(r, 2)
        while f_n(profile, r, n, t) < 0.5:
            n *= 2
            if n > n_cap:
                raise OverflowError(
                    f"n_k exceeds cap {n_cap} at level k={k}; lower k_max")
        terms = np.exp(-_window_rate_sums(profile, r, n) * t)
        partial = np.cumsum(terms)          # partial[i] = f_{r+i}(t)
        idx = int(np.searchsorted(partial, 0.5))
        n_k = r + idx
        T_k = t_star(profile, r, n_k, 0.5)
        assert t <= T_k + 1e-9, "ladder ordering gamma^k <= T_k violated"
        entries.append(ScheduleEntry(k=k, gamma_k=t, n_k=n_k, T_k=T_k))
    return entries


# ---------------------------------------------------------------------------
# reach probabilities p_n
# ---------------------------------------------------------------------------

def product_reach_prob(profile: RateProfile, n: int, t: float) -> float:
    """P(N_green(t) >= n) for the short-range model: the product over sites
    1..n of their occupation probabilities."""
    if n < 1:
        raise ValueError("need n >= 1")
    lam = profile.rates(1, n + 1)
    return float(np.prod(-np.expm1(-lam * t)))


def p_n_homog(alpha: float, r: int, n: int) -> float:
    """P(no vacant run of length r among n sites), site vacancy alpha,
    via the linear recursion with boundary p_n = 1 for n < r."""
    if not 0 <= alpha <= 1:
        raise ValueError("alpha must lie in [0,1]")
    if n < 0:
        raise ValueError("need n >= 0")
    if n < r:
        return 1.0
    p = [1.0] * r                      # p_0 .. p_{r-1}
    w = [(1 - alpha) * alpha ** (k - 1) for k in range(1, r + 1)]
    for m in range(r, n + 1):
        p.append(sum(w[k - 1] * p[m - k] for k in range(1, r + 1)))
    return p[n]


def p_n_closed_r2(alpha: float, n: int) -> float:
    """Two-root closed form of p_n for range 2."""
    if not 0 <= alpha < 1:
        raise ValueError("alpha must lie in [0,1)")
    if n < 1:
        raise ValueError("need n >= 1")
    D = 1 + 2 * alpha - 3 * alpha ** 2
    sD = np.sqrt(D)
    xi1 = (1 - alpha + sD) / 2
    xi2 = (1 - alpha - sD) / 2
    a = (1 + alpha) / sD
    return float(0.5 * ((1 + a) * xi1 ** n + (1 - a) * xi2 ** n))


def p_n_dp(profile: RateProfile, r: int, n: int, t: float) -> float:
    """Exact non-homogeneous p_n by dynamic programming over the trailing
    vacant-run length (states 0..r-1, absorbing at r)."""
    if n < 0:
        raise ValueError("need n >= 0")
    if n < r:
        return 1.0
    q = np.exp(-profile.rates(1, n + 1) * t)   # per-site vacancy
    state = np.zeros(r)
    state[0] = 1.0
    for x in range(n):
        occupied_mass = float(np.sum(state)) * (1.0 - q[x])
        new = np.zeros(r)
        new[0] = occupied_mass
        new[1:] = state[:-1] * q[x]
        state = new
    return float(np.sum(state))


@lru_cache(maxsize=32)
def _enumeration_table(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Per occupancy pattern m in 0..2^n-1: (vacancy indicators as a float
    (2^n, n) matrix, longest vacant run as an int (2^n,) vector)."""
    masks = np.arange(1 << n, dtype=np.uint32)
    vacant = ((masks[:, None] >> np.arange(n, dtype=np.uint32)) & 1) == 0
    run = np.zeros(1 << n, dtype=np.int64)
    best = np.zeros(1 << n, dtype=np.int64)
    for x in range(n):
        run = np.where(vacant[:, x], run + 1, 0)
        np.maximum(best, run, out=best)
    return vacant.astype(np.float64), best


def p_n_bruteforce(profile: RateProfile, r: int, n: int, t: float) -> float:
    """Ground-truth p_n by enumerating all 2^n occupancy patterns."""
    if n > 20:
        raise ValueError("brute force limited to n <= 20")
    if n < 0:
        raise ValueError("need n >= 0")
    if n < r:
        return 1.0
    q = np.exp(-profile.rates(1, n + 1) * t)
    vacant, max_run = _enumeration_table(n)
    log_prob = vacant @ (np.log(q) - np.log1p(-q)) + np.log1p(-q).sum()
    return float(np.exp(log_prob[max_run < r]).sum())


def char_root(alpha: float, r: int) -> float:
    """Largest positive root of the run-length characteristic polynomial
    xi^r - sum_k (1-alpha) alpha^{r-1-k} xi^k, located in (0, 1]."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0,1)")
    if r < 1:
        raise ValueError("need r >= 1")
    if r == 1:
        return 1.0 - alpha

    ks = np.arange(r)

    def g(xi):
        return xi ** r - np.sum((1 - alpha) * alpha ** (r - 1 - ks) * xi ** ks)

    return float(brentq(g, 1e-12, 1.0, xtol=1e-13, rtol=1e-15, maxiter=200))


def homog_threshold(n: float, r: int) -> float:
    """Critical time scale log(n)/r of the homogeneous model."""
    if n < 2:
        raise ValueError("need n >= 2")
    return float(np.log(n) / r)


# ---------------------------------------------------------------------------
# continuous model
# ---------------------------------------------------------------------------

def green_laplace_cont(lambda_arg: float, t: float) -> float:
    """Laplace transform E exp(-lambda * N_green(t)) of the continuous
    green reach."""
    if t <= 0:
        raise ValueError("need t > 0")
    if lambda_arg < 0:
        raise ValueError("need lambda_arg >= 0")
    lam = lambda_arg
    return float((lam + t) * np.exp(-t) / (lam + t * np.exp(-lam - t)))


def green_moments_cont(t: float) -> tuple[float, float]:
    """(mean, variance) of the continuous green reach at time t."""
    if t <= 0:
        raise ValueError("need t > 0")
    mean = (np.exp(t) - 1 - t) / t
    var = (np.exp(2 * t) - 1 - 2 * t * np.exp(t)) / t ** 2
    return float(mean), float(var)
