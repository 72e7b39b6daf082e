"""Rate profiles and the shared noise field."""

import numpy as np
import pytest

from firesim.model import ModelConfig, NoiseField, RateProfile


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

def test_constant_profile():
    prof = RateProfile.constant(2.0)
    assert prof.rate_at(0) == 2.0
    assert np.array_equal(prof.rates(1, 5), np.full(4, 2.0))
    assert prof.c1 == prof.c2 == 2.0


def test_explicit_profile_values():
    prof = RateProfile.explicit((1.0, 0.5, 1.5), 0.5, 1.5)
    assert prof.rate_at(1) == 0.5
    assert np.array_equal(prof.rates(0, 3), np.array([1.0, 0.5, 1.5]))


def test_explicit_out_of_range_rejected():
    with pytest.raises(ValueError):
        RateProfile.explicit((1.0, 2.0), 0.5, 1.5)


def test_nonpositive_c1_rejected():
    with pytest.raises(ValueError):
        RateProfile.constant(0.0)
    with pytest.raises(ValueError):
        RateProfile.explicit((0.5,), 0.0, 1.0)


def test_periodic_profile_wraps():
    prof = RateProfile.periodic((0.7, 1.3), 0.7, 1.3)
    assert prof.rate_at(0) == prof.rate_at(2) == 0.7
    assert prof.rate_at(1) == prof.rate_at(7) == 1.3


def test_iid_uniform_profile_deterministic_and_bounded():
    prof = RateProfile.iid_uniform(0.5, 1.5, seed=4)
    vals = prof.rates(0, 1000)
    assert np.all((vals >= 0.5) & (vals <= 1.5))
    assert np.array_equal(vals, prof.rates(0, 1000))
    # different profile seed, different rates
    assert not np.array_equal(vals, RateProfile.iid_uniform(0.5, 1.5, 5).rates(0, 1000))


def test_iid_uniform_prefix_stability():
    prof = RateProfile.iid_uniform(0.5, 1.5, seed=4)
    assert np.array_equal(prof.rates(0, 10), prof.rates(0, 1000)[:10])


def test_model_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(space="discrete", r=0)
    with pytest.raises(ValueError):
        ModelConfig(space="nowhere", r=1)
    cfg = ModelConfig(space="discrete", r=2)
    assert cfg.profile.kind == "constant"


# ---------------------------------------------------------------------------
# discrete noise field
# ---------------------------------------------------------------------------

def make_noise(seed=11, lam=1.0, r=1):
    cfg = ModelConfig(space="discrete", r=r, profile=RateProfile.constant(lam))
    return NoiseField(seed, cfg), cfg


def test_arrivals_sorted_and_stable():
    noise, _ = make_noise()
    a1 = noise.arrivals_before(3, 10.0)
    a2 = noise.arrivals_before(3, 10.0)
    assert np.array_equal(a1, a2)
    assert np.all(np.diff(a1) > 0)
    assert np.all(a1 <= 10.0)
    # extending the horizon keeps the prefix
    a3 = noise.arrivals_before(3, 20.0)
    assert np.array_equal(a3[: len(a1)], a1)


def test_poisson_counts_mean():
    noise, _ = make_noise(seed=1, lam=1.0)
    counts = [len(noise.arrivals_before(x, 5.0)) for x in range(1, 2001)]
    mean = np.mean(counts)
    assert abs(mean - 5.0) < 3 * np.sqrt(5.0 / 2000)


def test_rate_scaling_duality():
    """Arrivals at rate lam are unit-rate arrivals divided by lam, site-wise."""
    n1, _ = make_noise(seed=9, lam=1.0)
    n2, _ = make_noise(seed=9, lam=2.0)
    a1 = n1.arrivals_before(4, 6.0)
    a2 = n2.arrivals_before(4, 3.0)
    assert np.allclose(a1 / 2.0, a2)


def test_next_arrival_after():
    noise, _ = make_noise()
    t0 = noise.next_arrival_after(1, 0.0)
    arr = noise.arrivals_before(1, t0 + 1.0)
    assert t0 == arr[0]
    t1 = noise.next_arrival_after(1, t0)
    assert t1 > t0


def test_first_arrivals_vector_matches_scalar():
    noise, _ = make_noise(seed=2)
    vec = noise.first_arrivals(1, 50)
    scal = np.array([noise.next_arrival_after(x, 0.0) for x in range(1, 50)])
    assert np.allclose(vec, scal)


def test_next_arrivals_after_vector_matches_scalar():
    noise, _ = make_noise(seed=3)
    t = 2.5
    vec = noise.next_arrivals_after(1, 40, t)
    scal = np.array([noise.next_arrival_after(x, t) for x in range(1, 40)])
    assert np.allclose(vec, scal)


def test_exponential_first_arrival_distribution():
    cfg = ModelConfig(space="discrete", r=1, profile=RateProfile.constant(1.0))
    noise = NoiseField(77, cfg)
    firsts = noise.first_arrivals(1, 20_001)
    assert abs(firsts.mean() - 1.0) < 3 / np.sqrt(len(firsts))


# ---------------------------------------------------------------------------
# continuous noise field
# ---------------------------------------------------------------------------

def test_points_in_stable_and_bounded():
    cfg = ModelConfig(space="continuous", r=1)
    noise = NoiseField(5, cfg)
    pts = noise.points_in(0.0, 10.0, 0.0, 4.0)
    assert np.array_equal(pts, noise.points_in(0.0, 10.0, 0.0, 4.0))
    assert np.all((pts[:, 0] >= 0) & (pts[:, 0] < 10.0))
    assert np.all((pts[:, 1] >= 0) & (pts[:, 1] < 4.0))


def test_points_in_restriction_consistency():
    cfg = ModelConfig(space="continuous", r=1)
    noise = NoiseField(6, cfg)
    big = noise.points_in(0.0, 8.0, 0.0, 8.0)
    small = noise.points_in(2.0, 5.0, 1.0, 3.0)
    mask = ((big[:, 0] >= 2.0) & (big[:, 0] < 5.0)
            & (big[:, 1] >= 1.0) & (big[:, 1] < 3.0))
    sub = big[mask]
    assert np.array_equal(np.sort(sub, axis=0), np.sort(small, axis=0))


def test_points_in_poisson_intensity():
    cfg = ModelConfig(space="continuous", r=1, intensity=1.0)
    counts = [len(NoiseField(s, cfg).points_in(0.0, 20.0, 0.0, 5.0))
              for s in range(200)]
    mean = np.mean(counts)
    assert abs(mean - 100.0) < 3 * np.sqrt(100.0 / 200)
