"""Property-based checks of the geometric and likelihood invariants."""

import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st

from radloc.geometry import (
    SensorArray,
    barycentric,
    closer_pair_exists,
    contains_open,
    count_closer,
    from_barycentric,
    random_array,
)
from radloc.harness import solve_noise_for_snr
from radloc.likelihood import LikelihoodContext, concentrated_gradient, intensity_mle, profit
from radloc.model import Measurement, SourceParams, noise_free_measurement, snr_db

dims = st.sampled_from([1, 2, 3])
seeds = st.integers(0, 2**32 - 1)


def weights(rng, n, floor=0.02):
    while True:
        w = rng.dirichlet(np.ones(n))
        if w.min() > floor:
            return w


def setup(seed, dim):
    rng = np.random.default_rng(seed)
    arr = random_array(dim, rng)
    return rng, arr


@given(seeds, dims)
def test_separating_sensor_exists(seed, dim):
    # for two distinct interior points some sensor is strictly closer to each
    rng, arr = setup(seed, dim)
    y_star = weights(rng, dim + 1) @ arr.sensors
    y = weights(rng, dim + 1) @ arr.sensors
    assume(np.linalg.norm(y - y_star) > 1e-6 * arr.diameter)
    assert closer_pair_exists(arr, y, y_star)
    assert count_closer(arr, y, y_star) >= 1
    assert count_closer(arr, y_star, y) >= 1


@given(seeds, dims)
def test_barycentric_round_trip(seed, dim):
    rng, arr = setup(seed, dim)
    p = rng.uniform(-100, 300, size=dim)
    w = barycentric(arr, p)
    assert abs(w.sum() - 1.0) < 1e-12
    np.testing.assert_allclose(from_barycentric(arr, w), p, atol=1e-9)
    assert contains_open(arr, p) == bool(w.min() > 1e-9)


@given(seeds, dims, st.floats(0.01, 100.0))
def test_intensity_estimate_is_linear_in_counts(seed, dim, c):
    rng, arr = setup(seed, dim)
    counts = rng.poisson(500, size=dim + 1).astype(float) + 1
    y = weights(rng, dim + 1) @ arr.sensors
    a = intensity_mle(LikelihoodContext(arr, 0.005, Measurement(counts)), y)
    b = intensity_mle(LikelihoodContext(arr, 0.005, Measurement(c * counts)), y)
    assert abs(b / a - c) < 1e-12 * c


@given(seeds, dims)
def test_sensor_order_does_not_matter(seed, dim):
    rng, arr = setup(seed, dim)
    counts = rng.poisson(800, size=dim + 1).astype(float) + 1
    perm = rng.permutation(dim + 1)
    other = SensorArray(arr.sensors[perm])
    y = weights(rng, dim + 1) @ arr.sensors
    a = LikelihoodContext(arr, 0.003, Measurement(counts))
    b = LikelihoodContext(other, 0.003, Measurement(counts[perm]))
    assert abs(profit(a, y) - profit(b, y)) <= 1e-10 * abs(profit(a, y))
    ga, gb = concentrated_gradient(a, y), concentrated_gradient(b, y)
    assert np.linalg.norm(ga - gb) <= 1e-9 * max(np.linalg.norm(ga), 1.0)


@given(seeds, dims)
def test_truth_is_stationary_without_noise(seed, dim):
    rng, arr = setup(seed, dim)
    src = SourceParams(weights(rng, dim + 1, 0.05) @ arr.sensors, 5e7, rng.uniform(0, 0.01))
    ctx = LikelihoodContext(arr, src.attenuation, noise_free_measurement(src, arr))
    assert abs(intensity_mle(ctx, src.location) / src.intensity - 1) < 1e-12
    g = concentrated_gradient(ctx, src.location)
    assert np.linalg.norm(g) * arr.diameter < 1e-9 * ctx.measurement.total


@given(seeds, dims, st.floats(-20.0, 40.0))
def test_snr_solver_round_trip(seed, dim, target):
    rng, arr = setup(seed, dim)
    src = SourceParams(weights(rng, dim + 1) @ arr.sensors, rng.uniform(1e3, 1e8), 0.0068)
    noise = solve_noise_for_snr(arr, src, target)
    assert abs(snr_db(src, arr, noise) - target) < 1e-9
    # scaling the intensity by 10 raises the SNR by 10 dB at fixed noise
    louder = SourceParams(src.location, 10 * src.intensity, src.attenuation)
    assert abs(snr_db(louder, arr, noise) - target - 10.0) < 1e-9


@given(seeds, dims)
def test_profit_is_maximal_at_truth_among_samples(seed, dim):
    rng, arr = setup(seed, dim)
    src = SourceParams(weights(rng, dim + 1, 0.05) @ arr.sensors, 5e7, rng.uniform(0, 0.01))
    ctx = LikelihoodContext(arr, src.attenuation, noise_free_measurement(src, arr))
    best = profit(ctx, src.location)
    for _ in range(20):
        y = weights(rng, dim + 1) @ arr.sensors
        assert profit(ctx, y) <= best + 1e-9 * abs(best)
