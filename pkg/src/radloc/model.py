"""Emission and measurement model.

A point source of intensity A at y* produces mean count rate

    lambda_i = A exp(-alpha d_i) / d_i**2,   d_i = |x_i - y*|

at sensor i.  A measured count is Poisson with mean lambda_i + w_i, where
w_i is the background mean.  Signal and background are independent Poisson
processes, so their sum is one Poisson variate with the summed mean; that is
how counts are drawn.

Distances are in arbitrary but consistent units; A carries units of
counts x distance**2 and alpha of 1/distance.
"""

from dataclasses import dataclass

import numpy as np

from radloc._backend import kernel
from radloc.errors import ConfigurationError, ContractError, SingularityError
from radloc.geometry import as_point

# largest mean the sampler accepts; beyond this counts lose integer precision
MAX_POISSON_MEAN = float(2**53)


@dataclass(frozen=True, eq=False)
class SourceParams:
    location: np.ndarray
    intensity: float
    attenuation: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "location", as_point(self.location))
        if not (np.isfinite(self.intensity) and self.intensity > 0):
            raise ContractError(f"intensity must be positive, got {self.intensity}")
        if not (np.isfinite(self.attenuation) and self.attenuation >= 0):
            raise ContractError(f"attenuation must be nonnegative, got {self.attenuation}")
        object.__setattr__(self, "intensity", float(self.intensity))
        object.__setattr__(self, "attenuation", float(self.attenuation))

    @property
    def dim(self):
        return self.location.shape[0]

    def check_against(self, array):
        """Raise unless the source lives in the array's space and off its sensors."""
        if self.dim != array.dim:
            raise ContractError(f"source is {self.dim}-D but the array is {array.dim}-D")
        if np.any(np.all(array.sensors == self.location, axis=1)):
            raise SingularityError("source coincides with a sensor position")


@dataclass(frozen=True, eq=False)
class NoiseParams:
    """Per-sensor background mean counts."""

    background_means: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.background_means, dtype=np.float64))
        if w.ndim != 1 or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ContractError("background means must be finite and nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "background_means", w)

    @classmethod
    def homogeneous(cls, per_sensor, n):
        return cls(np.full(n, float(per_sensor)))

    @classmethod
    def none(cls, n):
        return cls(np.zeros(n))

    @property
    def total(self):
        return float(self.background_means.sum())


@dataclass(frozen=True, eq=False)
class Measurement:
    """Counts recorded by the N+1 sensors.

    Sampled measurements are integer valued.  Real-valued counts are accepted
    so that the noise-free (population) objective can be evaluated with
    s_i equal to the mean rates.
    """

    counts: np.ndarray

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.counts, dtype=np.float64))
        if s.ndim != 1 or not np.all(np.isfinite(s)) or np.any(s < 0):
            raise ContractError("counts must be finite and nonnegative")
        s.setflags(write=False)
        object.__setattr__(self, "counts", s)

    def __len__(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return float(self.counts.sum())

    @property
    def is_integral(self):
        return bool(np.all(self.counts == np.round(self.counts)))

    def tolist(self):
        if self.is_integral:
            return [int(c) for c in self.counts]
        return [float(c) for c in self.counts]


def rate_profile(distance, attenuation):
    """exp(-alpha d) / d**2, the mean rate per unit intensity."""
    d = np.asarray(distance, dtype=np.float64)
    return np.exp(-attenuation * d) / (d * d)


def mean_rate(source, sensor):
    """Mean count rate at ``sensor`` from ``source``."""
    sensor = as_point(sensor, source.dim)
    d = float(np.linalg.norm(sensor - source.location))
    if d == 0.0:
        raise SingularityError("sensor coincides with the source")
    return float(source.intensity * rate_profile(d, source.attenuation))


def mean_rates(source, array):
    """Vector of noise-free mean rates, one per sensor."""
    source.check_against(array)
    d = np.linalg.norm(array.sensors - source.location, axis=1)
    return source.intensity * rate_profile(d, source.attenuation)


def mean_rate_gradient_d(source, d):
    """Derivative of the mean rate with respect to distance.

    d/dd [A exp(-alpha d)/d^2] = -lambda (alpha + 2/d); strictly negative.
    """
    d = float(d)
    if not d > 0:
        raise ContractError(f"distance must be positive, got {d}")
    lam = source.intensity * np.exp(-source.attenuation * d) / (d * d)
    return float(-lam * (source.attenuation + 2.0 / d))


def noise_free_measurement(source, array, rounded=False):
    """Measurement equal to the mean rates (optionally rounded to integers)."""
    lam = mean_rates(source, array)
    return Measurement(np.round(lam) if rounded else lam)


def measurement_means(source, array, noise):
    lam = mean_rates(source, array)
    w = noise.background_means
    if w.shape[0] != lam.shape[0]:
        raise ContractError(f"{w.shape[0]} background means for {lam.shape[0]} sensors")
    means = lam + w
    if np.any(means > MAX_POISSON_MEAN):
        raise ConfigurationError(
            f"mean count {means.max():.3g} exceeds the sampler limit 2**53"
        )
    return np.ascontiguousarray(means)


def sample_measurement(source, array, noise, rng):
    """Draw one Measurement: count_i ~ Poisson(lambda_i + w_i)."""
    means = measurement_means(source, array, noise)
    out = np.empty_like(means)
    kernel.poisson_fill(rng, means, out)
    return Measurement(out)


def signal_sum(source, array):
    """Sum of exp(-alpha d_i)/d_i**2 times A: total noise-free rate."""
    return float(mean_rates(source, array).sum())


def snr_db(source, array, noise):
    """Total signal over total background, in decibels."""
    total_w = noise.total
    if total_w <= 0:
        raise ConfigurationError("zero background: SNR is infinite")
    return float(10.0 * np.log10(signal_sum(source, array) / total_w))
