"""Poisson log-likelihood, the closed-form intensity estimate and the
concentrated (profile) objective with its gradient.

With g_i(y) = exp(-alpha d_i)/d_i**2 and lambda_i = A g_i(y):

    L(A, y) = sum_i s_i log lambda_i - lambda_i          (log s_i! dropped)
    A_hat(y) = sum_i s_i / sum_i g_i(y)                    (dL/dA = 0)
    J(y) = L(A_hat(y), y)

dL/dy = sum_i xi_i (x_i - y) with
xi_i = (s_i/g_i - A)(alpha + 2/d_i) g_i/d_i = (s_i - lambda_i)(alpha + 2/d_i)/d_i.
Because dL/dA vanishes at A_hat, dJ/dy equals dL/dy evaluated at A = A_hat(y).
"""

from dataclasses import dataclass

import numpy as np

from radloc.errors import ContractError, DegenerateMeasurementError, SingularityError
from radloc.geometry import SensorArray, as_point
from radloc.model import Measurement, rate_profile


@dataclass(frozen=True, eq=False)
class LikelihoodContext:
    """Fixed data of the likelihood: sensors, known attenuation, counts."""

    array: SensorArray
    attenuation: float
    measurement: Measurement

    def __post_init__(self):
        if not isinstance(self.measurement, Measurement):
            object.__setattr__(self, "measurement", Measurement(self.measurement))
        if len(self.measurement) != len(self.array):
            raise ContractError(
                f"{len(self.measurement)} counts for {len(self.array)} sensors"
            )
        if not (np.isfinite(self.attenuation) and self.attenuation >= 0):
            raise ContractError("attenuation must be nonnegative")
        object.__setattr__(self, "attenuation", float(self.attenuation))

    @property
    def counts(self):
        return self.measurement.counts


def _distances(ctx, y):
    y = as_point(y, ctx.array.dim)
    diff = ctx.array.sensors - y
    d = np.sqrt(np.sum(diff * diff, axis=1))
    if np.any(d <= ctx.array.guard_radius):
        raise SingularityError(f"y={y} is within the guard radius of a sensor")
    return y, diff, d


def _poisson_terms(s, lam):
    # s log lam - lam, with 0 log 0 = 0 and s > 0, lam = 0 giving -inf
    with np.errstate(divide="ignore"):
        logs = np.where(s > 0, s * np.log(np.where(s > 0, lam, 1.0)), 0.0)
    return float(np.sum(logs - lam))


def log_likelihood(ctx, A, y):
    """L(A, y) = sum_i s_i log lambda_i - lambda_i."""
    if not A > 0:
        raise ContractError(f"intensity must be positive, got {A}")
    _, _, d = _distances(ctx, y)
    lam = A * rate_profile(d, ctx.attenuation)
    return _poisson_terms(ctx.counts, lam)


def intensity_mle(ctx, y):
    """A_hat(y) = sum s_i / sum exp(-alpha d_i)/d_i**2."""
    total = ctx.measurement.total
    if total <= 0:
        raise DegenerateMeasurementError("all counts are zero; intensity estimate undefined")
    _, _, d = _distances(ctx, y)
    return float(total / rate_profile(d, ctx.attenuation).sum())


def profit(ctx, y):
    """Concentrated log-likelihood J(y) = L(A_hat(y), y)."""
    return log_likelihood(ctx, intensity_mle(ctx, y), y)


def xi_coefficients(ctx, y, A):
    """Per-sensor weights xi_i so that dL/dy = sum_i xi_i (x_i - y)."""
    _, _, d = _distances(ctx, y)
    g = rate_profile(d, ctx.attenuation)
    return (ctx.counts / g - A) * (ctx.attenuation + 2.0 / d) * g / d


def profit_gradient(ctx, y, A):
    """dL/dy at intensity ``A``; pass A = A_hat(y) for the gradient of J."""
    if not A > 0:
        raise ContractError(f"intensity must be positive, got {A}")
    _, diff, _ = _distances(ctx, y)
    return xi_coefficients(ctx, y, A) @ diff


def profit_gradient_residual(ctx, y, A):
    """Same gradient written as sum_i (s_i - lambda_i)(alpha + 2/d_i)(x_i - y)/d_i."""
    if not A > 0:
        raise ContractError(f"intensity must be positive, got {A}")
    _, diff, d = _distances(ctx, y)
    lam = A * rate_profile(d, ctx.attenuation)
    w = (ctx.counts - lam) * (ctx.attenuation + 2.0 / d) / d
    return w @ diff


def concentrated_gradient(ctx, y):
    """Gradient of J at y."""
    return profit_gradient(ctx, y, intensity_mle(ctx, y))


def profit_many(ctx, points):
    """J at each row of an (m, N) array of points.

    Rows inside the guard radius of a sensor get NaN.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, ctx.array.dim)
    total = ctx.measurement.total
    if total <= 0:
        raise DegenerateMeasurementError("all counts are zero; intensity estimate undefined")
    diff = ctx.array.sensors[None, :, :] - pts[:, None, :]
    d = np.sqrt(np.sum(diff * diff, axis=2))
    near = np.any(d <= ctx.array.guard_radius, axis=1)
    d = np.where(near[:, None], 1.0, d)
    g = rate_profile(d, ctx.attenuation)
    lam = (total / g.sum(axis=1))[:, None] * g
    s = ctx.counts[None, :]
    with np.errstate(divide="ignore"):
        logs = np.where(s > 0, s * np.log(np.where(s > 0, lam, 1.0)), 0.0)
    J = np.sum(logs - lam, axis=1)
    J[near] = np.nan
    return J


def concentrated_gradient_many(ctx, points):
    """Gradient of J at each row of an (m, N) array of points (NaN rows near sensors)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, ctx.array.dim)
    diff = ctx.array.sensors[None, :, :] - pts[:, None, :]
    d = np.sqrt(np.sum(diff * diff, axis=2))
    near = np.any(d <= ctx.array.guard_radius, axis=1)
    d = np.where(near[:, None], 1.0, d)
    g = rate_profile(d, ctx.attenuation)
    lam = (ctx.measurement.total / g.sum(axis=1))[:, None] * g
    w = (ctx.counts[None, :] - lam) * (ctx.attenuation + 2.0 / d) / d
    grad = np.einsum("mi,mik->mk", w, diff)
    grad[near] = np.nan
    return grad
